#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <vector>

#include "softland/errors.hpp"

namespace softland {

// Two-point BVP solver: 3-stage Lobatto IIIA collocation (the 4th-order MIRK
// "Simpson with Hermite midpoint" scheme), damped Newton on the collocation
// system, and defect-driven mesh refinement. Works on internally scaled
// variables and on time normalized to [0, 1].
struct BvpOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int max_nodes = 10000;
  int max_newton = 60;
  double damping_floor = 1.0 / 64.0;
  int max_refinements = 16;
  bool refine_mesh = true;
  bool verbose = false;
  Eigen::VectorXd y_scale;   // per-component magnitude; empty = ones
  Eigen::VectorXd bc_scale;  // per-residual magnitude; empty = ones
};

struct BvpSolution {
  Eigen::VectorXd t;   // mesh, original time
  Eigen::MatrixXd y;   // dim x n_nodes
  Eigen::MatrixXd yp;  // rhs at the nodes (original scaling)
  double max_defect = 0.0;       // scaled defect estimate after acceptance
  double max_bc_residual = 0.0;  // scaled
  int newton_iterations = 0;
  std::vector<int> mesh_history;
  bool converged = false;
};

using BvpRhs = std::function<void(double t, const double* y, double* f)>;
using BvpBc = std::function<void(const double* y0, const double* yf, double* res)>;

class CollocationSolver {
 public:
  CollocationSolver(int dim, BvpRhs rhs, BvpBc bc, BvpOptions opts)
      : dim_(dim), rhs_(std::move(rhs)), bc_(std::move(bc)), opts_(std::move(opts)) {
    if (opts_.y_scale.size() == 0) opts_.y_scale = Eigen::VectorXd::Ones(dim_);
    if (opts_.bc_scale.size() == 0) opts_.bc_scale = Eigen::VectorXd::Ones(dim_);
  }

  // mesh: strictly increasing times; guess: dim x mesh.size().
  BvpSolution solve(const Eigen::VectorXd& mesh, const Eigen::MatrixXd& guess) {
    t0_ = mesh(0);
    tspan_ = mesh(mesh.size() - 1) - t0_;
    Eigen::VectorXd tau(mesh.size());
    for (int k = 0; k < mesh.size(); ++k) tau(k) = (mesh(k) - t0_) / tspan_;

    Eigen::MatrixXd yhat = guess;
    for (int k = 0; k < yhat.cols(); ++k)
      yhat.col(k) = guess.col(k).cwiseQuotient(opts_.y_scale);

    BvpSolution sol;
    int total_newton = 0;
    int rescues = 0;
    for (int pass = 0; pass <= opts_.max_refinements; ++pass) {
      sol.mesh_history.push_back(static_cast<int>(tau.size()));
      try {
        total_newton += newton(tau, yhat);
      } catch (const NoConvergence&) {
        // A stall far from any discrete solution usually means the current
        // mesh cannot represent one; split the worst-residual intervals and
        // retry before giving up.
        if (!opts_.refine_mesh || ++rescues > 4) throw;
        refine_by_residual(tau, yhat);
        if (static_cast<int>(tau.size()) > opts_.max_nodes)
          throw MeshLimitExceeded("collocation: mesh exceeds max_nodes");
        --pass;
        continue;
      }

      if (!opts_.refine_mesh) break;
      Eigen::VectorXd defect;
      const double worst = defect_estimate(tau, yhat, defect);
      if (worst <= 1.0) break;
      if (pass == opts_.max_refinements)
        throw NoConvergence("collocation: defect not met within refinement budget", worst);
      refine(tau, yhat, defect);
      if (static_cast<int>(tau.size()) > opts_.max_nodes)
        throw MeshLimitExceeded("collocation: mesh exceeds max_nodes");
    }

    sol.newton_iterations = total_newton;
    package(tau, yhat, sol);
    return sol;
  }

 private:
  // Scaled, time-normalized rhs.
  void frhs(double tau, const double* yhat, double* fhat) const {
    std::vector<double> y(dim_), f(dim_);
    for (int j = 0; j < dim_; ++j) y[j] = yhat[j] * opts_.y_scale(j);
    rhs_(t0_ + tau * tspan_, y.data(), f.data());
    for (int j = 0; j < dim_; ++j) fhat[j] = f[j] * tspan_ / opts_.y_scale(j);
  }

  void fbc(const double* y0hat, const double* yfhat, double* res) const {
    std::vector<double> y0(dim_), yf(dim_), r(dim_);
    for (int j = 0; j < dim_; ++j) {
      y0[j] = y0hat[j] * opts_.y_scale(j);
      yf[j] = yfhat[j] * opts_.y_scale(j);
    }
    bc_(y0.data(), yf.data(), r.data());
    for (int j = 0; j < dim_; ++j) res[j] = r[j] / opts_.bc_scale(j);
  }

  // Interval residual of the condensed Lobatto IIIA scheme:
  //   y_m = (y_i + y_{i+1})/2 + h/8 (f_i - f_{i+1})
  //   r   = y_{i+1} - y_i - h/6 (f_i + 4 f_m + f_{i+1}).
  void interval_residual(double ta, double tb, const double* ya, const double* yb,
                         const double* fa, const double* fb, double* r) const {
    const double h = tb - ta;
    std::vector<double> ym(dim_), fm(dim_);
    for (int j = 0; j < dim_; ++j) ym[j] = 0.5 * (ya[j] + yb[j]) + h / 8.0 * (fa[j] - fb[j]);
    frhs(0.5 * (ta + tb), ym.data(), fm.data());
    for (int j = 0; j < dim_; ++j)
      r[j] = yb[j] - ya[j] - h / 6.0 * (fa[j] + 4.0 * fm[j] + fb[j]);
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& tau, const Eigen::MatrixXd& y,
                           Eigen::MatrixXd& fnodes) const {
    const int n = static_cast<int>(tau.size());
    fnodes.resize(dim_, n);
    for (int k = 0; k < n; ++k) frhs(tau(k), y.col(k).data(), fnodes.col(k).data());
    Eigen::VectorXd r(dim_ * n);
    for (int k = 0; k + 1 < n; ++k)
      interval_residual(tau(k), tau(k + 1), y.col(k).data(), y.col(k + 1).data(),
                        fnodes.col(k).data(), fnodes.col(k + 1).data(), r.data() + dim_ * k);
    fbc(y.col(0).data(), y.col(n - 1).data(), r.data() + dim_ * (n - 1));
    return r;
  }

  static double safe_norm(const Eigen::VectorXd& r) {
    const double n = r.lpNorm<Eigen::Infinity>();
    return std::isfinite(n) ? n : std::numeric_limits<double>::infinity();
  }

  int newton(const Eigen::VectorXd& tau, Eigen::MatrixXd& y) {
    const int n = static_cast<int>(tau.size());
    const int m = dim_ * n;
    Eigen::MatrixXd fnodes;
    Eigen::VectorXd r = residual(tau, y, fnodes);
    double rnorm = safe_norm(r);
    const double ntol = std::max(1e-13, 0.01 * opts_.abs_tol);

    int iters = 0;
    int stalls = 0;
    // keep the best iterate seen so a stalled Newton hands a sane mesh
    // solution (not a blown-up trial point) to the residual-based rescue
    Eigen::MatrixXd y_best = y;
    double rnorm_best = rnorm;
    const auto bail = [&](const char* msg) -> NoConvergence {
      y = y_best;
      return NoConvergence(msg, rnorm_best);
    };
    while (rnorm > ntol && iters < opts_.max_newton) {
      Eigen::SparseMatrix<double> jac = jacobian(tau, y, fnodes);
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(jac);
      if (lu.info() != Eigen::Success)
        throw bail("collocation: singular Newton matrix");
      Eigen::VectorXd step = lu.solve(-r);

      double lambda = 1.0;
      bool accepted = false;
      Eigen::MatrixXd ytrial;
      Eigen::VectorXd rtrial;
      Eigen::MatrixXd ftrial;
      double tn_floor = std::numeric_limits<double>::infinity();
      while (lambda >= opts_.damping_floor) {
        ytrial = y + lambda * Eigen::Map<const Eigen::MatrixXd>(step.data(), dim_, n);
        rtrial = residual(tau, ytrial, ftrial);
        const double tn = safe_norm(rtrial);
        if (tn < (1.0 - 1e-4 * lambda) * rnorm) {
          y = ytrial;
          r = rtrial;
          fnodes = ftrial;
          rnorm = tn;
          accepted = true;
          break;
        }
        tn_floor = tn;
        lambda *= 0.5;
      }
      ++iters;
      if (!accepted) {
        if (++stalls >= 3)
          throw bail("collocation: Newton stalled");
        // take the floor step only if it stays inside the basin; a step that
        // inflates the residual by orders of magnitude wrecks the iterate
        if (tn_floor < 10.0 * rnorm) {
          y = ytrial;
          r = rtrial;
          fnodes = ftrial;
          rnorm = tn_floor;
        }
      } else {
        stalls = 0;
        if (rnorm < rnorm_best) {
          rnorm_best = rnorm;
          y_best = y;
        }
      }
      if (step.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, y.lpNorm<Eigen::Infinity>()))
        break;
      if (opts_.verbose) {
        int worst = 0;
        for (int q = 0; q < r.size(); ++q)
          if (std::abs(r(q)) > std::abs(r(worst))) worst = q;
        std::fprintf(stderr, "newton iter %d  |r| = %.3e  (row %d = node %d comp %d, step %.3g)\n",
                     iters, rnorm, worst, worst / dim_, worst % dim_, lambda);
      }
    }
    if (rnorm > 1e-9)
      throw bail("collocation: Newton did not converge");
    (void)m;
    return iters;
  }

  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& tau, const Eigen::MatrixXd& y,
                                       const Eigen::MatrixXd& fnodes) const {
    const int n = static_cast<int>(tau.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(4 * dim_ * dim_ * n));
    const double sqeps = std::sqrt(std::numeric_limits<double>::epsilon());

    std::vector<double> base(dim_), pert(dim_);
    for (int k = 0; k + 1 < n; ++k) {
      const double ta = tau(k), tb = tau(k + 1);
      interval_residual(ta, tb, y.col(k).data(), y.col(k + 1).data(), fnodes.col(k).data(),
                        fnodes.col(k + 1).data(), base.data());
      for (int side = 0; side < 2; ++side) {
        const int col0 = dim_ * (k + side);
        for (int j = 0; j < dim_; ++j) {
          Eigen::VectorXd yav = y.col(k), ybv = y.col(k + 1);
          double& entry = side == 0 ? yav(j) : ybv(j);
          const double eps = sqeps * std::max(std::abs(entry), 1e-2);
          entry += eps;
          // recompute the perturbed endpoint rhs, keep the other cached
          std::vector<double> fa(fnodes.col(k).data(), fnodes.col(k).data() + dim_);
          std::vector<double> fb(fnodes.col(k + 1).data(), fnodes.col(k + 1).data() + dim_);
          if (side == 0)
            frhs(ta, yav.data(), fa.data());
          else
            frhs(tb, ybv.data(), fb.data());
          interval_residual(ta, tb, yav.data(), ybv.data(), fa.data(), fb.data(), pert.data());
          for (int row = 0; row < dim_; ++row) {
            const double d = (pert[row] - base[row]) / eps;
            if (d != 0.0) trip.emplace_back(dim_ * k + row, col0 + j, d);
          }
        }
      }
    }

    // boundary rows
    const int row0 = dim_ * (n - 1);
    std::vector<double> rb(dim_), rp(dim_);
    fbc(y.col(0).data(), y.col(n - 1).data(), rb.data());
    for (int side = 0; side < 2; ++side) {
      const int kcol = side == 0 ? 0 : n - 1;
      for (int j = 0; j < dim_; ++j) {
        Eigen::VectorXd yp0 = y.col(0), ypf = y.col(n - 1);
        double& entry = side == 0 ? yp0(j) : ypf(j);
        const double eps = sqeps * std::max(std::abs(entry), 1e-2);
        entry += eps;
        fbc(yp0.data(), ypf.data(), rp.data());
        for (int row = 0; row < dim_; ++row) {
          const double d = (rp[row] - rb[row]) / eps;
          if (d != 0.0) trip.emplace_back(row0 + row, dim_ * kcol + j, d);
        }
      }
    }

    Eigen::SparseMatrix<double> jac(dim_ * n, dim_ * n);
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }

  // Scaled defect of the cubic Hermite interpolant at two off-collocation
  // points per interval.
  double defect_estimate(const Eigen::VectorXd& tau, const Eigen::MatrixXd& y,
                         Eigen::VectorXd& defect) const {
    const int n = static_cast<int>(tau.size());
    Eigen::MatrixXd fnodes(dim_, n);
    for (int k = 0; k < n; ++k) frhs(tau(k), y.col(k).data(), fnodes.col(k).data());

    defect.resize(n - 1);
    double worst = 0.0;
    std::vector<double> ys(dim_), sp(dim_), fs(dim_);
    for (int k = 0; k + 1 < n; ++k) {
      const double h = tau(k + 1) - tau(k);
      double dmax = 0.0;
      for (double s : {0.25, 0.75}) {
        const double s2 = s * s, s3 = s2 * s;
        for (int j = 0; j < dim_; ++j) {
          const double y0 = y(j, k), y1 = y(j, k + 1);
          const double d0 = fnodes(j, k), d1 = fnodes(j, k + 1);
          ys[j] = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 +
                  (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
          sp[j] = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 +
                   (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * d1) /
                  h;
        }
        frhs(tau(k) + s * h, ys.data(), fs.data());
        for (int j = 0; j < dim_; ++j) {
          const double denom =
              opts_.abs_tol + opts_.rel_tol * std::max({std::abs(ys[j]), h * std::abs(fs[j]), 1.0});
          dmax = std::max(dmax, h * std::abs(sp[j] - fs[j]) / denom);
        }
      }
      defect(k) = dmax;
      worst = std::max(worst, dmax);
    }
    return worst;
  }

  // Halve every interval whose collocation residual is within an order of
  // magnitude of the worst one (synthetic defect of 16 makes refine() cut an
  // interval exactly in two).
  void refine_by_residual(Eigen::VectorXd& tau, Eigen::MatrixXd& y) const {
    const int n = static_cast<int>(tau.size());
    Eigen::MatrixXd fnodes;
    const Eigen::VectorXd r = residual(tau, y, fnodes);
    Eigen::VectorXd rint(n - 1);
    for (int k = 0; k + 1 < n; ++k)
      rint(k) = r.segment(dim_ * k, dim_).lpNorm<Eigen::Infinity>();
    const double threshold = 0.1 * rint.maxCoeff();
    Eigen::VectorXd defect(n - 1);
    for (int k = 0; k + 1 < n; ++k) defect(k) = rint(k) >= threshold ? 16.0 : 0.0;
    refine(tau, y, defect);
  }

  void refine(Eigen::VectorXd& tau, Eigen::MatrixXd& y, const Eigen::VectorXd& defect) const {
    const int n = static_cast<int>(tau.size());
    Eigen::MatrixXd fnodes(dim_, n);
    for (int k = 0; k < n; ++k) frhs(tau(k), y.col(k).data(), fnodes.col(k).data());

    std::vector<double> newtau;
    std::vector<Eigen::VectorXd> newy;
    newtau.push_back(tau(0));
    newy.push_back(y.col(0));
    for (int k = 0; k + 1 < n; ++k) {
      int parts = 1;
      if (defect(k) > 1.0)
        parts = std::min(3, static_cast<int>(std::ceil(std::pow(defect(k), 0.25))));
      const double h = tau(k + 1) - tau(k);
      for (int piece = 1; piece <= parts; ++piece) {
        const double s = static_cast<double>(piece) / parts;
        const double tq = tau(k) + s * h;
        Eigen::VectorXd yq(dim_);
        if (piece == parts) {
          yq = y.col(k + 1);
        } else {
          const double s2 = s * s, s3 = s2 * s;
          for (int j = 0; j < dim_; ++j)
            yq(j) = (2 * s3 - 3 * s2 + 1) * y(j, k) + (s3 - 2 * s2 + s) * h * fnodes(j, k) +
                    (-2 * s3 + 3 * s2) * y(j, k + 1) + (s3 - s2) * h * fnodes(j, k + 1);
        }
        newtau.push_back(tq);
        newy.push_back(yq);
      }
    }
    tau.resize(static_cast<int>(newtau.size()));
    y.resize(dim_, static_cast<int>(newy.size()));
    for (int k = 0; k < tau.size(); ++k) {
      tau(k) = newtau[static_cast<std::size_t>(k)];
      y.col(k) = newy[static_cast<std::size_t>(k)];
    }
  }

  void package(const Eigen::VectorXd& tau, const Eigen::MatrixXd& yhat, BvpSolution& sol) const {
    const int n = static_cast<int>(tau.size());
    sol.t.resize(n);
    sol.y.resize(dim_, n);
    sol.yp.resize(dim_, n);
    std::vector<double> f(dim_);
    for (int k = 0; k < n; ++k) {
      sol.t(k) = t0_ + tau(k) * tspan_;
      sol.y.col(k) = yhat.col(k).cwiseProduct(opts_.y_scale);
      rhs_(sol.t(k), sol.y.col(k).data(), f.data());
      for (int j = 0; j < dim_; ++j) sol.yp(j, k) = f[j];
    }
    Eigen::VectorXd defect;
    sol.max_defect = defect_estimate(tau, yhat, defect);
    std::vector<double> bres(dim_);
    fbc(yhat.col(0).data(), yhat.col(n - 1).data(), bres.data());
    sol.max_bc_residual = 0.0;
    for (double v : bres) sol.max_bc_residual = std::max(sol.max_bc_residual, std::abs(v));
    sol.converged = true;
  }

  int dim_;
  BvpRhs rhs_;
  BvpBc bc_;
  BvpOptions opts_;
  double t0_ = 0.0;
  double tspan_ = 1.0;
};

}  // namespace softland
