#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "softland/contact.hpp"

using namespace softland;

namespace {

ContactModel gaussian_cm(double mu, double sigma) {
  ContactModel cm;
  cm.mu_z = mu;
  cm.sigma_z = sigma;
  cm.motion_sign = -1;
  cm.z_start = 1.6e-3;
  cm.z_end = 3.99e-4;
  cm.t_f = 3.5e-3;
  return cm;
}

}  // namespace

TEST_CASE("gaussian pdf and cdf reference values", "[contact]") {
  const ContactModel cm = gaussian_cm(0.0, 1.0);
  SECTION("standard normal density at 0 and 1") {
    CHECK(cm.pdf(0.0) == Catch::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
    CHECK(cm.pdf(1.0) == Catch::Approx(std::exp(-0.5) / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  }
  SECTION("cdf anchors: median and three-sigma") {
    CHECK(cm.cdf(0.0) == Catch::Approx(0.5).margin(1e-15));
    CHECK(cm.cdf(3.0) == Catch::Approx(0.9986501019683699).epsilon(1e-12));
    CHECK(cm.cdf(-3.0) == Catch::Approx(1.0 - 0.9986501019683699).epsilon(1e-9));
  }
  SECTION("pdf integrates to the cdf increment") {
    // trapezoid of the pdf over [-1, 2] against cdf(2) - cdf(-1)
    const int n = 20000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double a = -1.0 + 3.0 * k / n, b = -1.0 + 3.0 * (k + 1) / n;
      sum += 0.5 * (cm.pdf(a) + cm.pdf(b)) * (b - a);
    }
    CHECK(sum == Catch::Approx(cm.cdf(2.0) - cm.cdf(-1.0)).epsilon(1e-8));
  }
  SECTION("pdf derivative matches finite differences and the dual overload") {
    for (double z : {-1.5, -0.2, 0.0, 0.7, 2.1}) {
      const double h = 1e-6;
      const double fdv = (cm.pdf(z + h) - cm.pdf(z - h)) / (2.0 * h);
      CHECK(cm.pdf_dz(z) == Catch::Approx(fdv).margin(1e-8));
      const Dual<double> d = cm.pdf(Dual<double>{z, 1.0});
      CHECK(d.a == cm.pdf(z));
      CHECK(d.b == Catch::Approx(cm.pdf_dz(z)).epsilon(1e-14));
    }
  }
}

TEST_CASE("scaled gaussian contact position", "[contact]") {
  const double mu = 3.99e-4, sigma = 2e-5;
  const ContactModel cm = gaussian_cm(mu, sigma);
  CHECK(cm.pdf(mu) == Catch::Approx(1.0 / (sigma * std::sqrt(2.0 * M_PI))).epsilon(1e-14));
  CHECK(cm.cdf(mu) == Catch::Approx(0.5).margin(1e-14));
  CHECK(cm.cdf(mu + 3.0 * sigma) == Catch::Approx(0.9986501019683699).epsilon(1e-12));
  // the stroke ends exactly at the mean contact position, so precisely half
  // of the probability mass is traversed
  CHECK(cm.contact_probability_constant() == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("contact model validation", "[contact]") {
  ContactModel cm = gaussian_cm(3.99e-4, 2e-5);
  CHECK_NOTHROW(cm.validate());
  SECTION("sigma must be positive") {
    cm.sigma_z = 0.0;
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
  }
  SECTION("motion sign must be +-1") {
    cm.motion_sign = 0;
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
  }
  SECTION("horizon must be positive") {
    cm.t_f = 0.0;
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
  }
  SECTION("stroke that never nears the seat has ~zero contact probability") {
    cm.mu_z = 10.0;  // far outside the traversed interval
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
  }
  SECTION("user family requires all three callables") {
    cm.family = ContactModel::PdfFamily::User;
    cm.user_pdf = [](double) { return 1.0; };
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
  }
}

TEST_CASE("user pdf family delegates to the callables", "[contact]") {
  // uniform density on [0, 1e-3]
  ContactModel cm = gaussian_cm(0.0, 0.0);
  cm.family = ContactModel::PdfFamily::User;
  cm.z_start = 1.6e-3;
  cm.z_end = 0.0;
  cm.user_pdf = [](double z) { return (z >= 0.0 && z <= 1e-3) ? 1e3 : 0.0; };
  cm.user_pdf_dz = [](double) { return 0.0; };
  cm.user_cdf = [](double z) { return std::clamp(z / 1e-3, 0.0, 1.0); };
  CHECK_NOTHROW(cm.validate());
  CHECK(cm.pdf(5e-4) == 1e3);
  CHECK(cm.pdf(1.5e-3) == 0.0);
  CHECK(cm.cdf(2.5e-4) == Catch::Approx(0.25));
  CHECK(cm.contact_probability_constant() == Catch::Approx(1.0));
}

TEST_CASE("bounced velocity rules", "[contact]") {
  const ActuatorParams p = testutil::reference_params();
  const ContactModel cm = gaussian_cm(3.99e-4, 2e-5);
  const State s{4.0e-4, -0.3, 4e-6};
  SECTION("worst-case-zero returns zero") {
    BounceConfig bc;
    bc.rule = BounceConfig::Rule::WorstCaseZero;
    CHECK(bounced_velocity(s, 10.0, p, bc, cm.motion_sign) == 0.0);
  }
  SECTION("restitution reflects the incoming velocity") {
    BounceConfig bc;
    bc.rule = BounceConfig::Rule::Restitution;
    bc.restitution_e = 0.4;
    CHECK(bounced_velocity(s, 10.0, p, bc, cm.motion_sign) == Catch::Approx(0.12).epsilon(1e-12));
  }
  SECTION("argmax search lands on v_b = 0 for this device") {
    // the viscous friction -c_f v / m makes the away-from-seat acceleration
    // largest at zero bounced velocity, so the search must agree with the
    // worst-case rule
    BounceConfig bc;
    bc.rule = BounceConfig::Rule::ArgmaxSearch;
    const double vb = bounced_velocity(s, 10.0, p, bc, cm.motion_sign);
    CHECK(std::abs(vb) <= std::abs(s.v) / 400.0 + 1e-15);
    const double a_star = bounce_acceleration<double>(s, vb, 10.0, p);
    const double a_zero = bounce_acceleration<double>(s, 0.0, 10.0, p);
    CHECK(a_star == Catch::Approx(a_zero).margin(1e-9));
  }
}

TEST_CASE("bounce acceleration saturation", "[contact]") {
  SECTION("hard rule keeps only seat-repelling accelerations") {
    // for a making motion (sign -1, closing downward) a positive acceleration
    // throws the armature back off the seat and is the severity to penalize;
    // accelerations that press into the seat saturate to zero
    CHECK(saturate_bounce_accel_hard(5.0, -1) == 5.0);
    CHECK(saturate_bounce_accel_hard(-5.0, -1) == 0.0);
    CHECK(saturate_bounce_accel_hard(-5.0, +1) == -5.0);
    CHECK(saturate_bounce_accel_hard(5.0, +1) == 0.0);
    CHECK(saturate_bounce_accel_hard(0.0, -1) == 0.0);
  }
  SECTION("smooth rule converges to the hard rule as kappa grows") {
    for (double a : {-300.0, -2.0, 2.0, 300.0}) {
      for (int sgn : {-1, 1}) {
        const double hard = saturate_bounce_accel_hard(a, sgn);
        const double smooth = saturate_bounce_accel_smooth(a, sgn, 50.0);
        CHECK(smooth == Catch::Approx(hard).margin(std::log(2.0) / 50.0 + 1e-12));
      }
    }
  }
  SECTION("smooth rule is bounded by the hard rule plus the corner bias") {
    const double kappa = 0.5;
    for (double a = -1e3; a <= 1e3; a += 7.3) {
      const double hard = saturate_bounce_accel_hard(a, -1);
      const double smooth = saturate_bounce_accel_smooth(a, -1, kappa);
      // for a making motion the smooth value can only overshoot the hard one,
      // by at most log(2)/kappa (it is softplus(a) >= max(a, 0))
      REQUIRE(smooth >= hard - 1e-12);
      REQUIRE(smooth - hard <= std::log(2.0) / kappa + 1e-12);
    }
  }
  SECTION("smooth derivative matches finite differences") {
    const double kappa = 0.5;
    for (double a : {-40.0, -1.0, 0.0, 1.0, 40.0}) {
      const Dual<double> y = saturate_bounce_accel_smooth(Dual<double>{a, 1.0}, -1, kappa);
      const double h = 1e-6;
      const double fdv = (saturate_bounce_accel_smooth(a + h, -1, kappa) -
                          saturate_bounce_accel_smooth(a - h, -1, kappa)) /
                         (2.0 * h);
      CHECK(y.b == Catch::Approx(fdv).margin(1e-8));
    }
  }
}

TEST_CASE("saturated bounce acceleration composite", "[contact]") {
  const ActuatorParams p = testutil::reference_params();
  const ContactModel cm = gaussian_cm(3.99e-4, 2e-5);
  BounceConfig bc;
  bc.kappa = 50.0;  // tight corner so smooth ~ hard away from the kink
  const State s{4.0e-4, -0.5, 2e-6};
  const double hard = saturated_bounce_acceleration_hard(s, 0.0, p, cm, bc);
  const double smooth = saturated_bounce_acceleration<double>(s, 0.0, p, cm, bc);
  CHECK(smooth == Catch::Approx(hard).margin(std::log(2.0) / bc.kappa + 1e-12));
  // hand evaluation: v_b = 0, a_b = mechanical accel at rest, then hard clamp
  const double a_b = mechanical_accel(s.z, 0.0, s.alpha, p);
  CHECK(hard == saturate_bounce_accel_hard(a_b, cm.motion_sign));
}

TEST_CASE("bounce config validation", "[contact]") {
  BounceConfig bc;
  CHECK_NOTHROW(bc.validate());
  bc.restitution_e = 1.5;
  CHECK_THROWS_AS(bc.validate(), std::invalid_argument);
  bc.restitution_e = 0.0;
  bc.kappa = 0.0;
  CHECK_THROWS_AS(bc.validate(), std::invalid_argument);
}

TEST_CASE("contact time density", "[contact]") {
  const ContactModel cm = gaussian_cm(3.99e-4, 2e-5);
  SECTION("zero velocity gives zero density") {
    CHECK(contact_time_pdf<double>({5e-4, 0.0, 0.0}, cm) == 0.0);
  }
  SECTION("value is |v| times the position density") {
    const State s{4.1e-4, -0.22, 0.0};
    CHECK(contact_time_pdf<double>(s, cm) ==
          Catch::Approx(0.22 * cm.pdf(s.z)).epsilon(1e-14));
  }
  SECTION("integrates to the contact probability along an analytic path") {
    // time-substitution identity: int |v| f_Zc(z(t)) dt = P(contact)
    const testutil::CubicPath c{1.6e-3, 3.99e-4, 3.5e-3};
    const int n = 200000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double a = c.tf * k / n, b = c.tf * (k + 1) / n;
      const auto f = [&](double t) {
        return contact_time_pdf<double>({c.z(t), c.v(t), 0.0}, cm);
      };
      sum += 0.5 * (f(a) + f(b)) * (b - a);
    }
    CHECK(sum == Catch::Approx(cm.contact_probability_constant()).epsilon(1e-6));
  }
}
