#pragma once

#include <cmath>
#include <type_traits>

namespace softland {

// First-order forward-mode scalar. Every model routine in this library is
// templated on the scalar type, so seeding `b` and evaluating a composite
// (pdf, reluctance, smooth clamp, Hamiltonian) yields its exact directional
// derivative. Branch decisions compare values only.
template <class T = double>
struct Dual {
  T a{};  // value
  T b{};  // derivative

  Dual() = default;
  Dual(T value) : a(value), b(T(0)) {}
  Dual(T value, T deriv) : a(value), b(deriv) {}
};

template <class T>
inline double value_of(const Dual<T>& x) {
  return static_cast<double>(x.a);
}
inline double value_of(double x) { return x; }

template <class T> inline Dual<T> operator+(const Dual<T>& x) { return x; }
template <class T> inline Dual<T> operator-(const Dual<T>& x) { return {-x.a, -x.b}; }

template <class T>
inline Dual<T> operator+(const Dual<T>& x, const Dual<T>& y) { return {x.a + y.a, x.b + y.b}; }
template <class T>
inline Dual<T> operator-(const Dual<T>& x, const Dual<T>& y) { return {x.a - y.a, x.b - y.b}; }
template <class T>
inline Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
  return {x.a * y.a, x.a * y.b + x.b * y.a};
}
template <class T>
inline Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
  const T q = x.a / y.a;
  return {q, (x.b - q * y.b) / y.a};
}

template <class T> inline Dual<T> operator+(const Dual<T>& x, double c) { return {x.a + c, x.b}; }
template <class T> inline Dual<T> operator+(double c, const Dual<T>& x) { return {c + x.a, x.b}; }
template <class T> inline Dual<T> operator-(const Dual<T>& x, double c) { return {x.a - c, x.b}; }
template <class T> inline Dual<T> operator-(double c, const Dual<T>& x) { return {c - x.a, -x.b}; }
template <class T> inline Dual<T> operator*(const Dual<T>& x, double c) { return {x.a * c, x.b * c}; }
template <class T> inline Dual<T> operator*(double c, const Dual<T>& x) { return {c * x.a, c * x.b}; }
template <class T> inline Dual<T> operator/(const Dual<T>& x, double c) { return {x.a / c, x.b / c}; }
template <class T> inline Dual<T> operator/(double c, const Dual<T>& x) {
  const T q = c / x.a;
  return {q, -q * x.b / x.a};
}

template <class T> inline bool operator<(const Dual<T>& x, const Dual<T>& y) { return x.a < y.a; }
template <class T> inline bool operator>(const Dual<T>& x, const Dual<T>& y) { return x.a > y.a; }
template <class T> inline bool operator<=(const Dual<T>& x, const Dual<T>& y) { return x.a <= y.a; }
template <class T> inline bool operator>=(const Dual<T>& x, const Dual<T>& y) { return x.a >= y.a; }
template <class T> inline bool operator<(const Dual<T>& x, double c) { return x.a < c; }
template <class T> inline bool operator>(const Dual<T>& x, double c) { return x.a > c; }
template <class T> inline bool operator<=(const Dual<T>& x, double c) { return x.a <= c; }
template <class T> inline bool operator>=(const Dual<T>& x, double c) { return x.a >= c; }
template <class T> inline bool operator<(double c, const Dual<T>& x) { return c < x.a; }
template <class T> inline bool operator>(double c, const Dual<T>& x) { return c > x.a; }

using std::abs;
using std::exp;
using std::log;
using std::log1p;
using std::sqrt;
using std::tanh;

template <class T>
inline Dual<T> abs(const Dual<T>& x) {
  return x.a < T(0) ? -x : x;
}
template <class T>
inline Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  const T e = exp(x.a);
  return {e, e * x.b};
}
template <class T>
inline Dual<T> log(const Dual<T>& x) {
  using std::log;
  return {log(x.a), x.b / x.a};
}
template <class T>
inline Dual<T> log1p(const Dual<T>& x) {
  using std::log1p;
  return {log1p(x.a), x.b / (T(1) + x.a)};
}
template <class T>
inline Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  const T s = sqrt(x.a);
  return {s, x.b / (T(2) * s)};
}
template <class T>
inline Dual<T> tanh(const Dual<T>& x) {
  using std::tanh;
  const T t = tanh(x.a);
  return {t, (T(1) - t * t) * x.b};
}

// Numerically stable softplus with sharpness kappa:
//   softplus_k(x) = log(1 + exp(kappa x)) / kappa.
template <class T>
inline T softplus(const T& x, double kappa) {
  if (x > 0.0) return x + log1p(exp((-kappa) * x)) / kappa;
  return log1p(exp(kappa * x)) / kappa;
}

}  // namespace softland
