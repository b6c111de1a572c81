#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace dampbeam {

// Truncated Taylor series in one variable: c[k] = f^{(k)}(x0) / k!.
// Used to obtain exact derivatives of the closed-form profiles (bumps,
// blow-up pieces, smoothsteps) without finite differencing.
template <std::size_t N>
struct Jet {
  std::array<double, N + 1> c{};

  Jet() = default;
  explicit Jet(double value) { c[0] = value; }

  static Jet variable(double x0) {
    Jet j(x0);
    if constexpr (N >= 1) j.c[1] = 1.0;
    return j;
  }

  double value() const { return c[0]; }

  // k-th derivative (not the Taylor coefficient).
  double derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return c[k] * f;
  }

  std::array<double, N + 1> derivatives() const {
    std::array<double, N + 1> d{};
    for (std::size_t k = 0; k <= N; ++k) d[k] = derivative(k);
    return d;
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] += o.c[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] -= o.c[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }
};

template <std::size_t N>
Jet<N> operator+(Jet<N> a, const Jet<N>& b) { return a += b; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a, const Jet<N>& b) { return a -= b; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a) {
  for (auto& v : a.c) v = -v;
  return a;
}
template <std::size_t N>
Jet<N> operator+(Jet<N> a, double s) {
  a.c[0] += s;
  return a;
}
template <std::size_t N>
Jet<N> operator+(double s, Jet<N> a) { return a + s; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a, double s) {
  a.c[0] -= s;
  return a;
}
template <std::size_t N>
Jet<N> operator-(double s, const Jet<N>& a) { return -a + s; }
template <std::size_t N>
Jet<N> operator*(Jet<N> a, double s) { return a *= s; }
template <std::size_t N>
Jet<N> operator*(double s, Jet<N> a) { return a *= s; }

template <std::size_t N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> r;
  for (std::size_t k = 0; k <= N; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= k; ++i) acc += a.c[i] * b.c[k - i];
    r.c[k] = acc;
  }
  return r;
}

template <std::size_t N>
Jet<N> reciprocal(const Jet<N>& a) {
  Jet<N> r;
  r.c[0] = 1.0 / a.c[0];
  for (std::size_t k = 1; k <= N; ++k) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= k; ++i) acc += a.c[i] * r.c[k - i];
    r.c[k] = -acc / a.c[0];
  }
  return r;
}

template <std::size_t N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) { return a * reciprocal(b); }
template <std::size_t N>
Jet<N> operator/(double s, const Jet<N>& b) { return s * reciprocal(b); }

// exp via the recurrence k r_k = sum_{i=1..k} i a_i r_{k-i}.
template <std::size_t N>
Jet<N> exp(const Jet<N>& a) {
  Jet<N> r;
  r.c[0] = std::exp(a.c[0]);
  for (std::size_t k = 1; k <= N; ++k) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= k; ++i) acc += static_cast<double>(i) * a.c[i] * r.c[k - i];
    r.c[k] = acc / static_cast<double>(k);
  }
  return r;
}

// Complete Bell polynomials B_i(y1..yi) for i = 0..N, the derivatives of
// exp(g) divided by exp(g) when y_k = g^{(k)}.
template <std::size_t N>
std::array<double, N + 1> bell_ratios(const std::array<double, N + 1>& g_derivs) {
  Jet<N> g;
  double fact = 1.0;
  for (std::size_t k = 1; k <= N; ++k) {
    fact *= static_cast<double>(k);
    g.c[k] = g_derivs[k] / fact;
  }
  return exp(g).derivatives();
}

}  // namespace dampbeam
