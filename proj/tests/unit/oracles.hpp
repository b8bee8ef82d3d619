#pragma once

// Reference implementations used only by the tests. None of them call into
// the library's numerics.

#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Gaussian expectation over u1 of f(u1), by adaptive Gauss-Kronrod on the line.
template <typename F>
double gauss_expect(F f) {
  auto integrand = [&](double u) { return f(u) * phi(u); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-13);
}

// Coordinates with x = (a, 0), y = (b, c) reproducing the three inner products.
struct Plane {
  double a, b, c;
};
inline Plane plane(double s_ij, double s_ii, double s_jj) {
  const double a = std::sqrt(s_ii);
  const double b = a > 0 ? s_ij / a : 0.0;
  return {a, b, std::sqrt(std::max(0.0, s_jj - b * b))};
}

// E[g(u.x) g(u.y)] with g = erf(alpha p)/2 + 1/2. The u2 integral is closed:
// E[erf(m + s Z)] = erf(m / sqrt(1 + 2 s^2)).
inline double T(double s_ij, double s_ii, double s_jj, double alpha) {
  const auto p = plane(s_ij, s_ii, s_jj);
  return gauss_expect([&](double u) {
    const double gx = 0.5 * std::erf(alpha * p.a * u) + 0.5;
    const double gy = 0.5 * std::erf(alpha * p.b * u / std::sqrt(1.0 + 2.0 * alpha * alpha * p.c * p.c)) + 0.5;
    return gx * gy;
  });
}

// E[g'(u.x) g'(u.y)], g'(p) = alpha exp(-(alpha p)^2) / sqrt(pi).
inline double Tdot(double s_ij, double s_ii, double s_jj, double alpha) {
  const auto p = plane(s_ij, s_ii, s_jj);
  const double k = alpha / std::sqrt(kPi);
  const double q = 1.0 + 2.0 * alpha * alpha * p.c * p.c;
  return gauss_expect([&](double u) {
    const double gx = k * std::exp(-alpha * alpha * p.a * p.a * u * u);
    const double m = alpha * p.b * u;
    const double gy = k * std::exp(-m * m / q) / std::sqrt(q);
    return gx * gy;
  });
}

// E[relu(u.x) relu(u.y)] and E[1{u.x > 0} 1{u.y > 0}].
inline double relu_cov(double s_ij, double s_ii, double s_jj) {
  const auto p = plane(s_ij, s_ii, s_jj);
  return gauss_expect([&](double u) {
    const double x = std::max(0.0, p.a * u);
    const double m = p.b * u;
    const double ey = p.c > 0 ? m * Phi(m / p.c) + p.c * phi(m / p.c) : std::max(0.0, m);
    return x * ey;
  });
}
inline double relu_dot(double s_ij, double s_ii, double s_jj) {
  const auto p = plane(s_ij, s_ii, s_jj);
  return gauss_expect([&](double u) {
    const double x = p.a * u > 0 ? 1.0 : 0.0;
    const double m = p.b * u;
    const double ey = p.c > 0 ? Phi(m / p.c) : (m > 0 ? 1.0 : 0.0);
    return x * ey;
  });
}

// exp(s A) v by a truncated Taylor series.
inline std::vector<double> taylor_expm_apply(const std::vector<double>& a, std::size_t n, double s,
                                             const std::vector<double>& v, int terms = 40) {
  std::vector<double> term = v, out = v;
  for (int k = 1; k < terms; ++k) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[i] += s * a[i * n + j] * term[j] / k;
    term = next;
    for (std::size_t i = 0; i < n; ++i) out[i] += term[i];
  }
  return out;
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  return x;
}

// Soft tree written out node by node: tree output for weights w[node-1][f],
// leaves pi[leaf-1], recursing from node 1.
struct PlainTree {
  int depth;
  double alpha;
  std::vector<std::vector<double>> w;
  std::vector<double> pi;

  double g(std::size_t node, const std::vector<double>& x) const {
    double p = 0.0;
    for (std::size_t f = 0; f < x.size(); ++f) p += w[node - 1][f] * x[f];
    return 0.5 * std::erf(alpha * p) + 0.5;
  }
  double eval(std::size_t node, const std::vector<double>& x) const {
    const std::size_t internal = (std::size_t{1} << depth) - 1;
    if (node > internal) return pi[node - internal - 1];
    const double gn = g(node, x);
    return gn * eval(2 * node, x) + (1.0 - gn) * eval(2 * node + 1, x);
  }
  double operator()(const std::vector<double>& x) const { return eval(1, x); }
};

}  // namespace oracle
