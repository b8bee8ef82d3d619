#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "tntk/math_core.hpp"
#include "tntk/stats.hpp"

using namespace tntk;
using doctest::Approx;

namespace {

math::SymmetricMatrix random_spd(std::size_t n, std::uint64_t seed, double shift) {
  math::RngState rng(seed);
  math::Matrix b(n, n);
  for (double& v : b.data()) v = rng.next_gaussian();
  auto a = b * b.transpose();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  return math::SymmetricMatrix(a);
}

math::SymmetricMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
  math::RngState rng(seed);
  math::SymmetricMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a.set(i, j, rng.next_gaussian());
  return a;
}

}  // namespace

TEST_CASE("erf agrees with the C library and is exactly odd") {
  for (double z = -6.0; z <= 6.0; z += 0.0371) {
    CHECK(math::erf(z) == Approx(std::erf(z)).epsilon(1e-12));
    CHECK(math::erf(-z) == -math::erf(z));
  }
  CHECK(math::erf(0.0) == 0.0);
  CHECK(math::erf(40.0) == 1.0);
}

TEST_CASE("rng draws are a function of key and counter") {
  math::RngState a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  math::RngState a2(7, 3);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a2.next_u64() == c.next_u64();
  CHECK(same == 0);

  math::RngState r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.next_uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto k = r.next_below(7);
    REQUIRE(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("gaussian draws have unit variance") {
  math::RngState rng(11);
  const std::size_t n = 200000;
  const auto v = math::gaussian_sample(rng, n);
  const double m = stats::mean(v);
  const double s = stats::stddev(v);
  // 5 standard errors
  CHECK(std::abs(m) < 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(s * s - 1.0) < 5.0 * std::sqrt(2.0 / double(n)));
  double fourth = 0.0;
  for (double x : v) fourth += x * x * x * x / double(n);
  CHECK(fourth == Approx(3.0).epsilon(0.05));
}

TEST_CASE("shuffle is a permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  math::RngState rng(5);
  math::shuffle(v, rng);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(!std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("matrix products by hand") {
  math::Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  math::Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  const auto c = a * b;
  CHECK(c(0, 0) == 58);
  CHECK(c(0, 1) == 64);
  CHECK(c(1, 0) == 139);
  CHECK(c(1, 1) == 154);
  const std::vector<double> v{1, 0, -1};
  const auto av = a * std::span<const double>(v);
  CHECK(av[0] == -2);
  CHECK(av[1] == -2);
  CHECK(a.transpose()(2, 1) == 6);
}

TEST_CASE("symmetric storage stays symmetric") {
  math::Matrix a(2, 2, {1, 2, 4, 3});
  math::SymmetricMatrix s(a);
  CHECK(s(0, 1) == 3);
  CHECK(s(1, 0) == 3);
  CHECK_THROWS(math::SymmetricMatrix(math::Matrix(2, 3)));
  CHECK(s.trace() == 4);
  CHECK(s.max_abs() == 3);
}

TEST_CASE("eigh reconstructs and orders the spectrum") {
  for (std::size_t n : {1u, 2u, 5u, 12u, 30u}) {
    const auto a = random_symmetric(n, 100 + n);
    const auto e = math::eigh(a);
    REQUIRE(e.eigenvalues.size() == n);
    CHECK(std::is_sorted(e.eigenvalues.begin(), e.eigenvalues.end()));
    const auto& q = e.eigenvectors;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double qtq = 0.0, recon = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          qtq += q(k, i) * q(k, j);
          recon += q(i, k) * e.eigenvalues[k] * q(j, k);
        }
        CHECK(qtq == Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
        CHECK(recon == Approx(a(i, j)).epsilon(1e-10).scale(1.0));
      }
    double sum = 0.0;
    for (double l : e.eigenvalues) sum += l;
    CHECK(sum == Approx(a.trace()).scale(1.0).epsilon(1e-10));
  }
}

TEST_CASE("eigh on a 2x2 matches the quadratic formula") {
  math::SymmetricMatrix a(2, {2.0, 1.0, 1.0, 3.0});
  const auto e = math::eigh(a);
  const double mid = 2.5, rad = std::sqrt(0.25 + 1.0);
  CHECK(e.eigenvalues[0] == Approx(mid - rad).epsilon(1e-14));
  CHECK(e.eigenvalues[1] == Approx(mid + rad).epsilon(1e-14));
}

TEST_CASE("eigh reports non-convergence") {
  const auto a = random_symmetric(8, 3);
  CHECK_THROWS_AS(math::eigh(a, 0), math::EigenConvergenceError);
  CHECK_NOTHROW(math::eigh(math::SymmetricMatrix::identity(4), 0));
}

TEST_CASE("cholesky solve agrees with Gaussian elimination") {
  const std::size_t n = 9;
  const auto a = random_spd(n, 21, 0.5);
  math::RngState rng(4);
  const auto b = math::gaussian_sample(rng, n);
  const auto x = math::cholesky_solve(a, b, 0.0);
  const auto ref = oracle::solve(a.data(), b);
  for (std::size_t i = 0; i < n; ++i) CHECK(x[i] == Approx(ref[i]).epsilon(1e-9));

  // jitter acts as a ridge
  const double lambda = 0.3;
  auto shifted = a.data();
  for (std::size_t i = 0; i < n; ++i) shifted[i * n + i] += lambda;
  const auto xr = math::cholesky_solve(a, b, lambda);
  const auto rr = oracle::solve(shifted, b);
  for (std::size_t i = 0; i < n; ++i) CHECK(xr[i] == Approx(rr[i]).epsilon(1e-9));
}

TEST_CASE("cholesky rejects indefinite matrices") {
  math::SymmetricMatrix a(2, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(math::CholeskyFactor(a, 0.0), math::NotPositiveDefiniteError);
  try {
    math::CholeskyFactor f(a, 0.0);
  } catch (const math::NotPositiveDefiniteError& e) {
    CHECK(e.pivot() == 1);
    CHECK(e.value() < 0);
  }
  CHECK_NOTHROW(math::CholeskyFactor(a, 1.5));
}

TEST_CASE("matrix exponential matches the Taylor series") {
  const std::size_t n = 6;
  auto a = random_symmetric(n, 8);
  math::RngState rng(9);
  const auto v = math::gaussian_sample(rng, n);
  for (double s : {-0.7, -0.1, 0.0, 0.25, 0.5}) {
    const auto got = math::sym_matrix_exp_apply(a, s, v);
    const auto ref = oracle::taylor_expm_apply(a.data(), n, s, v);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == Approx(ref[i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("matrix exponential semigroup") {
  const auto a = random_symmetric(7, 12);
  const auto eig = math::eigh(a);
  math::RngState rng(13);
  const auto v = math::gaussian_sample(rng, 7);
  const auto once = math::sym_matrix_exp_apply(eig, -0.8, v);
  const auto twice = math::sym_matrix_exp_apply(eig, -0.3, math::sym_matrix_exp_apply(eig, -0.5, v));
  for (std::size_t i = 0; i < 7; ++i) CHECK(once[i] == Approx(twice[i]).epsilon(1e-12).scale(1.0));
  const auto id = math::sym_matrix_exp_apply(eig, 0.0, v);
  for (std::size_t i = 0; i < 7; ++i) CHECK(id[i] == Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("compensated sum keeps small terms") {
  const std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  CHECK(math::compensated_sum(v) == 2.0);
  const std::vector<double> w{3.0, 4.0};
  CHECK(math::norm2(w) == 5.0);
  CHECK(math::dot(w, w) == 25.0);
}

TEST_CASE("least squares line against reference values") {
  // reference: scipy.stats.linregress
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2.1, 3.9, 6.2, 7.8, 10.1};
  const auto f = stats::fit_line(x, y);
  CHECK(f.slope == Approx(1.99).epsilon(1e-12));
  CHECK(f.intercept == Approx(0.05).epsilon(1e-9));
  CHECK(f.slope_stderr == Approx(0.059721576223897795).epsilon(1e-10));
  CHECK(f.p_value == Approx(5.9415391117559265e-05).epsilon(1e-8));

  const std::vector<double> x2{1, 2, 3, 4, 5, 6}, y2{1.0, 0.7, 1.3, 0.9, 1.2, 0.8};
  CHECK(stats::fit_line(x2, y2).p_value == Approx(0.9653958768845716).epsilon(1e-8));
}

TEST_CASE("log-log fit recovers a power law") {
  const std::vector<double> m{16, 64, 256, 1024};
  std::vector<double> e;
  for (double v : m) e.push_back(3.0 * std::pow(v, -0.5));
  const auto f = stats::fit_loglog(m, e);
  CHECK(f.slope == Approx(-0.5).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == Approx(3.0).epsilon(1e-12));
  const std::vector<double> bad{1.0, 0.0, 1.0, 1.0};
  CHECK_THROWS(stats::fit_loglog(m, bad));
}
