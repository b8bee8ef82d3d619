#include "tntk/math_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tntk::math {

double erf(double z) {
  if (z < 0.0) return -std::erf(-z);
  return std::erf(z);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngState::RngState(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL))) {}

std::uint64_t RngState::next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

double RngState::next_uniform() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(next_u64() >> 11) + 0.5) * kScale;
}

double RngState::next_gaussian() {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t RngState::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

RngState RngState::split(std::uint64_t stream) const { return RngState(key_, stream + 1); }

std::vector<double> gaussian_sample(RngState& rng, std::size_t count) {
  std::vector<double> out(count);
  for (auto& v : out) v = rng.next_gaussian();
  return out;
}

// ---------------------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw std::invalid_argument("Matrix: size mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("Matrix product: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> v) {
  if (a.cols() != v.size()) throw std::invalid_argument("Matrix-vector product: shape mismatch");
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v);
  return out;
}

// ---------------------------------------------------------------------------

SymmetricMatrix::SymmetricMatrix(std::size_t n, double fill) : n_(n), data_(n * n, fill) {}

SymmetricMatrix::SymmetricMatrix(const Matrix& a) : SymmetricMatrix(a.rows(), a.data()) {
  if (a.rows() != a.cols()) throw std::invalid_argument("SymmetricMatrix: matrix is not square");
}

SymmetricMatrix::SymmetricMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
  if (data_.size() != n * n) throw std::invalid_argument("SymmetricMatrix: size mismatch");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) set(i, j, 0.5 * (data_[i * n + j] + data_[j * n + i]));
}

SymmetricMatrix SymmetricMatrix::identity(std::size_t n) {
  SymmetricMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymmetricMatrix SymmetricMatrix::diagonal(std::span<const double> d) {
  SymmetricMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m.set(i, i, d[i]);
  return m;
}

double SymmetricMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double SymmetricMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

std::vector<double> SymmetricMatrix::multiply(std::span<const double> v) const {
  if (v.size() != n_) throw std::invalid_argument("SymmetricMatrix::multiply: size mismatch");
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = dot(row(i), v);
  return out;
}

// ---------------------------------------------------------------------------

namespace {
std::string eigen_message(double residual, int sweeps) {
  std::ostringstream os;
  os << "eigh: Jacobi iteration did not converge after " << sweeps
     << " sweeps (off-diagonal Frobenius residual " << residual << ")";
  return os.str();
}

std::string pivot_message(std::size_t pivot, double value) {
  std::ostringstream os;
  os << "cholesky: matrix is not positive definite (pivot " << pivot << " = " << value << ")";
  return os.str();
}
}  // namespace

EigenConvergenceError::EigenConvergenceError(double residual, int sweeps)
    : std::runtime_error(eigen_message(residual, sweeps)), residual_(residual) {}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t pivot, double value)
    : std::runtime_error(pivot_message(pivot, value)), pivot_(pivot), value_(value) {}

EigenDecomposition eigh(const SymmetricMatrix& input, int max_sweeps) {
  const std::size_t n = input.size();
  if (n == 0) throw std::invalid_argument("eigh: empty matrix");
  std::vector<double> a = input.data();
  Matrix v = Matrix::identity(n);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  double total = 0.0;
  for (double x : a) total += x * x;
  const double tolerance = 1e-28 * total;  // relative Frobenius 1e-14

  auto off_diagonal = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    return 2.0 * off;
  };

  double off = off_diagonal();
  int sweep = 0;
  while (off > tolerance && off > 0.0) {
    if (sweep == max_sweeps) throw EigenConvergenceError(std::sqrt(off), sweep);
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double app = at(p, p);
        const double aqq = at(q, q);
        // Skip rotations that can no longer change the diagonal.
        if (sweep > 4 && std::abs(apq) * 1e18 < std::abs(app) && std::abs(apq) * 1e18 < std::abs(aqq)) {
          at(p, q) = 0.0;
          at(q, p) = 0.0;
          continue;
        }
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = off_diagonal();
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return at(i, i) < at(j, j); });
  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = at(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------

CholeskyFactor::CholeskyFactor(const SymmetricMatrix& a, double jitter)
    : n_(a.size()), lower_(a.size() * a.size(), 0.0) {
  if (jitter < 0.0) throw std::invalid_argument("cholesky: jitter must be non-negative");
  for (std::size_t i = 0; i < n_; ++i) {
    double* li = lower_.data() + i * n_;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* lj = lower_.data() + j * n_;
      double s = a(i, j);
      if (i == j) s += jitter;
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) throw NotPositiveDefiniteError(i, s);
        li[i] = std::sqrt(s);
      } else {
        li[j] = s / lj[j];
      }
    }
  }
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  if (b.size() != n_) throw std::invalid_argument("cholesky: right-hand side size mismatch");
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n_; ++i) {
    const double* li = lower_.data() + i * n_;
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * x[k];
    x[i] = s / li[i];
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n_; ++k) s -= lower_[k * n_ + ii] * x[k];
    x[ii] = s / lower_[ii * n_ + ii];
  }
  return x;
}

Matrix CholeskyFactor::solve(const Matrix& b) const {
  if (b.rows() != n_) throw std::invalid_argument("cholesky: right-hand side size mismatch");
  Matrix x(b.rows(), b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    const auto col = solve(b.column(c));
    for (std::size_t i = 0; i < n_; ++i) x(i, c) = col[i];
  }
  return x;
}

std::vector<double> cholesky_solve(const SymmetricMatrix& a, std::span<const double> b,
                                   double jitter) {
  return CholeskyFactor(a, jitter).solve(b);
}

std::vector<double> sym_matrix_exp_apply(const EigenDecomposition& eig, double scale,
                                         std::span<const double> v) {
  const auto& q = eig.eigenvectors;
  const std::size_t n = eig.eigenvalues.size();
  if (v.size() != n) throw std::invalid_argument("sym_matrix_exp_apply: size mismatch");
  std::vector<double> coeff(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) coeff[k] += q(i, k) * v[i];
  for (std::size_t k = 0; k < n; ++k) coeff[k] *= std::exp(scale * eig.eigenvalues[k]);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = dot(q.row(i), coeff);
  return out;
}

std::vector<double> sym_matrix_exp_apply(const SymmetricMatrix& a, double scale,
                                         std::span<const double> v) {
  if (scale == 0.0) {
    if (v.size() != a.size()) throw std::invalid_argument("sym_matrix_exp_apply: size mismatch");
    return {v.begin(), v.end()};
  }
  return sym_matrix_exp_apply(eigh(a), scale, v);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

}  // namespace tntk::math
