#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tntk::math {

// Error function. Odd symmetry is exact: erf(-z) == -erf(z) bitwise.
double erf(double z);

/// Counter-based uniform generator with a Box-Muller Gaussian transform.
///
/// Every draw is a pure function of (key, counter): the 64-bit word for
/// counter c is splitmix64(key ^ splitmix64(c)). Uniforms take the top 53
/// bits and live in the open interval (0, 1). Gaussians consume two
/// consecutive uniforms u1, u2 and return sqrt(-2 ln u1) * cos(2 pi u2); the
/// sine branch is discarded so that the stream position of every sample is
/// determined by its index alone.
///
/// RngState is a value type. Copy it to fork a replay, or call split() to
/// derive an independent stream for a parallel task.
class RngState {
 public:
  using result_type = std::uint64_t;

  explicit RngState(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double next_uniform();
  double next_gaussian();
  // Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t next_below(std::uint64_t bound);

  RngState split(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

std::vector<double> gaussian_sample(RngState& rng, std::size_t count);

// Fisher-Yates with the generator above; platform-independent order.
template <typename T>
void shuffle(std::vector<T>& values, RngState& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::vector<double> column(std::size_t j) const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
std::vector<double> operator*(const Matrix& a, std::span<const double> v);

/// Square matrix whose storage is kept exactly symmetric.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t n, double fill = 0.0);
  // Both symmetrize as (a + a^T) / 2; the Matrix form throws if not square.
  explicit SymmetricMatrix(const Matrix& a);
  SymmetricMatrix(std::size_t n, std::vector<double> row_major);

  static SymmetricMatrix identity(std::size_t n);
  static SymmetricMatrix diagonal(std::span<const double> d);

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  // Writes both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  const std::vector<double>& data() const { return data_; }
  Matrix to_matrix() const { return Matrix(n_, n_, data_); }

  double max_abs() const;
  double trace() const;
  std::vector<double> multiply(std::span<const double> v) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
};

class EigenConvergenceError : public std::runtime_error {
 public:
  EigenConvergenceError(double residual, int sweeps);
  double residual() const { return residual_; }

 private:
  double residual_;
};

class NotPositiveDefiniteError : public std::runtime_error {
 public:
  NotPositiveDefiniteError(std::size_t pivot, double value);
  std::size_t pivot() const { return pivot_; }
  double value() const { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

// Cyclic Jacobi. Throws EigenConvergenceError after `max_sweeps`.
EigenDecomposition eigh(const SymmetricMatrix& a, int max_sweeps = 60);

/// Lower-triangular Cholesky factor of (A + jitter I).
class CholeskyFactor {
 public:
  CholeskyFactor(const SymmetricMatrix& a, double jitter);

  std::size_t size() const { return n_; }
  std::vector<double> solve(std::span<const double> b) const;
  Matrix solve(const Matrix& b) const;  // column-wise

 private:
  std::size_t n_;
  std::vector<double> lower_;  // row-major, upper triangle unused
};

std::vector<double> cholesky_solve(const SymmetricMatrix& a, std::span<const double> b,
                                   double jitter);

// Q diag(exp(scale * lambda)) Q^T v.
std::vector<double> sym_matrix_exp_apply(const SymmetricMatrix& a, double scale,
                                         std::span<const double> v);
std::vector<double> sym_matrix_exp_apply(const EigenDecomposition& eig, double scale,
                                         std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

}  // namespace tntk::math
