#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tntk/input_matrix.hpp"
#include "tntk/kernels.hpp"
#include "tntk/math_core.hpp"

namespace tntk::regression {

// Ridge strength used throughout the benchmarks.
inline constexpr double kDefaultRidge = 1e-8;

struct FittedKrr {
  kernels::KernelSpec spec;
  InputMatrix train;
  // N x C; column c solves (K + lambda I) a = targets[:, c].
  math::Matrix dual;
  double ridge = kDefaultRidge;
};

// Targets are N x C. The ridge doubles as the Cholesky jitter.
FittedKrr krr_fit(const kernels::KernelSpec& spec, const InputMatrix& train, const math::Matrix& targets,
                  double ridge = kDefaultRidge);

// Dual coefficients from a precomputed training Gram matrix.
math::Matrix krr_solve(const math::SymmetricMatrix& gram, const math::Matrix& targets, double ridge = kDefaultRidge);

// N_test x C predictions K(test, train) * dual.
math::Matrix krr_predict(const FittedKrr& model, const InputMatrix& test);
math::Matrix krr_predict(const math::Matrix& cross, const math::Matrix& dual);

enum class TargetEncoding { ZeroOne, PlusMinusOne };

// One channel per class; a single class gives a single channel.
math::Matrix one_hot(std::span<const int> labels, std::size_t classes,
                     TargetEncoding encoding = TargetEncoding::ZeroOne);

// Argmax over channels with ties to the lowest index. With one channel the
// output is 1 when the score reaches the midpoint of the encoding, else 0.
std::vector<int> decode(const math::Matrix& scores, TargetEncoding encoding = TargetEncoding::ZeroOne);

std::vector<int> classify(const FittedKrr& model, const InputMatrix& test,
                          TargetEncoding encoding = TargetEncoding::ZeroOne);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace tntk::regression
