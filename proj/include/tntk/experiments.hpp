#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tntk/input_matrix.hpp"
#include "tntk/kernels.hpp"
#include "tntk/stats.hpp"
#include "tntk/training.hpp"

// Finite-ensemble experiments shared by the command-line tool and the
// acceptance suite. Every result is a pure function of its config.
namespace tntk::experiments {

// Deterministic child seed for (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// n Gaussian directions scaled to unit length.
InputMatrix random_unit_inputs(std::size_t n, std::size_t dim, std::uint64_t seed);

struct ConvergeConfig {
  int depth = 3;
  double alpha = 2.0;
  std::vector<std::size_t> m_list{16, 64, 256, 1024, 4096};
  std::size_t trials = 10;
  std::size_t points = 50;
  std::size_t dim = 5;
  std::uint64_t seed = 0;
};

struct ConvergeRow {
  std::size_t trees = 0;
  std::size_t trial = 0;
  // Mean of |K_hat - K| over the upper triangle (diagonal included).
  double mean_abs_error = 0.0;
};

struct ConvergeResult {
  std::vector<ConvergeRow> rows;
  // Trial average per entry of m_list.
  std::vector<double> mean_error;
  stats::LinearFit fit;  // log-log, error against M
};

ConvergeResult converge(const ConvergeConfig& config);

struct BetaPoint {
  double beta = 0.0;
  double empirical = 0.0;
  double limit = 0.0;
};

// K(x, x') for x = (1, 0) and x' = (cos b, sin b), b on a uniform grid over [0, pi].
std::vector<BetaPoint> beta_sweep(int depth, double alpha, std::size_t trees, std::size_t points, std::uint64_t seed);

struct TrajectoryConfig {
  std::size_t trees = 1024;
  int depth = 3;
  double alpha = 2.0;
  double learning_rate = 0.1;
  std::size_t steps = 2000;
  std::size_t train_n = 10;
  std::size_t test_n = 10;
  std::size_t dim = 5;
  std::uint64_t seed = 0;
};

struct TrajectoryRun {
  training::TrajectoryResult result;
  double max_deviation = 0.0;
  double output_range = 0.0;
};

// Random unit inputs, N(0, 1) targets. Data depends on the seed only, the
// ensemble on (seed, trees).
TrajectoryRun trajectory(const TrajectoryConfig& config);

struct DriftConfig {
  std::vector<std::size_t> m_list{16, 64, 256, 1024};
  int depth = 3;
  double alpha = 2.0;
  double learning_rate = 0.1;
  std::size_t steps = 500;
  std::size_t n = 10;
  std::size_t dim = 5;
  std::vector<std::size_t> checkpoints{0, 100, 200, 300, 400, 500};
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
};

struct DriftResult {
  std::vector<training::DriftRow> rows;
  // Seed average of the drift at the last checkpoint, per entry of m_list.
  std::vector<double> final_drift;
  stats::LinearFit fit;  // log-log, drift against M
};

DriftResult drift(const DriftConfig& config);

struct ObliviousConfig {
  std::vector<std::size_t> m_list{16, 64, 256, 1024, 4096};
  int depth = 3;
  double alpha = 2.0;
  std::size_t pairs = 50;
  std::size_t dim = 5;
  std::size_t trials = 5;
  std::uint64_t seed = 0;
};

struct ObliviousRow {
  std::size_t trees = 0;
  std::size_t trial = 0;
  // Means over the pairs of |vanilla - limit|, |oblivious - limit| and
  // |oblivious - vanilla|. The oblivious ensemble shares the vanilla draw.
  double vanilla_error = 0.0;
  double oblivious_error = 0.0;
  double gap = 0.0;
};

std::vector<ObliviousRow> oblivious(const ObliviousConfig& config);

struct TimingConfig {
  // "tntk" or "mlp"; depth is the tree depth or the hidden-layer count.
  std::string kernel = "tntk";
  std::vector<int> depths{1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29};
  std::size_t n = 300;
  std::size_t dim = 10;
  std::size_t trials = 10;
  double alpha = 2.0;
  std::uint64_t seed = 0;
};

struct TimingRow {
  int depth = 0;
  std::size_t trial = 0;
  double seconds = 0.0;
};

struct TimingResult {
  std::vector<TimingRow> rows;
  std::vector<double> mean_seconds;
  std::vector<double> std_seconds;
  stats::LinearFit fit;  // seconds against depth over every trial
  // |slope| * (max depth - min depth) / mean time.
  double relative_change = 0.0;
};

// Trials are the outer loop so slow drifts of the machine spread evenly over
// depths.
TimingResult timing(const TimingConfig& config);

}  // namespace tntk::experiments
