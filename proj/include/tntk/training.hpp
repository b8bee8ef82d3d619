#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "tntk/input_matrix.hpp"
#include "tntk/math_core.hpp"
#include "tntk/soft_tree.hpp"

namespace tntk::training {

struct TrainingConfig {
  double learning_rate = 0.1;
  std::size_t steps = 2000;
  // Train f_tau - f_0 instead of f_tau, so every output starts at zero.
  bool shift_initial_outputs = true;
  // Steps at which the empirical NTK is recorded; 0 is always included.
  std::vector<std::size_t> drift_checkpoints;
  // Kernel drift is measured on the first `drift_points` training samples.
  std::size_t drift_points = 50;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, double loss, double initial_loss);
  std::size_t step() const { return step_; }
  double loss() const { return loss_; }

 private:
  std::size_t step_;
  double loss_;
};

/// Outputs recorded at every step 0 .. steps. Rows are steps, columns points.
struct TrajectoryResult {
  double learning_rate = 0.0;
  std::vector<std::size_t> steps;
  std::vector<double> loss;
  math::Matrix gd_train;
  math::Matrix gd_test;
  // Filled by attach_analytic; empty until then.
  math::Matrix analytic_train;
  math::Matrix analytic_test;
  // sup |K_tau - K_0| at each recorded checkpoint.
  std::vector<std::size_t> drift_steps;
  std::vector<double> kernel_drift;

  // Flow time step * eta of the gradient-flow solution.
  double time(std::size_t row) const { return learning_rate * static_cast<double>(steps[row]); }
};

struct TrainedRun {
  soft_tree::SoftTreeEnsemble ensemble;
  TrajectoryResult result;
};

// Full-batch gradient descent on (1/2) sum (f(x_i) - y_i)^2 using analytic
// gradients. Throws DivergenceError once the loss passes 1e6 times its
// starting value.
TrainedRun train_gd(soft_tree::SoftTreeEnsemble ensemble, const InputMatrix& train, std::span<const double> y,
                    const TrainingConfig& config, const InputMatrix* test = nullptr);

// H_cross H^-1 (I - exp(-eta H tau)) y for each tau in `steps`, one row per
// step. The spectral factor (1 - e^(-eta lambda tau)) / lambda becomes eta tau
// on a zero eigenvalue.
math::Matrix analytic_trajectory(const math::SymmetricMatrix& h_train, const math::Matrix& h_cross,
                                 std::span<const double> y, double learning_rate,
                                 std::span<const std::size_t> steps);

// Fills analytic_train / analytic_test from the limiting kernel.
void attach_analytic(TrajectoryResult& result, const kernels::KernelSpec& spec, const InputMatrix& train,
                     std::span<const double> y, const InputMatrix* test = nullptr);

// Largest |gd - analytic| over every step and point, train and test.
double max_deviation(const TrajectoryResult& result);
// max - min of the analytic outputs over every step and point.
double output_range(const TrajectoryResult& result);

struct DriftCurve {
  std::vector<std::size_t> steps;
  std::vector<double> sup_drift;
};

DriftCurve kernel_drift(const soft_tree::SoftTreeEnsemble& ensemble, const InputMatrix& x, std::span<const double> y,
                        TrainingConfig config, std::span<const std::size_t> checkpoints);

// step,time,point_id,split,gd_output,analytic_output after a "# {json}" line.
void write_trajectory_csv(std::ostream& os, const TrajectoryResult& result, const nlohmann::json& config = {});

struct DriftRow {
  std::size_t trees = 0;
  std::uint64_t seed = 0;
  std::size_t checkpoint = 0;
  double sup_drift = 0.0;
};

// M,seed,checkpoint,sup_drift after a "# {json}" line.
void write_drift_csv(std::ostream& os, std::span<const DriftRow> rows, const nlohmann::json& config = {});

}  // namespace tntk::training
