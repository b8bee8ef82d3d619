#include "tntk/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace tntk::training {

namespace {

constexpr double kDivergenceFactor = 1e6;

double half_squared(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return 0.5 * s;
}

std::vector<std::size_t> first_indices(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx(std::min(n, cap));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double sup_difference(const math::SymmetricMatrix& a, const math::SymmetricMatrix& b) {
  double sup = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) sup = std::max(sup, std::abs(a.data()[k] - b.data()[k]));
  return sup;
}

void write_header(std::ostream& os, const nlohmann::json& config) {
  os << "# " << (config.is_null() ? nlohmann::json::object() : config).dump() << '\n';
}

}  // namespace

DivergenceError::DivergenceError(std::size_t step, double loss, double initial_loss)
    : std::runtime_error("gradient descent diverged at step " + std::to_string(step) + ": loss " +
                         std::to_string(loss) + " vs initial " + std::to_string(initial_loss) +
                         "; lower the learning rate"),
      step_(step),
      loss_(loss) {}

TrainedRun train_gd(soft_tree::SoftTreeEnsemble ensemble, const InputMatrix& train, std::span<const double> y,
                    const TrainingConfig& config, const InputMatrix* test) {
  const std::size_t n = train.samples();
  if (y.size() != n) throw std::invalid_argument("train_gd: target count does not match sample count");
  if (!(config.learning_rate >= 0.0)) throw std::invalid_argument("train_gd: learning rate must be non-negative");
  if (test && test->features() != train.features())
    throw std::invalid_argument("train_gd: test set feature dimension mismatch");

  TrajectoryResult result;
  result.learning_rate = config.learning_rate;
  const std::size_t n_test = test ? test->samples() : 0;
  result.gd_train = math::Matrix(config.steps + 1, n);
  result.gd_test = math::Matrix(config.steps + 1, n_test);

  std::vector<std::size_t> checkpoints = config.drift_checkpoints;
  checkpoints.push_back(0);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  const bool track_drift = !config.drift_checkpoints.empty();
  const auto drift_idx = first_indices(n, config.drift_points);
  const InputMatrix drift_x = track_drift ? train.subset(drift_idx) : InputMatrix{};
  math::SymmetricMatrix k0;
  std::size_t next_checkpoint = 0;

  const std::vector<double> f0_train = config.shift_initial_outputs ? ensemble.forward(train) : std::vector<double>(n);
  const std::vector<double> f0_test =
      (config.shift_initial_outputs && test) ? ensemble.forward(*test) : std::vector<double>(n_test);

  std::vector<double> residual(n);
  double initial_loss = 0.0;
  for (std::size_t step = 0;; ++step) {
    const auto f = step == 0 && config.shift_initial_outputs ? f0_train : ensemble.forward(train);
    for (std::size_t i = 0; i < n; ++i) {
      const double out = config.shift_initial_outputs ? f[i] - f0_train[i] : f[i];
      result.gd_train(step, i) = out;
      residual[i] = out - y[i];
    }
    if (test) {
      const auto ft = step == 0 && config.shift_initial_outputs ? f0_test : ensemble.forward(*test);
      for (std::size_t i = 0; i < n_test; ++i)
        result.gd_test(step, i) = config.shift_initial_outputs ? ft[i] - f0_test[i] : ft[i];
    }
    const double loss = half_squared(residual);
    result.steps.push_back(step);
    result.loss.push_back(loss);
    if (step == 0) initial_loss = loss;
    if (!std::isfinite(loss) || loss > kDivergenceFactor * std::max(initial_loss, 1e-12))
      throw DivergenceError(step, loss, initial_loss);

    if (track_drift && next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == step) {
      auto k = ensemble.empirical_ntk(drift_x, step).matrix;
      if (step == 0) k0 = k;
      result.drift_steps.push_back(step);
      result.kernel_drift.push_back(sup_difference(k, k0));
      ++next_checkpoint;
    }

    if (step == config.steps) break;
    if (config.learning_rate == 0.0) {
      continue;
    }
    const auto grad = ensemble.vjp(train, residual);
    auto params = ensemble.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) params[p] -= config.learning_rate * grad[p];
    ensemble.set_parameters(std::move(params));
  }
  return TrainedRun{std::move(ensemble), std::move(result)};
}

math::Matrix analytic_trajectory(const math::SymmetricMatrix& h_train, const math::Matrix& h_cross,
                                 std::span<const double> y, double learning_rate,
                                 std::span<const std::size_t> steps) {
  const std::size_t n = h_train.size();
  if (y.size() != n || h_cross.cols() != n)
    throw std::invalid_argument("analytic_trajectory: dimension mismatch");
  for (std::size_t k = 1; k < steps.size(); ++k)
    if (steps[k] < steps[k - 1]) throw std::invalid_argument("analytic_trajectory: steps must be ascending");

  const auto eig = math::eigh(h_train);
  // Project the targets onto the eigenbasis once: z = Q^T y.
  std::vector<double> z(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) z[k] += eig.eigenvectors(i, k) * y[i];
  // B = H_cross Q, so each output is B diag(factor) z.
  const math::Matrix b = h_cross * eig.eigenvectors;

  math::Matrix out(steps.size(), h_cross.rows());
  std::vector<double> scaled(n);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const double flow = learning_rate * static_cast<double>(steps[s]);
    for (std::size_t k = 0; k < n; ++k) {
      const double lambda = eig.eigenvalues[k];
      const double factor = lambda == 0.0 ? flow : -std::expm1(-flow * lambda) / lambda;
      scaled[k] = factor * z[k];
    }
    for (std::size_t i = 0; i < h_cross.rows(); ++i) out(s, i) = math::dot(b.row(i), scaled);
  }
  return out;
}

void attach_analytic(TrajectoryResult& result, const kernels::KernelSpec& spec, const InputMatrix& train,
                     std::span<const double> y, const InputMatrix* test) {
  const auto h = kernels::gram(spec, train).matrix;
  result.analytic_train = analytic_trajectory(h, h.to_matrix(), y, result.learning_rate, result.steps);
  if (test && test->samples() > 0) {
    const auto cross = kernels::cross_gram(spec, *test, train);
    result.analytic_test = analytic_trajectory(h, cross, y, result.learning_rate, result.steps);
  } else {
    result.analytic_test = math::Matrix(result.steps.size(), 0);
  }
}

double max_deviation(const TrajectoryResult& result) {
  if (result.analytic_train.empty() && !result.gd_train.empty())
    throw std::logic_error("max_deviation: analytic outputs not attached");
  double worst = 0.0;
  for (std::size_t k = 0; k < result.gd_train.data().size(); ++k)
    worst = std::max(worst, std::abs(result.gd_train.data()[k] - result.analytic_train.data()[k]));
  for (std::size_t k = 0; k < result.gd_test.data().size(); ++k)
    worst = std::max(worst, std::abs(result.gd_test.data()[k] - result.analytic_test.data()[k]));
  return worst;
}

double output_range(const TrajectoryResult& result) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* m : {&result.analytic_train, &result.analytic_test})
    for (double v : m->data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return hi >= lo ? hi - lo : 0.0;
}

DriftCurve kernel_drift(const soft_tree::SoftTreeEnsemble& ensemble, const InputMatrix& x, std::span<const double> y,
                        TrainingConfig config, std::span<const std::size_t> checkpoints) {
  config.drift_checkpoints.assign(checkpoints.begin(), checkpoints.end());
  for (std::size_t c : checkpoints)
    if (c > config.steps) throw std::invalid_argument("kernel_drift: checkpoint beyond the last training step");
  if (config.drift_checkpoints.empty()) config.drift_checkpoints.push_back(0);
  const auto run = train_gd(ensemble, x, y, config);
  return DriftCurve{run.result.drift_steps, run.result.kernel_drift};
}

void write_trajectory_csv(std::ostream& os, const TrajectoryResult& result, const nlohmann::json& config) {
  write_header(os, config);
  const auto old = os.precision(17);
  os << "step,time,point_id,split,gd_output,analytic_output\n";
  auto emit = [&](const math::Matrix& gd, const math::Matrix& analytic, const char* split) {
    for (std::size_t s = 0; s < gd.rows(); ++s)
      for (std::size_t i = 0; i < gd.cols(); ++i) {
        os << result.steps[s] << ',' << result.time(s) << ',' << i << ',' << split << ',' << gd(s, i) << ',';
        if (!analytic.empty()) os << analytic(s, i);
        os << '\n';
      }
  };
  emit(result.gd_train, result.analytic_train, "train");
  emit(result.gd_test, result.analytic_test, "test");
  os.precision(old);
}

void write_drift_csv(std::ostream& os, std::span<const DriftRow> rows, const nlohmann::json& config) {
  write_header(os, config);
  const auto old = os.precision(17);
  os << "M,seed,checkpoint,sup_drift\n";
  for (const auto& r : rows) os << r.trees << ',' << r.seed << ',' << r.checkpoint << ',' << r.sup_drift << '\n';
  os.precision(old);
}

}  // namespace tntk::training
