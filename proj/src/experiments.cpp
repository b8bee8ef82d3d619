#include "tntk/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tntk/math_core.hpp"
#include "tntk/soft_tree.hpp"

namespace tntk::experiments {

namespace {

double mean_abs_upper(const math::SymmetricMatrix& a, const math::SymmetricMatrix& b) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i; j < a.size(); ++j) {
      sum += std::abs(a(i, j) - b(i, j));
      ++count;
    }
  return sum / static_cast<double>(count);
}

std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

void require_m_list(const std::vector<std::size_t>& m_list) {
  if (m_list.empty()) throw std::invalid_argument("M list is empty");
  for (std::size_t m : m_list)
    if (m == 0) throw std::invalid_argument("M list entries must be positive");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return math::splitmix64(math::splitmix64(seed ^ math::splitmix64(a)) ^ math::splitmix64(~b));
}

InputMatrix random_unit_inputs(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("input dimension must be positive");
  math::RngState rng(seed, 0);
  std::vector<double> values;
  values.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v = math::gaussian_sample(rng, dim);
    const double norm = math::norm2(v);
    for (double c : v) values.push_back(c / norm);
  }
  return InputMatrix(dim, n, std::move(values));
}

ConvergeResult converge(const ConvergeConfig& config) {
  require_m_list(config.m_list);
  if (config.trials == 0 || config.points == 0) throw std::invalid_argument("converge: trials and points must be positive");
  ConvergeResult out;
  out.mean_error.assign(config.m_list.size(), 0.0);
  const kernels::KernelSpec spec = kernels::Tntk{config.depth, config.alpha};
  for (std::size_t t = 0; t < config.trials; ++t) {
    const auto x = random_unit_inputs(config.points, config.dim, derive_seed(config.seed, 1, t));
    const auto limit = kernels::gram(spec, x).matrix;
    for (std::size_t k = 0; k < config.m_list.size(); ++k) {
      const std::size_t m = config.m_list[k];
      const auto e = soft_tree::SoftTreeEnsemble::initialize(m, config.depth, config.dim, config.alpha,
                                                             derive_seed(config.seed, 2 + t, m));
      const double err = mean_abs_upper(e.empirical_ntk(x).matrix, limit);
      out.rows.push_back({m, t, err});
      out.mean_error[k] += err / static_cast<double>(config.trials);
    }
  }
  if (config.m_list.size() >= 2) out.fit = stats::fit_loglog(as_doubles(config.m_list), out.mean_error);
  return out;
}

std::vector<BetaPoint> beta_sweep(int depth, double alpha, std::size_t trees, std::size_t points, std::uint64_t seed) {
  if (points < 2) throw std::invalid_argument("beta_sweep: need at least two grid points");
  std::vector<double> values{1.0, 0.0};
  for (std::size_t k = 0; k < points; ++k) {
    const double b = std::numbers::pi * static_cast<double>(k) / static_cast<double>(points - 1);
    values.push_back(std::cos(b));
    values.push_back(std::sin(b));
  }
  const InputMatrix x(2, points + 1, std::move(values));
  const auto e = soft_tree::SoftTreeEnsemble::initialize(trees, depth, 2, alpha, seed);
  const auto k = e.empirical_ntk(x).matrix;
  std::vector<BetaPoint> out;
  for (std::size_t j = 0; j < points; ++j) {
    const double b = std::numbers::pi * static_cast<double>(j) / static_cast<double>(points - 1);
    out.push_back({b, k(0, j + 1), kernels::tntk_limit(x.sample(0), x.sample(j + 1), depth, alpha)});
  }
  return out;
}

TrajectoryRun trajectory(const TrajectoryConfig& config) {
  const auto train = random_unit_inputs(config.train_n, config.dim, derive_seed(config.seed, 10));
  const auto test = random_unit_inputs(config.test_n, config.dim, derive_seed(config.seed, 11));
  math::RngState target_rng(derive_seed(config.seed, 12), 0);
  const auto y = math::gaussian_sample(target_rng, config.train_n);
  const auto ensemble = soft_tree::SoftTreeEnsemble::initialize(config.trees, config.depth, config.dim, config.alpha,
                                                                derive_seed(config.seed, 13, config.trees));
  training::TrainingConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.steps = config.steps;
  auto run = training::train_gd(ensemble, train, y, tc, &test);
  training::attach_analytic(run.result, kernels::Tntk{config.depth, config.alpha}, train, y, &test);
  TrajectoryRun out;
  out.max_deviation = training::max_deviation(run.result);
  out.output_range = training::output_range(run.result);
  out.result = std::move(run.result);
  return out;
}

DriftResult drift(const DriftConfig& config) {
  require_m_list(config.m_list);
  if (config.seeds == 0) throw std::invalid_argument("drift: need at least one seed");
  DriftResult out;
  out.final_drift.assign(config.m_list.size(), 0.0);
  training::TrainingConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.steps = config.steps;
  for (std::size_t s = 0; s < config.seeds; ++s) {
    const std::uint64_t run_seed = derive_seed(config.seed, 20, s);
    const auto x = random_unit_inputs(config.n, config.dim, derive_seed(run_seed, 21));
    math::RngState target_rng(derive_seed(run_seed, 22), 0);
    const auto y = math::gaussian_sample(target_rng, config.n);
    for (std::size_t k = 0; k < config.m_list.size(); ++k) {
      const std::size_t m = config.m_list[k];
      const auto e = soft_tree::SoftTreeEnsemble::initialize(m, config.depth, config.dim, config.alpha,
                                                             derive_seed(run_seed, 23, m));
      const auto curve = training::kernel_drift(e, x, y, tc, config.checkpoints);
      for (std::size_t c = 0; c < curve.steps.size(); ++c)
        out.rows.push_back({m, s, curve.steps[c], curve.sup_drift[c]});
      out.final_drift[k] += curve.sup_drift.back() / static_cast<double>(config.seeds);
    }
  }
  if (config.m_list.size() >= 2) out.fit = stats::fit_loglog(as_doubles(config.m_list), out.final_drift);
  return out;
}

std::vector<ObliviousRow> oblivious(const ObliviousConfig& config) {
  require_m_list(config.m_list);
  std::vector<ObliviousRow> rows;
  const kernels::Tntk spec{config.depth, config.alpha};
  for (std::size_t t = 0; t < config.trials; ++t) {
    // Pair k is (sample 2k, sample 2k + 1).
    const auto x = random_unit_inputs(2 * config.pairs, config.dim, derive_seed(config.seed, 30, t));
    std::vector<double> limit(config.pairs);
    for (std::size_t p = 0; p < config.pairs; ++p)
      limit[p] = kernels::tntk_limit(x.sample(2 * p), x.sample(2 * p + 1), spec.depth, spec.alpha);
    for (std::size_t m : config.m_list) {
      const auto vanilla = soft_tree::SoftTreeEnsemble::initialize(m, config.depth, config.dim, config.alpha,
                                                                   derive_seed(config.seed, 31 + t, m));
      const auto k_van = vanilla.empirical_ntk(x).matrix;
      const auto k_obl = vanilla.make_oblivious().empirical_ntk(x).matrix;
      ObliviousRow row{m, t, 0.0, 0.0, 0.0};
      for (std::size_t p = 0; p < config.pairs; ++p) {
        const double v = k_van(2 * p, 2 * p + 1);
        const double o = k_obl(2 * p, 2 * p + 1);
        row.vanilla_error += std::abs(v - limit[p]);
        row.oblivious_error += std::abs(o - limit[p]);
        row.gap += std::abs(o - v);
      }
      const double n = static_cast<double>(config.pairs);
      row.vanilla_error /= n;
      row.oblivious_error /= n;
      row.gap /= n;
      rows.push_back(row);
    }
  }
  return rows;
}

TimingResult timing(const TimingConfig& config) {
  if (config.depths.empty()) throw std::invalid_argument("timing: depth list is empty");
  if (config.trials == 0) throw std::invalid_argument("timing: trials must be positive");
  if (config.kernel != "tntk" && config.kernel != "mlp")
    throw std::invalid_argument("timing: kernel must be tntk or mlp, got '" + config.kernel + "'");
  const auto x = random_unit_inputs(config.n, config.dim, derive_seed(config.seed, 40));
  auto spec_for = [&](int d) -> kernels::KernelSpec {
    if (config.kernel == "tntk") return kernels::Tntk{d, config.alpha};
    return kernels::MlpNtk{d, kernels::Activation::Relu, 1.0};
  };
  TimingResult out;
  std::vector<std::vector<double>> per_depth(config.depths.size());
  std::vector<double> xs, ys;
  double checksum = 0.0;
  for (std::size_t t = 0; t < config.trials; ++t)
    for (std::size_t k = 0; k < config.depths.size(); ++k) {
      const auto spec = spec_for(config.depths[k]);
      const auto start = std::chrono::steady_clock::now();
      const auto g = kernels::gram(spec, x);
      const auto stop = std::chrono::steady_clock::now();
      checksum += g.matrix(0, 0);
      const double sec = std::chrono::duration<double>(stop - start).count();
      out.rows.push_back({config.depths[k], t, sec});
      per_depth[k].push_back(sec);
      xs.push_back(config.depths[k]);
      ys.push_back(sec);
    }
  if (!std::isfinite(checksum)) throw std::runtime_error("timing: non-finite kernel value");
  double overall = 0.0;
  for (const auto& v : per_depth) {
    out.mean_seconds.push_back(stats::mean(v));
    out.std_seconds.push_back(stats::stddev(v));
    overall += out.mean_seconds.back() / static_cast<double>(per_depth.size());
  }
  if (xs.size() >= 3 && config.depths.size() >= 2) {
    out.fit = stats::fit_line(xs, ys);
    const auto [lo, hi] = std::minmax_element(config.depths.begin(), config.depths.end());
    out.relative_change = std::abs(out.fit.slope) * static_cast<double>(*hi - *lo) / overall;
  }
  return out;
}

}  // namespace tntk::experiments
