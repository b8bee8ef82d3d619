// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here; the exit status is nonzero when any selected criterion fails.
//
//   tntk_acceptance            run everything
//   tntk_acceptance 3 4 9      run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tntk/data.hpp"
#include "tntk/diagnostics.hpp"
#include "tntk/experiments.hpp"
#include "tntk/kernels.hpp"
#include "tntk/math_core.hpp"
#include "tntk/parallel.hpp"
#include "tntk/soft_tree.hpp"
#include "tntk/stats.hpp"

#ifndef TNTK_TEST_DATA_DIR
#define TNTK_TEST_DATA_DIR "tests/data"
#endif

using namespace tntk;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Closed-form T and Tdot against Monte Carlo.

constexpr std::size_t kMcSamples = 10'000'000;
constexpr double kMcSigmas = 3.0;

Outcome closed_form_vs_monte_carlo() {
  const std::vector<double> alphas{0.5, 2.0, 8.0};
  const auto x = experiments::random_unit_inputs(40, 5, 101);
  std::vector<double> z(20 * alphas.size() * 2, 0.0);
  parallel_for(20, [&](std::size_t pair) {
    const double rho = math::dot(x.sample(2 * pair), x.sample(2 * pair + 1));
    const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    math::RngState rng(202, pair);
    std::vector<double> s_t(alphas.size()), ss_t(alphas.size()), s_d(alphas.size()), ss_d(alphas.size());
    for (std::size_t k = 0; k < kMcSamples; ++k) {
      // (p, q) has the joint law of (u.x_i, u.x_j) for u ~ N(0, I).
      const double g1 = rng.next_gaussian();
      const double g2 = rng.next_gaussian();
      const double p = g1;
      const double q = rho * g1 + c * g2;
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        const double al = alphas[a];
        const double t = (0.5 * std::erf(al * p) + 0.5) * (0.5 * std::erf(al * q) + 0.5);
        const double d = al * al / std::numbers::pi * std::exp(-al * al * (p * p + q * q));
        s_t[a] += t;
        ss_t[a] += t * t;
        s_d[a] += d;
        ss_d[a] += d * d;
      }
    }
    const double n = static_cast<double>(kMcSamples);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const double mt = s_t[a] / n, md = s_d[a] / n;
      const double se_t = std::sqrt((ss_t[a] / n - mt * mt) / (n - 1));
      const double se_d = std::sqrt((ss_d[a] / n - md * md) / (n - 1));
      const double ct = kernels::sigma_pair_expect(rho, 1.0, 1.0, alphas[a]);
      const double cd = kernels::sigma_dot_pair_expect(rho, 1.0, 1.0, alphas[a]);
      z[(pair * alphas.size() + a) * 2] = std::abs(ct - mt) / se_t;
      z[(pair * alphas.size() + a) * 2 + 1] = std::abs(cd - md) / se_d;
    }
  });
  double worst = 0.0;
  std::size_t over = 0;
  for (double v : z) {
    worst = std::max(worst, v);
    over += v > kMcSigmas;
  }
  return {over == 0, fmt("%zu comparisons, worst |diff|/SE = %.3f, %zu beyond %.0f SE", z.size(), worst, over, kMcSigmas)};
}

// ---------------------------------------------------------------------------
// 2. Empirical NTK at initialization converges at rate M^-1/2.

Outcome empirical_ntk_convergence() {
  experiments::ConvergeConfig cfg;  // d=3, alpha=2, 50 unit points in R^5, 10 trials
  const auto r = experiments::converge(cfg);
  std::ostringstream errs;
  for (std::size_t k = 0; k < cfg.m_list.size(); ++k) errs << (k ? " " : "") << fmt("%zu:%.4f", cfg.m_list[k], r.mean_error[k]);
  const bool pass = std::abs(r.fit.slope + 0.5) <= 0.1;
  return {pass, fmt("log-log slope %.3f (target -0.5 +/- 0.1); mean errors %s", r.fit.slope, errs.str().c_str())};
}

// ---------------------------------------------------------------------------
// 3. Analytic Jacobian against central differences.

constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-6;

double jacobian_error(const soft_tree::SoftTreeEnsemble& e, std::span<const double> x) {
  const auto analytic = e.jacobian_row(x);
  auto probe = e;
  std::vector<double> params = e.parameters();
  double diff = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double keep = params[p];
    params[p] = keep + kFdStep;
    probe.set_parameters(params);
    const double up = probe.forward(x);
    params[p] = keep - kFdStep;
    probe.set_parameters(params);
    const double down = probe.forward(x);
    params[p] = keep;
    const double fd = (up - down) / (2 * kFdStep);
    diff = std::max(diff, std::abs(fd - analytic[p]));
    scale = std::max(scale, std::abs(fd));
  }
  return diff / std::max(scale, 1e-300);
}

Outcome gradient_correctness() {
  math::RngState rng(303, 0);
  double worst[2] = {0.0, 0.0};
  for (int structure = 0; structure < 2; ++structure)
    for (int instance = 0; instance < 20; ++instance) {
      const int depth = 1 + static_cast<int>(rng.next_below(3));
      const std::size_t trees = 1 + rng.next_below(4);
      const double alpha = 0.5 + 3.5 * rng.next_uniform();
      auto e = soft_tree::SoftTreeEnsemble::initialize(trees, depth, 4, alpha, rng.next_u64());
      if (structure == 1) e = e.make_oblivious();
      const auto x = experiments::random_unit_inputs(1, 4, rng.next_u64());
      worst[structure] = std::max(worst[structure], jacobian_error(e, x.sample(0)));
    }
  const bool pass = worst[0] <= kFdRelTol && worst[1] <= kFdRelTol;
  return {pass, fmt("worst relative error vanilla %.2e, oblivious %.2e (limit %.0e, 20 instances each)", worst[0],
                    worst[1], kFdRelTol)};
}

// ---------------------------------------------------------------------------
// 4. Depth-one TNTK is twice the one-hidden-layer erf NTK.

Outcome depth_one_equivalence() {
  math::RngState rng(404, 0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto x = experiments::random_unit_inputs(2, 5, rng.next_u64());
    const double alpha = std::exp(std::log(0.5) + (std::log(64.0) - std::log(0.5)) * rng.next_uniform());
    const double t = kernels::tntk_limit(x.sample(0), x.sample(1), 1, alpha);
    const double m = kernels::mlp_ntk(x.sample(0), x.sample(1), {1, kernels::Activation::ScaledErf, alpha});
    worst = std::max(worst, std::abs(t - 2.0 * m));
  }
  return {worst <= 1e-12, fmt("max |tntk(d=1) - 2 mlp(L=1)| = %.2e over 100 pairs (limit 1e-12)", worst)};
}

// ---------------------------------------------------------------------------
// 5. Limiting Gram matrix is positive definite on distinct unit inputs.

Outcome positive_definite() {
  const auto x = experiments::random_unit_inputs(50, 5, 505);
  double smallest = std::numeric_limits<double>::infinity();
  std::string where;
  for (int d : {1, 3, 10, 29})
    for (double a : {0.5, 2.0, 8.0, 64.0}) {
      const auto eig = math::eigh(kernels::gram(kernels::Tntk{d, a}, x).matrix);
      if (eig.eigenvalues.front() < smallest) {
        smallest = eig.eigenvalues.front();
        where = fmt("d=%d alpha=%g", d, a);
      }
    }
  return {smallest > 1e-10, fmt("min eigenvalue %.3e at %s over 16 settings (limit > 1e-10)", smallest, where.c_str())};
}

// ---------------------------------------------------------------------------
// 6. Kernel drift during training shrinks like M^-1/2.

Outcome kernel_constancy() {
  experiments::DriftConfig cfg;  // 500 steps, lr 0.1, d=3, alpha=2, N=10, 5 seeds
  const auto r = experiments::drift(cfg);
  std::ostringstream d;
  for (std::size_t k = 0; k < cfg.m_list.size(); ++k) d << (k ? " " : "") << fmt("%zu:%.4f", cfg.m_list[k], r.final_drift[k]);
  const bool pass = std::abs(r.fit.slope + 0.5) <= 0.15;
  return {pass, fmt("log-log slope %.3f (target -0.5 +/- 0.15); sup drift %s", r.fit.slope, d.str().c_str())};
}

// ---------------------------------------------------------------------------
// 7. Gradient descent follows the kernel gradient-flow trajectory.

constexpr std::size_t kTrajectorySteps = 500;
constexpr std::size_t kTrajectorySeeds = 5;

Outcome trajectory_tracking() {
  const std::vector<std::size_t> ms{16, 256, 1024};
  std::vector<double> dev(ms.size(), 0.0), range(ms.size(), 0.0);
  for (std::size_t k = 0; k < ms.size(); ++k)
    for (std::size_t s = 0; s < kTrajectorySeeds; ++s) {
      experiments::TrajectoryConfig cfg;
      cfg.trees = ms[k];
      cfg.steps = kTrajectorySteps;
      cfg.seed = s;
      const auto r = experiments::trajectory(cfg);
      dev[k] += r.max_deviation / kTrajectorySeeds;
      range[k] += r.output_range / kTrajectorySeeds;
    }
  const bool monotone = dev[0] > dev[1] && dev[1] > dev[2];
  const double ratio = dev[2] / range[2];
  return {monotone && ratio < 0.10,
          fmt("max deviation M=16 %.4f, M=256 %.4f, M=1024 %.4f (%s); M=1024 is %.1f%% of output range %.3f (limit 10%%)",
              dev[0], dev[1], dev[2], monotone ? "decreasing" : "NOT decreasing", 100 * ratio, range[2])};
}

// ---------------------------------------------------------------------------
// 8. Oblivious ensembles approach the same kernel.

Outcome oblivious_equivalence() {
  experiments::ObliviousConfig cfg;
  cfg.m_list = {4096};
  const auto rows = experiments::oblivious(cfg);  // 50 pairs, 5 trials
  double van = 0.0, obl = 0.0;
  for (const auto& r : rows) {
    van += r.vanilla_error / static_cast<double>(rows.size());
    obl += r.oblivious_error / static_cast<double>(rows.size());
  }
  return {obl <= 2.0 * van, fmt("M=4096 mean |oblivious - limit| %.4f vs 2 x mean |vanilla - limit| %.4f (%zu trials)", obl,
                                2.0 * van, rows.size())};
}

// ---------------------------------------------------------------------------
// 9. Deep trees flatten the normalized kernel.

Outcome degeneracy() {
  std::vector<double> rho;
  for (int k = 0; k <= 200; ++k) rho.push_back(-1.0 + 2.0 * k / 200.0);
  const std::vector<int> depths{3, 29};
  const auto table = kernels::degeneracy_profile(depths, 2.0, rho);
  const double s3 = kernels::profile_spread(table, table.curves[0], -1.0, 0.9);
  const double s29 = kernels::profile_spread(table, table.curves[1], -1.0, 0.9);
  return {s29 < s3, fmt("spread over rho in [-1, 0.9]: d=3 %.4f, d=29 %.4f", s3, s29)};
}

// ---------------------------------------------------------------------------
// 10. Iris spot check under 4-fold CV with validation tuning.

constexpr double kIrisTntk = 97.973;
constexpr double kIrisRbf = 96.622;
constexpr double kIrisBand = 2.5;
constexpr int kIrisSeeds = 10;

Outcome iris_benchmark() {
  const auto raw = data::load_csv(std::string(TNTK_TEST_DATA_DIR) + "/iris.csv");
  auto silence = set_warning_handler([](const std::string&) {});
  const auto x = data::preprocess(raw);
  const auto x_std = data::preprocess(raw, {1.0, true});
  std::vector<kernels::KernelSpec> rbf;
  for (double g : data::rbf_gamma_grid()) rbf.push_back(kernels::Rbf{g});
  const auto tntk = data::tntk_depth_grid(1.0);
  double t = 0.0, r = 0.0, t_std = 0.0, r_std = 0.0;
  for (int s = 0; s < kIrisSeeds; ++s) {
    const auto plan = data::make_cv_plan(x, s);
    t += data::tune_and_evaluate(x, tntk, plan).mean_accuracy / kIrisSeeds;
    r += data::tune_and_evaluate(x, rbf, plan).mean_accuracy / kIrisSeeds;
    t_std += data::tune_and_evaluate(x_std, tntk, plan).mean_accuracy / kIrisSeeds;
    r_std += data::tune_and_evaluate(x_std, rbf, plan).mean_accuracy / kIrisSeeds;
  }
  set_warning_handler(silence);
  const bool pass = std::abs(t - kIrisTntk) <= kIrisBand && std::abs(r - kIrisRbf) <= kIrisBand;
  return {pass, fmt("TNTK alpha=1 %.3f (target %.3f +/- %.1f), RBF %.3f (target %.3f +/- %.1f), mean of seeds 0..%d; "
                    "with z-scored features: TNTK %.3f, RBF %.3f",
                    t, kIrisTntk, kIrisBand, r, kIrisRbf, kIrisBand, kIrisSeeds - 1, t_std, r_std)};
}

// ---------------------------------------------------------------------------
// 11. Gram time: flat in depth for TNTK, growing for MLP-NTK.

constexpr double kFlatRelativeChange = 0.10;
constexpr double kSlopePValue = 0.05;

Outcome timing_shape() {
  experiments::TimingConfig cfg;  // N=300, F=10, 10 trials
  cfg.kernel = "tntk";
  const auto t = experiments::timing(cfg);
  cfg.kernel = "mlp";
  const auto m = experiments::timing(cfg);
  const bool flat = t.relative_change < kFlatRelativeChange;
  const bool grows = m.fit.slope > 0.0 && m.fit.p_value < kSlopePValue;
  return {flat && grows,
          fmt("TNTK slope %.2e s/depth, change over depth range %.1f%% of mean (limit %.0f%%), p=%.3f; "
              "MLP slope %.2e s/layer, p=%.2e (limit %.2f)",
              t.fit.slope, 100 * t.relative_change, 100 * kFlatRelativeChange, t.fit.p_value, m.fit.slope,
              m.fit.p_value, kSlopePValue)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "closed-form T and Tdot match Monte Carlo", closed_form_vs_monte_carlo},
      {2, "empirical NTK converges to the limit at rate M^-1/2", empirical_ntk_convergence},
      {3, "analytic Jacobian matches central differences", gradient_correctness},
      {4, "depth-one TNTK equals twice the one-layer erf MLP NTK", depth_one_equivalence},
      {5, "limiting Gram matrix is positive definite", positive_definite},
      {6, "kernel drift during training scales as M^-1/2", kernel_constancy},
      {7, "gradient descent tracks the analytic trajectory", trajectory_tracking},
      {8, "oblivious ensembles converge to the same kernel", oblivious_equivalence},
      {9, "deep trees make the normalized kernel degenerate", degeneracy},
      {10, "iris accuracy under 4-fold CV", iris_benchmark},
      {11, "Gram time flat in depth for TNTK, rising for MLP-NTK", timing_shape},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2d  %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), sec);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
