#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tntk/input_matrix.hpp"
#include "tntk/math_core.hpp"

namespace tntk::kernels {

// Limiting kernel of an infinite ensemble of perfect binary soft trees.
struct Tntk {
  int depth = 1;
  double alpha = 1.0;
};

enum class Activation { ScaledErf, Relu };

// Limiting NTK of an MLP with `hidden_layers` infinitely wide hidden layers.
// `alpha` only matters for ScaledErf, whose activation is erf(alpha z)/2 + 1/2.
struct MlpNtk {
  int hidden_layers = 1;
  Activation activation = Activation::Relu;
  double alpha = 1.0;
};

struct Rbf {
  double gamma = 1.0;
};

using KernelSpec = std::variant<Tntk, MlpNtk, Rbf>;

// Throws std::invalid_argument when a field is out of range.
void validate(const KernelSpec& spec);

// Short human-readable form, e.g. "tntk(depth=3,alpha=2)".
std::string describe(const KernelSpec& spec);

// Parses "tntk:depth=3,alpha=2", "mlp:layers=4,activation=relu",
// "mlp:layers=1,activation=erf,alpha=2" or "rbf:gamma=0.5".
KernelSpec parse_kernel_spec(const std::string& text);

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

bool operator==(const Tntk& a, const Tntk& b);
bool operator==(const MlpNtk& a, const MlpNtk& b);
bool operator==(const Rbf& a, const Rbf& b);

// E[sigma(u.xi) sigma(u.xj)] for u ~ N(0, I) and sigma(p) = erf(alpha p)/2 + 1/2.
double sigma_pair_expect(double s_ij, double s_ii, double s_jj, double alpha);
// E[sigma'(u.xi) sigma'(u.xj)] for the same decision function.
double sigma_dot_pair_expect(double s_ij, double s_ii, double s_jj, double alpha);

// Limiting TNTK from the three inner products of a pair.
double tntk_from_inner(double s_ij, double s_ii, double s_jj, int depth, double alpha);
double tntk_limit(std::span<const double> xi, std::span<const double> xj, int depth, double alpha);

double mlp_ntk_from_inner(double s_ij, double s_ii, double s_jj, const MlpNtk& spec);
double mlp_ntk(std::span<const double> xi, std::span<const double> xj, const MlpNtk& spec);

double rbf(std::span<const double> xi, std::span<const double> xj, double gamma);

double kernel_value(const KernelSpec& spec, std::span<const double> xi, std::span<const double> xj);

struct Limiting {};
struct Empirical {
  std::size_t trees = 0;
  std::uint64_t seed = 0;
  std::size_t step = 0;
};
using Provenance = std::variant<Limiting, Empirical>;

struct GramMatrix {
  math::SymmetricMatrix matrix;
  KernelSpec spec;
  Provenance provenance;
};

// Upper triangle via the pairwise kernel, mirrored; rows run in parallel.
GramMatrix gram(const KernelSpec& spec, const InputMatrix& x);

// K(a_i, b_j) as an a.samples() x b.samples() matrix.
math::Matrix cross_gram(const KernelSpec& spec, const InputMatrix& a, const InputMatrix& b);

// Kernel profiles over unit inputs with inner product rho. Every curve
// is normalized by its value at rho = 1.
struct ProfileCurve {
  std::string panel;  // "T", "Tdot", "tntk_alpha" or "tntk_depth"
  double alpha = 0.0;
  int depth = 0;
  std::vector<double> values;
};

struct ProfileTable {
  std::vector<double> rho;
  std::vector<ProfileCurve> curves;
};

// Normalized Theta^(d)(rho) / Theta^(d)(1) for each depth at fixed alpha.
ProfileTable degeneracy_profile(std::span<const int> depths, double alpha,
                                std::span<const double> rho_grid);

// Normalized T, Tdot and Theta^(depth) for each alpha.
ProfileTable expectation_profile(std::span<const double> alphas, int depth,
                                 std::span<const double> rho_grid);

// max - min of a curve restricted to rho in [lo, hi].
double profile_spread(const ProfileTable& table, const ProfileCurve& curve, double lo, double hi);

// Serialization. CSV: one "# {json}" header line with spec, provenance, n and
// the optional `config`, then n comma-separated rows at 17 significant digits.
// JSON: {"config", "spec", "provenance", "n", "entries"} with row-major entries.
void write_gram_csv(std::ostream& os, const GramMatrix& g, const nlohmann::json& config = {});
void write_gram_json(std::ostream& os, const GramMatrix& g, const nlohmann::json& config = {});
// Detects the format from the first character.
GramMatrix read_gram(std::istream& is);

nlohmann::json to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

}  // namespace tntk::kernels
