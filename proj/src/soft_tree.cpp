#include "tntk/soft_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tntk/parallel.hpp"

namespace tntk::soft_tree {

namespace {

// Trees are processed in fixed blocks; partial results are reduced in block
// order so the sums do not depend on the worker count.
constexpr std::size_t kTreeBlock = 32;

const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);

// Per-node quantities of one tree at one input. Arrays are indexed by node
// number (1 .. 2^(d+1) - 1); entry 0 is unused.
struct TreeScratch {
  std::vector<double> slot_p;
  std::vector<double> g;
  std::vector<double> g_dot;
  std::vector<double> reach;  // probability of arriving at the node
  std::vector<double> value;  // leaf values averaged over the subtree below
  std::vector<double> coeff;  // df/dp_n, already divided by sqrt(M)

  explicit TreeScratch(const SoftTreeEnsemble& e)
      : slot_p(e.weight_slots()),
        g(2 * e.topology().leaf_count()),
        g_dot(g.size()),
        reach(g.size()),
        value(g.size()),
        coeff(g.size()) {}
};

void evaluate_tree(const SoftTreeEnsemble& e, std::size_t m, std::span<const double> x, TreeScratch& s,
                   bool gradients) {
  const std::size_t internal = e.topology().internal_count();
  const std::size_t leaves = e.topology().leaf_count();
  const double alpha = e.alpha();
  const std::size_t block = m * e.tree_parameter_count();
  const auto& params = e.parameters();

  for (std::size_t slot = 0; slot < s.slot_p.size(); ++slot)
    s.slot_p[slot] = math::dot({params.data() + block + slot * e.features(), e.features()}, x);

  for (std::size_t n = 1; n <= internal; ++n) {
    const double p = alpha * s.slot_p[e.slot_of(n)];
    s.g[n] = 0.5 * math::erf(p) + 0.5;
    if (gradients) s.g_dot[n] = alpha * std::exp(-p * p) * kInvSqrtPi;
  }

  s.reach[1] = 1.0;
  for (std::size_t n = 1; n <= internal; ++n) {
    s.reach[2 * n] = s.reach[n] * s.g[n];
    s.reach[2 * n + 1] = s.reach[n] * (1.0 - s.g[n]);
  }
  if (!gradients) return;

  const double* pi = params.data() + block + e.weight_slots() * e.features();
  for (std::size_t l = 0; l < leaves; ++l) s.value[leaves + l] = pi[l];
  for (std::size_t n = internal; n >= 1; --n)
    s.value[n] = s.g[n] * s.value[2 * n] + (1.0 - s.g[n]) * s.value[2 * n + 1];

  // sum_l pi_l S_{n,l} factors into reach(n) (V(2n) - V(2n+1)): the path
  // product without node n's own factor, so nothing is divided by g.
  const double scale = 1.0 / std::sqrt(static_cast<double>(e.trees()));
  for (std::size_t n = 1; n <= internal; ++n)
    s.coeff[n] = scale * s.reach[n] * (s.value[2 * n] - s.value[2 * n + 1]) * s.g_dot[n];
}

double tree_output(const SoftTreeEnsemble& e, std::size_t m, const TreeScratch& s) {
  const std::size_t leaves = e.topology().leaf_count();
  const double* pi = e.parameters().data() + m * e.tree_parameter_count() + e.weight_slots() * e.features();
  double sum = 0.0;
  for (std::size_t l = 0; l < leaves; ++l) sum += pi[l] * s.reach[leaves + l];
  return sum;
}

// Adds r * df_m(x)/dtheta_m into the tree's block of `out`.
void accumulate_tree_gradient(const SoftTreeEnsemble& e, std::size_t m, std::span<const double> x,
                              const TreeScratch& s, double r, std::span<double> out) {
  const std::size_t internal = e.topology().internal_count();
  const std::size_t leaves = e.topology().leaf_count();
  const std::size_t f = e.features();
  const std::size_t block = m * e.tree_parameter_count();
  for (std::size_t n = 1; n <= internal; ++n) {
    const double c = r * s.coeff[n];
    double* w = out.data() + block + e.slot_of(n) * f;
    for (std::size_t k = 0; k < f; ++k) w[k] += c * x[k];
  }
  const double scale = r / std::sqrt(static_cast<double>(e.trees()));
  double* pi = out.data() + block + e.weight_slots() * f;
  for (std::size_t l = 0; l < leaves; ++l) pi[l] += scale * s.reach[leaves + l];
}

void check_features(const SoftTreeEnsemble& e, std::size_t f) {
  if (f != e.features())
    throw std::invalid_argument("soft tree: input has " + std::to_string(f) + " features, ensemble expects " +
                                std::to_string(e.features()));
}

std::size_t block_count(std::size_t trees) { return (trees + kTreeBlock - 1) / kTreeBlock; }

}  // namespace

TreeTopology::TreeTopology(int depth) : depth_(depth) {
  if (depth < 1 || depth > 24) throw std::invalid_argument("tree depth must lie in [1, 24]");
}

int TreeTopology::level(std::size_t node) {
  int k = 0;
  while (node > 1) {
    node >>= 1;
    ++k;
  }
  return k;
}

TreeTopology::Relation TreeTopology::relation(std::size_t node, std::size_t leaf) const {
  std::size_t child = leaf_node(leaf);
  while (child > 1) {
    const std::size_t parent = child >> 1;
    if (parent == node) return (child & 1) ? Relation::Right : Relation::Left;
    child = parent;
  }
  return Relation::Unrelated;
}

void TreeTopology::path(std::size_t leaf, std::vector<std::size_t>& nodes, std::vector<bool>& left) const {
  nodes.assign(depth_, 0);
  left.assign(depth_, false);
  std::size_t child = leaf_node(leaf);
  for (int k = depth_ - 1; k >= 0; --k) {
    nodes[k] = child >> 1;
    left[k] = (child & 1) == 0;
    child >>= 1;
  }
}

double decision(double alpha, std::span<const double> w, std::span<const double> x) {
  return 0.5 * math::erf(alpha * math::dot(w, x)) + 0.5;
}

double decision_derivative(double alpha, std::span<const double> w, std::span<const double> x) {
  const double p = alpha * math::dot(w, x);
  return alpha * std::exp(-p * p) * kInvSqrtPi;
}

SoftTreeEnsemble::SoftTreeEnsemble(std::size_t trees, int depth, std::size_t features, double alpha,
                                   TreeStructure structure)
    : trees_(trees), topology_(depth), features_(features), alpha_(alpha), structure_(structure) {
  if (trees == 0) throw std::invalid_argument("ensemble needs at least one tree");
  if (features == 0) throw std::invalid_argument("ensemble needs at least one feature");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive and finite");
  params_.assign(parameter_count(), 0.0);
}

SoftTreeEnsemble SoftTreeEnsemble::initialize(std::size_t trees, int depth, std::size_t features, double alpha,
                                              std::uint64_t seed, TreeStructure structure) {
  SoftTreeEnsemble e(trees, depth, features, alpha, structure);
  e.seed_ = seed;
  const std::size_t per_tree = e.tree_parameter_count();
  parallel_for(trees, [&](std::size_t m) {
    math::RngState rng(seed, m);
    for (std::size_t k = 0; k < per_tree; ++k) e.params_[m * per_tree + k] = rng.next_gaussian();
  });
  return e;
}

std::size_t SoftTreeEnsemble::weight_slots() const {
  return structure_ == TreeStructure::Vanilla ? topology_.internal_count()
                                              : static_cast<std::size_t>(topology_.depth());
}

std::size_t SoftTreeEnsemble::slot_of(std::size_t node) const {
  return structure_ == TreeStructure::Vanilla ? node - 1 : static_cast<std::size_t>(TreeTopology::level(node));
}

std::size_t SoftTreeEnsemble::weight_offset(std::size_t tree, std::size_t node) const {
  if (tree >= trees_ || node < 1 || node > topology_.internal_count())
    throw std::out_of_range("weight index out of range");
  return tree * tree_parameter_count() + slot_of(node) * features_;
}

std::size_t SoftTreeEnsemble::leaf_offset(std::size_t tree, std::size_t leaf) const {
  if (tree >= trees_ || leaf < 1 || leaf > topology_.leaf_count()) throw std::out_of_range("leaf index out of range");
  return tree * tree_parameter_count() + weight_slots() * features_ + leaf - 1;
}

std::span<const double> SoftTreeEnsemble::weight(std::size_t tree, std::size_t node) const {
  return {params_.data() + weight_offset(tree, node), features_};
}

std::span<double> SoftTreeEnsemble::weight(std::size_t tree, std::size_t node) {
  return {params_.data() + weight_offset(tree, node), features_};
}

void SoftTreeEnsemble::set_parameters(std::vector<double> params) {
  if (params.size() != parameter_count())
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) + ", expected " +
                                std::to_string(parameter_count()));
  params_ = std::move(params);
}

double SoftTreeEnsemble::leaf_probability(std::size_t tree, std::size_t leaf, std::span<const double> x) const {
  check_features(*this, x.size());
  std::vector<std::size_t> nodes;
  std::vector<bool> left;
  topology_.path(leaf, nodes, left);
  double mu = 1.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double g = decision(alpha_, weight(tree, nodes[k]), x);
    mu *= left[k] ? g : 1.0 - g;
  }
  return mu;
}

double SoftTreeEnsemble::forward(std::span<const double> x) const {
  check_features(*this, x.size());
  TreeScratch s(*this);
  double sum = 0.0;
  for (std::size_t m = 0; m < trees_; ++m) {
    evaluate_tree(*this, m, x, s, false);
    sum += tree_output(*this, m, s);
  }
  return sum / std::sqrt(static_cast<double>(trees_));
}

std::vector<double> SoftTreeEnsemble::forward(const InputMatrix& x) const {
  check_features(*this, x.features());
  std::vector<double> out(x.samples());
  parallel_for(x.samples(), [&](std::size_t i) { out[i] = forward(x.sample(i)); });
  return out;
}

std::vector<double> SoftTreeEnsemble::jacobian_row(std::span<const double> x) const {
  check_features(*this, x.size());
  std::vector<double> row(parameter_count(), 0.0);
  TreeScratch s(*this);
  for (std::size_t m = 0; m < trees_; ++m) {
    evaluate_tree(*this, m, x, s, true);
    accumulate_tree_gradient(*this, m, x, s, 1.0, row);
  }
  return row;
}

math::Matrix SoftTreeEnsemble::jacobian(const InputMatrix& x) const {
  check_features(*this, x.features());
  math::Matrix j(x.samples(), parameter_count());
  parallel_for(x.samples(), [&](std::size_t i) {
    const auto row = jacobian_row(x.sample(i));
    std::copy(row.begin(), row.end(), j.row(i).begin());
  });
  return j;
}

std::vector<double> SoftTreeEnsemble::vjp(const InputMatrix& x, std::span<const double> r) const {
  check_features(*this, x.features());
  if (r.size() != x.samples()) throw std::invalid_argument("vjp: residual length does not match sample count");
  std::vector<double> out(parameter_count(), 0.0);
  parallel_for(block_count(trees_), [&](std::size_t b) {
    TreeScratch s(*this);
    const std::size_t end = std::min(trees_, (b + 1) * kTreeBlock);
    for (std::size_t m = b * kTreeBlock; m < end; ++m)
      for (std::size_t i = 0; i < x.samples(); ++i) {
        evaluate_tree(*this, m, x.sample(i), s, true);
        accumulate_tree_gradient(*this, m, x.sample(i), s, r[i], out);
      }
  });
  return out;
}

kernels::GramMatrix SoftTreeEnsemble::empirical_ntk(const InputMatrix& x, std::size_t step) const {
  check_features(*this, x.features());
  const std::size_t n = x.samples();
  if (n == 0) throw std::invalid_argument("empirical_ntk: no samples");
  const std::size_t slots = weight_slots();
  const std::size_t leaves = topology_.leaf_count();
  const double leaf_scale = 1.0 / std::sqrt(static_cast<double>(trees_));

  std::vector<double> inner(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) inner[i * n + j] = math::dot(x.sample(i), x.sample(j));

  const std::size_t blocks = block_count(trees_);
  std::vector<std::vector<double>> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    TreeScratch s(*this);
    std::vector<double> slot_coeff(n * slots);
    std::vector<double> mu(n * leaves);
    auto& acc = partial[b];
    acc.assign(n * n, 0.0);
    const std::size_t end = std::min(trees_, (b + 1) * kTreeBlock);
    for (std::size_t m = b * kTreeBlock; m < end; ++m) {
      std::fill(slot_coeff.begin(), slot_coeff.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        evaluate_tree(*this, m, x.sample(i), s, true);
        for (std::size_t node = 1; node <= topology_.internal_count(); ++node)
          slot_coeff[i * slots + slot_of(node)] += s.coeff[node];
        for (std::size_t l = 0; l < leaves; ++l) mu[i * leaves + l] = leaf_scale * s.reach[leaves + l];
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          double w = 0.0;
          for (std::size_t k = 0; k < slots; ++k) w += slot_coeff[i * slots + k] * slot_coeff[j * slots + k];
          double p = 0.0;
          for (std::size_t l = 0; l < leaves; ++l) p += mu[i * leaves + l] * mu[j * leaves + l];
          acc[i * n + j] += w * inner[i * n + j] + p;
        }
    }
  });

  std::vector<double> entries(n * n, 0.0);
  for (const auto& acc : partial)
    for (std::size_t k = 0; k < entries.size(); ++k) entries[k] += acc[k];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) entries[i * n + j] = entries[j * n + i];
  return kernels::GramMatrix{math::SymmetricMatrix(n, std::move(entries)), kernels::Tntk{depth(), alpha_},
                             kernels::Empirical{trees_, seed_, step}};
}

SoftTreeEnsemble SoftTreeEnsemble::make_oblivious() const {
  if (structure_ != TreeStructure::Vanilla) throw std::invalid_argument("make_oblivious: ensemble is already oblivious");
  SoftTreeEnsemble out(trees_, depth(), features_, alpha_, TreeStructure::Oblivious);
  out.seed_ = seed_;
  for (std::size_t m = 0; m < trees_; ++m) {
    for (int k = 0; k < depth(); ++k) {
      const std::size_t leftmost = std::size_t{1} << k;
      const auto src = weight(m, leftmost);
      std::copy(src.begin(), src.end(), out.weight(m, leftmost).begin());
    }
    for (std::size_t l = 1; l <= topology_.leaf_count(); ++l) out.leaf(m, l) = leaf(m, l);
  }
  return out;
}

nlohmann::json SoftTreeEnsemble::to_json() const {
  return nlohmann::json{{"trees", trees_},
                        {"depth", depth()},
                        {"features", features_},
                        {"alpha", alpha_},
                        {"structure", structure_ == TreeStructure::Vanilla ? "vanilla" : "oblivious"},
                        {"seed", seed_},
                        {"params", params_}};
}

SoftTreeEnsemble SoftTreeEnsemble::from_json(const nlohmann::json& j) {
  const auto structure_name = j.at("structure").get<std::string>();
  if (structure_name != "vanilla" && structure_name != "oblivious")
    throw std::invalid_argument("unknown tree structure '" + structure_name + "'");
  SoftTreeEnsemble e(j.at("trees").get<std::size_t>(), j.at("depth").get<int>(), j.at("features").get<std::size_t>(),
                     j.at("alpha").get<double>(),
                     structure_name == "vanilla" ? TreeStructure::Vanilla : TreeStructure::Oblivious);
  e.seed_ = j.at("seed").get<std::uint64_t>();
  e.set_parameters(j.at("params").get<std::vector<double>>());
  return e;
}

}  // namespace tntk::soft_tree
