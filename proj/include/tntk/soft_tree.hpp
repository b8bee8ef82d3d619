#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tntk/input_matrix.hpp"
#include "tntk/kernels.hpp"
#include "tntk/math_core.hpp"

namespace tntk::soft_tree {

/// Perfect binary tree of depth d with 1-based breadth-first indexing: the
/// root is node 1, node n has children 2n (left) and 2n + 1 (right), and
/// internal nodes are 1 .. 2^d - 1. Leaf l (1-based) is node 2^d + l - 1.
class TreeTopology {
 public:
  enum class Relation { Unrelated, Left, Right };

  explicit TreeTopology(int depth);

  int depth() const { return depth_; }
  std::size_t internal_count() const { return (std::size_t{1} << depth_) - 1; }
  std::size_t leaf_count() const { return std::size_t{1} << depth_; }

  std::size_t leaf_node(std::size_t leaf) const { return leaf_count() + leaf - 1; }
  // Level of an internal node; the root is level 0.
  static int level(std::size_t node);

  // Left when the leaf sits under 2n, Right when under 2n + 1.
  Relation relation(std::size_t node, std::size_t leaf) const;

  // Root-to-leaf internal nodes, and whether the path turns left at each.
  void path(std::size_t leaf, std::vector<std::size_t>& nodes, std::vector<bool>& left) const;

 private:
  int depth_;
};

enum class TreeStructure { Vanilla, Oblivious };

// g(w, x) = erf(alpha w.x) / 2 + 1/2
double decision(double alpha, std::span<const double> w, std::span<const double> x);
// dg/dp at p = w.x, i.e. alpha exp(-(alpha p)^2) / sqrt(pi)
double decision_derivative(double alpha, std::span<const double> w, std::span<const double> x);

/// M soft trees sharing one topology, with output (1/sqrt M) sum_m sum_l pi_ml mu_ml(x).
///
/// Parameters live in one flat vector with a contiguous block per tree:
///   [ slot 0 weights (F) | slot 1 weights (F) | ... | leaf 1 | ... | leaf 2^d ]
/// A vanilla tree has one weight slot per internal node (slot n - 1 for node
/// n). An oblivious tree has one slot per level, shared by all nodes there.
class SoftTreeEnsemble {
 public:
  SoftTreeEnsemble(std::size_t trees, int depth, std::size_t features, double alpha,
                   TreeStructure structure = TreeStructure::Vanilla);

  // NTK initialization: every weight and leaf i.i.d. N(0, 1). Tree m draws from
  // stream m of `seed`, so the result does not depend on thread scheduling.
  static SoftTreeEnsemble initialize(std::size_t trees, int depth, std::size_t features, double alpha,
                                     std::uint64_t seed,
                                     TreeStructure structure = TreeStructure::Vanilla);

  std::size_t trees() const { return trees_; }
  const TreeTopology& topology() const { return topology_; }
  int depth() const { return topology_.depth(); }
  std::size_t features() const { return features_; }
  double alpha() const { return alpha_; }
  TreeStructure structure() const { return structure_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t weight_slots() const;
  std::size_t slot_of(std::size_t node) const;
  std::size_t tree_parameter_count() const { return weight_slots() * features_ + topology_.leaf_count(); }
  std::size_t parameter_count() const { return trees_ * tree_parameter_count(); }

  std::size_t weight_offset(std::size_t tree, std::size_t node) const;
  std::size_t leaf_offset(std::size_t tree, std::size_t leaf) const;

  std::span<const double> weight(std::size_t tree, std::size_t node) const;
  std::span<double> weight(std::size_t tree, std::size_t node);
  double leaf(std::size_t tree, std::size_t leaf) const { return params_[leaf_offset(tree, leaf)]; }
  double& leaf(std::size_t tree, std::size_t leaf) { return params_[leaf_offset(tree, leaf)]; }

  const std::vector<double>& parameters() const { return params_; }
  void set_parameters(std::vector<double> params);

  double leaf_probability(std::size_t tree, std::size_t leaf, std::span<const double> x) const;

  double forward(std::span<const double> x) const;
  std::vector<double> forward(const InputMatrix& x) const;

  // d f(x) / d theta in the flat parameter layout.
  std::vector<double> jacobian_row(std::span<const double> x) const;
  math::Matrix jacobian(const InputMatrix& x) const;

  // sum_i r_i * d f(x_i) / d theta, the gradient of (1/2) sum (f - y)^2 when r = f - y.
  std::vector<double> vjp(const InputMatrix& x, std::span<const double> r) const;

  // <J(x_i), J(x_j)> accumulated tree by tree without materializing J.
  kernels::GramMatrix empirical_ntk(const InputMatrix& x, std::size_t step = 0) const;

  // Level weights are copied from the leftmost node of each level.
  SoftTreeEnsemble make_oblivious() const;

  nlohmann::json to_json() const;
  static SoftTreeEnsemble from_json(const nlohmann::json& j);

 private:
  std::size_t trees_;
  TreeTopology topology_;
  std::size_t features_;
  double alpha_;
  TreeStructure structure_;
  std::uint64_t seed_ = 0;
  std::vector<double> params_;
};

}  // namespace tntk::soft_tree
