#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "tntk/experiments.hpp"
#include "tntk/parallel.hpp"
#include "tntk/soft_tree.hpp"

using namespace tntk;
using namespace tntk::soft_tree;
using doctest::Approx;

namespace {

// Tree m of the ensemble rewritten as a PlainTree.
oracle::PlainTree plain(const SoftTreeEnsemble& e, std::size_t m) {
  oracle::PlainTree t{e.depth(), e.alpha(), {}, {}};
  for (std::size_t n = 1; n <= e.topology().internal_count(); ++n) {
    const auto w = e.weight(m, n);
    t.w.emplace_back(w.begin(), w.end());
  }
  for (std::size_t l = 1; l <= e.topology().leaf_count(); ++l) t.pi.push_back(e.leaf(m, l));
  return t;
}

double ensemble_by_oracle(const SoftTreeEnsemble& e, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t m = 0; m < e.trees(); ++m) s += plain(e, m)(x);
  return s / std::sqrt(double(e.trees()));
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("topology indexing") {
  TreeTopology t(3);
  CHECK(t.internal_count() == 7);
  CHECK(t.leaf_count() == 8);
  CHECK(t.leaf_node(1) == 8);
  CHECK(t.leaf_node(8) == 15);
  CHECK(TreeTopology::level(1) == 0);
  CHECK(TreeTopology::level(3) == 1);
  CHECK(TreeTopology::level(7) == 2);
  using R = TreeTopology::Relation;
  CHECK(t.relation(1, 1) == R::Left);
  CHECK(t.relation(1, 5) == R::Right);
  CHECK(t.relation(2, 3) == R::Right);
  CHECK(t.relation(3, 3) == R::Unrelated);
  CHECK(t.relation(6, 6) == R::Right);
  std::vector<std::size_t> nodes;
  std::vector<bool> left;
  t.path(6, nodes, left);  // node 13 = 0b1101
  CHECK(nodes == std::vector<std::size_t>{1, 3, 6});
  CHECK(left == std::vector<bool>{false, true, false});
  CHECK_THROWS(TreeTopology(0));
  CHECK_THROWS(TreeTopology(25));
}

TEST_CASE("decision function against logistic curves") {
  const double alpha = 0.5;
  double matched = 0.0, standard = 0.0;
  for (double z = -5.0; z <= 5.0; z += 0.001) {
    const std::vector<double> w{z}, x{1.0};
    const double g = decision(alpha, w, x);
    matched = std::max(matched, std::abs(g - 1.0 / (1.0 + std::exp(-1.7 * std::sqrt(2.0) * alpha * z))));
    standard = std::max(standard, std::abs(g - 1.0 / (1.0 + std::exp(-z))));
  }
  CHECK(matched <= 0.03);
  CHECK(standard <= 0.05);
}

TEST_CASE("decision derivative by finite differences") {
  for (double alpha : {0.5, 2.0})
    for (double p : {-1.3, -0.2, 0.0, 0.4, 2.0}) {
      const std::vector<double> x{1.0};
      const double h = 1e-6;
      const std::vector<double> wp{p + h}, wm{p - h}, w{p};
      const double fd = (decision(alpha, wp, x) - decision(alpha, wm, x)) / (2 * h);
      CHECK(decision_derivative(alpha, w, x) == Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("leaf probabilities sum to one") {
  const auto e = SoftTreeEnsemble::initialize(3, 4, 5, 1.7, 42);
  const auto x = experiments::random_unit_inputs(6, 5, 1);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t m = 0; m < 3; ++m) {
      double s = 0.0;
      for (std::size_t l = 1; l <= 16; ++l) {
        const double p = e.leaf_probability(m, l, x.sample(i));
        CHECK(p >= 0.0);
        s += p;
      }
      CHECK(s == Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("forward matches the recursive definition") {
  for (int d : {1, 2, 5}) {
    const auto e = SoftTreeEnsemble::initialize(7, d, 3, 1.2, 100 + d);
    const auto x = experiments::random_unit_inputs(5, 3, 3);
    const auto batch = e.forward(x);
    for (std::size_t i = 0; i < 5; ++i) {
      const double ref = ensemble_by_oracle(e, vec(x.sample(i)));
      CHECK(e.forward(x.sample(i)) == Approx(ref).epsilon(1e-13));
      CHECK(batch[i] == e.forward(x.sample(i)));
    }
  }
}

TEST_CASE("depth one gradient by hand") {
  SoftTreeEnsemble e(4, 1, 2, 1.5);
  math::RngState rng(3);
  std::vector<double> p(e.parameter_count());
  for (double& v : p) v = rng.next_gaussian();
  e.set_parameters(p);
  const std::vector<double> x{0.6, -0.8};
  const auto j = e.jacobian_row(x);
  for (std::size_t m = 0; m < 4; ++m) {
    const auto w = e.weight(m, 1);
    const double z = w[0] * x[0] + w[1] * x[1];
    const double g = 0.5 * std::erf(1.5 * z) + 0.5;
    const double gd = 1.5 * std::exp(-2.25 * z * z) / std::sqrt(oracle::kPi);
    const double s = 0.5;  // 1/sqrt(4)
    CHECK(j[e.leaf_offset(m, 1)] == Approx(s * g).epsilon(1e-14));
    CHECK(j[e.leaf_offset(m, 2)] == Approx(s * (1 - g)).epsilon(1e-14));
    const double diff = e.leaf(m, 1) - e.leaf(m, 2);
    CHECK(j[e.weight_offset(m, 1)] == Approx(s * diff * gd * x[0]).epsilon(1e-13));
    CHECK(j[e.weight_offset(m, 1) + 1] == Approx(s * diff * gd * x[1]).epsilon(1e-13));
  }
}

TEST_CASE("jacobian by finite differences") {
  for (auto structure : {TreeStructure::Vanilla, TreeStructure::Oblivious}) {
    const auto e = SoftTreeEnsemble::initialize(3, 3, 4, 0.9, 17, structure);
    const auto x = experiments::random_unit_inputs(1, 4, 2);
    const auto j = e.jacobian_row(x.sample(0));
    REQUIRE(j.size() == e.parameter_count());
    const double h = 1e-6;
    for (std::size_t k = 0; k < e.parameter_count(); ++k) {
      auto pp = e.parameters(), pm = e.parameters();
      pp[k] += h;
      pm[k] -= h;
      auto ep = e, em = e;
      ep.set_parameters(pp);
      em.set_parameters(pm);
      const double fd = (ep.forward(x.sample(0)) - em.forward(x.sample(0))) / (2 * h);
      CHECK(j[k] == Approx(fd).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("vjp and empirical kernel agree with the explicit jacobian") {
  const auto e = SoftTreeEnsemble::initialize(40, 2, 3, 2.0, 5);
  const auto x = experiments::random_unit_inputs(6, 3, 6);
  const auto j = e.jacobian(x);
  REQUIRE(j.rows() == 6);
  REQUIRE(j.cols() == e.parameter_count());
  const std::vector<double> r{0.5, -1.0, 2.0, 0.0, 0.3, -0.7};
  const auto g = e.vjp(x, r);
  for (std::size_t k = 0; k < j.cols(); ++k) {
    double ref = 0.0;
    for (std::size_t i = 0; i < 6; ++i) ref += r[i] * j(i, k);
    CHECK(g[k] == Approx(ref).epsilon(1e-12).scale(1e-6));
  }
  const auto k = e.empirical_ntk(x, 12);
  const auto* prov = std::get_if<kernels::Empirical>(&k.provenance);
  REQUIRE(prov != nullptr);
  CHECK(prov->trees == 40);
  CHECK(prov->step == 12);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) {
      double ref = 0.0;
      for (std::size_t c = 0; c < j.cols(); ++c) ref += j(a, c) * j(b, c);
      CHECK(k.matrix(a, b) == Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("per-tree kernel averages to the limit") {
  // Monte Carlo over independent trees with gradients by finite differences.
  const int d = 2;
  const double alpha = 1.5;
  const std::vector<double> x{0.8, 0.6}, y{-0.28, 0.96};
  const std::size_t n = 20000;
  math::RngState rng(2024);
  double sum = 0.0, sq = 0.0;
  const double h = 1e-5;
  for (std::size_t t = 0; t < n; ++t) {
    oracle::PlainTree tree{d, alpha, {}, {}};
    for (int k = 0; k < 3; ++k) tree.w.push_back({rng.next_gaussian(), rng.next_gaussian()});
    for (int k = 0; k < 4; ++k) tree.pi.push_back(rng.next_gaussian());
    double ip = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t f = 0; f < 2; ++f) {
        auto plus = tree, minus = tree;
        plus.w[k][f] += h;
        minus.w[k][f] -= h;
        ip += (plus(x) - minus(x)) / (2 * h) * (plus(y) - minus(y)) / (2 * h);
      }
    for (std::size_t l = 0; l < 4; ++l) {
      auto plus = tree;
      plus.pi[l] += 1.0;
      ip += (plus(x) - tree(x)) * (plus(y) - tree(y));
    }
    sum += ip;
    sq += ip * ip;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - kernels::tntk_limit(x, y, d, alpha)) < 4.0 * se);
}

TEST_CASE("oblivious trees share one weight per level") {
  const auto v = SoftTreeEnsemble::initialize(5, 3, 2, 1.0, 8);
  const auto o = v.make_oblivious();
  CHECK(o.structure() == TreeStructure::Oblivious);
  CHECK(o.weight_slots() == 3);
  CHECK(o.parameter_count() == 5 * (3 * 2 + 8));
  for (std::size_t m = 0; m < 5; ++m) {
    for (std::size_t l = 1; l <= 8; ++l) CHECK(o.leaf(m, l) == v.leaf(m, l));
    for (std::size_t n = 1; n <= 7; ++n) {
      const std::size_t leftmost = std::size_t{1} << TreeTopology::level(n);
      CHECK(vec(o.weight(m, n)) == vec(v.weight(m, leftmost)));
      CHECK(o.slot_of(n) == std::size_t(TreeTopology::level(n)));
    }
  }
  const auto x = experiments::random_unit_inputs(3, 2, 4);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(o.forward(x.sample(i)) == Approx(ensemble_by_oracle(o, vec(x.sample(i)))).epsilon(1e-13));
}

TEST_CASE("initialization is reproducible and thread independent") {
  const auto a = SoftTreeEnsemble::initialize(70, 3, 4, 2.0, 99);
  const auto b = SoftTreeEnsemble::initialize(70, 3, 4, 2.0, 99);
  const auto c = SoftTreeEnsemble::initialize(70, 3, 4, 2.0, 100);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  // tree m is the same draw whatever M is
  const auto small = SoftTreeEnsemble::initialize(3, 3, 4, 2.0, 99);
  for (std::size_t l = 1; l <= 8; ++l) CHECK(small.leaf(2, l) == a.leaf(2, l));

  const auto x = experiments::random_unit_inputs(9, 4, 1);
  set_thread_count(1);
  const auto k1 = a.empirical_ntk(x).matrix;
  const auto f1 = a.forward(x);
  set_thread_count(4);
  const auto k4 = a.empirical_ntk(x).matrix;
  const auto f4 = a.forward(x);
  set_thread_count(0);
  CHECK(k1.data() == k4.data());
  CHECK(f1 == f4);
}

TEST_CASE("ensemble json round trip") {
  const auto e = SoftTreeEnsemble::initialize(4, 2, 3, 0.7, 1, TreeStructure::Oblivious);
  const auto back = SoftTreeEnsemble::from_json(nlohmann::json::parse(e.to_json().dump()));
  CHECK(back.parameters() == e.parameters());
  CHECK(back.structure() == e.structure());
  CHECK(back.alpha() == e.alpha());
  CHECK(back.seed() == e.seed());
  auto bad = e.to_json();
  bad["params"].erase(0);
  CHECK_THROWS(SoftTreeEnsemble::from_json(bad));
}
