#include "tntk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tntk/parallel.hpp"

namespace tntk::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

// Cauchy-Schwarz keeps these in range analytically; rounding does not.
constexpr double kArcsinSlack = 1e-12;
constexpr double kRadicandFloor = 1e-15;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  // Prefer the shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream shorter;
    shorter.precision(p);
    shorter << v;
    if (std::stod(shorter.str()) == v) return shorter.str();
  }
  return os.str();
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("kernel spec: '" + key + "' is not a number: " + value);
  }
  if (used != value.size())
    throw std::invalid_argument("kernel spec: '" + key + "' is not a number: " + value);
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v)) throw std::invalid_argument("kernel spec: '" + key + "' must be an integer");
  return static_cast<int>(v);
}

// Relu expectations for (u, v) ~ N(0, [[s_ii, s_ij], [s_ij, s_jj]]).
void relu_expectations(double s_ij, double s_ii, double s_jj, double& sigma, double& sigma_dot) {
  const double scale = std::sqrt(s_ii * s_jj);
  if (scale == 0.0) {
    sigma = 0.0;
    sigma_dot = 0.25;
    return;
  }
  const double cosine = std::clamp(s_ij / scale, -1.0, 1.0);
  const double theta = std::acos(cosine);
  sigma = scale / (2.0 * kPi) * (std::sin(theta) + (kPi - theta) * cosine);
  sigma_dot = (kPi - theta) / (2.0 * kPi);
}

}  // namespace

bool operator==(const Tntk& a, const Tntk& b) { return a.depth == b.depth && a.alpha == b.alpha; }
bool operator==(const MlpNtk& a, const MlpNtk& b) {
  return a.hidden_layers == b.hidden_layers && a.activation == b.activation &&
         (a.activation == Activation::Relu || a.alpha == b.alpha);
}
bool operator==(const Rbf& a, const Rbf& b) { return a.gamma == b.gamma; }

void validate(const KernelSpec& spec) {
  std::visit(Overloaded{
                 [](const Tntk& t) {
                   if (t.depth < 1) throw std::invalid_argument("tntk: depth must be >= 1");
                   if (!(t.alpha > 0.0) || !std::isfinite(t.alpha))
                     throw std::invalid_argument("tntk: alpha must be positive and finite");
                 },
                 [](const MlpNtk& m) {
                   if (m.hidden_layers < 1) throw std::invalid_argument("mlp: layers must be >= 1");
                   if (m.activation == Activation::ScaledErf && (!(m.alpha > 0.0) || !std::isfinite(m.alpha)))
                     throw std::invalid_argument("mlp: alpha must be positive and finite");
                 },
                 [](const Rbf& r) {
                   if (!(r.gamma > 0.0) || !std::isfinite(r.gamma))
                     throw std::invalid_argument("rbf: gamma must be positive and finite");
                 },
             },
             spec);
}

std::string describe(const KernelSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Tntk& t) {
            return "tntk(depth=" + std::to_string(t.depth) + ",alpha=" + format_number(t.alpha) + ")";
          },
          [](const MlpNtk& m) {
            std::string s = "mlp(layers=" + std::to_string(m.hidden_layers);
            if (m.activation == Activation::Relu) return s + ",activation=relu)";
            return s + ",activation=erf,alpha=" + format_number(m.alpha) + ")";
          },
          [](const Rbf& r) { return "rbf(gamma=" + format_number(r.gamma) + ")"; },
      },
      spec);
}

KernelSpec parse_kernel_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  std::map<std::string, std::string> fields;
  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("kernel spec: expected key=value, got '" + item + "'");
      fields[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = fields.find(key);
    if (it == fields.end()) return std::nullopt;
    std::string v = it->second;
    fields.erase(it);
    return v;
  };

  KernelSpec spec;
  if (family == "tntk") {
    Tntk t;
    if (auto v = take("depth")) t.depth = parse_int("depth", *v);
    if (auto v = take("alpha")) t.alpha = parse_double("alpha", *v);
    spec = t;
  } else if (family == "mlp") {
    MlpNtk m;
    if (auto v = take("layers")) m.hidden_layers = parse_int("layers", *v);
    if (auto v = take("activation")) {
      if (*v == "relu")
        m.activation = Activation::Relu;
      else if (*v == "erf")
        m.activation = Activation::ScaledErf;
      else
        throw std::invalid_argument("kernel spec: unknown activation '" + *v + "'");
    }
    if (auto v = take("alpha")) m.alpha = parse_double("alpha", *v);
    spec = m;
  } else if (family == "rbf") {
    Rbf r;
    if (auto v = take("gamma")) r.gamma = parse_double("gamma", *v);
    spec = r;
  } else {
    throw std::invalid_argument("kernel spec: unknown kernel family '" + family + "'");
  }
  if (!fields.empty())
    throw std::invalid_argument("kernel spec: field '" + fields.begin()->first + "' does not apply to " + family);
  validate(spec);
  return spec;
}

nlohmann::json to_json(const KernelSpec& spec) {
  return std::visit(Overloaded{
                        [](const Tntk& t) {
                          return nlohmann::json{{"kernel", "tntk"}, {"depth", t.depth}, {"alpha", t.alpha}};
                        },
                        [](const MlpNtk& m) {
                          nlohmann::json j{{"kernel", "mlp"},
                                           {"layers", m.hidden_layers},
                                           {"activation", m.activation == Activation::Relu ? "relu" : "erf"}};
                          if (m.activation == Activation::ScaledErf) j["alpha"] = m.alpha;
                          return j;
                        },
                        [](const Rbf& r) { return nlohmann::json{{"kernel", "rbf"}, {"gamma", r.gamma}}; },
                    },
                    spec);
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  const std::string family = j.at("kernel").get<std::string>();
  KernelSpec spec;
  if (family == "tntk") {
    spec = Tntk{j.at("depth").get<int>(), j.at("alpha").get<double>()};
  } else if (family == "mlp") {
    MlpNtk m;
    m.hidden_layers = j.at("layers").get<int>();
    m.activation = j.at("activation").get<std::string>() == "relu" ? Activation::Relu : Activation::ScaledErf;
    if (j.contains("alpha")) m.alpha = j.at("alpha").get<double>();
    spec = m;
  } else if (family == "rbf") {
    spec = Rbf{j.at("gamma").get<double>()};
  } else {
    throw std::invalid_argument("kernel spec: unknown kernel family '" + family + "'");
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------

double sigma_pair_expect(double s_ij, double s_ii, double s_jj, double alpha) {
  const double a2 = alpha * alpha;
  const double denom = std::sqrt((a2 * s_ii + 0.5) * (a2 * s_jj + 0.5));
  const double arg = std::clamp(a2 * s_ij / denom, -1.0, 1.0);
  return std::asin(arg) / (2.0 * kPi) + 0.25;
}

double sigma_dot_pair_expect(double s_ij, double s_ii, double s_jj, double alpha) {
  const double a2 = alpha * alpha;
  const double radicand = (1.0 + 2.0 * a2 * s_ii) * (1.0 + 2.0 * a2 * s_jj) - 4.0 * a2 * a2 * s_ij * s_ij;
  return a2 / kPi / std::sqrt(std::max(radicand, kRadicandFloor));
}

double tntk_from_inner(double s_ij, double s_ii, double s_jj, int depth, double alpha) {
  const double t = sigma_pair_expect(s_ij, s_ii, s_jj, alpha);
  const double t_dot = sigma_dot_pair_expect(s_ij, s_ii, s_jj, alpha);
  // 2^d d S T^(d-1) Tdot written as 2 d S (2T)^(d-1) Tdot to stay in range.
  const double leaves = std::pow(2.0 * t, depth - 1);
  return 2.0 * depth * s_ij * leaves * t_dot + leaves * 2.0 * t;
}

double tntk_limit(std::span<const double> xi, std::span<const double> xj, int depth, double alpha) {
  if (xi.size() != xj.size()) throw std::invalid_argument("tntk_limit: dimension mismatch");
  return tntk_from_inner(math::dot(xi, xj), math::dot(xi, xi), math::dot(xj, xj), depth, alpha);
}

double mlp_ntk_from_inner(double s_ij, double s_ii, double s_jj, const MlpNtk& spec) {
  double cov = s_ij;
  double var_i = s_ii;
  double var_j = s_jj;
  double theta = s_ij;  // Sigma^(0)
  for (int h = 1; h <= spec.hidden_layers; ++h) {
    double next_cov = 0.0;
    double next_dot = 0.0;
    double next_var_i = 0.0;
    double next_var_j = 0.0;
    if (spec.activation == Activation::Relu) {
      relu_expectations(cov, var_i, var_j, next_cov, next_dot);
      next_var_i = 0.5 * var_i;
      next_var_j = 0.5 * var_j;
    } else {
      next_cov = sigma_pair_expect(cov, var_i, var_j, spec.alpha);
      next_dot = sigma_dot_pair_expect(cov, var_i, var_j, spec.alpha);
      next_var_i = sigma_pair_expect(var_i, var_i, var_i, spec.alpha);
      next_var_j = sigma_pair_expect(var_j, var_j, var_j, spec.alpha);
    }
    theta = theta * next_dot + next_cov;
    cov = next_cov;
    var_i = next_var_i;
    var_j = next_var_j;
  }
  return theta;
}

double mlp_ntk(std::span<const double> xi, std::span<const double> xj, const MlpNtk& spec) {
  if (xi.size() != xj.size()) throw std::invalid_argument("mlp_ntk: dimension mismatch");
  return mlp_ntk_from_inner(math::dot(xi, xj), math::dot(xi, xi), math::dot(xj, xj), spec);
}

double rbf(std::span<const double> xi, std::span<const double> xj, double gamma) {
  if (xi.size() != xj.size()) throw std::invalid_argument("rbf: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) d2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
  return std::exp(-gamma * d2);
}

namespace {

double pair_value(const KernelSpec& spec, std::span<const double> xi, std::span<const double> xj,
                  double s_ii, double s_jj) {
  return std::visit(Overloaded{
                        [&](const Tntk& t) {
                          return tntk_from_inner(math::dot(xi, xj), s_ii, s_jj, t.depth, t.alpha);
                        },
                        [&](const MlpNtk& m) { return mlp_ntk_from_inner(math::dot(xi, xj), s_ii, s_jj, m); },
                        [&](const Rbf& r) { return rbf(xi, xj, r.gamma); },
                    },
                    spec);
}

std::vector<double> squared_norms(const InputMatrix& x) {
  std::vector<double> out(x.samples());
  for (std::size_t i = 0; i < x.samples(); ++i) out[i] = math::dot(x.sample(i), x.sample(i));
  return out;
}

}  // namespace

double kernel_value(const KernelSpec& spec, std::span<const double> xi, std::span<const double> xj) {
  if (xi.size() != xj.size()) throw std::invalid_argument("kernel_value: dimension mismatch");
  return pair_value(spec, xi, xj, math::dot(xi, xi), math::dot(xj, xj));
}

GramMatrix gram(const KernelSpec& spec, const InputMatrix& x) {
  validate(spec);
  const std::size_t n = x.samples();
  if (n == 0) throw std::invalid_argument("gram: no samples");
  const auto norms = squared_norms(x);
  std::vector<double> entries(n * n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j)
      entries[i * n + j] = pair_value(spec, x.sample(i), x.sample(j), norms[i], norms[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) entries[i * n + j] = entries[j * n + i];
  return GramMatrix{math::SymmetricMatrix(n, std::move(entries)), spec, Limiting{}};
}

math::Matrix cross_gram(const KernelSpec& spec, const InputMatrix& a, const InputMatrix& b) {
  validate(spec);
  if (a.features() != b.features()) throw std::invalid_argument("cross_gram: feature dimension mismatch");
  const auto na = squared_norms(a);
  const auto nb = squared_norms(b);
  math::Matrix out(a.samples(), b.samples());
  parallel_for(a.samples(), [&](std::size_t i) {
    for (std::size_t j = 0; j < b.samples(); ++j)
      out(i, j) = pair_value(spec, a.sample(i), b.sample(j), na[i], nb[j]);
  });
  return out;
}

// ---------------------------------------------------------------------------

ProfileTable degeneracy_profile(std::span<const int> depths, double alpha,
                                std::span<const double> rho_grid) {
  ProfileTable table;
  table.rho.assign(rho_grid.begin(), rho_grid.end());
  for (double rho : rho_grid)
    if (rho < -1.0 || rho > 1.0) throw std::invalid_argument("degeneracy_profile: rho must lie in [-1, 1]");
  for (int d : depths) {
    validate(Tntk{d, alpha});
    ProfileCurve curve{"tntk_depth", alpha, d, {}};
    const double at_one = tntk_from_inner(1.0, 1.0, 1.0, d, alpha);
    for (double rho : rho_grid) curve.values.push_back(tntk_from_inner(rho, 1.0, 1.0, d, alpha) / at_one);
    table.curves.push_back(std::move(curve));
  }
  return table;
}

ProfileTable expectation_profile(std::span<const double> alphas, int depth,
                                 std::span<const double> rho_grid) {
  ProfileTable table;
  table.rho.assign(rho_grid.begin(), rho_grid.end());
  for (double rho : rho_grid)
    if (rho < -1.0 || rho > 1.0) throw std::invalid_argument("expectation_profile: rho must lie in [-1, 1]");
  for (double a : alphas) {
    validate(Tntk{depth, a});
    ProfileCurve t{"T", a, 0, {}};
    ProfileCurve t_dot{"Tdot", a, 0, {}};
    ProfileCurve theta{"tntk_alpha", a, depth, {}};
    const double t1 = sigma_pair_expect(1.0, 1.0, 1.0, a);
    const double t_dot1 = sigma_dot_pair_expect(1.0, 1.0, 1.0, a);
    const double theta1 = tntk_from_inner(1.0, 1.0, 1.0, depth, a);
    for (double rho : rho_grid) {
      t.values.push_back(sigma_pair_expect(rho, 1.0, 1.0, a) / t1);
      t_dot.values.push_back(sigma_dot_pair_expect(rho, 1.0, 1.0, a) / t_dot1);
      theta.values.push_back(tntk_from_inner(rho, 1.0, 1.0, depth, a) / theta1);
    }
    table.curves.push_back(std::move(t));
    table.curves.push_back(std::move(t_dot));
    table.curves.push_back(std::move(theta));
  }
  return table;
}

double profile_spread(const ProfileTable& table, const ProfileCurve& curve, double lo, double hi) {
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < table.rho.size(); ++k) {
    if (table.rho[k] < lo || table.rho[k] > hi) continue;
    mn = std::min(mn, curve.values[k]);
    mx = std::max(mx, curve.values[k]);
  }
  if (mn > mx) throw std::invalid_argument("profile_spread: no grid points in range");
  return mx - mn;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Provenance& p) {
  return std::visit(Overloaded{
                        [](const Limiting&) { return nlohmann::json{{"type", "limiting"}}; },
                        [](const Empirical& e) {
                          return nlohmann::json{{"type", "empirical"}, {"trees", e.trees}, {"seed", e.seed}, {"step", e.step}};
                        },
                    },
                    p);
}

Provenance provenance_from_json(const nlohmann::json& j) {
  if (j.at("type").get<std::string>() == "limiting") return Limiting{};
  return Empirical{j.at("trees").get<std::size_t>(), j.at("seed").get<std::uint64_t>(), j.at("step").get<std::size_t>()};
}

namespace {
nlohmann::json gram_header(const GramMatrix& g, const nlohmann::json& config) {
  nlohmann::json h;
  if (!config.is_null()) h["config"] = config;
  h["spec"] = to_json(g.spec);
  h["provenance"] = to_json(g.provenance);
  h["n"] = g.matrix.size();
  return h;
}
}  // namespace

void write_gram_csv(std::ostream& os, const GramMatrix& g, const nlohmann::json& config) {
  os << "# " << gram_header(g, config).dump() << '\n';
  const auto old = os.precision(17);
  const std::size_t n = g.matrix.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) os << ',';
      os << g.matrix(i, j);
    }
    os << '\n';
  }
  os.precision(old);
}

void write_gram_json(std::ostream& os, const GramMatrix& g, const nlohmann::json& config) {
  auto j = gram_header(g, config);
  j["entries"] = g.matrix.data();
  os << j.dump() << '\n';
}

GramMatrix read_gram(std::istream& is) {
  is >> std::ws;
  if (is.peek() == '{') {
    nlohmann::json j;
    is >> j;
    const std::size_t n = j.at("n").get<std::size_t>();
    auto entries = j.at("entries").get<std::vector<double>>();
    if (entries.size() != n * n) throw std::runtime_error("read_gram: entry count does not match n");
    return GramMatrix{math::SymmetricMatrix(n, std::move(entries)), kernel_spec_from_json(j.at("spec")),
                      provenance_from_json(j.at("provenance"))};
  }
  std::string line;
  std::getline(is, line);
  if (line.rfind("# ", 0) != 0) throw std::runtime_error("read_gram: missing '# {json}' header line");
  const auto header = nlohmann::json::parse(line.substr(2));
  const std::size_t n = header.at("n").get<std::size_t>();
  std::vector<double> entries;
  entries.reserve(n * n);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      entries.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != n) throw std::runtime_error("read_gram: row " + std::to_string(row + 1) + " has wrong length");
    ++row;
  }
  if (row != n) throw std::runtime_error("read_gram: expected " + std::to_string(n) + " rows");
  return GramMatrix{math::SymmetricMatrix(n, std::move(entries)), kernel_spec_from_json(header.at("spec")),
                    provenance_from_json(header.at("provenance"))};
}

}  // namespace tntk::kernels
