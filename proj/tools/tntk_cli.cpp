// tntk: command-line workbench for tree neural tangent kernels.
//
// Every file written starts with the resolved configuration: a "# {json}"
// line for CSV, a "config" key for JSON.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tntk/data.hpp"
#include "tntk/experiments.hpp"
#include "tntk/kernels.hpp"
#include "tntk/parallel.hpp"
#include "tntk/regression.hpp"
#include "tntk/training.hpp"

using nlohmann::json;
using namespace tntk;

namespace {

struct Global {
  std::uint64_t seed = 0;
  std::string out = "-";
  std::size_t threads = 0;
  std::string format = "csv";
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "1,2,4" or an inclusive range "start:step:stop".
template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  auto number = [&](const std::string& s) -> double {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError(flag + ": '" + s + "' is not a number");
    if constexpr (std::is_integral_v<T>) {
      if (v != std::floor(v) || v < 0) throw UsageError(flag + ": '" + s + "' is not a non-negative integer");
    }
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    if (parts.size() != 3) throw UsageError(flag + ": ranges are start:step:stop");
    const double a = number(parts[0]), step = number(parts[1]), b = number(parts[2]);
    if (!(step > 0.0) || b < a) throw UsageError(flag + ": range needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 1'000'000) throw UsageError(flag + ": range is too long");
    for (std::size_t k = 0; k < count; ++k) out.push_back(static_cast<T>(a + step * static_cast<double>(k)));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<T>(number(item)));
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

// Writes to --out, or stdout for "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

json base_config(const std::string& command, const Global& g) {
  return json{{"command", command}, {"seed", g.seed}, {"format", g.format}};
}

void emit_json(const Global& g, json body, const json& config) {
  body["config"] = config;
  Sink sink(g.out);
  sink.stream() << body.dump(1) << '\n';
}

void csv_header(std::ostream& os, const json& config) { os << "# " << config.dump() << '\n'; }

std::ostream& num(std::ostream& os) {
  os.precision(17);
  return os;
}

// ---------------------------------------------------------------------------

struct GramArgs {
  std::string kernel = "tntk";
  int depth = 3;
  double alpha = 2.0;
  int layers = 1;
  std::string activation = "relu";
  double gamma = 1.0;
  std::string input;
  bool preprocess = false;
  bool labels = false;
  CLI::App* app = nullptr;
};

kernels::KernelSpec spec_from_flags(const GramArgs& a) {
  auto given = [&](const char* name) { return a.app->count(name) > 0; };
  auto reject = [&](std::initializer_list<const char*> names) {
    for (const char* n : names)
      if (given(n)) throw UsageError(std::string(n) + " does not apply to --kernel " + a.kernel);
  };
  kernels::KernelSpec spec;
  if (a.kernel == "tntk") {
    reject({"--layers", "--gamma", "--activation"});
    spec = kernels::Tntk{a.depth, a.alpha};
  } else if (a.kernel == "mlp") {
    reject({"--depth", "--gamma"});
    if (a.activation != "relu" && a.activation != "erf") throw UsageError("--activation must be relu or erf");
    if (a.activation == "relu" && given("--alpha")) throw UsageError("--alpha only applies to --activation erf");
    spec = kernels::MlpNtk{a.layers, a.activation == "relu" ? kernels::Activation::Relu : kernels::Activation::ScaledErf,
                           a.alpha};
  } else if (a.kernel == "rbf") {
    reject({"--depth", "--alpha", "--layers", "--activation"});
    spec = kernels::Rbf{a.gamma};
  } else {
    throw UsageError("--kernel must be tntk, mlp or rbf");
  }
  try {
    kernels::validate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

InputMatrix load_input(const std::string& path, bool labels, bool preprocess) {
  data::CsvSchema schema;
  if (!labels) schema.label_column.reset();
  auto x = data::load_csv(path, schema);
  return preprocess ? data::preprocess(x) : x;
}

void print_spectrum(const math::SymmetricMatrix& m) {
  const auto eig = math::eigh(m);
  std::cerr.precision(10);
  std::cerr << "lambda_min=" << eig.eigenvalues.front() << " lambda_max=" << eig.eigenvalues.back() << '\n';
}

void cmd_gram(const Global& g, const GramArgs& a) {
  const auto spec = spec_from_flags(a);
  const auto x = load_input(a.input, a.labels, a.preprocess);
  const auto gm = kernels::gram(spec, x);
  auto config = base_config("gram", g);
  config["input"] = a.input;
  config["preprocess"] = a.preprocess;
  Sink sink(g.out);
  if (g.format == "json")
    kernels::write_gram_json(sink.stream(), gm, config);
  else
    kernels::write_gram_csv(sink.stream(), gm, config);
  print_spectrum(gm.matrix);
}

// ---------------------------------------------------------------------------

struct RegressArgs {
  std::string input;
  std::string test;
  std::string gram;
  std::string kernel;
  std::string dump_gram;
  double ridge = regression::kDefaultRidge;
  std::string encoding = "zero-one";
  bool preprocess = false;
};

void cmd_regress(const Global& g, const RegressArgs& a) {
  if (a.gram.empty() == a.kernel.empty()) throw UsageError("give exactly one of --gram and --kernel");
  if (a.encoding != "zero-one" && a.encoding != "plus-minus") throw UsageError("--encoding must be zero-one or plus-minus");
  const auto enc = a.encoding == "zero-one" ? regression::TargetEncoding::ZeroOne : regression::TargetEncoding::PlusMinusOne;
  const auto train = load_input(a.input, true, a.preprocess);

  kernels::GramMatrix gm;
  if (!a.gram.empty()) {
    std::ifstream in(a.gram);
    if (!in) throw std::runtime_error("cannot open " + a.gram);
    gm = kernels::read_gram(in);
    if (gm.matrix.size() != train.samples())
      throw UsageError("--gram has " + std::to_string(gm.matrix.size()) + " rows but --input has " +
                       std::to_string(train.samples()) + " samples");
  } else {
    try {
      gm = kernels::gram(kernels::parse_kernel_spec(a.kernel), train);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!a.dump_gram.empty()) {
    std::ofstream out(a.dump_gram);
    if (!out) throw std::runtime_error("cannot write " + a.dump_gram);
    // Same format the matrix was read in; the header config is passed through.
    std::ifstream probe(a.gram);
    std::string first;
    std::getline(probe, first);
    if (!a.gram.empty() && !first.empty() && first[0] == '{') {
      kernels::write_gram_json(out, gm, json::parse(first).value("config", json()));
    } else {
      json cfg;
      if (first.rfind("# ", 0) == 0) cfg = json::parse(first.substr(2)).value("config", json());
      kernels::write_gram_csv(out, gm, cfg);
    }
  }

  const std::size_t classes = train.class_count();
  const auto targets = regression::one_hot(train.labels(), classes, enc);
  const auto dual = regression::krr_solve(gm.matrix, targets, a.ridge);

  InputMatrix eval = train;
  math::Matrix cross = gm.matrix.to_matrix();
  std::string split = "train";
  if (!a.test.empty()) {
    if (std::holds_alternative<kernels::Empirical>(gm.provenance))
      throw UsageError("--test needs a limiting kernel; an empirical Gram has no cross kernel");
    eval = load_input(a.test, true, a.preprocess);
    cross = kernels::cross_gram(gm.spec, eval, train);
    split = "test";
  }
  const auto scores = regression::krr_predict(cross, dual);
  const auto predicted = regression::decode(scores, enc);
  const double acc = regression::accuracy(predicted, eval.labels());

  auto config = base_config("regress", g);
  config["input"] = a.input;
  config["test"] = a.test;
  config["gram"] = a.gram;
  config["spec"] = kernels::to_json(gm.spec);
  config["ridge"] = a.ridge;
  config["encoding"] = a.encoding;
  config["preprocess"] = a.preprocess;

  if (g.format == "json") {
    emit_json(g, json{{"split", split}, {"accuracy", acc}, {"predicted", predicted}, {"labels", eval.labels()}}, config);
  } else {
    Sink sink(g.out);
    auto& os = sink.stream();
    csv_header(os, config);
    num(os) << "sample,split,label,predicted";
    for (std::size_t c = 0; c < scores.cols(); ++c) os << ",score_" << c;
    os << '\n';
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      os << i << ',' << split << ',' << eval.label(i) << ',' << predicted[i];
      for (std::size_t c = 0; c < scores.cols(); ++c) os << ',' << scores(i, c);
      os << '\n';
    }
  }
  std::cerr << split << " accuracy " << 100.0 * acc << "%\n";
}

// ---------------------------------------------------------------------------

struct ConvergeArgs {
  int depth = 3;
  double alpha = 2.0;
  std::string m_list = "16,64,256,1024,4096";
  std::size_t trials = 10;
  std::size_t points = 50;
  std::size_t dim = 5;
  std::size_t beta_points = 0;
  std::size_t beta_trees = 4096;
  std::string beta_out;
};

void cmd_converge(const Global& g, const ConvergeArgs& a) {
  experiments::ConvergeConfig cfg;
  cfg.depth = a.depth;
  cfg.alpha = a.alpha;
  cfg.m_list = parse_list<std::size_t>(a.m_list, "--m-list");
  cfg.trials = a.trials;
  cfg.points = a.points;
  cfg.dim = a.dim;
  cfg.seed = g.seed;
  const auto r = experiments::converge(cfg);
  auto config = base_config("converge", g);
  config.update(json{{"depth", a.depth}, {"alpha", a.alpha}, {"m_list", cfg.m_list}, {"trials", a.trials},
                     {"points", a.points}, {"dim", a.dim}});

  std::vector<experiments::BetaPoint> beta;
  if (a.beta_points > 0)
    beta = experiments::beta_sweep(a.depth, a.alpha, a.beta_trees, a.beta_points, experiments::derive_seed(g.seed, 99));

  if (g.format == "json") {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back({{"M", row.trees}, {"trial", row.trial}, {"mean_abs_error", row.mean_abs_error}});
    json body{{"rows", rows}, {"mean_error", r.mean_error}, {"slope", r.fit.slope}, {"intercept", r.fit.intercept}};
    if (!beta.empty()) {
      json b = json::array();
      for (const auto& p : beta) b.push_back({{"beta", p.beta}, {"empirical", p.empirical}, {"limit", p.limit}});
      body["beta_sweep"] = b;
    }
    emit_json(g, body, config);
  } else {
    Sink sink(g.out);
    auto& os = sink.stream();
    csv_header(os, config);
    num(os) << "M,trial,mean_abs_error\n";
    for (const auto& row : r.rows) os << row.trees << ',' << row.trial << ',' << row.mean_abs_error << '\n';
    if (!beta.empty()) {
      if (a.beta_out.empty()) throw UsageError("--beta-points with CSV output needs --beta-out");
      std::ofstream b(a.beta_out);
      auto bc = config;
      bc["beta_points"] = a.beta_points;
      bc["beta_trees"] = a.beta_trees;
      csv_header(b, bc);
      num(b) << "beta,empirical,limit\n";
      for (const auto& p : beta) b << p.beta << ',' << p.empirical << ',' << p.limit << '\n';
    }
  }
  std::cerr << "log-log slope " << r.fit.slope << " (intercept " << r.fit.intercept << ")\n";
}

// ---------------------------------------------------------------------------

struct TrajectoryArgs {
  std::size_t m = 1024;
  int depth = 3;
  double alpha = 2.0;
  double lr = 0.1;
  std::size_t steps = 2000;
  std::size_t train_n = 10;
  std::size_t test_n = 10;
  std::size_t dim = 5;
};

void cmd_trajectory(const Global& g, const TrajectoryArgs& a) {
  experiments::TrajectoryConfig cfg{a.m, a.depth, a.alpha, a.lr, a.steps, a.train_n, a.test_n, a.dim, g.seed};
  const auto r = experiments::trajectory(cfg);
  auto config = base_config("trajectory", g);
  config.update(json{{"m", a.m}, {"depth", a.depth}, {"alpha", a.alpha}, {"lr", a.lr}, {"steps", a.steps},
                     {"train_n", a.train_n}, {"test_n", a.test_n}, {"dim", a.dim}});
  if (g.format == "json") {
    auto rows = [](const math::Matrix& m) {
      json out = json::array();
      for (std::size_t s = 0; s < m.rows(); ++s) out.push_back(std::vector<double>(m.row(s).begin(), m.row(s).end()));
      return out;
    };
    emit_json(g,
              json{{"steps", r.result.steps},
                   {"loss", r.result.loss},
                   {"gd_train", rows(r.result.gd_train)},
                   {"gd_test", rows(r.result.gd_test)},
                   {"analytic_train", rows(r.result.analytic_train)},
                   {"analytic_test", rows(r.result.analytic_test)},
                   {"max_deviation", r.max_deviation},
                   {"output_range", r.output_range}},
              config);
  } else {
    Sink sink(g.out);
    training::write_trajectory_csv(sink.stream(), r.result, config);
  }
  std::cerr << "max deviation " << r.max_deviation << " over output range " << r.output_range << '\n';
}

// ---------------------------------------------------------------------------

struct DriftArgs {
  std::string m_list = "16,64,256,1024";
  int depth = 3;
  double alpha = 2.0;
  double lr = 0.1;
  std::size_t steps = 500;
  std::string checkpoints = "0,100,200,300,400,500";
  std::size_t seeds = 5;
  std::size_t n = 10;
  std::size_t dim = 5;
};

void cmd_drift(const Global& g, const DriftArgs& a) {
  experiments::DriftConfig cfg;
  cfg.m_list = parse_list<std::size_t>(a.m_list, "--m-list");
  cfg.depth = a.depth;
  cfg.alpha = a.alpha;
  cfg.learning_rate = a.lr;
  cfg.steps = a.steps;
  cfg.checkpoints = parse_list<std::size_t>(a.checkpoints, "--checkpoints");
  for (std::size_t c : cfg.checkpoints)
    if (c > a.steps) throw UsageError("--checkpoints: " + std::to_string(c) + " is beyond --steps");
  cfg.seeds = a.seeds;
  cfg.n = a.n;
  cfg.dim = a.dim;
  cfg.seed = g.seed;
  const auto r = experiments::drift(cfg);
  auto config = base_config("drift", g);
  config.update(json{{"m_list", cfg.m_list}, {"depth", a.depth}, {"alpha", a.alpha}, {"lr", a.lr}, {"steps", a.steps},
                     {"checkpoints", cfg.checkpoints}, {"seeds", a.seeds}, {"n", a.n}, {"dim", a.dim}});
  if (g.format == "json") {
    json rows = json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"M", row.trees}, {"seed", row.seed}, {"checkpoint", row.checkpoint}, {"sup_drift", row.sup_drift}});
    emit_json(g, json{{"rows", rows}, {"final_drift", r.final_drift}, {"slope", r.fit.slope}}, config);
  } else {
    Sink sink(g.out);
    training::write_drift_csv(sink.stream(), r.rows, config);
  }
  std::cerr << "log-log slope of final drift vs M: " << r.fit.slope << '\n';
}

// ---------------------------------------------------------------------------

struct ObliviousArgs {
  std::string m_list = "16,64,256,1024,4096";
  int depth = 3;
  double alpha = 2.0;
  std::size_t pairs = 50;
  std::size_t trials = 5;
  std::size_t dim = 5;
};

void cmd_oblivious(const Global& g, const ObliviousArgs& a) {
  experiments::ObliviousConfig cfg;
  cfg.m_list = parse_list<std::size_t>(a.m_list, "--m-list");
  cfg.depth = a.depth;
  cfg.alpha = a.alpha;
  cfg.pairs = a.pairs;
  cfg.trials = a.trials;
  cfg.dim = a.dim;
  cfg.seed = g.seed;
  const auto rows = experiments::oblivious(cfg);
  auto config = base_config("oblivious", g);
  config.update(json{{"m_list", cfg.m_list}, {"depth", a.depth}, {"alpha", a.alpha}, {"pairs", a.pairs},
                     {"trials", a.trials}, {"dim", a.dim}});
  if (g.format == "json") {
    json out = json::array();
    for (const auto& r : rows)
      out.push_back({{"M", r.trees}, {"trial", r.trial}, {"vanilla_error", r.vanilla_error},
                     {"oblivious_error", r.oblivious_error}, {"gap", r.gap}});
    emit_json(g, json{{"rows", out}}, config);
  } else {
    Sink sink(g.out);
    auto& os = sink.stream();
    csv_header(os, config);
    num(os) << "M,trial,vanilla_error,oblivious_error,gap\n";
    for (const auto& r : rows)
      os << r.trees << ',' << r.trial << ',' << r.vanilla_error << ',' << r.oblivious_error << ',' << r.gap << '\n';
  }
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::string alpha_list = "0.5:0.25:12.75";
  std::string depth_list = "1:1:29";
  std::string rho_grid = "-1:0.01:1";
  int depth = 3;
  double alpha = 2.0;
};

void cmd_profile(const Global& g, const ProfileArgs& a) {
  const auto alphas = parse_list<double>(a.alpha_list, "--alpha-list");
  const auto depths = parse_list<int>(a.depth_list, "--depth-list");
  auto rho = parse_list<double>(a.rho_grid, "--rho-grid");
  for (double& r : rho) r = std::clamp(r, -1.0, 1.0);
  for (double al : alphas)
    if (!(al > 0.0)) throw UsageError("--alpha-list entries must be positive");
  for (int d : depths)
    if (d < 1) throw UsageError("--depth-list entries must be >= 1");
  auto t1 = kernels::expectation_profile(alphas, a.depth, rho);
  auto t2 = kernels::degeneracy_profile(depths, a.alpha, rho);
  auto config = base_config("profile", g);
  config.update(json{{"alpha_list", alphas}, {"depth_list", depths}, {"rho_grid", a.rho_grid}, {"depth", a.depth},
                     {"alpha", a.alpha}});
  std::vector<kernels::ProfileCurve> curves = t1.curves;
  curves.insert(curves.end(), t2.curves.begin(), t2.curves.end());
  if (g.format == "json") {
    json out = json::array();
    for (const auto& c : curves) out.push_back({{"panel", c.panel}, {"alpha", c.alpha}, {"depth", c.depth}, {"values", c.values}});
    emit_json(g, json{{"rho", rho}, {"curves", out}}, config);
  } else {
    Sink sink(g.out);
    auto& os = sink.stream();
    csv_header(os, config);
    num(os) << "panel,alpha,depth,rho,value\n";
    for (const auto& c : curves)
      for (std::size_t k = 0; k < rho.size(); ++k)
        os << c.panel << ',' << c.alpha << ',' << c.depth << ',' << rho[k] << ',' << c.values[k] << '\n';
  }
}

// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string data;
  std::vector<std::string> kernels;
  int max_depth = 29;
  bool standardize = false;
  double bias = 1.0;
  std::string curves_out;
  std::string json_out;
};

// A column entry without its tuned field expands to the usual grid:
// tntk without depth -> depth 1..max, mlp without layers -> 1..max, rbf
// without gamma -> the 30 gammas.
data::BenchmarkColumn parse_column(const std::string& text, int max_depth) {
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  const std::string fields = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto has = [&](const std::string& key) { return (',' + fields).find(',' + key + '=') != std::string::npos; };
  auto with = [&](const std::string& extra) {
    return kernels::parse_kernel_spec(family + ":" + fields + (fields.empty() ? "" : ",") + extra);
  };
  data::BenchmarkColumn col{text, {}};
  try {
    if (family == "tntk" && !has("depth")) {
      for (int d = 1; d <= max_depth; ++d) col.grid.push_back(with("depth=" + std::to_string(d)));
    } else if (family == "mlp" && !has("layers")) {
      for (int l = 1; l <= max_depth; ++l) col.grid.push_back(with("layers=" + std::to_string(l)));
    } else if (family == "rbf" && !has("gamma")) {
      for (double gm : data::rbf_gamma_grid()) {
        std::ostringstream s;
        s.precision(17);
        s << "gamma=" << gm;
        col.grid.push_back(with(s.str()));
      }
    } else {
      col.grid.push_back(kernels::parse_kernel_spec(text));
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--kernels: ") + e.what());
  }
  return col;
}

void cmd_benchmark(const Global& g, const BenchmarkArgs& a) {
  std::vector<data::BenchmarkColumn> columns;
  if (a.kernels.empty()) {
    columns = data::default_columns(a.max_depth);
  } else {
    for (const auto& group : a.kernels) {
      std::stringstream ss(group);
      std::string item;
      while (std::getline(ss, item, ';'))
        if (!item.empty()) columns.push_back(parse_column(item, a.max_depth));
    }
    if (columns.empty()) throw UsageError("--kernels: no columns");
  }

  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(a.data)) {
    for (const auto& e : std::filesystem::directory_iterator(a.data))
      if (e.is_regular_file() && (e.path().extension() == ".csv" || e.path().extension() == ".dat" ||
                                  e.path().extension() == ".txt"))
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::exists(a.data)) {
    files.push_back(a.data);
  } else {
    throw UsageError("--data: no such file or directory: " + a.data);
  }
  if (files.empty()) throw UsageError("--data: no .csv/.dat/.txt files in " + a.data);

  std::vector<data::BenchmarkRow> rows;
  for (const auto& f : files) {
    const auto x = data::preprocess(data::load_csv(f), {a.bias, a.standardize});
    rows.push_back(data::run_benchmark(f.stem().string(), x, columns, g.seed));
  }

  auto config = base_config("benchmark", g);
  json cols = json::array();
  for (const auto& c : columns) cols.push_back(c.name);
  config.update(json{{"data", a.data}, {"kernels", a.kernels.empty() ? json("default") : json(a.kernels)}, {"columns", cols},
                     {"max_depth", a.max_depth}, {"standardize", a.standardize}, {"bias", a.bias}});

  json details = json::array();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto j = data::to_json(r.columns[c], r.dataset);
      j["column"] = columns[c].name;
      details.push_back(j);
    }
  if (g.format == "json") {
    emit_json(g, json{{"results", details}}, config);
  } else {
    Sink sink(g.out);
    data::write_benchmark_csv(sink.stream(), columns, rows, config);
  }
  if (!a.curves_out.empty()) {
    std::ofstream out(a.curves_out);
    if (!out) throw std::runtime_error("cannot write " + a.curves_out);
    data::write_depth_curves_csv(out, columns, rows, config);
  }
  if (!a.json_out.empty()) {
    std::ofstream out(a.json_out);
    if (!out) throw std::runtime_error("cannot write " + a.json_out);
    out << json{{"config", config}, {"results", details}}.dump(1) << '\n';
  }
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].name.rfind("mlp", 0) == 0)
      for (std::size_t t = 0; t < columns.size(); ++t)
        if (columns[t].name.rfind("tntk", 0) == 0)
          std::cerr << columns[t].name << " win rate vs " << columns[c].name << ": " << 100.0 * data::win_rate(rows, t, c) << "%\n";
}

// ---------------------------------------------------------------------------

struct TimingArgs {
  std::string kernel = "tntk";
  std::string depth_list = "1:2:29";
  std::size_t n = 300;
  std::size_t dim = 10;
  std::size_t trials = 10;
  double alpha = 2.0;
};

void cmd_timing(const Global& g, const TimingArgs& a) {
  experiments::TimingConfig cfg;
  cfg.kernel = a.kernel;
  cfg.depths = parse_list<int>(a.depth_list, "--depth-list");
  for (int d : cfg.depths)
    if (d < 1) throw UsageError("--depth-list entries must be >= 1");
  cfg.n = a.n;
  cfg.dim = a.dim;
  cfg.trials = a.trials;
  cfg.alpha = a.alpha;
  cfg.seed = g.seed;
  const auto r = experiments::timing(cfg);
  auto config = base_config("timing", g);
  config.update(json{{"kernel", a.kernel}, {"depth_list", cfg.depths}, {"n", a.n}, {"dim", a.dim}, {"trials", a.trials},
                     {"alpha", a.alpha}});
  if (g.format == "json") {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back({{"depth", row.depth}, {"trial", row.trial}, {"seconds", row.seconds}});
    emit_json(g,
              json{{"rows", rows},
                   {"depths", cfg.depths},
                   {"mean_seconds", r.mean_seconds},
                   {"std_seconds", r.std_seconds},
                   {"slope", r.fit.slope},
                   {"p_value", r.fit.p_value},
                   {"relative_change", r.relative_change}},
              config);
  } else {
    Sink sink(g.out);
    auto& os = sink.stream();
    csv_header(os, config);
    num(os) << "depth,trials,mean_seconds,std_seconds\n";
    for (std::size_t k = 0; k < cfg.depths.size(); ++k)
      os << cfg.depths[k] << ',' << a.trials << ',' << r.mean_seconds[k] << ',' << r.std_seconds[k] << '\n';
  }
  std::cerr << "slope " << r.fit.slope << " s per depth, p=" << r.fit.p_value << ", relative change "
            << 100.0 * r.relative_change << "%\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree neural tangent kernel workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Base seed (TNTK_SEED overrides)");
  app.add_option("--out", g.out, "Output file, '-' for stdout");
  app.add_option("--threads", g.threads, "Worker cap, 0 = hardware concurrency");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  GramArgs ga;
  auto* gram = app.add_subcommand("gram", "Limiting Gram matrix of an input file");
  ga.app = gram;
  gram->add_option("--kernel", ga.kernel, "tntk, mlp or rbf");
  gram->add_option("--depth", ga.depth, "Tree depth (tntk)");
  gram->add_option("--alpha", ga.alpha, "Splitting hardness (tntk, mlp erf)");
  gram->add_option("--layers", ga.layers, "Hidden layers (mlp)");
  gram->add_option("--activation", ga.activation, "relu or erf (mlp)");
  gram->add_option("--gamma", ga.gamma, "RBF width (rbf)");
  gram->add_option("--input", ga.input, "Input CSV, one sample per row")->required();
  gram->add_flag("--labels", ga.labels, "The last column is a label and is skipped");
  gram->add_flag("--preprocess", ga.preprocess, "Append bias and normalize rows");

  RegressArgs ra;
  auto* regress = app.add_subcommand("regress", "Kernel ridge classification");
  regress->add_option("--input", ra.input, "Labelled training CSV")->required();
  regress->add_option("--test", ra.test, "Labelled test CSV (default: score the training set)");
  regress->add_option("--gram", ra.gram, "Precomputed training Gram matrix (from 'gram')");
  regress->add_option("--kernel", ra.kernel, "Kernel spec, e.g. tntk:depth=3,alpha=2");
  regress->add_option("--ridge", ra.ridge, "Ridge strength")->check(CLI::NonNegativeNumber);
  regress->add_option("--encoding", ra.encoding, "zero-one or plus-minus");
  regress->add_option("--dump-gram", ra.dump_gram, "Write the Gram matrix that was used");
  regress->add_flag("--preprocess", ra.preprocess, "Append bias and normalize rows");

  ConvergeArgs ca;
  auto* converge = app.add_subcommand("converge", "Empirical NTK at initialization vs the limit");
  converge->add_option("--depth", ca.depth)->check(CLI::Range(1, 24));
  converge->add_option("--alpha", ca.alpha)->check(CLI::PositiveNumber);
  converge->add_option("--m-list", ca.m_list);
  converge->add_option("--trials", ca.trials)->check(CLI::PositiveNumber);
  converge->add_option("--points", ca.points)->check(CLI::PositiveNumber);
  converge->add_option("--dim", ca.dim)->check(CLI::PositiveNumber);
  converge->add_option("--beta-points", ca.beta_points, "Also sweep x'=(cos b, sin b) on this many points");
  converge->add_option("--beta-trees", ca.beta_trees)->check(CLI::PositiveNumber);
  converge->add_option("--beta-out", ca.beta_out, "CSV file for the sweep");

  TrajectoryArgs ta;
  auto* traj = app.add_subcommand("trajectory", "Gradient descent vs the analytic gradient-flow outputs");
  traj->add_option("--m", ta.m)->check(CLI::PositiveNumber);
  traj->add_option("--depth", ta.depth)->check(CLI::Range(1, 24));
  traj->add_option("--alpha", ta.alpha)->check(CLI::PositiveNumber);
  traj->add_option("--lr", ta.lr)->check(CLI::NonNegativeNumber);
  traj->add_option("--steps", ta.steps);
  traj->add_option("--train-n", ta.train_n)->check(CLI::PositiveNumber);
  traj->add_option("--test-n", ta.test_n);
  traj->add_option("--dim", ta.dim)->check(CLI::PositiveNumber);

  DriftArgs da;
  auto* drift = app.add_subcommand("drift", "Kernel drift during training vs M");
  drift->add_option("--m-list", da.m_list);
  drift->add_option("--depth", da.depth)->check(CLI::Range(1, 24));
  drift->add_option("--alpha", da.alpha)->check(CLI::PositiveNumber);
  drift->add_option("--lr", da.lr)->check(CLI::NonNegativeNumber);
  drift->add_option("--steps", da.steps);
  drift->add_option("--checkpoints", da.checkpoints);
  drift->add_option("--seeds", da.seeds)->check(CLI::PositiveNumber);
  drift->add_option("--n", da.n)->check(CLI::PositiveNumber);
  drift->add_option("--dim", da.dim)->check(CLI::PositiveNumber);

  ObliviousArgs oa;
  auto* obl = app.add_subcommand("oblivious", "Vanilla vs oblivious empirical NTK error");
  obl->add_option("--m-list", oa.m_list);
  obl->add_option("--depth", oa.depth)->check(CLI::Range(1, 24));
  obl->add_option("--alpha", oa.alpha)->check(CLI::PositiveNumber);
  obl->add_option("--pairs", oa.pairs)->check(CLI::PositiveNumber);
  obl->add_option("--trials", oa.trials)->check(CLI::PositiveNumber);
  obl->add_option("--dim", oa.dim)->check(CLI::PositiveNumber);

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "Normalized T, Tdot and kernel curves over inner products");
  profile->add_option("--alpha-list", pa.alpha_list, "List or start:step:stop");
  profile->add_option("--depth-list", pa.depth_list, "List or start:step:stop");
  profile->add_option("--rho-grid", pa.rho_grid, "List or start:step:stop within [-1, 1]");
  profile->add_option("--depth", pa.depth, "Depth for the alpha panels")->check(CLI::Range(1, 1000));
  profile->add_option("--alpha", pa.alpha, "Alpha for the depth panel")->check(CLI::PositiveNumber);

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "4-fold CV kernel regression over datasets");
  bench->add_option("--data", ba.data, "Dataset file or directory")->required();
  bench->add_option("--kernels", ba.kernels, "Columns separated by ';' or given by repeating the flag, e.g. 'tntk:alpha=1;mlp;rbf'");
  bench->add_option("--max-depth", ba.max_depth)->check(CLI::Range(1, 1000));
  bench->add_flag("--standardize", ba.standardize, "z-score features before bias and normalization");
  bench->add_option("--bias", ba.bias);
  bench->add_option("--curves-out", ba.curves_out, "Per-spec average accuracy CSV");
  bench->add_option("--json-out", ba.json_out, "Detailed per-fold results");

  TimingArgs tma;
  auto* timing = app.add_subcommand("timing", "Gram computation time vs depth");
  timing->add_option("--kernel", tma.kernel)->check(CLI::IsMember({"tntk", "mlp"}));
  timing->add_option("--depth-list", tma.depth_list);
  timing->add_option("--n", tma.n)->check(CLI::PositiveNumber);
  timing->add_option("--dim", tma.dim)->check(CLI::PositiveNumber);
  timing->add_option("--trials", tma.trials)->check(CLI::PositiveNumber);
  timing->add_option("--alpha", tma.alpha)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "tntk: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (const char* env = std::getenv("TNTK_SEED"); env && *env) {
      const auto v = parse_list<std::uint64_t>(env, "TNTK_SEED");
      if (v.size() != 1) throw UsageError("TNTK_SEED must be a single integer");
      g.seed = v.front();
    }
    set_thread_count(g.threads);
    if (gram->parsed()) cmd_gram(g, ga);
    if (regress->parsed()) cmd_regress(g, ra);
    if (converge->parsed()) cmd_converge(g, ca);
    if (traj->parsed()) cmd_trajectory(g, ta);
    if (drift->parsed()) cmd_drift(g, da);
    if (obl->parsed()) cmd_oblivious(g, oa);
    if (profile->parsed()) cmd_profile(g, pa);
    if (bench->parsed()) cmd_benchmark(g, ba);
    if (timing->parsed()) cmd_timing(g, tma);
  } catch (const UsageError& e) {
    std::cerr << "tntk: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "tntk: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
