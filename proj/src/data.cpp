#include "tntk/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tntk/diagnostics.hpp"
#include "tntk/math_core.hpp"
#include "tntk/parallel.hpp"

namespace tntk::data {

namespace {

std::vector<std::string> split_fields(const std::string& line, std::optional<char> delimiter) {
  std::vector<std::string> out;
  if (!delimiter) {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
    return out;
  }
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, *delimiter)) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? std::string{} : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == *delimiter) out.emplace_back();
  return out;
}

std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool skippable(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

InputMatrix load_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<char> delimiter = schema.delimiter;
  bool decided = false;
  std::optional<bool> header = schema.header;
  std::size_t columns = 0;
  std::vector<double> values;
  std::vector<double> raw_labels;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    if (!decided) {
      if (!delimiter && line.find(',') != std::string::npos) delimiter = ',';
      decided = true;
    }
    auto fields = split_fields(line, delimiter);
    if (!header) header = !to_number(fields.front()).has_value();
    if (*header) {
      header = false;
      continue;
    }
    if (columns == 0) {
      columns = fields.size();
      if (columns < (schema.label_column ? 2u : 1u))
        throw ParseError(line_no, schema.label_column ? "need at least one feature and a label column"
                                                      : "need at least one feature");
    }
    if (fields.size() != columns)
      throw ParseError(line_no, "expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
    int label_col = -1;
    if (schema.label_column) {
      label_col = *schema.label_column < 0 ? static_cast<int>(columns) + *schema.label_column : *schema.label_column;
      if (label_col < 0 || label_col >= static_cast<int>(columns))
        throw ParseError(line_no, "label column " + std::to_string(*schema.label_column) + " out of range");
    }
    for (std::size_t c = 0; c < columns; ++c) {
      const auto v = to_number(fields[c]);
      if (static_cast<int>(c) == label_col) {
        if (!v || *v != std::floor(*v)) throw ParseError(line_no, "non-integer label '" + fields[c] + "'");
        raw_labels.push_back(*v);
        continue;
      }
      if (!v || !std::isfinite(*v)) throw ParseError(line_no, "malformed value '" + fields[c] + "' in column " + std::to_string(c + 1));
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no, "no data rows");
  if (!schema.label_column) return InputMatrix(columns, rows, std::move(values));

  std::set<double> distinct(raw_labels.begin(), raw_labels.end());
  std::vector<double> label_values(distinct.begin(), distinct.end());
  std::vector<int> labels;
  labels.reserve(raw_labels.size());
  for (double v : raw_labels)
    labels.push_back(static_cast<int>(std::lower_bound(label_values.begin(), label_values.end(), v) - label_values.begin()));

  InputMatrix x(columns - 1, raw_labels.size(), std::move(values), std::move(labels));
  x.set_label_values(std::move(label_values));
  return x;
}

InputMatrix load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return load_csv(in, schema);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  }
}

void write_csv(std::ostream& os, const InputMatrix& x) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < x.samples(); ++i) {
    const auto s = x.sample(i);
    for (std::size_t k = 0; k < s.size(); ++k) os << (k ? "," : "") << s[k];
    if (x.has_labels()) {
      const auto l = static_cast<std::size_t>(x.label(i));
      os << ',';
      if (l < x.label_values().size())
        os << x.label_values()[l];
      else
        os << l;
    }
    os << '\n';
  }
  os.precision(old);
}

InputMatrix normalize(const InputMatrix& x) {
  std::vector<double> values(x.values());
  const std::size_t f = x.features();
  for (std::size_t i = 0; i < x.samples(); ++i) {
    const double norm = math::norm2(x.sample(i));
    if (!(norm > 0.0)) throw std::invalid_argument("normalize: sample " + std::to_string(i) + " has zero norm");
    for (std::size_t k = 0; k < f; ++k) values[i * f + k] /= norm;
  }
  InputMatrix out(f, x.samples(), std::move(values), x.labels());
  out.set_label_values(x.label_values());
  out.set_names(x.names());
  return out;
}

std::size_t count_duplicates(const InputMatrix& x) {
  std::set<std::vector<double>> seen;
  std::size_t dup = 0;
  for (std::size_t i = 0; i < x.samples(); ++i) {
    const auto s = x.sample(i);
    if (!seen.emplace(s.begin(), s.end()).second) ++dup;
  }
  return dup;
}

InputMatrix preprocess(const InputMatrix& raw, const PreprocessOptions& options) {
  if (options.bias_value == 0.0 || !std::isfinite(options.bias_value))
    throw std::invalid_argument("preprocess: bias value must be finite and nonzero");
  const std::size_t n = raw.samples();
  const std::size_t f = raw.features();
  if (n == 0) throw std::invalid_argument("preprocess: no samples");

  std::vector<std::size_t> kept;
  std::vector<double> mean(f, 0.0), sd(f, 0.0);
  for (std::size_t k = 0; k < f; ++k) {
    for (std::size_t i = 0; i < n; ++i) mean[k] += raw.sample(i)[k];
    mean[k] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sd[k] += (raw.sample(i)[k] - mean[k]) * (raw.sample(i)[k] - mean[k]);
    sd[k] = std::sqrt(sd[k] / static_cast<double>(n));
    // A single sample has no spread to measure; keep its features as they are.
    if (n > 1 && sd[k] == 0.0) {
      warn("preprocess: dropping constant feature " + std::to_string(k + 1));
      continue;
    }
    kept.push_back(k);
  }

  const std::size_t out_f = kept.size() + 1;
  std::vector<double> values;
  values.reserve(out_f * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = raw.sample(i);
    for (std::size_t k : kept) values.push_back(options.standardize && n > 1 ? (s[k] - mean[k]) / sd[k] : s[k]);
    values.push_back(options.bias_value);
  }
  InputMatrix with_bias(out_f, n, std::move(values), raw.labels());
  with_bias.set_label_values(raw.label_values());
  with_bias.set_names(raw.names());
  auto out = normalize(with_bias);
  if (const auto dup = count_duplicates(out); dup > 0)
    warn("preprocess: " + std::to_string(dup) + " duplicate sample(s); the kernel matrix is singular without ridge");
  return out;
}

std::vector<std::size_t> CvPlan::fold_train(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < test_folds.size(); ++k)
    if (k != fold) out.insert(out.end(), test_folds[k].begin(), test_folds[k].end());
  std::sort(out.begin(), out.end());
  return out;
}

CvPlan make_cv_plan(const InputMatrix& x, std::uint64_t seed, std::size_t folds) {
  const std::size_t n = x.samples();
  if (folds < 2) throw std::invalid_argument("make_cv_plan: need at least two folds");
  if (n < folds)
    throw std::invalid_argument("make_cv_plan: " + std::to_string(n) + " samples cannot fill " + std::to_string(folds) +
                                " folds");
  math::RngState rng(seed, 0);
  std::vector<int> labels = x.has_labels() ? x.labels() : std::vector<int>(n, 0);
  const std::size_t classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  CvPlan plan;
  plan.seed = seed;
  plan.test_folds.assign(folds, {});
  std::size_t next = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!members[c].empty() && members[c].size() < folds)
      warn("make_cv_plan: class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
           " samples, fewer than the fold count");
    auto idx = members[c];
    math::shuffle(idx, rng);
    for (std::size_t i : idx) {
      plan.test_folds[next].push_back(i);
      next = (next + 1) % folds;
    }
  }
  for (auto& f : plan.test_folds) std::sort(f.begin(), f.end());

  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i : plan.fold_train(k)) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<std::size_t> train, validation;
    for (auto& idx : by_class) {
      math::shuffle(idx, rng);
      const std::size_t half = (idx.size() + 1) / 2;
      train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
      validation.insert(validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(validation.begin(), validation.end());
    plan.inner_train.push_back(std::move(train));
    plan.inner_validation.push_back(std::move(validation));
  }
  return plan;
}

namespace {

math::SymmetricMatrix principal(const math::SymmetricMatrix& g, const std::vector<std::size_t>& idx) {
  std::vector<double> out(idx.size() * idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out[a * idx.size() + b] = g(idx[a], idx[b]);
  return math::SymmetricMatrix(idx.size(), std::move(out));
}

math::Matrix block(const math::SymmetricMatrix& g, const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& cols) {
  math::Matrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = g(rows[a], cols[b]);
  return out;
}

std::vector<int> labels_at(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

// Accuracy of a model trained on `train` and scored on `test`, from the full Gram.
double split_accuracy(const math::SymmetricMatrix& g, const std::vector<int>& labels, std::size_t classes,
                      const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                      const TuneOptions& options) {
  const auto targets = regression::one_hot(labels_at(labels, train), classes, options.encoding);
  const auto dual = regression::krr_solve(principal(g, train), targets, options.ridge);
  const auto scores = regression::krr_predict(block(g, test, train), dual);
  return regression::accuracy(regression::decode(scores, options.encoding), labels_at(labels, test));
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

TuneResult tune_and_evaluate(const InputMatrix& x, const std::vector<kernels::KernelSpec>& grid, const CvPlan& plan,
                             const TuneOptions& options) {
  if (grid.empty()) throw std::invalid_argument("tune_and_evaluate: empty kernel grid");
  if (!x.has_labels()) throw std::invalid_argument("tune_and_evaluate: dataset has no labels");
  const std::size_t classes = x.class_count();
  const auto& labels = x.labels();

  std::vector<math::SymmetricMatrix> grams(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s) grams[s] = kernels::gram(grid[s], x).matrix;

  TuneResult result;
  result.grid = grid;
  const std::size_t folds = plan.folds();
  result.per_fold.resize(folds);
  std::vector<std::string> failures(folds * grid.size());
  for (std::size_t k = 0; k < folds; ++k) {
    auto& fr = result.per_fold[k];
    fr.fold = k;
    fr.validation_accuracy.assign(grid.size(), std::nullopt);
    fr.test_accuracy.assign(grid.size(), std::nullopt);
  }
  parallel_for(folds * grid.size(), [&](std::size_t task) {
    const std::size_t k = task / grid.size();
    const std::size_t s = task % grid.size();
    auto& fr = result.per_fold[k];
    try {
      fr.validation_accuracy[s] =
          split_accuracy(grams[s], labels, classes, plan.inner_train[k], plan.inner_validation[k], options);
      fr.test_accuracy[s] = split_accuracy(grams[s], labels, classes, plan.fold_train(k), plan.test_folds[k], options);
    } catch (const math::NotPositiveDefiniteError& e) {
      fr.validation_accuracy[s].reset();
      fr.test_accuracy[s].reset();
      failures[task] = e.what();
    }
  });
  for (std::size_t task = 0; task < failures.size(); ++task)
    if (!failures[task].empty())
      warn("tune_and_evaluate: skipping " + kernels::describe(grid[task % grid.size()]) + " on fold " +
           std::to_string(task / grid.size()) + ": " + failures[task]);

  std::vector<std::size_t> votes(grid.size(), 0);
  double total = 0.0;
  for (auto& fr : result.per_fold) {
    for (std::size_t s = 0; s < grid.size(); ++s) {
      if (!fr.validation_accuracy[s]) continue;
      if (!fr.selected || *fr.validation_accuracy[s] > *fr.validation_accuracy[*fr.selected]) fr.selected = s;
    }
    if (fr.selected) {
      fr.selected_test_accuracy = *fr.test_accuracy[*fr.selected];
      ++votes[*fr.selected];
    }
    total += fr.selected_test_accuracy;
  }
  result.mean_accuracy = 100.0 * total / static_cast<double>(folds);

  for (std::size_t s = 0; s < grid.size(); ++s) {
    std::vector<std::optional<double>> v, t;
    for (const auto& fr : result.per_fold) {
      v.push_back(fr.validation_accuracy[s]);
      t.push_back(fr.test_accuracy[s]);
    }
    result.mean_validation_accuracy.push_back(mean_of(v));
    result.mean_test_accuracy.push_back(mean_of(t));
    if (votes[s] > 0 && (!result.best_spec || votes[s] > votes[*result.best_spec])) result.best_spec = s;
  }
  return result;
}

nlohmann::json to_json(const TuneResult& r, const std::string& dataset) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& s : r.grid) grid.push_back(kernels::to_json(s));
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& fr : r.per_fold) {
    nlohmann::json val = nlohmann::json::array();
    for (const auto& v : fr.validation_accuracy) val.push_back(opt(v));
    folds.push_back({{"fold", fr.fold},
                     {"selected", fr.selected ? nlohmann::json(*fr.selected) : nlohmann::json(nullptr)},
                     {"validation_accuracy", val},
                     {"test_accuracy", fr.selected_test_accuracy}});
  }
  return nlohmann::json{{"dataset", dataset},
                        {"grid", grid},
                        {"per_fold", folds},
                        {"mean_accuracy", r.mean_accuracy},
                        {"best_spec", r.best_spec ? kernels::to_json(r.grid[*r.best_spec]) : nlohmann::json(nullptr)}};
}

std::vector<double> rbf_gamma_grid() {
  return {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
          0.7,  0.8,  0.9,  1.0,  2.0,  3.0,  4.0,  5.0,  6.0,  7.0, 8.0, 9.0, 10.0, 20.0, 30.0};
}

std::vector<kernels::KernelSpec> tntk_depth_grid(double alpha, int max_depth) {
  std::vector<kernels::KernelSpec> g;
  for (int d = 1; d <= max_depth; ++d) g.push_back(kernels::Tntk{d, alpha});
  return g;
}

std::vector<kernels::KernelSpec> mlp_depth_grid(int max_layers) {
  std::vector<kernels::KernelSpec> g;
  for (int l = 1; l <= max_layers; ++l) g.push_back(kernels::MlpNtk{l, kernels::Activation::Relu, 1.0});
  return g;
}

std::vector<BenchmarkColumn> default_columns(int max_depth) {
  std::vector<BenchmarkColumn> cols;
  for (double a : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    std::ostringstream name;
    name << "tntk_alpha=" << a;
    cols.push_back({name.str(), tntk_depth_grid(a, max_depth)});
  }
  cols.push_back({"mlp_ntk", mlp_depth_grid(max_depth)});
  std::vector<kernels::KernelSpec> rbf;
  for (double g : rbf_gamma_grid()) rbf.push_back(kernels::Rbf{g});
  cols.push_back({"rbf", rbf});
  return cols;
}

BenchmarkRow run_benchmark(const std::string& dataset, const InputMatrix& x,
                           const std::vector<BenchmarkColumn>& columns, std::uint64_t seed,
                           const TuneOptions& options) {
  const auto plan = make_cv_plan(x, seed);
  BenchmarkRow row{dataset, x.samples(), {}};
  for (const auto& col : columns) row.columns.push_back(tune_and_evaluate(x, col.grid, plan, options));
  return row;
}

void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkColumn>& columns,
                         const std::vector<BenchmarkRow>& rows, const nlohmann::json& config) {
  os << "# " << (config.is_null() ? nlohmann::json::object() : config).dump() << '\n';
  os << "dataset,size";
  for (const auto& c : columns) os << ',' << c.name;
  os << '\n';
  const auto old = os.precision(6);
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.size;
    for (const auto& t : r.columns) os << ',' << std::fixed << t.mean_accuracy << std::defaultfloat;
    os << '\n';
  }
  os.precision(old);
}

void write_depth_curves_csv(std::ostream& os, const std::vector<BenchmarkColumn>& columns,
                            const std::vector<BenchmarkRow>& rows, const nlohmann::json& config) {
  os << "# " << (config.is_null() ? nlohmann::json::object() : config).dump() << '\n';
  os << "column,spec,dataset_count,mean_accuracy\n";
  const auto old = os.precision(10);
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t s = 0; s < columns[c].grid.size(); ++s) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : rows)
        if (const auto& v = r.columns[c].mean_test_accuracy[s]) {
          sum += *v;
          ++count;
        }
      os << columns[c].name << ",\"" << kernels::describe(columns[c].grid[s]) << "\"," << count << ',';
      if (count) os << 100.0 * sum / static_cast<double>(count);
      os << '\n';
    }
  os.precision(old);
}

double win_rate(const std::vector<BenchmarkRow>& rows, std::size_t a, std::size_t b) {
  if (rows.empty()) return 0.0;
  double wins = 0.0;
  for (const auto& r : rows) {
    const double x = r.columns.at(a).mean_accuracy;
    const double y = r.columns.at(b).mean_accuracy;
    if (x > y)
      wins += 1.0;
    else if (x == y)
      wins += 0.5;
  }
  return wins / static_cast<double>(rows.size());
}

}  // namespace tntk::data
