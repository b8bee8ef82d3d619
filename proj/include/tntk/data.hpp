#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tntk/input_matrix.hpp"
#include "tntk/kernels.hpp"
#include "tntk/regression.hpp"

namespace tntk::data {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CsvSchema {
  // Unset: comma when the first data line has one, otherwise whitespace.
  std::optional<char> delimiter;
  // Negative counts from the end; -1 is the last column. Unset: no labels.
  std::optional<int> label_column = -1;
  // Unset: skip the first line when its first field is not a number.
  std::optional<bool> header;
};

// Raw features and labels. Labels must be integral; they are remapped to
// 0 .. C-1 in ascending order and the original values kept in label_values().
// Blank lines and lines starting with '#' are ignored.
InputMatrix load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
InputMatrix load_csv(std::istream& in, const CsvSchema& schema = {});

// Comma-separated, label (original value) last, 17 significant digits.
void write_csv(std::ostream& os, const InputMatrix& x);

struct PreprocessOptions {
  double bias_value = 1.0;
  // Per-feature z-scoring before the bias is appended.
  bool standardize = false;
};

// Drops constant features (with a warning), optionally standardizes, appends
// the bias coordinate and scales every sample to unit L2 norm. Duplicate
// samples in the result are reported as a warning.
InputMatrix preprocess(const InputMatrix& raw, const PreprocessOptions& options = {});

// Each sample divided by its L2 norm. Throws on a zero sample.
InputMatrix normalize(const InputMatrix& x);

// Number of samples equal to an earlier sample.
std::size_t count_duplicates(const InputMatrix& x);

struct CvPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> test_folds;
  // Per outer fold, a split of the remaining samples in which each class
  // contributes equally to both halves (the odd one out goes to training).
  std::vector<std::vector<std::size_t>> inner_train;
  std::vector<std::vector<std::size_t>> inner_validation;

  std::size_t folds() const { return test_folds.size(); }
  std::vector<std::size_t> fold_train(std::size_t fold) const;
};

// Stratified folds: each class is shuffled and dealt round-robin, continuing
// the rotation across classes, so fold sizes differ by at most one.
CvPlan make_cv_plan(const InputMatrix& x, std::uint64_t seed, std::size_t folds = 4);

struct TuneOptions {
  double ridge = regression::kDefaultRidge;
  regression::TargetEncoding encoding = regression::TargetEncoding::ZeroOne;
};

struct FoldResult {
  std::size_t fold = 0;
  // Index into the grid; nullopt when every spec failed.
  std::optional<std::size_t> selected;
  std::vector<std::optional<double>> validation_accuracy;
  // Refit on the whole fold-train set, scored on the fold's test samples.
  std::vector<std::optional<double>> test_accuracy;
  double selected_test_accuracy = 0.0;
};

struct TuneResult {
  std::vector<kernels::KernelSpec> grid;
  std::vector<FoldResult> per_fold;
  // Percentages.
  double mean_accuracy = 0.0;
  // Per-spec averages over folds (failed folds skipped).
  std::vector<std::optional<double>> mean_validation_accuracy;
  std::vector<std::optional<double>> mean_test_accuracy;
  // Spec chosen in the most folds, ties to the earlier grid entry.
  std::optional<std::size_t> best_spec;
};

// Per outer fold: every spec is fit on the inner-train half and scored on the
// validation half; the best (ties to the first) is refit on the whole fold-train
// set and scored on the fold's test samples. Each spec's Gram matrix over all
// samples is computed once and sliced. Specs whose solve fails are skipped
// with a warning.
TuneResult tune_and_evaluate(const InputMatrix& x, const std::vector<kernels::KernelSpec>& grid, const CvPlan& plan,
                             const TuneOptions& options = {});

nlohmann::json to_json(const TuneResult& r, const std::string& dataset);

// Benchmark table: one column per kernel family setting, tuned independently.
struct BenchmarkColumn {
  std::string name;
  std::vector<kernels::KernelSpec> grid;
};

std::vector<double> rbf_gamma_grid();
std::vector<kernels::KernelSpec> tntk_depth_grid(double alpha, int max_depth = 29);
std::vector<kernels::KernelSpec> mlp_depth_grid(int max_layers = 29);
// alpha = 0.5 .. 64 (eight columns), MLP-NTK and RBF.
std::vector<BenchmarkColumn> default_columns(int max_depth = 29);

struct BenchmarkRow {
  std::string dataset;
  std::size_t size = 0;
  std::vector<TuneResult> columns;
};

BenchmarkRow run_benchmark(const std::string& dataset, const InputMatrix& x,
                           const std::vector<BenchmarkColumn>& columns, std::uint64_t seed,
                           const TuneOptions& options = {});

// dataset,size,<column names...>
void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkColumn>& columns,
                         const std::vector<BenchmarkRow>& rows, const nlohmann::json& config = {});

// column,spec,dataset_count,mean_accuracy: untuned 4-fold accuracy of every
// grid entry averaged over datasets.
void write_depth_curves_csv(std::ostream& os, const std::vector<BenchmarkColumn>& columns,
                            const std::vector<BenchmarkRow>& rows, const nlohmann::json& config = {});

// Fraction of rows where column `a` beats column `b` (ties count half).
double win_rate(const std::vector<BenchmarkRow>& rows, std::size_t a, std::size_t b);

}  // namespace tntk::data
