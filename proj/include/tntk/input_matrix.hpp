#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tntk {

/// N samples of F features, stored column per sample (sample i occupies the
/// contiguous range [i*F, (i+1)*F)). Labels, when present, are dense class
/// indices in [0, C); `label_values` keeps the value each index was read as.
class InputMatrix {
 public:
  InputMatrix() = default;
  InputMatrix(std::size_t features, std::size_t samples, std::vector<double> values,
              std::vector<int> labels = {});

  static InputMatrix from_samples(const std::vector<std::vector<double>>& samples,
                                  std::vector<int> labels = {});

  std::size_t features() const { return features_; }
  std::size_t samples() const { return samples_; }

  std::span<const double> sample(std::size_t i) const {
    return {values_.data() + i * features_, features_};
  }
  std::span<double> sample(std::size_t i) { return {values_.data() + i * features_, features_}; }
  const std::vector<double>& values() const { return values_; }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }
  int label(std::size_t i) const { return labels_.at(i); }
  std::size_t class_count() const;

  const std::vector<double>& label_values() const { return label_values_; }
  void set_label_values(std::vector<double> values) { label_values_ = std::move(values); }

  const std::vector<std::string>& names() const { return names_; }
  void set_names(std::vector<std::string> names);

  InputMatrix subset(std::span<const std::size_t> indices) const;

  bool unit_norm(double tolerance = 1e-12) const;

 private:
  std::size_t features_ = 0;
  std::size_t samples_ = 0;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<double> label_values_;
  std::vector<std::string> names_;
};

}  // namespace tntk
