#include "tntk/input_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tntk/math_core.hpp"

namespace tntk {

InputMatrix::InputMatrix(std::size_t features, std::size_t samples, std::vector<double> values,
                         std::vector<int> labels)
    : features_(features), samples_(samples), values_(std::move(values)), labels_(std::move(labels)) {
  if (values_.size() != features_ * samples_)
    throw std::invalid_argument("InputMatrix: value count does not match F x N");
  if (!labels_.empty() && labels_.size() != samples_)
    throw std::invalid_argument("InputMatrix: label count does not match sample count");
  for (int l : labels_)
    if (l < 0) throw std::invalid_argument("InputMatrix: labels must be non-negative");
}

InputMatrix InputMatrix::from_samples(const std::vector<std::vector<double>>& samples,
                                      std::vector<int> labels) {
  if (samples.empty()) return InputMatrix(0, 0, {}, std::move(labels));
  const std::size_t f = samples.front().size();
  std::vector<double> values;
  values.reserve(f * samples.size());
  for (const auto& s : samples) {
    if (s.size() != f) throw std::invalid_argument("InputMatrix: ragged samples");
    values.insert(values.end(), s.begin(), s.end());
  }
  return InputMatrix(f, samples.size(), std::move(values), std::move(labels));
}

std::size_t InputMatrix::class_count() const {
  if (labels_.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels_.begin(), labels_.end())) + 1;
}

void InputMatrix::set_names(std::vector<std::string> names) {
  if (!names.empty() && names.size() != samples_)
    throw std::invalid_argument("InputMatrix: name count does not match sample count");
  names_ = std::move(names);
}

InputMatrix InputMatrix::subset(std::span<const std::size_t> indices) const {
  std::vector<double> values;
  values.reserve(indices.size() * features_);
  std::vector<int> labels;
  std::vector<std::string> names;
  for (std::size_t i : indices) {
    if (i >= samples_) throw std::out_of_range("InputMatrix::subset: index out of range");
    const auto s = sample(i);
    values.insert(values.end(), s.begin(), s.end());
    if (!labels_.empty()) labels.push_back(labels_[i]);
    if (!names_.empty()) names.push_back(names_[i]);
  }
  InputMatrix out(features_, indices.size(), std::move(values), std::move(labels));
  out.label_values_ = label_values_;
  out.names_ = std::move(names);
  return out;
}

bool InputMatrix::unit_norm(double tolerance) const {
  for (std::size_t i = 0; i < samples_; ++i)
    if (std::abs(math::norm2(sample(i)) - 1.0) > tolerance) return false;
  return true;
}

}  // namespace tntk
