#include "tntk/regression.hpp"

#include <stdexcept>
#include <string>

namespace tntk::regression {

math::Matrix krr_solve(const math::SymmetricMatrix& gram, const math::Matrix& targets, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("krr: ridge must be non-negative");
  if (targets.rows() != gram.size()) throw std::invalid_argument("krr: target rows do not match the Gram size");
  if (targets.cols() == 0) throw std::invalid_argument("krr: need at least one target channel");
  const math::CholeskyFactor factor(gram, ridge);
  return factor.solve(targets);
}

FittedKrr krr_fit(const kernels::KernelSpec& spec, const InputMatrix& train, const math::Matrix& targets,
                  double ridge) {
  const auto g = kernels::gram(spec, train);
  return FittedKrr{spec, train, krr_solve(g.matrix, targets, ridge), ridge};
}

math::Matrix krr_predict(const math::Matrix& cross, const math::Matrix& dual) {
  if (cross.cols() != dual.rows()) throw std::invalid_argument("krr_predict: cross kernel does not match the model");
  return cross * dual;
}

math::Matrix krr_predict(const FittedKrr& model, const InputMatrix& test) {
  if (test.features() != model.train.features())
    throw std::invalid_argument("krr_predict: test has " + std::to_string(test.features()) +
                                " features, model was trained on " + std::to_string(model.train.features()));
  return krr_predict(kernels::cross_gram(model.spec, test, model.train), model.dual);
}

math::Matrix one_hot(std::span<const int> labels, std::size_t classes, TargetEncoding encoding) {
  if (classes == 0) throw std::invalid_argument("one_hot: need at least one class");
  const double off = encoding == TargetEncoding::ZeroOne ? 0.0 : -1.0;
  math::Matrix t(labels.size(), classes, off);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(c) + " outside [0, " + std::to_string(classes) + ")");
    t(i, static_cast<std::size_t>(c)) = 1.0;
  }
  return t;
}

std::vector<int> decode(const math::Matrix& scores, TargetEncoding encoding) {
  std::vector<int> out(scores.rows());
  if (scores.cols() == 1) {
    const double threshold = encoding == TargetEncoding::ZeroOne ? 0.5 : 0.0;
    for (std::size_t i = 0; i < scores.rows(); ++i) out[i] = scores(i, 0) >= threshold ? 1 : 0;
    return out;
  }
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> classify(const FittedKrr& model, const InputMatrix& test, TargetEncoding encoding) {
  return decode(krr_predict(model, test), encoding);
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace tntk::regression
