#include "bnncert/spec.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace bnncert {

void SafetySpec::validate(std::optional<std::size_t> model_outputs) const {
  if (c.rows() == 0) throw ShapeError("safety spec needs at least one constraint row");
  if (d.size() != c.rows()) throw ShapeError("safety spec offset length differs from constraint count");
  if (model_outputs && c.cols() != *model_outputs)
    throw ShapeError("safety spec has " + std::to_string(c.cols()) + " columns but the model has " +
                     std::to_string(*model_outputs) + " outputs");
}

std::vector<double> SafetySpec::evaluate(std::span<const double> y) const {
  if (y.size() != c.cols()) throw ShapeError("spec evaluation: output has wrong dimension");
  std::vector<double> out(d);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) out[i] += c(i, j) * y[j];
  }
  return out;
}

double SafetySpec::margin(std::span<const double> y) const {
  const auto rows = evaluate(y);
  return *std::min_element(rows.begin(), rows.end());
}

InputRegion::InputRegion(std::vector<IntervalBox> boxes) : boxes_(std::move(boxes)) {
  if (boxes_.empty()) throw std::invalid_argument("input region needs at least one box");
  for (const auto& b : boxes_) {
    if (b.dim() != boxes_.front().dim()) throw ShapeError("input region boxes differ in dimension");
  }
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes_.size(); ++j) {
      if (boxes_overlap(boxes_[i], boxes_[j]))
        throw std::invalid_argument("input region boxes " + std::to_string(i) + " and " + std::to_string(j) +
                                    " overlap");
    }
  }
}

SafetySpec band_spec(double delta, std::size_t output_dim) {
  if (!(delta > 0.0)) throw std::invalid_argument("band half-width must be positive");
  if (output_dim != 1) throw ShapeError("band spec is defined for scalar outputs");
  return {Matrix(2, 1, {1.0, -1.0}), {delta, delta}};
}

SafetySpec classification_spec(std::size_t n_classes, std::size_t predicted) {
  if (n_classes == 0 || predicted >= n_classes)
    throw std::out_of_range("predicted class " + std::to_string(predicted) + " outside [0, " +
                            std::to_string(n_classes) + ")");
  Matrix c(n_classes, n_classes);
  for (std::size_t j = 0; j < n_classes; ++j) {
    c(j, predicted) = 1.0;
    if (j != predicted) c(j, j) = -1.0;
  }
  return {std::move(c), std::vector<double>(n_classes, 0.0)};
}

IntervalBox linf_ball(std::span<const double> center, double epsilon, std::optional<Interval> clip) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  std::vector<Interval> dims;
  dims.reserve(center.size());
  for (double c : center) {
    double lo = c - epsilon;
    double hi = c + epsilon;
    if (clip) {
      lo = std::clamp(lo, clip->lo(), clip->hi());
      hi = std::clamp(hi, clip->lo(), clip->hi());
    }
    dims.emplace_back(lo, hi);
  }
  return IntervalBox(std::move(dims));
}

}  // namespace bnncert
