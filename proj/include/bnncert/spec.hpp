#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bnncert/interval.hpp"
#include "bnncert/model.hpp"

namespace bnncert {

/// Safe output set {y : C y + d >= 0}; one row per linear constraint.
struct SafetySpec {
  Matrix c;               // n_S x n_c
  std::vector<double> d;  // n_S

  std::size_t rows() const { return c.rows(); }
  std::size_t output_dim() const { return c.cols(); }

  /// Throws unless there is at least one row and shapes agree (and, when
  /// given, the column count matches the model output dimension).
  void validate(std::optional<std::size_t> model_outputs = std::nullopt) const;

  /// Per-row value of C y + d.
  std::vector<double> evaluate(std::span<const double> y) const;
  /// Smallest row of C y + d; the output is safe iff this is >= 0.
  double margin(std::span<const double> y) const;
};

/// Finite union of pairwise disjoint input boxes.
class InputRegion {
 public:
  InputRegion() = default;
  /// Throws if the boxes differ in dimension or overlap.
  explicit InputRegion(std::vector<IntervalBox> boxes);
  static InputRegion single(IntervalBox box) { return InputRegion(std::vector<IntervalBox>{std::move(box)}); }

  const std::vector<IntervalBox>& boxes() const { return boxes_; }
  std::size_t dim() const { return boxes_.empty() ? 0 : boxes_.front().dim(); }

 private:
  std::vector<IntervalBox> boxes_;
};

/// |y| <= delta for a scalar output.
SafetySpec band_spec(double delta, std::size_t output_dim = 1);

/// Class `predicted` (0-based) stays the argmax and keeps a positive logit:
/// row j != i is y_i - y_j, row i is y_i, offsets zero.
SafetySpec classification_spec(std::size_t n_classes, std::size_t predicted);

/// Per-dimension [c - eps, c + eps], optionally clipped to `clip`.
IntervalBox linf_ball(std::span<const double> center, double epsilon, std::optional<Interval> clip = std::nullopt);

/// Outcome of a one-sided safety check. `Unknown` never claims a violation.
enum class Verdict { Safe, Unknown };

struct SpecCheck {
  Verdict verdict = Verdict::Unknown;
  /// Certified lower bound on min_rows (C f(x) + d); reported even when negative.
  double margin = 0.0;
  bool safe() const { return verdict == Verdict::Safe; }
};

inline SpecCheck make_check(double margin) { return {margin >= 0.0 ? Verdict::Safe : Verdict::Unknown, margin}; }

}  // namespace bnncert
