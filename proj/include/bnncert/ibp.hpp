#pragma once

#include <vector>

#include "bnncert/interval.hpp"
#include "bnncert/model.hpp"
#include "bnncert/spec.hpp"

namespace bnncert {

/// Interval-valued weights and biases of one layer, cut out of a weight box.
struct IntervalLayer {
  IntervalMatrix weight;
  std::vector<Interval> bias;
};

/// Splits a flattened weight box into per-layer interval weights.
std::vector<IntervalLayer> split_weight_box(const BnnModel& model, const IntervalBox& h);

/// Per-entry corner minima / maxima of W_ij * z_j.
struct BilinearCornerBounds {
  Matrix lower;
  Matrix upper;
};

BilinearCornerBounds bilinear_corner_bounds(const IntervalMatrix& weight, const IntervalBox& z);

/// Pre- and post-activation boxes of one layer.
struct LayerBounds {
  IntervalBox pre_act;
  IntervalBox post_act;
};

/// Bounds for every layer; the last entry is the network output (identity).
std::vector<LayerBounds> ibp_layer_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h);

/// Box containing f^w(x) for every x in t and w in h.
IntervalBox ibp_propagate(const BnnModel& model, const IntervalBox& t, const IntervalBox& h);

/// Lower bound of each spec row with the spec folded into the output layer.
std::vector<double> ibp_elided_row_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h,
                                          const SafetySpec& spec);

/// Lower bound of each spec row obtained from the plain output box.
std::vector<double> output_box_row_bounds(const IntervalBox& output, const SafetySpec& spec);

/// Safe iff every row is certified non-negative. Each row takes the better of
/// the elided and plain-box bounds (both are sound), so the result never falls
/// below the plain-box check.
SpecCheck ibp_check_spec(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec);

}  // namespace bnncert
