#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnncert/ibp.hpp"
#include "bnncert/interval.hpp"
#include "bnncert/model.hpp"
#include "bnncert/spec.hpp"

namespace bnncert {

/// Lines bracketing an activation on [zeta_lo, zeta_hi]:
///   alpha_lo * v + beta_lo <= sigma(v) <= alpha_hi * v + beta_hi.
struct ActivationRelaxation {
  double alpha_lo = 0.0;
  double beta_lo = 0.0;
  double alpha_hi = 0.0;
  double beta_hi = 0.0;
};

/// ReLU uses the chord above and the 0/1-slope line below (slope 1 when
/// zeta_hi >= |zeta_lo|). Tanh and sigmoid use tangent/chord pairs; when the
/// interval straddles the inflection point the tangent point is found by
/// bisection so that the line stays valid over the whole interval.
ActivationRelaxation relax_activation(ActivationKind kind, double zeta_lo, double zeta_hi);

/// Coefficients on one row of a weight matrix.
struct RowTerm {
  std::size_t layer = 0;
  std::size_t row = 0;
  std::size_t rows = 0;  // row count of the full matrix
  std::vector<double> coef;
};

/// Affine function of the input x and of the network weights:
///   input . x + sum_l <weight[l], W^(l)> + row.coef . W^(row.layer)_{row.row,:} + offset.
/// Biases never appear as variables; they are folded into `offset` at their
/// bounding endpoints.
struct LinearBound {
  std::vector<double> input;
  std::vector<Matrix> weight;
  std::optional<RowTerm> row;
  double offset = 0.0;

  /// Value at a concrete input and flattened weight vector.
  double evaluate(const BnnModel& model, std::span<const double> x, std::span<const double> w) const;
  /// Exact minimum / maximum over the input box and the weight box.
  double minimum(const IntervalBox& t, const std::vector<IntervalLayer>& weights) const;
  double maximum(const IntervalBox& t, const std::vector<IntervalLayer>& weights) const;

  /// this += scale * other, densifying `other`'s row term.
  void accumulate(const LinearBound& other, double scale);
};

struct LbfPair {
  LinearBound lower;
  LinearBound upper;
};

/// Bounds on a * g + b given bounds on g; a negative `a` swaps the roles of
/// the lower and upper functions.
LbfPair lbf_linear_combine(const LbfPair& f, double a, double b);

/// Affine function coef_z * z + coef_w * w + constant.
struct BilinearForm {
  double coef_z = 0.0;
  double coef_w = 0.0;
  double constant = 0.0;

  double operator()(double w, double z) const { return coef_z * z + coef_w * w + constant; }
};

/// Which endpoint of z the McCormick planes are anchored at.
enum class McCormickAnchor { ZLower, ZUpper };

struct McCormickForms {
  BilinearForm lower;
  BilinearForm upper;
};

/// Affine under- and over-estimators of w * z on [w] x [z]. With the default
/// anchor:
///   w z >= wL z + w zL - wL zL,   w z <= wU z + w zL - wU zL.
/// With ZUpper the anchor moves to zU (wU and wL trade places).
McCormickForms mccormick_bounds(const Interval& w, const Interval& z, McCormickAnchor anchor = McCormickAnchor::ZLower);

/// How the McCormick anchor is chosen for each product W_ij z_j.
enum class AnchorSelection {
  ZLower,   ///< always the zL-anchored planes
  PerTerm,  ///< per product, the plane with the tighter extremum over the box
};

std::string to_string(AnchorSelection a);
AnchorSelection anchor_selection_from_string(const std::string& name);

struct LbpOptions {
  AnchorSelection anchors = AnchorSelection::ZLower;
};

/// Per-neuron bounding functions on a layer's pre-activation, with their
/// exact extrema over the input and weight boxes.
struct LbfEnvelope {
  std::vector<LbfPair> neurons;
  IntervalBox bounds;
};

struct LbpResult {
  std::vector<LbfEnvelope> layers;  // one per affine layer; last is the output
  IntervalBox output;
};

LbpResult lbp_propagate(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const LbpOptions& options = {});

/// Lower bound of each spec row obtained by pushing the output bounding
/// functions through the spec and minimising.
std::vector<double> lbp_spec_row_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h,
                                        const SafetySpec& spec, const LbpOptions& options = {});

/// Safe iff every row is certified non-negative; each row takes the better of
/// the propagated-spec bound and the plain output-box bound.
SpecCheck lbp_check_spec(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec,
                         const LbpOptions& options = {});

}  // namespace bnncert
