#include "bnncert/lbp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bnncert {

namespace {

constexpr double kTangentTolerance = 1e-8;
constexpr int kTangentMaxIterations = 60;

ActivationRelaxation tangent_chord(ActivationKind kind, double l, double u) {
  const double sl = activate(kind, l);
  const double su = activate(kind, u);
  const double slope = (su - sl) / (u - l);
  const double chord_beta = sl - slope * l;

  auto tangent_at = [kind](double d) {
    const double a = activate_derivative(kind, d);
    return std::pair{a, activate(kind, d) - a * d};
  };

  ActivationRelaxation r;
  if (u <= 0.0) {
    // Convex side: tangent at the midpoint below, chord above.
    std::tie(r.alpha_lo, r.beta_lo) = tangent_at(0.5 * (l + u));
    r.alpha_hi = slope;
    r.beta_hi = chord_beta;
    return r;
  }
  if (l >= 0.0) {
    // Concave side: chord below, tangent at the midpoint above.
    r.alpha_lo = slope;
    r.beta_lo = chord_beta;
    std::tie(r.alpha_hi, r.beta_hi) = tangent_at(0.5 * (l + u));
    return r;
  }

  // Upper line: through (l, sigma(l)) and tangent at some d in [0, u]. The
  // gap g(d) is negative at 0 and grows with d; keep the side where g >= 0.
  auto upper_gap = [&](double d) {
    return activate(kind, d) + activate_derivative(kind, d) * (l - d) - sl;
  };
  if (upper_gap(u) <= 0.0) {
    r.alpha_hi = slope;
    r.beta_hi = chord_beta;
  } else {
    double lo = 0.0;
    double hi = u;
    for (int it = 0; it < kTangentMaxIterations && hi - lo > kTangentTolerance; ++it) {
      const double m = 0.5 * (lo + hi);
      (upper_gap(m) >= 0.0 ? hi : lo) = m;
    }
    std::tie(r.alpha_hi, r.beta_hi) = tangent_at(hi);
  }

  // Lower line: through (u, sigma(u)) and tangent at some d in [l, 0]; keep
  // the side where the line stays at or below sigma(u).
  auto lower_gap = [&](double d) {
    return activate(kind, d) + activate_derivative(kind, d) * (u - d) - su;
  };
  if (lower_gap(l) >= 0.0) {
    r.alpha_lo = slope;
    r.beta_lo = chord_beta;
  } else {
    double lo = l;
    double hi = 0.0;
    for (int it = 0; it < kTangentMaxIterations && hi - lo > kTangentTolerance; ++it) {
      const double m = 0.5 * (lo + hi);
      (lower_gap(m) <= 0.0 ? lo : hi) = m;
    }
    std::tie(r.alpha_lo, r.beta_lo) = tangent_at(lo);
  }
  return r;
}

double weight_term_min(const Matrix& coef, const IntervalMatrix& w) {
  double acc = 0.0;
  for (std::size_t a = 0; a < coef.rows(); ++a) {
    for (std::size_t b = 0; b < coef.cols(); ++b) {
      const double c = coef(a, b);
      acc += c * (c >= 0.0 ? w(a, b).lo() : w(a, b).hi());
    }
  }
  return acc;
}

double row_term_min(const RowTerm& row, const IntervalMatrix& w) {
  double acc = 0.0;
  for (std::size_t b = 0; b < row.coef.size(); ++b) {
    const double c = row.coef[b];
    acc += c * (c >= 0.0 ? w(row.row, b).lo() : w(row.row, b).hi());
  }
  return acc;
}

LinearBound negated(const LinearBound& f) {
  LinearBound out;
  out.accumulate(f, -1.0);
  return out;
}

LinearBound scaled(const LinearBound& f, double a, double b) {
  LinearBound out;
  out.input.assign(f.input.size(), 0.0);
  out.accumulate(f, a);
  if (f.row) {
    // Keep a single-row term sparse instead of densifying it.
    out.weight.resize(std::min(out.weight.size(), f.row->layer));
    RowTerm row = *f.row;
    for (double& c : row.coef) c *= a;
    out.row = std::move(row);
  }
  out.offset += b;
  return out;
}

void check_inputs(const BnnModel& model, const IntervalBox& t, const IntervalBox& h) {
  if (t.dim() != model.input_dim()) throw ShapeError("input box dimension differs from model input dimension");
  if (h.dim() != model.parameter_count()) throw ShapeError("weight box dimension differs from parameter count");
}

// Extremum of a z + b w + c over the scalar box [w] x [z].
double form_min(const BilinearForm& f, const Interval& w, const Interval& z) {
  return f.constant + std::min(f.coef_z * z.lo(), f.coef_z * z.hi()) + std::min(f.coef_w * w.lo(), f.coef_w * w.hi());
}
double form_max(const BilinearForm& f, const Interval& w, const Interval& z) {
  return f.constant + std::max(f.coef_z * z.lo(), f.coef_z * z.hi()) + std::max(f.coef_w * w.lo(), f.coef_w * w.hi());
}

McCormickForms select_planes(const Interval& w, const Interval& z, AnchorSelection mode) {
  McCormickForms mc = mccormick_bounds(w, z, McCormickAnchor::ZLower);
  if (mode == AnchorSelection::ZLower) return mc;
  const McCormickForms alt = mccormick_bounds(w, z, McCormickAnchor::ZUpper);
  if (form_min(alt.lower, w, z) > form_min(mc.lower, w, z)) mc.lower = alt.lower;
  if (form_max(alt.upper, w, z) < form_max(mc.upper, w, z)) mc.upper = alt.upper;
  return mc;
}

// Bounding functions on the pre-activation of neuron `i` of affine layer `k`,
// given bounding functions and scalar bounds on that layer's inputs.
LbfPair neuron_bounds(const IntervalLayer& layer, std::size_t k, std::size_t i, const std::vector<LbfPair>& z_lbf,
                      const IntervalBox& z_box, std::size_t input_dim, AnchorSelection anchors) {
  const std::size_t n_in = layer.weight.cols();
  LbfPair out;
  out.lower.input.assign(input_dim, 0.0);
  out.upper.input.assign(input_dim, 0.0);
  out.lower.offset = layer.bias[i].lo();
  out.upper.offset = layer.bias[i].hi();
  RowTerm lower_row{k, i, layer.weight.rows(), std::vector<double>(n_in)};
  RowTerm upper_row{k, i, layer.weight.rows(), std::vector<double>(n_in)};

  for (std::size_t j = 0; j < n_in; ++j) {
    const McCormickForms mc = select_planes(layer.weight(i, j), z_box[j], anchors);

    const double a_lo = mc.lower.coef_z;
    if (a_lo != 0.0) out.lower.accumulate(a_lo >= 0.0 ? z_lbf[j].lower : z_lbf[j].upper, a_lo);
    lower_row.coef[j] = mc.lower.coef_w;
    out.lower.offset += mc.lower.constant;

    const double a_hi = mc.upper.coef_z;
    if (a_hi != 0.0) out.upper.accumulate(a_hi >= 0.0 ? z_lbf[j].upper : z_lbf[j].lower, a_hi);
    upper_row.coef[j] = mc.upper.coef_w;
    out.upper.offset += mc.upper.constant;
  }
  out.lower.row = std::move(lower_row);
  out.upper.row = std::move(upper_row);
  return out;
}

}  // namespace

std::string to_string(AnchorSelection a) { return a == AnchorSelection::ZLower ? "lower" : "per-term"; }

AnchorSelection anchor_selection_from_string(const std::string& name) {
  if (name == "lower") return AnchorSelection::ZLower;
  if (name == "per-term") return AnchorSelection::PerTerm;
  throw std::invalid_argument("unknown anchor selection '" + name + "'");
}

ActivationRelaxation relax_activation(ActivationKind kind, double zeta_lo, double zeta_hi) {
  if (!(zeta_lo <= zeta_hi)) throw std::invalid_argument("relax_activation: zeta_lo > zeta_hi");
  switch (kind) {
    case ActivationKind::Identity:
      return {1.0, 0.0, 1.0, 0.0};
    case ActivationKind::ReLU: {
      if (zeta_lo >= 0.0) return {1.0, 0.0, 1.0, 0.0};
      if (zeta_hi <= 0.0) return {0.0, 0.0, 0.0, 0.0};
      const double slope = zeta_hi / (zeta_hi - zeta_lo);
      const double lower_slope = zeta_hi >= -zeta_lo ? 1.0 : 0.0;
      return {lower_slope, 0.0, slope, -slope * zeta_lo};
    }
    case ActivationKind::Tanh:
    case ActivationKind::Sigmoid: {
      if (zeta_lo == zeta_hi) {
        const double v = activate(kind, zeta_lo);
        return {0.0, v, 0.0, v};
      }
      return tangent_chord(kind, zeta_lo, zeta_hi);
    }
  }
  throw std::invalid_argument("relax_activation: unsupported activation");
}

double LinearBound::evaluate(const BnnModel& model, std::span<const double> x, std::span<const double> w) const {
  double acc = offset;
  for (std::size_t i = 0; i < input.size(); ++i) acc += input[i] * x[i];
  for (std::size_t l = 0; l < weight.size(); ++l) {
    const Matrix& m = weight[l];
    for (std::size_t a = 0; a < m.rows(); ++a) {
      for (std::size_t b = 0; b < m.cols(); ++b) acc += m(a, b) * weight_at(model, w, l, a, b);
    }
  }
  if (row) {
    for (std::size_t b = 0; b < row->coef.size(); ++b) acc += row->coef[b] * weight_at(model, w, row->layer, row->row, b);
  }
  return acc;
}

double LinearBound::minimum(const IntervalBox& t, const std::vector<IntervalLayer>& weights) const {
  double acc = offset + min_linear_over_box(input, 0.0, t);
  for (std::size_t l = 0; l < weight.size(); ++l) {
    if (weight[l].size() != 0) acc += weight_term_min(weight[l], weights[l].weight);
  }
  if (row) acc += row_term_min(*row, weights[row->layer].weight);
  return acc;
}

double LinearBound::maximum(const IntervalBox& t, const std::vector<IntervalLayer>& weights) const {
  return -negated(*this).minimum(t, weights);
}

void LinearBound::accumulate(const LinearBound& other, double scale) {
  if (input.size() < other.input.size()) input.resize(other.input.size(), 0.0);
  for (std::size_t i = 0; i < other.input.size(); ++i) input[i] += scale * other.input[i];

  auto dense = [this](std::size_t layer, std::size_t rows, std::size_t cols) -> Matrix& {
    if (weight.size() <= layer) weight.resize(layer + 1);
    if (weight[layer].size() == 0) weight[layer] = Matrix(rows, cols);
    return weight[layer];
  };

  for (std::size_t l = 0; l < other.weight.size(); ++l) {
    const Matrix& src = other.weight[l];
    if (src.size() == 0) continue;
    Matrix& dst = dense(l, src.rows(), src.cols());
    auto& d = dst.data();
    const auto& s = src.data();
    for (std::size_t e = 0; e < s.size(); ++e) d[e] += scale * s[e];
  }
  if (other.row) {
    const RowTerm& r = *other.row;
    auto dst = dense(r.layer, r.rows, r.coef.size()).row(r.row);
    for (std::size_t b = 0; b < r.coef.size(); ++b) dst[b] += scale * r.coef[b];
  }
  offset += scale * other.offset;
}

LbfPair lbf_linear_combine(const LbfPair& f, double a, double b) {
  if (a >= 0.0) return {scaled(f.lower, a, b), scaled(f.upper, a, b)};
  return {scaled(f.upper, a, b), scaled(f.lower, a, b)};
}

McCormickForms mccormick_bounds(const Interval& w, const Interval& z, McCormickAnchor anchor) {
  const double z0 = anchor == McCormickAnchor::ZLower ? z.lo() : z.hi();
  // With z anchored at its lower end the lower plane uses wL; anchored at the
  // upper end the roles of wL and wU swap.
  const double w_lower = anchor == McCormickAnchor::ZLower ? w.lo() : w.hi();
  const double w_upper = anchor == McCormickAnchor::ZLower ? w.hi() : w.lo();
  return {BilinearForm{w_lower, z0, -w_lower * z0}, BilinearForm{w_upper, z0, -w_upper * z0}};
}

LbpResult lbp_propagate(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const LbpOptions& options) {
  check_inputs(model, t, h);
  const auto weights = split_weight_box(model, h);
  const std::size_t n_x = model.input_dim();

  // The network input bounds itself exactly.
  std::vector<LbfPair> z_lbf(n_x);
  for (std::size_t j = 0; j < n_x; ++j) {
    z_lbf[j].lower.input.assign(n_x, 0.0);
    z_lbf[j].lower.input[j] = 1.0;
    z_lbf[j].upper = z_lbf[j].lower;
  }
  IntervalBox z_box = t;

  LbpResult result;
  result.layers.reserve(model.layer_count());
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const IntervalLayer& layer = weights[k];
    LbfEnvelope env;
    env.neurons.reserve(layer.weight.rows());
    std::vector<Interval> bounds;
    bounds.reserve(layer.weight.rows());

    for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
      LbfPair pair = neuron_bounds(layer, k, i, z_lbf, z_box, n_x, options.anchors);
      const double lo = pair.lower.minimum(t, weights);
      const double hi = pair.upper.maximum(t, weights);
      // Both ends bound the same quantity; on point boxes rounding can leave
      // them one ulp out of order.
      bounds.emplace_back(std::min(lo, hi), std::max(lo, hi));
      env.neurons.push_back(std::move(pair));
    }
    env.bounds = IntervalBox(std::move(bounds));

    if (k + 1 == model.layer_count()) {
      result.output = env.bounds;
      result.layers.push_back(std::move(env));
      break;
    }

    const ActivationKind kind = model.layers()[k].activation;
    std::vector<LbfPair> next(env.neurons.size());
    std::vector<Interval> next_box;
    next_box.reserve(env.neurons.size());
    for (std::size_t i = 0; i < env.neurons.size(); ++i) {
      const Interval& zeta = env.bounds[i];
      const ActivationRelaxation rel = relax_activation(kind, zeta.lo(), zeta.hi());
      next[i].lower = lbf_linear_combine(env.neurons[i], rel.alpha_lo, rel.beta_lo).lower;
      next[i].upper = lbf_linear_combine(env.neurons[i], rel.alpha_hi, rel.beta_hi).upper;
      next_box.emplace_back(activate(kind, zeta.lo()), activate(kind, zeta.hi()));
    }
    z_lbf = std::move(next);
    z_box = IntervalBox(std::move(next_box));
    result.layers.push_back(std::move(env));
  }
  return result;
}

namespace {

std::vector<double> spec_rows_from(const LbpResult& result, const IntervalBox& t,
                                   const std::vector<IntervalLayer>& weights, const SafetySpec& spec) {
  const auto& out = result.layers.back().neurons;
  std::vector<double> rows(spec.rows());
  for (std::size_t r = 0; r < spec.rows(); ++r) {
    LinearBound acc;
    acc.input.assign(t.dim(), 0.0);
    acc.offset = spec.d[r];
    for (std::size_t j = 0; j < spec.output_dim(); ++j) {
      const double c = spec.c(r, j);
      if (c == 0.0) continue;
      acc.accumulate(c >= 0.0 ? out[j].lower : out[j].upper, c);
    }
    rows[r] = acc.minimum(t, weights);
  }
  return rows;
}

}  // namespace

std::vector<double> lbp_spec_row_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h,
                                        const SafetySpec& spec, const LbpOptions& options) {
  spec.validate(model.output_dim());
  const auto result = lbp_propagate(model, t, h, options);
  return spec_rows_from(result, t, split_weight_box(model, h), spec);
}

SpecCheck lbp_check_spec(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec,
                         const LbpOptions& options) {
  spec.validate(model.output_dim());
  const auto result = lbp_propagate(model, t, h, options);
  const auto propagated = spec_rows_from(result, t, split_weight_box(model, h), spec);
  const auto plain = output_box_row_bounds(result.output, spec);
  double margin = std::max(propagated[0], plain[0]);
  for (std::size_t r = 1; r < propagated.size(); ++r) margin = std::min(margin, std::max(propagated[r], plain[r]));
  return make_check(margin);
}

}  // namespace bnncert
