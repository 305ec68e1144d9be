#include "bnncert/ibp.hpp"

#include <algorithm>

namespace bnncert {

namespace {

void check_inputs(const BnnModel& model, const IntervalBox& t, const IntervalBox& h) {
  if (t.dim() != model.input_dim()) throw ShapeError("input box dimension differs from model input dimension");
  if (h.dim() != model.parameter_count()) throw ShapeError("weight box dimension differs from parameter count");
}

IntervalBox apply_activation(ActivationKind kind, const IntervalBox& pre) {
  std::vector<Interval> out;
  out.reserve(pre.dim());
  for (const auto& v : pre.dims()) out.emplace_back(activate(kind, v.lo()), activate(kind, v.hi()));
  return IntervalBox(std::move(out));
}

IntervalBox affine_bounds(const IntervalLayer& layer, const IntervalBox& z) {
  const auto corners = bilinear_corner_bounds(layer.weight, z);
  std::vector<Interval> out;
  out.reserve(layer.weight.rows());
  for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
    double lo = layer.bias[i].lo();
    double hi = layer.bias[i].hi();
    for (std::size_t j = 0; j < layer.weight.cols(); ++j) {
      lo += corners.lower(i, j);
      hi += corners.upper(i, j);
    }
    out.emplace_back(lo, hi);
  }
  return IntervalBox(std::move(out));
}

}  // namespace

std::vector<IntervalLayer> split_weight_box(const BnnModel& model, const IntervalBox& h) {
  if (h.dim() != model.parameter_count()) throw ShapeError("weight box dimension differs from parameter count");
  std::vector<IntervalLayer> out;
  out.reserve(model.layer_count());
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const auto& l = model.layers()[k];
    IntervalLayer layer{IntervalMatrix(l.outputs(), l.inputs()), {}};
    std::size_t idx = model.layer_offset(k);
    for (std::size_t i = 0; i < l.outputs(); ++i) {
      for (std::size_t j = 0; j < l.inputs(); ++j) layer.weight(i, j) = h[idx++];
    }
    layer.bias.reserve(l.outputs());
    for (std::size_t i = 0; i < l.outputs(); ++i) layer.bias.push_back(h[idx++]);
    out.push_back(std::move(layer));
  }
  return out;
}

BilinearCornerBounds bilinear_corner_bounds(const IntervalMatrix& weight, const IntervalBox& z) {
  if (weight.cols() != z.dim()) throw ShapeError("bilinear bounds: weight columns differ from input dimension");
  BilinearCornerBounds out{Matrix(weight.rows(), weight.cols()), Matrix(weight.rows(), weight.cols())};
  for (std::size_t i = 0; i < weight.rows(); ++i) {
    for (std::size_t j = 0; j < weight.cols(); ++j) {
      const Interval t = interval_bilinear(weight(i, j), z[j]);
      out.lower(i, j) = t.lo();
      out.upper(i, j) = t.hi();
    }
  }
  return out;
}

std::vector<LayerBounds> ibp_layer_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h) {
  check_inputs(model, t, h);
  const auto layers = split_weight_box(model, h);
  std::vector<LayerBounds> out;
  out.reserve(layers.size());
  IntervalBox z = t;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    IntervalBox pre = affine_bounds(layers[k], z);
    IntervalBox post = apply_activation(model.layers()[k].activation, pre);
    z = post;
    out.push_back({std::move(pre), std::move(post)});
  }
  return out;
}

IntervalBox ibp_propagate(const BnnModel& model, const IntervalBox& t, const IntervalBox& h) {
  return ibp_layer_bounds(model, t, h).back().post_act;
}

namespace {

// Post-activation box of the last hidden layer.
IntervalBox last_hidden_bounds(const BnnModel& model, const std::vector<IntervalLayer>& layers, const IntervalBox& t) {
  IntervalBox z = t;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    z = apply_activation(model.layers()[k].activation, affine_bounds(layers[k], z));
  }
  return z;
}

std::vector<double> elided_rows(const IntervalLayer& last, const IntervalBox& z, const SafetySpec& spec) {
  // Fold C into the output layer: W_S = C W, b_S = C b + d, as intervals.
  const std::size_t hidden = last.weight.cols();
  std::vector<double> rows(spec.rows());
  for (std::size_t r = 0; r < spec.rows(); ++r) {
    IntervalLayer folded{IntervalMatrix(1, hidden), {Interval::point(spec.d[r])}};
    for (std::size_t j = 0; j < spec.output_dim(); ++j) {
      const double c = spec.c(r, j);
      if (c == 0.0) continue;
      for (std::size_t l = 0; l < hidden; ++l) folded.weight(0, l) = folded.weight(0, l) + c * last.weight(j, l);
      folded.bias[0] = folded.bias[0] + c * last.bias[j];
    }
    rows[r] = affine_bounds(folded, z)[0].lo();
  }
  return rows;
}

}  // namespace

std::vector<double> ibp_elided_row_bounds(const BnnModel& model, const IntervalBox& t, const IntervalBox& h,
                                          const SafetySpec& spec) {
  check_inputs(model, t, h);
  spec.validate(model.output_dim());
  const auto layers = split_weight_box(model, h);
  return elided_rows(layers.back(), last_hidden_bounds(model, layers, t), spec);
}

std::vector<double> output_box_row_bounds(const IntervalBox& output, const SafetySpec& spec) {
  spec.validate(output.dim());
  std::vector<double> rows(spec.rows());
  for (std::size_t r = 0; r < spec.rows(); ++r) rows[r] = min_linear_over_box(spec.c.row(r), spec.d[r], output);
  return rows;
}

SpecCheck ibp_check_spec(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec) {
  check_inputs(model, t, h);
  spec.validate(model.output_dim());
  const auto layers = split_weight_box(model, h);
  const IntervalBox z = last_hidden_bounds(model, layers, t);
  const auto elided = elided_rows(layers.back(), z, spec);
  const auto plain = output_box_row_bounds(affine_bounds(layers.back(), z), spec);
  double margin = std::max(elided[0], plain[0]);
  for (std::size_t r = 1; r < elided.size(); ++r) margin = std::min(margin, std::max(elided[r], plain[r]));
  return make_check(margin);
}

}  // namespace bnncert
