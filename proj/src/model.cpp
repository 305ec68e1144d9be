#include "bnncert/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace bnncert {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeError("matrix data does not match its shape");
}

double activate(ActivationKind kind, double v) {
  switch (kind) {
    case ActivationKind::ReLU:
      return v > 0.0 ? v : 0.0;
    case ActivationKind::Tanh:
      return std::tanh(v);
    case ActivationKind::Sigmoid:
      return 1.0 / (1.0 + std::exp(-v));
    case ActivationKind::Identity:
      return v;
  }
  return v;
}

double activate_derivative(ActivationKind kind, double v) {
  switch (kind) {
    case ActivationKind::ReLU:
      return v > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case ActivationKind::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s);
    }
    case ActivationKind::Identity:
      return 1.0;
  }
  return 1.0;
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::Sigmoid:
      return "sigmoid";
    case ActivationKind::Identity:
      return "identity";
  }
  return "identity";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "identity" || name == "linear") return ActivationKind::Identity;
  throw std::invalid_argument("unsupported activation '" + name + "'");
}

BnnModel::BnnModel(std::vector<LayerPosterior> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw ShapeError("model needs at least one hidden layer and an output layer");
  offsets_.push_back(0);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const std::string where = "layer " + std::to_string(k);
    if (l.outputs() == 0 || l.inputs() == 0) throw ShapeError(where + ": empty weight matrix");
    if (l.weight_var.rows() != l.outputs() || l.weight_var.cols() != l.inputs())
      throw ShapeError(where + ": weight variance shape differs from weight mean shape");
    if (l.bias_mean.size() != l.outputs() || l.bias_var.size() != l.outputs())
      throw ShapeError(where + ": bias length differs from layer output count");
    if (k > 0 && l.inputs() != layers_[k - 1].outputs())
      throw ShapeError(where + ": expects " + std::to_string(l.inputs()) + " inputs but previous layer has " +
                       std::to_string(layers_[k - 1].outputs()) + " outputs");
    if (k + 1 == layers_.size() && l.activation != ActivationKind::Identity)
      throw std::invalid_argument("output layer must use the identity activation");
    offsets_.push_back(offsets_.back() + l.parameter_count());
  }

  mean_.reserve(offsets_.back());
  variance_.reserve(offsets_.back());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    mean_.insert(mean_.end(), l.weight_mean.data().begin(), l.weight_mean.data().end());
    mean_.insert(mean_.end(), l.bias_mean.begin(), l.bias_mean.end());
    variance_.insert(variance_.end(), l.weight_var.data().begin(), l.weight_var.data().end());
    variance_.insert(variance_.end(), l.bias_var.begin(), l.bias_var.end());
  }
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    if (!std::isfinite(mean_[i])) throw std::invalid_argument("non-finite posterior mean at flat index " + std::to_string(i));
    if (!std::isfinite(variance_[i]) || variance_[i] < 0.0)
      throw std::invalid_argument("invalid posterior variance at flat index " + std::to_string(i));
  }
}

double weight_at(const BnnModel& model, std::span<const double> w, std::size_t layer, std::size_t row,
                 std::size_t col) {
  const auto& l = model.layers()[layer];
  return w[model.layer_offset(layer) + row * l.inputs() + col];
}

double bias_at(const BnnModel& model, std::span<const double> w, std::size_t layer, std::size_t row) {
  const auto& l = model.layers()[layer];
  return w[model.layer_offset(layer) + l.weight_mean.size() + row];
}

std::vector<double> forward(const BnnModel& model, std::span<const double> w, std::span<const double> x) {
  if (x.size() != model.input_dim()) throw ShapeError("forward: input has wrong dimension");
  if (w.size() != model.parameter_count()) throw ShapeError("forward: weight vector has wrong length");

  std::vector<double> z(x.begin(), x.end());
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const auto& layer = model.layers()[k];
    const double* W = w.data() + model.layer_offset(k);
    const double* b = W + layer.weight_mean.size();
    std::vector<double> next(layer.outputs());
    for (std::size_t i = 0; i < layer.outputs(); ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < layer.inputs(); ++j) acc += W[i * layer.inputs() + j] * z[j];
      next[i] = activate(layer.activation, acc);
    }
    z = std::move(next);
  }
  return z;
}

WeightSample sample_weights(const BnnModel& model, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto& mu = model.mean();
  const auto& var = model.variance();
  WeightSample out;
  out.values.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    // Always draw, so that the stream layout does not depend on which variances are zero.
    const double eps = normal(rng);
    out.values[i] = var[i] > 0.0 ? mu[i] + std::sqrt(var[i]) * eps : mu[i];
  }
  return out;
}

std::string to_string(MarginSemantics s) { return s == MarginSemantics::StdDev ? "stddev" : "variance"; }

MarginSemantics margin_semantics_from_string(const std::string& name) {
  if (name == "stddev") return MarginSemantics::StdDev;
  if (name == "variance") return MarginSemantics::Variance;
  throw std::invalid_argument("unknown margin semantics '" + name + "'");
}

IntervalBox weight_rectangle(const BnnModel& model, const WeightSample& w, double gamma, MarginSemantics semantics) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("weight margin must be non-negative");
  if (w.values.size() != model.parameter_count()) throw ShapeError("weight_rectangle: sample has wrong length");
  const auto& var = model.variance();
  std::vector<Interval> dims;
  dims.reserve(var.size());
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double scale = semantics == MarginSemantics::StdDev ? std::sqrt(var[i]) : var[i];
    const double r = gamma * scale;
    dims.emplace_back(w.values[i] - r, w.values[i] + r);
  }
  return IntervalBox(std::move(dims));
}

}  // namespace bnncert
