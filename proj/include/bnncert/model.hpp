#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnncert/interval.hpp"

namespace bnncert {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ActivationKind { ReLU, Tanh, Sigmoid, Identity };

double activate(ActivationKind kind, double v);
/// Derivative, used by the S-shaped relaxations.
double activate_derivative(ActivationKind kind, double v);
std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

/// Diagonal Gaussian posterior of one affine layer followed by its activation.
/// `weight_mean` is (outputs x inputs).
struct LayerPosterior {
  Matrix weight_mean;
  Matrix weight_var;
  std::vector<double> bias_mean;
  std::vector<double> bias_var;
  ActivationKind activation = ActivationKind::ReLU;

  std::size_t inputs() const { return weight_mean.cols(); }
  std::size_t outputs() const { return weight_mean.rows(); }
  std::size_t parameter_count() const { return weight_mean.size() + bias_mean.size(); }
};

/// BNN with a fully factorised Gaussian posterior. The last layer is the
/// output layer and always carries Identity; every other layer is hidden.
///
/// Flattened weight order (shared by samples, rectangles and measures):
/// layer by layer, each layer contributing its weights row-major followed by
/// its biases.
class BnnModel {
 public:
  BnnModel() = default;
  /// Validates shapes, variances and activations; throws on violation.
  explicit BnnModel(std::vector<LayerPosterior> layers);

  const std::vector<LayerPosterior>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t hidden_layers() const { return layers_.size() - 1; }
  std::size_t input_dim() const { return layers_.front().inputs(); }
  std::size_t output_dim() const { return layers_.back().outputs(); }
  std::size_t parameter_count() const { return offsets_.back(); }
  /// Index of the first flattened parameter of layer `k`.
  std::size_t layer_offset(std::size_t k) const { return offsets_[k]; }

  /// Posterior means / variances in flattened order.
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }

 private:
  std::vector<LayerPosterior> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> mean_;
  std::vector<double> variance_;
};

/// One point in weight space, flattened in the model's order.
struct WeightSample {
  std::vector<double> values;
};

/// Point-valued network view of a weight vector (or of the posterior mean).
double weight_at(const BnnModel& model, std::span<const double> w, std::size_t layer, std::size_t row,
                 std::size_t col);
double bias_at(const BnnModel& model, std::span<const double> w, std::size_t layer, std::size_t row);

/// Deterministic network output f^w(x).
std::vector<double> forward(const BnnModel& model, std::span<const double> w, std::span<const double> x);
inline std::vector<double> forward(const BnnModel& model, const WeightSample& w, std::span<const double> x) {
  return forward(model, w.values, x);
}

/// Draws every scalar independently from N(mean, var). The draw is a pure
/// function of (seed, stream), so stream i can be generated on any thread.
WeightSample sample_weights(const BnnModel& model, std::uint64_t seed, std::uint64_t stream = 0);

/// How the weight margin scales each rectangle side.
enum class MarginSemantics {
  StdDev,    ///< [w - g*sqrt(var), w + g*sqrt(var)]
  Variance,  ///< [w - g*var, w + g*var], literal reading of the algorithm
};

std::string to_string(MarginSemantics s);
MarginSemantics margin_semantics_from_string(const std::string& name);

/// Candidate weight rectangle centred on `w`; zero-variance weights give a
/// degenerate side at w_i.
IntervalBox weight_rectangle(const BnnModel& model, const WeightSample& w, double gamma,
                             MarginSemantics semantics = MarginSemantics::StdDev);

}  // namespace bnncert
