#include "bnncert/estimate.hpp"

#include <cmath>
#include <vector>

#include "bnncert/ibp.hpp"

namespace bnncert {

McEstimate binomial_estimate(std::size_t hits, std::size_t n) {
  if (n == 0) throw std::invalid_argument("estimate needs at least one sample");
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, n, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

namespace {

std::size_t widest_dim(const IntervalBox& b) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < b.dim(); ++i) {
    if (b[i].width() > b[best].width()) best = i;
  }
  return best;
}

bool box_safe(const BnnModel& model, std::span<const double> w, const IntervalBox& h, const IntervalBox& t,
              const SafetySpec& spec, std::size_t budget) {
  std::vector<IntervalBox> stack{t};
  std::size_t examined = 0;
  while (!stack.empty()) {
    IntervalBox b = std::move(stack.back());
    stack.pop_back();
    ++examined;
    if (ibp_check_spec(model, b, h, spec).safe()) continue;
    const auto c = b.center();
    if (spec.margin(forward(model, w, c)) < 0.0) return false;
    if (examined + stack.size() >= budget) return false;
    const std::size_t k = widest_dim(b);
    if (b[k].degenerate()) return false;
    IntervalBox lo = b;
    IntervalBox hi = b;
    lo.set(k, Interval(b[k].lo(), b[k].mid()));
    hi.set(k, Interval(b[k].mid(), b[k].hi()));
    stack.push_back(std::move(hi));
    stack.push_back(std::move(lo));
  }
  return true;
}

void check_shapes(const BnnModel& model, const InputRegion& region, const SafetySpec& spec, std::size_t n) {
  if (n == 0) throw std::invalid_argument("estimate needs at least one sample");
  if (region.dim() != model.input_dim()) throw ShapeError("input region dimension differs from model input dimension");
  spec.validate(model.output_dim());
}

}  // namespace

bool point_network_safe(const BnnModel& model, std::span<const double> w, const InputRegion& region,
                        const SafetySpec& spec, const PsafeOptions& options) {
  const IntervalBox h = IntervalBox::point(w);
  for (const auto& t : region.boxes()) {
    if (!box_safe(model, w, h, t, spec, std::max<std::size_t>(1, options.refine_budget))) return false;
  }
  return true;
}

McEstimate mc_estimate_psafe(const BnnModel& model, const InputRegion& region, const SafetySpec& spec, std::size_t n,
                             std::uint64_t seed, const PsafeOptions& options) {
  check_shapes(model, region, spec, n);
  const auto count = static_cast<std::int64_t>(n);
  std::size_t hits = 0;
#pragma omp parallel for schedule(dynamic, 4) reduction(+ : hits)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto w = sample_weights(model, seed, static_cast<std::uint64_t>(i));
    if (point_network_safe(model, w.values, region, spec, options)) ++hits;
  }
  return binomial_estimate(hits, n);
}

McEstimate mc_estimate_psafe_serial(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                    std::size_t n, std::uint64_t seed, const PsafeOptions& options) {
  check_shapes(model, region, spec, n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = sample_weights(model, seed, i);
    if (point_network_safe(model, w.values, region, spec, options)) ++hits;
  }
  return binomial_estimate(hits, n);
}

McEstimate mc_pointwise_robustness(const BnnModel& model, std::span<const double> x, const SafetySpec& spec,
                                   std::size_t n, std::uint64_t seed) {
  if (x.size() != model.input_dim()) throw ShapeError("input point has wrong dimension");
  spec.validate(model.output_dim());
  if (n == 0) throw std::invalid_argument("estimate needs at least one sample");
  const auto count = static_cast<std::int64_t>(n);
  std::size_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto w = sample_weights(model, seed, static_cast<std::uint64_t>(i));
    if (spec.margin(forward(model, w, x)) >= 0.0) ++hits;
  }
  return binomial_estimate(hits, n);
}

McMean mc_mean_output(const BnnModel& model, std::span<const double> x, std::size_t n, std::uint64_t seed) {
  if (x.size() != model.input_dim()) throw ShapeError("input point has wrong dimension");
  if (n < 2) throw std::invalid_argument("mean estimate needs at least two samples");
  const std::size_t m = model.output_dim();
  // Samples are reduced in index order so the result is thread-count free.
  std::vector<std::vector<double>> outputs(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) outputs[i] = forward(model, sample_weights(model, seed, i), x);

  McMean out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), n};
  for (const auto& y : outputs) {
    for (std::size_t j = 0; j < m; ++j) out.mean[j] += y[j];
  }
  for (auto& v : out.mean) v /= static_cast<double>(n);
  for (const auto& y : outputs) {
    for (std::size_t j = 0; j < m; ++j) out.standard_error[j] += (y[j] - out.mean[j]) * (y[j] - out.mean[j]);
  }
  for (auto& v : out.standard_error) v = std::sqrt(v / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

}  // namespace bnncert
