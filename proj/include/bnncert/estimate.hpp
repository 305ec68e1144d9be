#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bnncert/model.hpp"
#include "bnncert/spec.hpp"

namespace bnncert {

/// Binomial proportion with its standard error sqrt(p (1 - p) / n).
struct McEstimate {
  double value = 0.0;
  std::size_t n = 0;
  double standard_error = 0.0;
};

McEstimate binomial_estimate(std::size_t hits, std::size_t n);

struct PsafeOptions {
  /// Sub-boxes that may be examined per input box and sampled network. 1
  /// gives the plain interval check on the whole box; larger values bisect
  /// boxes the check cannot decide until they are certified or a concrete
  /// counterexample turns up at a box centre.
  std::size_t refine_budget = 256;
};

/// Sampled networks are declared safe only when an interval check (with a
/// point weight box) certifies every input box; the estimate is therefore
/// biased low with respect to the true safety probability.
McEstimate mc_estimate_psafe(const BnnModel& model, const InputRegion& region, const SafetySpec& spec, std::size_t n,
                             std::uint64_t seed, const PsafeOptions& options = {});
McEstimate mc_estimate_psafe_serial(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                    std::size_t n, std::uint64_t seed, const PsafeOptions& options = {});

/// Is the network with weights `w` certified safe on every box of `region`?
bool point_network_safe(const BnnModel& model, std::span<const double> w, const InputRegion& region,
                        const SafetySpec& spec, const PsafeOptions& options = {});

/// Fraction of sampled networks whose output at the single input x is safe.
/// Upper-bounds the safety probability over any region containing x.
McEstimate mc_pointwise_robustness(const BnnModel& model, std::span<const double> x, const SafetySpec& spec,
                                   std::size_t n, std::uint64_t seed);

/// Monte Carlo mean of each output at x with per-output standard error. For
/// S = {y_i > a} with a > 0 and y_i >= 0, a * P_safe <= E[y_i].
struct McMean {
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t n = 0;
};

McMean mc_mean_output(const BnnModel& model, std::span<const double> x, std::size_t n, std::uint64_t seed);

}  // namespace bnncert
