#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnncert/estimate.hpp"
#include "bnncert/interval.hpp"
#include "bnncert/lbp.hpp"
#include "bnncert/model.hpp"
#include "bnncert/spec.hpp"

namespace bnncert {

enum class CheckMethod { IBP, LBP };

std::string to_string(CheckMethod m);
CheckMethod check_method_from_string(const std::string& name);

struct CertifyConfig {
  std::size_t n_samples = 100;
  double weight_margin = 1.0;
  CheckMethod method = CheckMethod::IBP;
  std::uint64_t seed = 0;
  MarginSemantics margin_semantics = MarginSemantics::StdDev;
  /// Largest number of disjoint pieces kept for one accepted rectangle after
  /// the previously accepted ones are cut out of it. The lightest pieces are
  /// dropped, which only lowers the bound.
  std::size_t fragment_budget = 32;
  LbpOptions lbp;

  void validate() const;
};

/// Pairwise disjoint weight rectangles, each inside a certified rectangle.
struct SafeWeightSet {
  std::vector<IntervalBox> rectangles;
};

struct CertificationResult {
  double p_lower = 0.0;
  SafeWeightSet safe_set;
  std::vector<double> per_box_mass;  // aligned with safe_set.rectangles
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double wall_time = 0.0;  // seconds
  CertifyConfig config;
};

/// Posterior mass of a weight box under the diagonal Gaussian, as a product
/// of per-coordinate erf differences. Zero-variance coordinates contribute 1
/// when the mean lies in the side and 0 otherwise.
double gaussian_box_mass(const BnnModel& model, const IntervalBox& box);

/// Fraction of samples inside the union of the set, with binomial error.
McEstimate mc_box_mass(std::span<const WeightSample> samples, const SafeWeightSet& set);
McEstimate mc_box_mass_serial(std::span<const WeightSample> samples, const SafeWeightSet& set);

/// Runs the chosen interval check for one candidate rectangle.
SpecCheck check_rectangle(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec,
                          const CertifyConfig& cfg);

/// Sample-and-check search for safe weight rectangles on a single input box.
/// Sample i depends only on (seed, i), and rectangles are merged in order of
/// i, so the result does not depend on the thread count and a larger N only
/// appends to the run for a smaller N.
CertificationResult certify(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                            const CertifyConfig& cfg);
/// Single-threaded reference; bit-identical to certify.
CertificationResult certify_serial(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                   const CertifyConfig& cfg);

/// max(0, 1 - sum_k (1 - p_k)).
double union_bound(std::span<const double> per_region);

struct UnionCertificationResult {
  double p_lower = 0.0;
  std::vector<CertificationResult> per_region;  // one per input box, same seed
  double wall_time = 0.0;
};

/// Certifies every box of a multi-box region separately and combines the
/// bounds with the union bound.
UnionCertificationResult certify_union(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                       const CertifyConfig& cfg);

}  // namespace bnncert
