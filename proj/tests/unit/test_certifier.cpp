#include <gtest/gtest.h>
#include <omp.h>

#include <bit>
#include <cmath>
#include <optional>
#include <random>

#include "bnncert/certifier.hpp"
#include "oracles.hpp"

using namespace bnncert;

namespace {

// y = w x + b with independent Gaussians on w and b, followed by a fixed
// identity output layer. Parameters are (w, b, 1, 0).
BnnModel scalar_model(double mu_w, double var_w, double mu_b, double var_b) {
  return BnnModel({{Matrix(1, 1, mu_w), Matrix(1, 1, var_w), {mu_b}, {var_b}, ActivationKind::Identity},
                   {Matrix(1, 1, 1.0), Matrix(1, 1, 0.0), {0.0}, {0.0}, ActivationKind::Identity}});
}

// Weight box over (w, b) with the fixed output layer appended.
IntervalBox wb_box(Interval w, Interval b) { return IntervalBox({w, b, Interval::point(1), Interval::point(0)}); }

double quadrature_box_mass(const BnnModel& m, const IntervalBox& box) {
  double mass = 1.0;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const double mu = m.mean()[i];
    const double var = m.variance()[i];
    mass *= var == 0.0 ? (box[i].contains(mu) ? 1.0 : 0.0)
                       : oracle::normal_mass_quadrature(mu, var, box[i].lo(), box[i].hi());
  }
  return mass;
}

// Exact Gaussian mass of a union of boxes by inclusion-exclusion.
double union_mass_oracle(const BnnModel& m, const std::vector<IntervalBox>& boxes) {
  double total = 0.0;
  const std::size_t n = boxes.size();
  for (std::uint64_t mask = 1; mask < (1ull << n); ++mask) {
    std::optional<IntervalBox> acc;
    bool empty = false;
    for (std::size_t i = 0; i < n && !empty; ++i) {
      if (!((mask >> i) & 1)) continue;
      if (!acc) {
        acc = boxes[i];
        continue;
      }
      IntervalBox next;
      if (!intersect(*acc, boxes[i], next)) empty = true;
      acc = next;
    }
    if (empty) continue;
    const double sign = std::popcount(mask) % 2 ? 1.0 : -1.0;
    total += sign * quadrature_box_mass(m, *acc);
  }
  return total;
}

const SafetySpec kAlwaysSafe = band_spec(1e9);
const InputRegion kUnitInput = InputRegion::single(IntervalBox({Interval(-1, 1)}));

}  // namespace

TEST(GaussianBoxMass, StandardNormalExamples) {
  const BnnModel m = scalar_model(0, 1, 0, 0);
  EXPECT_NEAR(gaussian_box_mass(m, wb_box(Interval(-1, 1), Interval(-1, 1))), 0.6826895, 1e-6);
  EXPECT_NEAR(gaussian_box_mass(m, wb_box(Interval(-2, 2), Interval(-1, 1))), 0.9544997, 1e-6);
  const BnnModel m2 = scalar_model(0, 1, 0, 1);
  const double both = gaussian_box_mass(m2, wb_box(Interval(-1, 1), Interval(-1, 1)));
  EXPECT_NEAR(both, 0.4660649, 1e-6);
  EXPECT_NEAR(both, std::pow(oracle::normal_mass_quadrature(0, 1, -1, 1), 2), 1e-9);
}

TEST(GaussianBoxMass, MatchesQuadratureOnRandomBoxes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mu(-2, 2), lvar(-6, 1), pos(-5, 5), width(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const double m = mu(rng);
    const double v = std::exp(lvar(rng));
    const double lo = m + pos(rng) * std::sqrt(v);
    const double hi = lo + width(rng) * std::sqrt(v);
    const BnnModel model = scalar_model(m, v, 0, 0);
    const double got = gaussian_box_mass(model, wb_box(Interval(lo, hi), Interval::point(0)));
    EXPECT_NEAR(got, oracle::normal_mass_quadrature(m, v, lo, hi), 1e-6) << m << " " << v << " " << lo << " " << hi;
  }
}

TEST(GaussianBoxMass, FarTailKeepsRelativePrecision) {
  const BnnModel m = scalar_model(0, 1, 0, 0);
  const double got = gaussian_box_mass(m, wb_box(Interval(8, 9), Interval::point(0)));
  const double pi = std::acos(-1.0);
  const double want = oracle::adaptive_simpson(
      [&](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * pi); }, 8, 9, 1e-26);
  EXPECT_GT(got, 0.0);
  EXPECT_NEAR(got / want, 1.0, 1e-6);
}

TEST(GaussianBoxMass, ZeroVarianceIsAnIndicator) {
  const BnnModel m = scalar_model(0, 1, 0.5, 0);
  EXPECT_NEAR(gaussian_box_mass(m, wb_box(Interval(-1, 1), Interval(0, 1))), 0.6826895, 1e-6);
  EXPECT_NEAR(gaussian_box_mass(m, wb_box(Interval(-1, 1), Interval::point(0.5))), 0.6826895, 1e-6);
  EXPECT_EQ(gaussian_box_mass(m, wb_box(Interval(-1, 1), Interval(0.6, 1))), 0.0);
}

TEST(GaussianBoxMass, RejectsWrongDimension) {
  const BnnModel m = scalar_model(0, 1, 0, 1);
  EXPECT_THROW(gaussian_box_mass(m, IntervalBox({Interval(-1, 1), Interval(-1, 1)})), ShapeError);
}

TEST(Certify, SingleSampleMassAroundTheDrawnWeights) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  CertifyConfig cfg;
  cfg.n_samples = 1;
  cfg.seed = 17;
  const auto r = certify(m, kUnitInput, kAlwaysSafe, cfg);
  ASSERT_EQ(r.accepted, 1u);
  const auto w = sample_weights(m, cfg.seed, 0);
  const double want = oracle::normal_mass_quadrature(0.3, 0.04, w.values[0] - 0.2, w.values[0] + 0.2) *
                      oracle::normal_mass_quadrature(-0.1, 0.09, w.values[1] - 0.3, w.values[1] + 0.3);
  EXPECT_NEAR(r.p_lower, want, 1e-9);
}

TEST(Certify, ZeroMarginGivesZeroMass) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  CertifyConfig cfg;
  cfg.n_samples = 1;
  cfg.weight_margin = 0.0;
  const auto r = certify(m, kUnitInput, kAlwaysSafe, cfg);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.p_lower, 0.0);
}

TEST(Certify, UnionMassMatchesInclusionExclusion) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  for (std::uint64_t seed : {1, 2, 3}) {
    CertifyConfig cfg;
    cfg.n_samples = 8;
    cfg.seed = seed;
    cfg.fragment_budget = 1000;
    const auto r = certify(m, kUnitInput, kAlwaysSafe, cfg);
    std::vector<IntervalBox> rects;
    for (std::size_t i = 0; i < cfg.n_samples; ++i)
      rects.push_back(weight_rectangle(m, sample_weights(m, seed, i), cfg.weight_margin));
    EXPECT_NEAR(r.p_lower, union_mass_oracle(m, rects), 1e-9);
  }
}

TEST(Certify, SafeSetIsDisjointAndInsideAcceptedRectangles) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const BnnModel m = oracle::random_model(rng, {{2, 3, 1}, ActivationKind::ReLU}, 0.5);
    CertifyConfig cfg;
    cfg.n_samples = 40;
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.weight_margin = 2.0;
    cfg.fragment_budget = 8;
    const auto r = certify(m, InputRegion::single(IntervalBox({Interval(-1, 1), Interval(0, 1)})), kAlwaysSafe, cfg);
    ASSERT_EQ(r.safe_set.rectangles.size(), r.per_box_mass.size());
    double sum = 0.0;
    for (double v : r.per_box_mass) sum += v;
    EXPECT_NEAR(r.p_lower, sum, 1e-12);
    const auto& rects = r.safe_set.rectangles;
    for (std::size_t a = 0; a < rects.size(); ++a) {
      for (std::size_t b = a + 1; b < rects.size(); ++b) EXPECT_FALSE(boxes_overlap(rects[a], rects[b]));
      bool inside = false;
      for (std::size_t i = 0; i < cfg.n_samples && !inside; ++i)
        inside = weight_rectangle(m, sample_weights(m, cfg.seed, i), cfg.weight_margin).contains(rects[a]);
      EXPECT_TRUE(inside);
      EXPECT_NEAR(r.per_box_mass[a], gaussian_box_mass(m, rects[a]), 1e-12 + 1e-9 * r.per_box_mass[a]);
    }
  }
}

TEST(Certify, FragmentBudgetOnlyLowersTheBound) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  CertifyConfig cfg;
  cfg.n_samples = 12;
  cfg.seed = 4;
  cfg.fragment_budget = 100000;
  const double full = certify(m, kUnitInput, kAlwaysSafe, cfg).p_lower;
  for (std::size_t budget : {1, 2, 4}) {
    cfg.fragment_budget = budget;
    EXPECT_LE(certify(m, kUnitInput, kAlwaysSafe, cfg).p_lower, full * (1 + 1e-12));
  }
}

TEST(Certify, SerialAndParallelAgreeBitForBit) {
  std::mt19937_64 rng(8);
  for (auto method : {CheckMethod::IBP, CheckMethod::LBP}) {
    const BnnModel m = oracle::random_model(rng, {{2, 6, 1}, ActivationKind::Tanh});
    CertifyConfig cfg;
    cfg.n_samples = 300;
    cfg.method = method;
    cfg.seed = 99;
    cfg.weight_margin = 2.0;
    const InputRegion t = InputRegion::single(IntervalBox({Interval(-0.5, 0.5), Interval(0, 0.3)}));
    const SafetySpec s = band_spec(1.0);
    const auto ref = certify_serial(m, t, s, cfg);
    for (int threads : {1, 3}) {
      omp_set_num_threads(threads);
      const auto par = certify(m, t, s, cfg);
      EXPECT_EQ(par.p_lower, ref.p_lower);
      EXPECT_EQ(par.accepted, ref.accepted);
      EXPECT_EQ(par.per_box_mass, ref.per_box_mass);
    }
  }
}

TEST(Certify, PrefixMonotoneInN) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    const BnnModel m = oracle::random_model(rng, {{1, 5, 1}, trial % 2 ? ActivationKind::Tanh : ActivationKind::ReLU});
    CertifyConfig cfg;
    cfg.method = trial < 3 ? CheckMethod::IBP : CheckMethod::LBP;
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.weight_margin = 1.5;
    double last = 0.0;
    for (std::size_t n : {10, 20, 40, 80}) {
      cfg.n_samples = n;
      const double p = certify(m, kUnitInput, band_spec(0.8), cfg).p_lower;
      EXPECT_GE(p, last);
      last = p;
    }
  }
}

TEST(Certify, RejectsBadConfig) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  CertifyConfig cfg;
  cfg.n_samples = 0;
  EXPECT_THROW(certify(m, kUnitInput, kAlwaysSafe, cfg), std::invalid_argument);
  cfg = {};
  cfg.weight_margin = -1;
  EXPECT_THROW(certify(m, kUnitInput, kAlwaysSafe, cfg), std::invalid_argument);
  const InputRegion two({IntervalBox({Interval(-1, 0)}), IntervalBox({Interval(0.5, 1)})});
  EXPECT_THROW(certify(m, two, kAlwaysSafe, {}), std::invalid_argument);
  EXPECT_THROW(certify(m, InputRegion::single(IntervalBox({Interval(0, 1), Interval(0, 1)})), kAlwaysSafe, {}),
               ShapeError);
}

TEST(UnionBound, Arithmetic) {
  EXPECT_DOUBLE_EQ(union_bound(std::vector<double>{0.99, 0.99}), 0.98);
  EXPECT_EQ(union_bound(std::vector<double>{1, 1, 0.5}), 0.5);
  EXPECT_EQ(union_bound(std::vector<double>{0.2, 0.3}), 0.0);
  EXPECT_EQ(union_bound(std::vector<double>{0.7}), 0.7);
  EXPECT_THROW(union_bound(std::vector<double>{1.5}), std::invalid_argument);
}

TEST(CertifyUnion, CombinesPerBoxBounds) {
  const BnnModel m = scalar_model(0.3, 0.04, -0.1, 0.09);
  CertifyConfig cfg;
  cfg.n_samples = 30;
  const SafetySpec s = band_spec(0.6);
  const auto single = certify(m, kUnitInput, s, cfg);
  const auto u1 = certify_union(m, kUnitInput, s, cfg);
  EXPECT_EQ(u1.p_lower, single.p_lower);

  const InputRegion two({IntervalBox({Interval(-1, 0)}), IntervalBox({Interval(0.5, 1)})});
  const auto u2 = certify_union(m, two, s, cfg);
  ASSERT_EQ(u2.per_region.size(), 2u);
  const double p1 = u2.per_region[0].p_lower;
  const double p2 = u2.per_region[1].p_lower;
  EXPECT_EQ(u2.p_lower, std::max(0.0, 1.0 - (1.0 - p1) - (1.0 - p2)));
}

TEST(McBoxMass, TrivialCases) {
  const BnnModel m = scalar_model(0, 1, 0, 1);
  std::vector<WeightSample> samples;
  for (std::uint64_t i = 0; i < 50; ++i) samples.push_back(sample_weights(m, 1, i));
  const SafeWeightSet everything{{wb_box(Interval(-100, 100), Interval(-100, 100))}};
  EXPECT_EQ(mc_box_mass(samples, everything).value, 1.0);
  EXPECT_EQ(mc_box_mass(samples, everything).standard_error, 0.0);
  EXPECT_EQ(mc_box_mass(samples, SafeWeightSet{}).value, 0.0);
  EXPECT_THROW(mc_box_mass(std::span<const WeightSample>(), everything), std::invalid_argument);
}

TEST(McBoxMass, AgreesWithErfProduct) {
  const BnnModel m = scalar_model(0, 1, 0, 0);
  std::vector<WeightSample> samples;
  for (std::uint64_t i = 0; i < 100000; ++i) samples.push_back(sample_weights(m, 7, i));
  const SafeWeightSet box{{wb_box(Interval(-1, 1), Interval(-1, 1))}};
  const auto est = mc_box_mass(samples, box);
  EXPECT_NEAR(est.value, 0.683, 0.005);
  EXPECT_LE(std::abs(est.value - gaussian_box_mass(m, box.rectangles[0])), 4 * est.standard_error);
  const auto ser = mc_box_mass_serial(samples, box);
  EXPECT_EQ(ser.value, est.value);
}
