#include <gtest/gtest.h>

#include <random>

#include "bnncert/ibp.hpp"
#include "oracles.hpp"

using namespace bnncert;

namespace {

SafetySpec random_spec(std::mt19937_64& rng, std::size_t outputs) {
  if (outputs == 1) return band_spec(std::uniform_real_distribution<double>(0.5, 3.0)(rng));
  return classification_spec(outputs, rng() % outputs);
}

}  // namespace

TEST(Ibp, HandComputedTwoLayerNet) {
  // y = relu(w0 x + b0) * w1 + b1 with x in [1, 2], w0 in [1, 2], b0 in [-1, 0],
  // w1 in [-1, 1], b1 = 0: hidden in [0, 4], output in [-4, 4].
  const BnnModel m({{Matrix(1, 1, 1.5), Matrix(1, 1, 0.0), {-0.5}, {0.0}, ActivationKind::ReLU},
                    {Matrix(1, 1, 0.0), Matrix(1, 1, 0.0), {0.0}, {0.0}, ActivationKind::Identity}});
  const IntervalBox t({Interval(1, 2)});
  const IntervalBox h({Interval(1, 2), Interval(-1, 0), Interval(-1, 1), Interval::point(0)});
  const auto layers = ibp_layer_bounds(m, t, h);
  EXPECT_EQ(layers[0].pre_act[0], Interval(0, 4));
  EXPECT_EQ(layers[1].post_act[0], Interval(-4, 4));
}

TEST(Ibp, PointBoxesReproduceForward) {
  std::mt19937_64 rng(21);
  for (auto act : {ActivationKind::ReLU, ActivationKind::Tanh, ActivationKind::Sigmoid}) {
    const BnnModel m = oracle::random_model(rng, {{3, 8, 8, 2}, act});
    const auto w = sample_weights(m, 1, 0);
    const std::vector<double> x{0.1, -0.4, 0.8};
    const auto out = ibp_propagate(m, IntervalBox::point(x), IntervalBox::point(w.values));
    const auto want = oracle::reference_forward(m, w.values, x);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(out[i].lo(), want[i], 1e-12);
      EXPECT_NEAR(out[i].hi(), want[i], 1e-12);
    }
  }
}

TEST(Ibp, ContainsSampledOutputs) {
  std::mt19937_64 rng(8);
  for (int f = 0; f < 10; ++f) {
    const auto act = f % 2 ? ActivationKind::Tanh : ActivationKind::ReLU;
    const BnnModel m = oracle::random_model(rng, {{2, 6, 5, 2}, act}, 0.1);
    const IntervalBox t = oracle::random_box(rng, 2, 0.3);
    const IntervalBox h = oracle::posterior_box(m, 1.0);
    const IntervalBox out = ibp_propagate(m, t, h);
    for (int s = 0; s < 2000; ++s) {
      const auto x = oracle::corner_biased_in(rng, t);
      const auto w = oracle::corner_biased_in(rng, h);
      const auto y = oracle::reference_forward(m, w, x);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_TRUE(oracle::within(out[i].lo(), y[i], out[i].hi(), 1e-9));
    }
  }
}

TEST(Ibp, ElisionNeverLosesToPlainBox) {
  std::mt19937_64 rng(13);
  for (int f = 0; f < 30; ++f) {
    const std::size_t outputs = 1 + f % 3;
    const BnnModel m = oracle::random_model(rng, {{3, 6, outputs}, f % 2 ? ActivationKind::Tanh : ActivationKind::ReLU});
    const SafetySpec spec = random_spec(rng, outputs);
    const IntervalBox t = oracle::random_box(rng, 3, 0.2);
    const IntervalBox h = oracle::posterior_box(m, 2.0);
    const auto plain = output_box_row_bounds(ibp_propagate(m, t, h), spec);
    const auto elided = ibp_elided_row_bounds(m, t, h, spec);
    double naive = INFINITY;
    for (std::size_t r = 0; r < plain.size(); ++r) {
      // Folding C into the last layer is at least as tight up to rounding.
      EXPECT_GE(elided[r], plain[r] - 1e-12 * std::max(1.0, std::abs(plain[r])));
      naive = std::min(naive, plain[r]);
    }
    EXPECT_GE(ibp_check_spec(m, t, h, spec).margin, naive);
  }
}

TEST(Ibp, ElisionIsStrictlyTighterOnCancellingRows) {
  // Two identical outputs: the band difference y0 - y1 is exactly zero, which
  // the plain box cannot see.
  LayerPosterior hidden{Matrix(2, 1, {1.0, -1.0}), Matrix(2, 1, 0.0), {0.0, 0.0}, {0.0, 0.0}, ActivationKind::ReLU};
  LayerPosterior out{Matrix(2, 2, {1.0, 1.0, 1.0, 1.0}), Matrix(2, 2, 0.0), {0.0, 0.0}, {0.0, 0.0},
                     ActivationKind::Identity};
  const BnnModel m({hidden, out});
  const SafetySpec spec{Matrix(1, 2, {1.0, -1.0}), {0.0}};
  const IntervalBox t({Interval(-1, 1)});
  const IntervalBox h = IntervalBox::point(m.mean());
  EXPECT_LT(output_box_row_bounds(ibp_propagate(m, t, h), spec)[0], 0.0);
  EXPECT_EQ(ibp_elided_row_bounds(m, t, h, spec)[0], 0.0);
  EXPECT_TRUE(ibp_check_spec(m, t, h, spec).safe());
}

TEST(Ibp, ShapeErrors) {
  std::mt19937_64 rng(2);
  const BnnModel m = oracle::random_model(rng, {{2, 3, 1}});
  const IntervalBox h = IntervalBox::point(m.mean());
  EXPECT_THROW(ibp_propagate(m, IntervalBox({Interval(0, 1)}), h), ShapeError);
  EXPECT_THROW(ibp_propagate(m, IntervalBox({Interval(0, 1), Interval(0, 1)}), IntervalBox({Interval(0, 1)})),
               ShapeError);
  EXPECT_THROW(ibp_check_spec(m, IntervalBox({Interval(0, 1), Interval(0, 1)}), h, classification_spec(2, 0)),
               ShapeError);
}
