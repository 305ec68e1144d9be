#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "bnncert/interval.hpp"
#include "oracles.hpp"

using namespace bnncert;

TEST(Interval, RejectsInvertedAndNaN) {
  EXPECT_THROW(Interval(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(Interval(std::nan(""), 1.0), std::invalid_argument);
  EXPECT_NO_THROW(Interval(2.0, 2.0));
  EXPECT_TRUE(Interval::point(3.0).degenerate());
}

TEST(Interval, ScalingBySignSwapsEnds) {
  const Interval a(-1.0, 2.0);
  EXPECT_EQ(3.0 * a, Interval(-3.0, 6.0));
  EXPECT_EQ(-2.0 * a, Interval(-4.0, 2.0));
  EXPECT_EQ(a + Interval(1.0, 1.5), Interval(0.0, 3.5));
}

TEST(Interval, BilinearMatchesDenseGrid) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const Interval w(std::min(a, b), std::max(a, b));
    const Interval z(std::min(c, d), std::max(c, d));
    const Interval got = interval_bilinear(w, z);
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; j <= 20; ++j) {
        const double p = (w.lo() + i * w.width() / 20) * (z.lo() + j * z.width() / 20);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    }
    EXPECT_NEAR(got.lo(), lo, 1e-12);
    EXPECT_NEAR(got.hi(), hi, 1e-12);
  }
}

TEST(IntervalBox, OverlapTreatsTouchingFacesAsDisjoint) {
  const IntervalBox a({Interval(0, 1), Interval(0, 1)});
  const IntervalBox b({Interval(1, 2), Interval(0, 1)});
  const IntervalBox c({Interval(0.5, 2), Interval(0.5, 2)});
  EXPECT_FALSE(boxes_overlap(a, b));
  EXPECT_TRUE(boxes_overlap(a, c));
}

TEST(IntervalBox, OverlapOnDegenerateSidesUsesClosedIntersection) {
  // Two rectangles sharing a zero-variance coordinate hold the same point
  // mass on that axis; they must be reported as overlapping.
  const IntervalBox a({Interval(0, 1), Interval::point(0.5)});
  const IntervalBox b({Interval(0.5, 2), Interval::point(0.5)});
  const IntervalBox c({Interval(0.5, 2), Interval::point(0.6)});
  EXPECT_TRUE(boxes_overlap(a, b));
  EXPECT_FALSE(boxes_overlap(a, c));
}

TEST(IntervalBox, SubtractDisjointLeavesInputUnchanged) {
  const IntervalBox a({Interval(0, 1), Interval(0, 1)});
  const IntervalBox b({Interval(2, 3), Interval(0, 1)});
  const auto pieces = box_subtract(a, b);
  ASSERT_EQ(pieces.size(), 1u);
  EXPECT_EQ(pieces[0], a);
}

TEST(IntervalBox, SubtractContainedLeavesNothing) {
  const IntervalBox a({Interval(0, 1), Interval(0, 1)});
  const IntervalBox b({Interval(-1, 2), Interval(-1, 2)});
  EXPECT_TRUE(box_subtract(a, b).empty());
}

TEST(IntervalBox, SubtractPropertiesOnRandomBoxes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + trial % 4;
    const IntervalBox a = oracle::random_box(rng, dim, 1.0);
    const IntervalBox b = oracle::random_box(rng, dim, 1.0);
    const auto pieces = box_subtract(a, b);
    EXPECT_LE(pieces.size(), 2 * dim);

    double vol = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      EXPECT_TRUE(a.contains(pieces[i]));
      EXPECT_FALSE(boxes_overlap(pieces[i], b));
      for (std::size_t j = i + 1; j < pieces.size(); ++j) EXPECT_FALSE(boxes_overlap(pieces[i], pieces[j]));
      vol += oracle::volume(pieces[i]);
    }
    IntervalBox inter;
    const double overlap = intersect(a, b, inter) ? oracle::volume(inter) : 0.0;
    EXPECT_NEAR(vol, oracle::volume(a) - overlap, 1e-12);

    // Every sampled point of a \ b is covered by some piece.
    for (int s = 0; s < 50; ++s) {
      const auto p = oracle::uniform_in(rng, a);
      if (b.contains(p)) continue;
      bool covered = false;
      for (const auto& piece : pieces) covered = covered || piece.contains(p);
      EXPECT_TRUE(covered);
    }
  }
}

TEST(IntervalBox, LinearExtremaMatchCornerEnumeration) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + trial % 6;
    const IntervalBox box = oracle::random_box(rng, dim, 2.0);
    std::vector<double> c(dim);
    for (auto& v : c) v = n(rng);
    const double d = n(rng);
    EXPECT_NEAR(min_linear_over_box(c, d, box), oracle::corner_min(c, d, box), 1e-12);
    std::vector<double> neg(c);
    for (auto& v : neg) v = -v;
    EXPECT_NEAR(max_linear_over_box(c, d, box), -oracle::corner_min(neg, -d, box), 1e-12);
  }
}

TEST(IntervalBox, ShapeMismatchThrows) {
  const IntervalBox a({Interval(0, 1)});
  const IntervalBox b({Interval(0, 1), Interval(0, 1)});
  EXPECT_THROW(box_subtract(a, b), ShapeError);
  const std::vector<double> c{1.0, 2.0};
  EXPECT_THROW(min_linear_over_box(c, 0.0, a), ShapeError);
}
