#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnncert {

/// Raised whenever two objects that must agree on a dimension do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Closed real interval [lo, hi]. Degenerate intervals (lo == hi) are valid.
class Interval {
 public:
  Interval() = default;
  Interval(double lo, double hi);
  static Interval point(double v) { return Interval(v, v); }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return hi_ - lo_; }
  double mid() const { return 0.5 * (lo_ + hi_); }
  bool degenerate() const { return lo_ == hi_; }
  bool contains(double v) const { return lo_ <= v && v <= hi_; }
  bool contains(const Interval& other) const { return lo_ <= other.lo_ && other.hi_ <= hi_; }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

/// Axis-aligned box; the dimension is fixed at construction.
class IntervalBox {
 public:
  IntervalBox() = default;
  explicit IntervalBox(std::vector<Interval> dims) : dims_(std::move(dims)) {}
  IntervalBox(std::span<const double> lo, std::span<const double> hi);
  static IntervalBox point(std::span<const double> v);

  std::size_t dim() const { return dims_.size(); }
  const Interval& operator[](std::size_t i) const { return dims_[i]; }
  void set(std::size_t i, Interval v) { dims_.at(i) = v; }
  const std::vector<Interval>& dims() const { return dims_; }

  std::vector<double> lower() const;
  std::vector<double> upper() const;
  std::vector<double> center() const;

  bool contains(std::span<const double> p) const;
  bool contains(const IntervalBox& other) const;

  friend bool operator==(const IntervalBox&, const IntervalBox&) = default;

 private:
  std::vector<Interval> dims_;
};

/// Dense row-major matrix of intervals.
class IntervalMatrix {
 public:
  IntervalMatrix() = default;
  IntervalMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Interval& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  Interval& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Interval> data_;
};

/// Exact hull of {w * z : w in wi, z in zj}, attained at one of the four corners.
Interval interval_bilinear(const Interval& wi, const Interval& zj);

Interval operator+(const Interval& a, const Interval& b);
/// Scaling by a real; the sign of `s` selects which endpoint maps where.
Interval operator*(double s, const Interval& a);

/// Overlap test used for disjointness of weight rectangles. Per dimension,
/// two non-degenerate intervals overlap only if they share positive length
/// (touching faces carry no mass); when either interval is degenerate the
/// closed intersection is used, since a zero-variance weight puts its whole
/// mass on one point.
bool boxes_overlap(const IntervalBox& a, const IntervalBox& b);

/// Intersection; empty optional-style result signalled by the return flag.
bool intersect(const IntervalBox& a, const IntervalBox& b, IntervalBox& out);

/// a \ b as pairwise interior-disjoint boxes, by slab peeling along each axis
/// in order. Every output box lies inside `a`; at most 2 * dim boxes.
std::vector<IntervalBox> box_subtract(const IntervalBox& a, const IntervalBox& b);

/// Exact minimum of c . y + d over the box.
double min_linear_over_box(std::span<const double> c, double d, const IntervalBox& box);
/// Exact maximum of c . y + d over the box.
double max_linear_over_box(std::span<const double> c, double d, const IntervalBox& box);

std::string to_string(const Interval& v);

}  // namespace bnncert
