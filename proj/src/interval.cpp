#include "bnncert/interval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bnncert {

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("interval requires lo <= hi, got [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
}

IntervalBox::IntervalBox(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size()) throw ShapeError("box bounds differ in length");
  dims_.reserve(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) dims_.emplace_back(lo[i], hi[i]);
}

IntervalBox IntervalBox::point(std::span<const double> v) { return IntervalBox(v, v); }

std::vector<double> IntervalBox::lower() const {
  std::vector<double> out(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) out[i] = dims_[i].lo();
  return out;
}

std::vector<double> IntervalBox::upper() const {
  std::vector<double> out(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) out[i] = dims_[i].hi();
  return out;
}

std::vector<double> IntervalBox::center() const {
  std::vector<double> out(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) out[i] = dims_[i].mid();
  return out;
}

bool IntervalBox::contains(std::span<const double> p) const {
  if (p.size() != dims_.size()) throw ShapeError("point/box dimension mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!dims_[i].contains(p[i])) return false;
  }
  return true;
}

bool IntervalBox::contains(const IntervalBox& other) const {
  if (other.dim() != dim()) throw ShapeError("box dimension mismatch");
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (!dims_[i].contains(other.dims_[i])) return false;
  }
  return true;
}

Interval interval_bilinear(const Interval& wi, const Interval& zj) {
  const double a = wi.lo() * zj.lo();
  const double b = wi.lo() * zj.hi();
  const double c = wi.hi() * zj.lo();
  const double d = wi.hi() * zj.hi();
  return {std::min({a, b, c, d}), std::max({a, b, c, d})};
}

Interval operator+(const Interval& a, const Interval& b) { return {a.lo() + b.lo(), a.hi() + b.hi()}; }

Interval operator*(double s, const Interval& a) {
  return s >= 0.0 ? Interval(s * a.lo(), s * a.hi()) : Interval(s * a.hi(), s * a.lo());
}

bool boxes_overlap(const IntervalBox& a, const IntervalBox& b) {
  if (a.dim() != b.dim()) throw ShapeError("box dimension mismatch");
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const Interval& x = a[i];
    const Interval& y = b[i];
    const bool hit = (x.degenerate() || y.degenerate()) ? (x.lo() <= y.hi() && y.lo() <= x.hi())
                                                        : (x.lo() < y.hi() && y.lo() < x.hi());
    if (!hit) return false;
  }
  return true;
}

bool intersect(const IntervalBox& a, const IntervalBox& b, IntervalBox& out) {
  if (a.dim() != b.dim()) throw ShapeError("box dimension mismatch");
  std::vector<Interval> dims;
  dims.reserve(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double lo = std::max(a[i].lo(), b[i].lo());
    const double hi = std::min(a[i].hi(), b[i].hi());
    if (lo > hi) return false;
    dims.emplace_back(lo, hi);
  }
  out = IntervalBox(std::move(dims));
  return true;
}

std::vector<IntervalBox> box_subtract(const IntervalBox& a, const IntervalBox& b) {
  if (a.dim() != b.dim()) throw ShapeError("box_subtract: dimension mismatch");
  if (!boxes_overlap(a, b)) return {a};

  // `rest` shrinks towards a ∩ b as each axis is peeled.
  std::vector<IntervalBox> out;
  std::vector<Interval> rest = a.dims();
  for (std::size_t d = 0; d < a.dim(); ++d) {
    const Interval cur = rest[d];
    if (cur.lo() < b[d].lo()) {
      auto slab = rest;
      slab[d] = Interval(cur.lo(), b[d].lo());
      out.emplace_back(std::move(slab));
    }
    if (b[d].hi() < cur.hi()) {
      auto slab = rest;
      slab[d] = Interval(b[d].hi(), cur.hi());
      out.emplace_back(std::move(slab));
    }
    rest[d] = Interval(std::max(cur.lo(), b[d].lo()), std::min(cur.hi(), b[d].hi()));
  }
  return out;
}

double min_linear_over_box(std::span<const double> c, double d, const IntervalBox& box) {
  if (c.size() != box.dim()) throw ShapeError("min_linear_over_box: dimension mismatch");
  double acc = d;
  for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * (c[i] >= 0.0 ? box[i].lo() : box[i].hi());
  return acc;
}

double max_linear_over_box(std::span<const double> c, double d, const IntervalBox& box) {
  if (c.size() != box.dim()) throw ShapeError("max_linear_over_box: dimension mismatch");
  double acc = d;
  for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * (c[i] >= 0.0 ? box[i].hi() : box[i].lo());
  return acc;
}

std::string to_string(const Interval& v) {
  std::ostringstream os;
  os.precision(17);
  os << '[' << v.lo() << ", " << v.hi() << ']';
  return os.str();
}

}  // namespace bnncert
