#include "bnncert/certifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "bnncert/ibp.hpp"

namespace bnncert {

std::string to_string(CheckMethod m) { return m == CheckMethod::IBP ? "ibp" : "lbp"; }

CheckMethod check_method_from_string(const std::string& name) {
  if (name == "ibp") return CheckMethod::IBP;
  if (name == "lbp") return CheckMethod::LBP;
  throw std::invalid_argument("unknown check method '" + name + "'");
}

void CertifyConfig::validate() const {
  if (n_samples == 0) throw std::invalid_argument("number of samples must be at least 1");
  if (!(weight_margin >= 0.0) || !std::isfinite(weight_margin))
    throw std::invalid_argument("weight margin must be finite and non-negative");
  if (fragment_budget == 0) throw std::invalid_argument("fragment budget must be at least 1");
}

namespace {

double side_mass(double mu, double var, const Interval& side) {
  if (var == 0.0) return side.contains(mu) ? 1.0 : 0.0;
  const double k = 1.0 / std::sqrt(2.0 * var);
  const double a = (side.lo() - mu) * k;
  const double b = (side.hi() - mu) * k;
  // Subtract upper tails when the side lies on one side of the mean, so that
  // boxes far out keep their relative precision.
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 0.5 * (std::erf(b) - std::erf(a));
}

}  // namespace

double gaussian_box_mass(const BnnModel& model, const IntervalBox& box) {
  if (box.dim() != model.parameter_count()) throw ShapeError("weight box dimension differs from parameter count");
  const auto& mu = model.mean();
  const auto& var = model.variance();
  double mass = 1.0;
  for (std::size_t i = 0; i < box.dim() && mass > 0.0; ++i) mass *= side_mass(mu[i], var[i], box[i]);
  return mass;
}

namespace {

bool in_union(const WeightSample& w, const SafeWeightSet& set) {
  return std::any_of(set.rectangles.begin(), set.rectangles.end(),
                     [&](const IntervalBox& r) { return r.contains(w.values); });
}

}  // namespace

McEstimate mc_box_mass(std::span<const WeightSample> samples, const SafeWeightSet& set) {
  if (samples.empty()) throw std::invalid_argument("mc_box_mass needs at least one sample");
  const auto count = static_cast<std::int64_t>(samples.size());
  std::size_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (std::int64_t i = 0; i < count; ++i) {
    if (in_union(samples[i], set)) ++hits;
  }
  return binomial_estimate(hits, samples.size());
}

McEstimate mc_box_mass_serial(std::span<const WeightSample> samples, const SafeWeightSet& set) {
  if (samples.empty()) throw std::invalid_argument("mc_box_mass needs at least one sample");
  std::size_t hits = 0;
  for (const auto& w : samples) hits += in_union(w, set) ? 1 : 0;
  return binomial_estimate(hits, samples.size());
}

SpecCheck check_rectangle(const BnnModel& model, const IntervalBox& t, const IntervalBox& h, const SafetySpec& spec,
                          const CertifyConfig& cfg) {
  return cfg.method == CheckMethod::IBP ? ibp_check_spec(model, t, h, spec) : lbp_check_spec(model, t, h, spec, cfg.lbp);
}

namespace {

// One face of a fragment along one coordinate, with the erf values of its
// standardised position cached so that fragment masses need no erf calls.
struct Edge {
  double x;
  double z;
  double erf_z;
  double erfc_z;
  double erfc_neg_z;
};

// Builds the disjoint safe set from accepted rectangles in arrival order.
// Each new rectangle is cut against every earlier one; after each cut only
// the `budget` heaviest fragments survive. Fragment masses are products of
// cached per-coordinate side masses, and fragments are materialised only
// once they have survived the cut.
class SafeSetBuilder {
 public:
  SafeSetBuilder(const BnnModel& model, std::size_t budget) : model_(model), budget_(budget) {
    const auto& var = model.variance();
    scale_.resize(var.size());
    for (std::size_t i = 0; i < var.size(); ++i) scale_[i] = var[i] > 0.0 ? 1.0 / std::sqrt(2.0 * var[i]) : 0.0;
  }

  void add(const IntervalBox& rect) {
    Piece whole = make_piece(rect);
    std::vector<Piece> pieces{whole};
    for (const auto& prev : accepted_) {
      if (pieces.empty()) break;
      if (!overlap(whole, prev)) continue;
      pieces = cut(std::move(pieces), prev);
    }
    accepted_.push_back(std::move(whole));
    for (auto& p : pieces) {
      if (p.mass <= 0.0) continue;
      set_.rectangles.push_back(to_box(p));
      masses_.push_back(p.mass);
    }
  }

  SafeWeightSet& set() { return set_; }
  std::vector<double>& masses() { return masses_; }

 private:
  struct Piece {
    std::vector<Edge> lo;
    std::vector<Edge> hi;
    double mass = 0.0;
  };

  // A surviving fragment: either piece `piece` untouched (axis == kWhole) or
  // the slab of that piece below or above `prev` along `axis`.
  struct Candidate {
    std::size_t piece;
    std::size_t axis;
    bool upper;
    double mass;
    std::size_t order = 0;
  };
  static constexpr std::size_t kWhole = static_cast<std::size_t>(-1);

  Edge edge(std::size_t i, double x) const {
    const double z = (x - model_.mean()[i]) * scale_[i];
    return {x, z, std::erf(z), std::erfc(z), std::erfc(-z)};
  }

  // Same arithmetic as gaussian_box_mass for one coordinate.
  double side(std::size_t i, const Edge& lo, const Edge& hi) const {
    if (scale_[i] == 0.0) {
      const double mu = model_.mean()[i];
      return lo.x <= mu && mu <= hi.x ? 1.0 : 0.0;
    }
    if (lo.z >= 0.0) return 0.5 * (lo.erfc_z - hi.erfc_z);
    if (hi.z <= 0.0) return 0.5 * (hi.erfc_neg_z - lo.erfc_neg_z);
    return 0.5 * (hi.erf_z - lo.erf_z);
  }

  Piece make_piece(const IntervalBox& box) const {
    Piece p;
    p.lo.reserve(box.dim());
    p.hi.reserve(box.dim());
    p.mass = 1.0;
    for (std::size_t i = 0; i < box.dim(); ++i) {
      p.lo.push_back(edge(i, box[i].lo()));
      p.hi.push_back(edge(i, box[i].hi()));
      p.mass *= side(i, p.lo.back(), p.hi.back());
    }
    return p;
  }

  static IntervalBox to_box(const Piece& p) {
    std::vector<Interval> dims;
    dims.reserve(p.lo.size());
    for (std::size_t i = 0; i < p.lo.size(); ++i) dims.emplace_back(p.lo[i].x, p.hi[i].x);
    return IntervalBox(std::move(dims));
  }

  // Mirrors boxes_overlap.
  static bool overlap(const Piece& a, const Piece& b) {
    for (std::size_t i = 0; i < a.lo.size(); ++i) {
      const bool degenerate = a.lo[i].x == a.hi[i].x || b.lo[i].x == b.hi[i].x;
      const bool hit = degenerate ? (a.lo[i].x <= b.hi[i].x && b.lo[i].x <= a.hi[i].x)
                                  : (a.lo[i].x < b.hi[i].x && b.lo[i].x < a.hi[i].x);
      if (!hit) return false;
    }
    return true;
  }

  // Subtracts `prev` from every piece, peeling axes in the order used by
  // box_subtract, and keeps the heaviest `budget_` fragments.
  std::vector<Piece> cut(std::vector<Piece> pieces, const Piece& prev) const {
    const std::size_t dim = prev.lo.size();
    std::vector<Candidate> cands;
    std::vector<double> suffix(dim + 1);
    for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
      const Piece& p = pieces[pi];
      if (!overlap(p, prev)) {
        cands.push_back({pi, kWhole, false, p.mass});
        continue;
      }
      suffix[dim] = 1.0;
      for (std::size_t d = dim; d-- > 0;) suffix[d] = suffix[d + 1] * side(d, p.lo[d], p.hi[d]);
      double prefix = 1.0;
      for (std::size_t d = 0; d < dim; ++d) {
        if (p.lo[d].x < prev.lo[d].x)
          cands.push_back({pi, d, false, prefix * side(d, p.lo[d], prev.lo[d]) * suffix[d + 1]});
        if (prev.hi[d].x < p.hi[d].x)
          cands.push_back({pi, d, true, prefix * side(d, prev.hi[d], p.hi[d]) * suffix[d + 1]});
        prefix *= side(d, clip_lo(p, prev, d), clip_hi(p, prev, d));
      }
    }

    std::erase_if(cands, [](const Candidate& c) { return c.mass <= 0.0; });
    if (cands.size() > budget_) {
      // Heaviest first, ties in generation order: the same survivors a stable
      // sort would keep, at linear cost.
      for (std::size_t i = 0; i < cands.size(); ++i) cands[i].order = i;
      const auto heavier = [](const Candidate& a, const Candidate& b) {
        return a.mass != b.mass ? a.mass > b.mass : a.order < b.order;
      };
      const auto keep = cands.begin() + static_cast<std::ptrdiff_t>(budget_);
      std::nth_element(cands.begin(), keep, cands.end(), heavier);
      cands.resize(budget_);
      std::sort(cands.begin(), cands.end(), heavier);
    }

    std::vector<Piece> next;
    next.reserve(cands.size());
    for (const auto& c : cands) {
      Piece& p = pieces[c.piece];
      if (c.axis == kWhole) {
        // An untouched piece yields no slabs, so nothing else reads it.
        next.push_back(std::move(p));
        continue;
      }
      Piece q;
      q.mass = c.mass;
      q.lo.reserve(dim);
      q.hi.reserve(dim);
      for (std::size_t d = 0; d < c.axis; ++d) {
        q.lo.push_back(clip_lo(p, prev, d));
        q.hi.push_back(clip_hi(p, prev, d));
      }
      q.lo.push_back(c.upper ? prev.hi[c.axis] : p.lo[c.axis]);
      q.hi.push_back(c.upper ? p.hi[c.axis] : prev.lo[c.axis]);
      q.lo.insert(q.lo.end(), p.lo.begin() + static_cast<std::ptrdiff_t>(c.axis) + 1, p.lo.end());
      q.hi.insert(q.hi.end(), p.hi.begin() + static_cast<std::ptrdiff_t>(c.axis) + 1, p.hi.end());
      next.push_back(std::move(q));
    }
    return next;
  }

  static const Edge& clip_lo(const Piece& p, const Piece& prev, std::size_t d) {
    return p.lo[d].x < prev.lo[d].x ? prev.lo[d] : p.lo[d];
  }
  static const Edge& clip_hi(const Piece& p, const Piece& prev, std::size_t d) {
    return prev.hi[d].x < p.hi[d].x ? prev.hi[d] : p.hi[d];
  }

  const BnnModel& model_;
  std::size_t budget_;
  std::vector<double> scale_;
  std::vector<Piece> accepted_;
  SafeWeightSet set_;
  std::vector<double> masses_;
};

const IntervalBox& single_box(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                              const CertifyConfig& cfg) {
  cfg.validate();
  if (region.boxes().size() != 1)
    throw std::invalid_argument("certify takes a single input box; use certify_union for unions");
  if (region.dim() != model.input_dim()) throw ShapeError("input region dimension differs from model input dimension");
  spec.validate(model.output_dim());
  return region.boxes().front();
}

constexpr std::size_t kChunk = 256;

template <typename CheckChunk>
CertificationResult run_certify(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                const CertifyConfig& cfg, CheckChunk check_chunk) {
  const auto start = std::chrono::steady_clock::now();
  const IntervalBox& t = single_box(model, region, spec, cfg);

  CertificationResult result;
  result.config = cfg;
  SafeSetBuilder builder(model, cfg.fragment_budget);
  std::vector<IntervalBox> rects;
  std::vector<char> safe;
  for (std::size_t begin = 0; begin < cfg.n_samples; begin += kChunk) {
    const std::size_t len = std::min(kChunk, cfg.n_samples - begin);
    rects.assign(len, IntervalBox());
    safe.assign(len, 0);
    check_chunk(t, begin, rects, safe);
    for (std::size_t i = 0; i < len; ++i) {
      if (!safe[i]) {
        ++result.rejected;
        continue;
      }
      ++result.accepted;
      builder.add(rects[i]);
    }
  }

  result.safe_set = std::move(builder.set());
  result.per_box_mass = std::move(builder.masses());
  const double total = std::accumulate(result.per_box_mass.begin(), result.per_box_mass.end(), 0.0);
  // Disjoint masses cannot exceed 1; only rounding can push the sum past it.
  result.p_lower = std::clamp(total, 0.0, 1.0);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

CertificationResult certify(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                            const CertifyConfig& cfg) {
  return run_certify(model, region, spec, cfg,
                     [&](const IntervalBox& t, std::size_t begin, std::vector<IntervalBox>& rects,
                         std::vector<char>& safe) {
                       const auto len = static_cast<std::int64_t>(rects.size());
                       std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
                       for (std::int64_t i = 0; i < len; ++i) {
                         try {
                           const auto w = sample_weights(model, cfg.seed, begin + static_cast<std::size_t>(i));
                           rects[i] = weight_rectangle(model, w, cfg.weight_margin, cfg.margin_semantics);
                           safe[i] = check_rectangle(model, t, rects[i], spec, cfg).safe();
                         } catch (...) {
#pragma omp critical(bnncert_certify_error)
                           if (!error) error = std::current_exception();
                         }
                       }
                       if (error) std::rethrow_exception(error);
                     });
}

CertificationResult certify_serial(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                   const CertifyConfig& cfg) {
  return run_certify(model, region, spec, cfg,
                     [&](const IntervalBox& t, std::size_t begin, std::vector<IntervalBox>& rects,
                         std::vector<char>& safe) {
                       for (std::size_t i = 0; i < rects.size(); ++i) {
                         const auto w = sample_weights(model, cfg.seed, begin + i);
                         rects[i] = weight_rectangle(model, w, cfg.weight_margin, cfg.margin_semantics);
                         safe[i] = check_rectangle(model, t, rects[i], spec, cfg).safe();
                       }
                     });
}

double union_bound(std::span<const double> per_region) {
  double miss = 0.0;
  for (double p : per_region) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("union_bound: probabilities must lie in [0, 1]");
    miss += 1.0 - p;
  }
  return std::max(0.0, 1.0 - miss);
}

UnionCertificationResult certify_union(const BnnModel& model, const InputRegion& region, const SafetySpec& spec,
                                       const CertifyConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  UnionCertificationResult out;
  std::vector<double> bounds;
  for (const auto& box : region.boxes()) {
    out.per_region.push_back(certify(model, InputRegion::single(box), spec, cfg));
    bounds.push_back(out.per_region.back().p_lower);
  }
  out.p_lower = union_bound(bounds);
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace bnncert
