#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddtd/error.hpp"
#include "ddtd/grid.hpp"

namespace ddtd {

inline constexpr double kConductorThreshold = 0.5;

// Nodal densities on the design nodes of a grid; the design variables.
class DensityField {
 public:
  DensityField() = default;
  explicit DensityField(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("density outside [0, 1]");
    }
  }

  static DensityField filled(std::size_t n, double v) {
    return DensityField(std::vector<double>(n, v));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  friend bool operator==(const DensityField&, const DensityField&) = default;

 private:
  std::vector<double> values_;
};

// A DensityField embedded into the whole board: fixed conductor = 1,
// fixed void = 0. Holds a non-owning pointer to the grid.
struct ResolvedLayout {
  const Grid* grid = nullptr;
  std::vector<double> density;  // nx * ny

  static ResolvedLayout resolve(const Grid& grid, const DensityField& field) {
    if (field.size() != grid.design_size())
      throw InvalidArgument("density field length does not match the grid design nodes");
    ResolvedLayout out;
    out.grid = &grid;
    out.density.resize(static_cast<std::size_t>(grid.node_count()));
    for (int k = 0; k < grid.node_count(); ++k) {
      switch (grid.kind(k)) {
        case NodeKind::Conductor: out.density[k] = 1.0; break;
        case NodeKind::Void: out.density[k] = 0.0; break;
        case NodeKind::Design:
          out.density[k] = field[static_cast<std::size_t>(grid.design_index(k))];
          break;
      }
    }
    return out;
  }

  bool conductive(int k) const { return density[static_cast<std::size_t>(k)] >= kConductorThreshold; }
};

// True when the thresholded copper (4-connected) links any node of pad `from`
// to any node of pad `to`. Components do not count as connections.
inline bool copper_connected(const ResolvedLayout& layout, Pad from, Pad to) {
  const Grid& g = *layout.grid;
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  std::deque<int> queue;
  for (int k : g.pad(from)) {
    seen[k] = 1;
    queue.push_back(k);
  }
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop_front();
    if (g.pad_of(k) == static_cast<int>(to)) return true;
    for (int nb : g.neighbors(k)) {
      if (nb >= 0 && !seen[nb] && layout.conductive(nb)) {
        seen[nb] = 1;
        queue.push_back(nb);
      }
    }
  }
  return false;
}

// Quadratic Bezier curve evaluated at t in [0, 1].
inline Point2 bezier_point(Point2 p0, Point2 p1, Point2 p2, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("bezier parameter outside [0, 1]");
  const double s = 1.0 - t;
  return (s * s) * p0 + (2.0 * t * s) * p1 + (t * t) * p2;
}

// Six-curve parametric layout. Curves, in order:
// port1->A, A->C1, A->L1-left, L1-right->B, B->C2, B->port2.
struct ParametricSeed {
  Point2 point_a;
  Point2 point_b;
  std::array<Point2, 6> control{};
  double halfwidth = 0.0;   // meters
  double transition = 0.0;  // meters
  friend bool operator==(const ParametricSeed&, const ParametricSeed&) = default;
};

inline std::array<std::pair<Point2, Point2>, 6> seed_curve_ends(const ParametricSeed& s,
                                                                const Grid& g) {
  return {{{g.pad_center(Pad::Port1), s.point_a},
           {s.point_a, g.pad_center(Pad::C1)},
           {s.point_a, g.pad_center(Pad::L1Left)},
           {g.pad_center(Pad::L1Right), s.point_b},
           {s.point_b, g.pad_center(Pad::C2)},
           {s.point_b, g.pad_center(Pad::Port2)}}};
}

namespace detail {

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point2 d = p - (a + t * ab);
  return std::hypot(d.x, d.y);
}

}  // namespace detail

// Sample count giving spacing <= pitch / 2 along the curve, never below min_samples.
inline int bezier_sample_count(Point2 p0, Point2 p1, Point2 p2, double pitch, int min_samples) {
  // Control polygon length bounds the arc length from above.
  const double len = std::hypot(p1.x - p0.x, p1.y - p0.y) + std::hypot(p2.x - p1.x, p2.y - p1.y);
  const int needed = static_cast<int>(std::ceil(len / (0.5 * pitch))) + 1;
  return std::max({min_samples, needed, 2});
}

inline DensityField rasterize_seed(const ParametricSeed& seed, const Grid& grid,
                                   int min_samples = 64) {
  detail::require(seed.halfwidth > 0.0, "seed halfwidth must be positive");
  detail::require(seed.transition > 0.0, "seed transition must be positive");
  detail::require(grid.contains(seed.point_a) && grid.contains(seed.point_b),
                  "seed branch point outside the design domain");
  for (const Point2& c : seed.control)
    detail::require(grid.contains(c), "seed control point outside the design domain");

  std::vector<std::pair<Point2, Point2>> segments;
  const auto ends = seed_curve_ends(seed, grid);
  for (std::size_t c = 0; c < ends.size(); ++c) {
    const auto [p0, p2] = ends[c];
    const Point2 p1 = seed.control[c];
    const int n = bezier_sample_count(p0, p1, p2, grid.pitch(), min_samples);
    Point2 prev = p0;
    for (int s = 1; s < n; ++s) {
      const Point2 cur = bezier_point(p0, p1, p2, static_cast<double>(s) / (n - 1));
      segments.emplace_back(prev, cur);
      prev = cur;
    }
  }

  std::vector<double> values(grid.design_size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Point2 p = grid.position(grid.design_nodes()[i]);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : segments) d = std::min(d, detail::segment_distance(p, a, b));
    values[i] = std::clamp(0.5 + (seed.halfwidth - d) / seed.transition, 0.0, 1.0);
  }
  return DensityField(std::move(values));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Box {
  Interval x;
  Interval y;
  friend bool operator==(const Box&, const Box&) = default;
};

// Sampling ranges for random_seed. Coordinates in meters.
struct SeedBounds {
  Box point_a;
  Box point_b;
  std::array<Box, 6> control{};
  Interval halfwidth;
  double transition = 0.0;
  friend bool operator==(const SeedBounds&, const SeedBounds&) = default;
};

// Left curves stay left of the L1-left pad center and right curves right of
// the L1-right pad center, so no seed curve crosses the L1 body keep-out.
inline SeedBounds default_seed_bounds(const Grid& g) {
  const double p = g.pitch();
  const double w = g.width(), h = g.height();
  const double xl = g.pad_center(Pad::L1Left).x;
  const double xr = g.pad_center(Pad::L1Right).x;
  const double x1 = g.pad_center(Pad::Port1).x;
  const double x2 = g.pad_center(Pad::Port2).x;

  SeedBounds b;
  b.point_a = {{x1 + 0.2 * (xl - x1), x1 + 0.8 * (xl - x1)}, {0.15 * h, 0.85 * h}};
  b.point_b = {{x2 - 0.8 * (x2 - xr), x2 - 0.2 * (x2 - xr)}, {0.15 * h, 0.85 * h}};
  for (std::size_t c = 0; c < 3; ++c) b.control[c] = {{0.0, xl}, {0.0, h}};
  for (std::size_t c = 3; c < 6; ++c) b.control[c] = {{xr, w}, {0.0, h}};
  b.halfwidth = {2.0 * p, 6.0 * p};
  b.transition = 1.5 * p;
  return b;
}

namespace detail {

template <class Rng>
double draw(Rng& rng, Interval iv) {
  if (iv.lo == iv.hi) return iv.lo;
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

inline void check_interval(Interval iv, double lo, double hi, const char* what) {
  if (!(iv.lo <= iv.hi)) throw InvalidArgument(std::string("empty seed bound: ") + what);
  if (iv.lo < lo || iv.hi > hi)
    throw InvalidArgument(std::string("seed bound outside the design domain: ") + what);
}

}  // namespace detail

// Draws every free seed parameter independently and uniformly. Pad endpoints
// of the curves are fixed by the grid and never drawn.
template <class Rng>
ParametricSeed random_seed(Rng& rng, const Grid& grid, const SeedBounds& bounds) {
  const double w = grid.width(), h = grid.height();
  detail::check_interval(bounds.point_a.x, 0, w, "A.x");
  detail::check_interval(bounds.point_a.y, 0, h, "A.y");
  detail::check_interval(bounds.point_b.x, 0, w, "B.x");
  detail::check_interval(bounds.point_b.y, 0, h, "B.y");
  for (const Box& c : bounds.control) {
    detail::check_interval(c.x, 0, w, "control.x");
    detail::check_interval(c.y, 0, h, "control.y");
  }
  if (!(bounds.halfwidth.lo <= bounds.halfwidth.hi) || bounds.halfwidth.lo <= 0.0)
    throw InvalidArgument("empty or non-positive halfwidth bound");
  detail::require(bounds.transition > 0.0, "seed transition must be positive");

  ParametricSeed s;
  s.point_a = {detail::draw(rng, bounds.point_a.x), detail::draw(rng, bounds.point_a.y)};
  s.point_b = {detail::draw(rng, bounds.point_b.x), detail::draw(rng, bounds.point_b.y)};
  for (std::size_t c = 0; c < 6; ++c)
    s.control[c] = {detail::draw(rng, bounds.control[c].x), detail::draw(rng, bounds.control[c].y)};
  s.halfwidth = detail::draw(rng, bounds.halfwidth);
  s.transition = bounds.transition;
  return s;
}

// Conventional layout: straight traces along the port axis with the branch
// points directly above the capacitor pads and straight drops to them.
inline ParametricSeed reference_seed(const Grid& g) {
  const Point2 p1 = g.pad_center(Pad::Port1), p2 = g.pad_center(Pad::Port2);
  const Point2 c1 = g.pad_center(Pad::C1), c2 = g.pad_center(Pad::C2);
  ParametricSeed s;
  s.point_a = {c1.x, p1.y};
  s.point_b = {c2.x, p2.y};
  const auto ends = seed_curve_ends(s, g);
  for (std::size_t c = 0; c < 6; ++c) s.control[c] = 0.5 * (ends[c].first + ends[c].second);
  s.halfwidth = 1.75 * g.pitch();
  s.transition = 0.5 * g.pitch();
  return s;
}

inline DensityField reference_layout(const Grid& g) { return rasterize_seed(reference_seed(g), g); }

}  // namespace ddtd
