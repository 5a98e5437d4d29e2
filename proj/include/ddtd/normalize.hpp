#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ddtd/field.hpp"
#include "ddtd/grid.hpp"

namespace ddtd {

// One grid edge (a inside, b outside) cut by the 0.5 level at fraction t from a.
struct EdgeCrossing {
  int a = 0;  // design-field indices
  int b = 0;
  double t = 0.0;
  Point2 point;
};

struct IsoContour {
  std::vector<EdgeCrossing> crossings;
  std::vector<std::pair<Point2, Point2>> segments;
};

// A node next to a cut edge whose density is within this of 0.5 is treated as
// lying on the contour. Other band nodes are kept at least this far from 0.5.
inline constexpr double kOnContour = 0.02;

// 0.5 iso-contour of the design-node field: linear crossings on every
// design-design edge, joined into segments by marching squares on cells whose
// four corners are design nodes. Edges touching fixed nodes are not cut.
// A node lying on the contour (see kOnContour) takes every crossing on its
// edges onto itself.
inline IsoContour iso_contour(const DensityField& field, const Grid& grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const int n = grid.node_count();
  auto value = [&](int k) { return field[static_cast<std::size_t>(grid.design_index(k))]; };
  auto is_design = [&](int k) { return grid.design_index(k) >= 0; };
  auto inside = [&](int k) { return value(k) >= kConductorThreshold; };

  // Cut edges keyed by (lower node, direction): 0 = +x, 1 = +y.
  std::vector<double> cut(static_cast<std::size_t>(2 * n), -1.0);
  std::vector<char> on_contour(static_cast<std::size_t>(n), 0);
  auto edge_key = [&](int k, int m) { return 2 * std::min(k, m) + (std::abs(m - k) == 1 ? 0 : 1); };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int k = grid.index(i, j);
      if (!is_design(k)) continue;
      for (int m : {i + 1 < nx ? k + 1 : -1, j + 1 < ny ? k + nx : -1}) {
        if (m < 0 || !is_design(m) || inside(k) == inside(m)) continue;
        const int a = inside(k) ? k : m, b = inside(k) ? m : k;
        const double t = (value(a) - kConductorThreshold) / (value(a) - value(b));
        cut[edge_key(k, m)] = t;
        for (int v : {a, b})
          if (std::abs(value(v) - kConductorThreshold) < kOnContour) on_contour[v] = 1;
      }
    }
  }

  IsoContour out;
  auto crossing_point = [&](int k, int m) -> std::optional<Point2> {
    if (cut[edge_key(k, m)] < 0.0) return std::nullopt;
    const int a = inside(k) ? k : m, b = inside(k) ? m : k;
    const Point2 pa = grid.position(a), pb = grid.position(b);
    const double t = on_contour[a] ? 0.0 : on_contour[b] ? 1.0 : cut[edge_key(k, m)];
    return pa + t * (pb - pa);
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int k = grid.index(i, j);
      if (!is_design(k)) continue;
      for (int m : {i + 1 < nx ? k + 1 : -1, j + 1 < ny ? k + nx : -1}) {
        if (m < 0 || cut[edge_key(k, m)] < 0.0) continue;
        const int a = inside(k) ? k : m, b = inside(k) ? m : k;
        const double t = on_contour[a] ? 0.0 : on_contour[b] ? 1.0 : cut[edge_key(k, m)];
        const Point2 pt = *crossing_point(k, m);
        out.crossings.push_back({grid.design_index(a), grid.design_index(b), t, pt});
        out.segments.emplace_back(pt, pt);
      }
    }
  }

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      // Corners counter-clockwise from bottom-left; edge e joins corner e and e+1.
      const std::array<int, 4> c = {grid.index(i, j), grid.index(i + 1, j),
                                    grid.index(i + 1, j + 1), grid.index(i, j + 1)};
      if (!std::all_of(c.begin(), c.end(), is_design)) continue;
      std::array<std::optional<Point2>, 4> x;
      int cuts = 0;
      for (int e = 0; e < 4; ++e) {
        x[e] = crossing_point(c[e], c[(e + 1) % 4]);
        cuts += x[e].has_value();
      }
      if (cuts == 2) {
        std::array<Point2, 2> ends;
        int m = 0;
        for (int e = 0; e < 4; ++e)
          if (x[e]) ends[m++] = *x[e];
        out.segments.emplace_back(ends[0], ends[1]);
      } else if (cuts == 4) {
        // Saddle: the diagonal conductor corners are kept apart, as in the
        // 4-connected conductor graph. A value-based choice could flip when
        // normalize is re-applied.
        for (int v = 0; v < 4; ++v)
          if (inside(c[v])) out.segments.emplace_back(*x[(v + 3) % 4], *x[v]);
      }
    }
  }
  return out;
}

namespace detail {

// Weight of the crossing-preservation residuals relative to the distance fit.
inline constexpr double kCrossingWeight = 1e6;

// Band values u = density - 0.5 for nodes touching a cut edge. Minimizes
//   W * sum_e ((1 - t_e) u_a + t_e u_b)^2 + sum_i (u_i - target_i)^2
// over the box kOnContour <= |u| <= 0.5 with the input's sign, so that linear
// interpolation of the result cuts each edge where the input did. Nodes on
// the contour are pinned to 0.5 (inside) or just below it (outside).
inline void solve_band(const IsoContour& contour, std::vector<double>& u,
                       const std::vector<char>& inside) {
  std::vector<int> slot(u.size(), -1);
  std::vector<int> band;
  for (const auto& c : contour.crossings) {
    for (int v : {c.a, c.b}) {
      if (slot[v] < 0) {
        slot[v] = static_cast<int>(band.size());
        band.push_back(v);
      }
    }
  }
  if (band.empty()) return;

  constexpr double kTiny = 1e-9;
  const int n = static_cast<int>(band.size());
  std::vector<double> lo(band.size()), hi(band.size()), x(band.size());
  for (int s = 0; s < n; ++s) {
    lo[s] = inside[band[s]] ? kOnContour : -0.5;
    hi[s] = inside[band[s]] ? 0.5 : -kOnContour;
  }

  // A crossing snapped onto a node pins that node to the level. Such edges
  // carry no residual, so pinned nodes never couple to the others.
  std::vector<char> pinned(band.size(), 0);
  for (const auto& c : contour.crossings) {
    if (c.t == 0.0) {
      pinned[slot[c.a]] = 1;
      x[slot[c.a]] = 0.0;
    } else if (c.t == 1.0) {
      pinned[slot[c.b]] = 1;
      x[slot[c.b]] = -kTiny;
    }
  }

  // Full quadratic 0.5 x'Hx - b'x over the band; pinned rows are left as
  // identity and never move.
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b(n);
  for (int s = 0; s < n; ++s) {
    trip.emplace_back(s, s, 1.0);
    b[s] = pinned[s] ? x[s] : u[band[s]];
  }
  for (const auto& c : contour.crossings) {
    if (c.t == 0.0 || c.t == 1.0) continue;
    const std::array<int, 2> sl = {slot[c.a], slot[c.b]};
    const std::array<double, 2> w = {1.0 - c.t, c.t};
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) trip.emplace_back(sl[p], sl[q], kCrossingWeight * w[p] * w[q]);
  }
  Eigen::SparseMatrix<double> hmat(n, n);
  hmat.setFromTriplets(trip.begin(), trip.end());

  // Primal active-set method from a feasible start. The problem is strictly
  // convex, so the result is the unique minimizer and moves continuously with
  // the crossings and distances; a clamp-and-forget heuristic does not.
  enum : char { kFree, kAtLo, kAtHi, kFixed };
  std::vector<char> state(band.size(), kFree);
  for (int s = 0; s < n; ++s) {
    if (pinned[s]) {
      state[s] = kFixed;
    } else {
      x[s] = std::clamp(u[band[s]], lo[s], hi[s]);
    }
  }
  const int max_iter = 4 * n + 64;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<int> free_id(band.size(), -1);
    std::vector<int> free_list;
    for (int s = 0; s < n; ++s)
      if (state[s] == kFree) {
        free_id[s] = static_cast<int>(free_list.size());
        free_list.push_back(s);
      }
    const int nf = static_cast<int>(free_list.size());

    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (nf > 0) {
      std::vector<Eigen::Triplet<double>> sub;
      Eigen::VectorXd rhs(nf);
      for (int k = 0; k < nf; ++k) rhs[k] = b[free_list[k]];
      for (int col = 0; col < n; ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(hmat, col); it; ++it) {
          const int r = static_cast<int>(it.row());
          if (free_id[r] < 0) continue;
          if (free_id[col] >= 0)
            sub.emplace_back(free_id[r], free_id[col], it.value());
          else
            rhs[free_id[r]] -= it.value() * x[col];
        }
      }
      Eigen::SparseMatrix<double> hf(nf, nf);
      hf.setFromTriplets(sub.begin(), sub.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(hf);
      const Eigen::VectorXd sol = ldlt.solve(rhs);

      // Longest step toward the subproblem optimum that stays in the box.
      double alpha = 1.0;
      for (int k = 0; k < nf; ++k) {
        const int s = free_list[k];
        const double d = sol[k] - x[s];
        if (d > 0.0 && x[s] + d > hi[s]) alpha = std::min(alpha, (hi[s] - x[s]) / d);
        if (d < 0.0 && x[s] + d < lo[s]) alpha = std::min(alpha, (lo[s] - x[s]) / d);
      }
      alpha = std::max(alpha, 0.0);
      for (int k = 0; k < nf; ++k) step[free_list[k]] = sol[k] - x[free_list[k]];
      if (alpha < 1.0) {
        for (int k = 0; k < nf; ++k) {
          const int s = free_list[k];
          const double d = step[s];
          const double v = x[s] + alpha * d;
          if (d > 0.0 && x[s] + d > hi[s] && v >= hi[s] - 1e-15) {
            x[s] = hi[s];
            state[s] = kAtHi;
          } else if (d < 0.0 && x[s] + d < lo[s] && v <= lo[s] + 1e-15) {
            x[s] = lo[s];
            state[s] = kAtLo;
          } else {
            x[s] = std::clamp(v, lo[s], hi[s]);
          }
        }
        continue;
      }
      for (int k = 0; k < nf; ++k) x[free_list[k]] = sol[k];
    }

    // Optimal for the current working set: release the bound with the most
    // negative multiplier, if any.
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
    const Eigen::VectorXd g = hmat * xv - b;
    int release = -1;
    double worst = -1e-12;
    for (int s = 0; s < n; ++s) {
      double lambda = 0.0;
      if (state[s] == kAtLo) lambda = g[s];
      else if (state[s] == kAtHi) lambda = -g[s];
      else continue;
      if (lambda < worst) {
        worst = lambda;
        release = s;
      }
    }
    if (release < 0) break;
    state[release] = kFree;
  }
  for (int s = 0; s < n; ++s) u[band[s]] = x[s];
}

}  // namespace detail

// Rebuilds the field as a band of fixed width around its 0.5 iso-contour.
// Away from the contour, density = clamp(0.5 + d / transition, 0, 1) with d
// the signed distance to the contour (positive inside the conductor). Nodes on
// cut edges take the values closest to that band for which linear
// interpolation along every cut edge still crosses 0.5 at the input's point,
// so re-applying normalize leaves the contour in place.
// A field with no crossing maps every node to 0 or 1 by its own side.
inline DensityField normalize(const DensityField& field, const Grid& grid, double transition) {
  detail::require(field.size() == grid.design_size(), "density field length does not match grid");
  detail::require(transition > 0.0, "normalization transition must be positive");
  const IsoContour contour = iso_contour(field, grid);

  std::vector<double> u(field.size());
  std::vector<char> inside(field.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Point2 q = grid.position(grid.design_nodes()[i]);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : contour.segments) d = std::min(d, detail::segment_distance(q, a, b));
    inside[i] = field[i] >= kConductorThreshold;
    const double sign = inside[i] ? 1.0 : -1.0;
    u[i] = std::isinf(d) ? 0.5 * sign : std::clamp(sign * d / transition, -0.5, 0.5);
  }
  detail::solve_band(contour, u, inside);

  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::clamp(0.5 + u[i], 0.0, 1.0);
  return DensityField(std::move(out));
}

}  // namespace ddtd
