#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string_view>
#include <vector>

#include "ddtd/circuit.hpp"
#include "ddtd/error.hpp"
#include "ddtd/field.hpp"

namespace ddtd {

// Objective pair, both minimized.
struct Objective2 {
  double j1 = 0.0;
  double j2 = 0.0;
  friend bool operator==(const Objective2&, const Objective2&) = default;
};

inline bool dominates(const Objective2& a, const Objective2& b) {
  return a.j1 <= b.j1 && a.j2 <= b.j2 && (a.j1 < b.j1 || a.j2 < b.j2);
}

enum class Origin : unsigned char { Seed, Generated };

inline std::string_view origin_name(Origin o) { return o == Origin::Seed ? "seed" : "generated"; }

struct Candidate {
  std::uint64_t id = 0;
  int iteration = 0;  // iteration that produced it; seeds are 0
  Origin origin = Origin::Seed;
  DensityField field;
  EvalRecord eval;

  Objective2 objectives() const { return {eval.j1_db, eval.j2_db}; }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

inline std::vector<Candidate> feasibility_filter(const std::vector<Candidate>& in, double g_bar) {
  std::vector<Candidate> out;
  for (const Candidate& c : in)
    if (c.eval.g_db >= g_bar) out.push_back(c);
  return out;
}

// Rank 1 = non-dominated; later fronts are peeled off in turn.
inline std::vector<int> nondominated_sort(const std::vector<Objective2>& pts) {
  const std::size_t n = pts.size();
  for (const auto& p : pts)
    detail::require(std::isfinite(p.j1) && std::isfinite(p.j2), "objective values must be finite");
  std::vector<std::vector<std::size_t>> beats(n);
  std::vector<int> beaten_by(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(pts[i], pts[j])) {
        beats[i].push_back(j);
        ++beaten_by[j];
      } else if (dominates(pts[j], pts[i])) {
        beats[j].push_back(i);
        ++beaten_by[i];
      }
    }
  }
  std::vector<int> rank(n, 0);
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < n; ++i)
    if (beaten_by[i] == 0) front.push_back(i);
  for (int r = 1; !front.empty(); ++r) {
    std::vector<std::size_t> next;
    for (std::size_t i : front) {
      rank[i] = r;
      for (std::size_t j : beats[i])
        if (--beaten_by[j] == 0) next.push_back(j);
    }
    front.swap(next);
  }
  return rank;
}

inline std::vector<double> crowding_distance(const std::vector<Objective2>& pts) {
  const std::size_t n = pts.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(n, 0.0);
  if (n <= 2) {
    std::fill(d.begin(), d.end(), inf);
    return d;
  }
  std::vector<std::size_t> idx(n);
  auto add_axis = [&](auto key, auto other) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (key(pts[a]) != key(pts[b])) return key(pts[a]) < key(pts[b]);
      return other(pts[a]) < other(pts[b]);
    });
    d[idx.front()] = inf;
    d[idx.back()] = inf;
    const double range = key(pts[idx.back()]) - key(pts[idx.front()]);
    if (range <= 0.0) return;
    for (std::size_t k = 1; k + 1 < n; ++k)
      d[idx[k]] += (key(pts[idx[k + 1]]) - key(pts[idx[k - 1]])) / range;
  };
  auto j1 = [](const Objective2& p) { return p.j1; };
  auto j2 = [](const Objective2& p) { return p.j2; };
  add_axis(j1, j2);
  add_axis(j2, j1);
  return d;
}

// Indices (ascending) of the members kept when capping a front at `cap`:
// largest crowding distance first, ties by lower J1, lower J2, earlier index.
inline std::vector<std::size_t> truncate_indices(const std::vector<Objective2>& pts, std::size_t cap) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (pts.size() <= cap) return idx;
  const std::vector<double> d = crowding_distance(pts);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (d[a] != d[b]) return d[a] > d[b];
    if (pts[a].j1 != pts[b].j1) return pts[a].j1 < pts[b].j1;
    if (pts[a].j2 != pts[b].j2) return pts[a].j2 < pts[b].j2;
    return a < b;
  });
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<Objective2> objectives_of(const std::vector<Candidate>& cs) {
  std::vector<Objective2> o;
  o.reserve(cs.size());
  for (const Candidate& c : cs) o.push_back(c.objectives());
  return o;
}

inline std::vector<Candidate> truncate(const std::vector<Candidate>& front, std::size_t cap) {
  std::vector<Candidate> out;
  for (std::size_t i : truncate_indices(objectives_of(front), cap)) out.push_back(front[i]);
  return out;
}

inline std::vector<Candidate> rank_one(const std::vector<Candidate>& cs) {
  const std::vector<int> r = nondominated_sort(objectives_of(cs));
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (r[i] == 1) out.push_back(cs[i]);
  return out;
}

// Area dominated by the points and bounded by ref (minimization).
inline double hypervolume2d(std::vector<Objective2> pts, Objective2 ref) {
  for (const auto& p : pts)
    if (!(p.j1 <= ref.j1 && p.j2 <= ref.j2))
      throw InvalidArgument("hypervolume point does not dominate the reference point");
  std::sort(pts.begin(), pts.end(), [](const Objective2& a, const Objective2& b) {
    return a.j1 != b.j1 ? a.j1 < b.j1 : a.j2 < b.j2;
  });
  double area = 0.0, level = ref.j2;
  for (const auto& p : pts) {
    if (p.j2 < level) {
      area += (ref.j1 - p.j1) * (level - p.j2);
      level = p.j2;
    }
  }
  return area;
}

}  // namespace ddtd
