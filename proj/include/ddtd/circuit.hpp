#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ddtd/error.hpp"
#include "ddtd/field.hpp"
#include "ddtd/grid.hpp"

namespace ddtd {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMu0 = 4e-7 * kPi;
inline constexpr double kEps0 = 8.8541878128e-12;

// Quasi-static sheet model of the copper layer over a ground plane.
struct PhysicsParams {
  double sheet_resistance = 0.5e-3;             // ohm / square
  double sheet_inductance = kMu0 * 1.6e-3;      // henry / square
  double permittivity_rel = 4.5;
  double board_thickness = 1.6e-3;              // meters
  double z0 = 50.0;
  double leak_conductance = 1e-12;              // siemens per node
  double db_floor = -300.0;

  void validate() const {
    // Ls = 0 is allowed: a purely resistive sheet is still well posed.
    detail::require(sheet_resistance > 0.0, "sheet_resistance must be positive");
    detail::require(sheet_inductance >= 0.0, "sheet_inductance must be non-negative");
    detail::require(permittivity_rel > 0.0, "permittivity_rel must be positive");
    detail::require(board_thickness > 0.0, "board_thickness must be positive");
    detail::require(z0 > 0.0, "z0 must be positive");
    detail::require(leak_conductance > 0.0, "leak_conductance must be positive");
    detail::require(db_floor < 0.0, "db_floor must be negative");
  }

  // Shunt capacitance to ground of one conductive grid node.
  double node_capacitance(double pitch) const {
    return kEps0 * permittivity_rel * pitch * pitch / board_thickness;
  }
};

struct Components {
  double c1 = 100e-6;
  double c2 = 100e-6;
  double l1 = 10e-6;
  double esl_c1 = 0.0;
  double esl_c2 = 0.0;
  double esr_c1 = 0.0;
  double esr_c2 = 0.0;

  void validate() const {
    detail::require(c1 > 0.0 && c2 > 0.0 && l1 > 0.0, "c1, c2 and l1 must be positive");
    detail::require(esl_c1 >= 0.0 && esl_c2 >= 0.0, "esl must be non-negative");
    detail::require(esr_c1 >= 0.0 && esr_c2 >= 0.0, "esr must be non-negative");
  }
  friend bool operator==(const Components&, const Components&) = default;
};

enum class BranchKind : unsigned char { Trace, Shunt, Component };

struct Branch {
  int i = 0;
  int j = 0;  // 0 = ground
  cplx y;
  BranchKind kind = BranchKind::Trace;
};

// Node 0 is ground. Nodes 1..6 are the merged pads in Pad order, then one
// node per non-pad grid node.
struct ComplexNetwork {
  int node_count = 0;  // including ground
  int ground = 0;
  std::vector<Branch> branches;
  int port1 = 0;  // signal nodes; both ports are referenced to ground
  int port2 = 0;
  double frequency_hz = 0.0;

  void add(int i, int j, cplx y, BranchKind kind) {
    if (i == j) return;
    branches.push_back({i, j, y, kind});
  }
};

inline cplx capacitor_branch(double c, double esl, double esr, double w) {
  return 1.0 / (1.0 / cplx(0.0, w * c) + cplx(esr, w * esl));
}

// Electrical node of every grid node (see ComplexNetwork).
inline std::vector<int> electrical_nodes(const Grid& grid) {
  std::vector<int> id(static_cast<std::size_t>(grid.node_count()));
  int next = 1 + static_cast<int>(kPadCount);
  for (int k = 0; k < grid.node_count(); ++k) {
    const int p = grid.pad_of(k);
    id[static_cast<std::size_t>(k)] = p >= 0 ? 1 + p : next++;
  }
  return id;
}

inline ComplexNetwork extract_network(const ResolvedLayout& layout, const PhysicsParams& params,
                                      const Components& comps, double freq) {
  detail::require(freq > 0.0, "frequency must be positive");
  params.validate();
  comps.validate();
  const Grid& g = *layout.grid;
  const double w = 2.0 * kPi * freq;
  const std::vector<int> id = electrical_nodes(g);

  ComplexNetwork net;
  net.frequency_hz = freq;
  net.node_count = 1 + *std::max_element(id.begin(), id.end());
  net.port1 = 1 + static_cast<int>(Pad::Port1);
  net.port2 = 1 + static_cast<int>(Pad::Port2);

  const cplx y_trace = 1.0 / cplx(params.sheet_resistance, w * params.sheet_inductance);
  const cplx y_cond(params.leak_conductance, w * params.node_capacitance(g.pitch()));
  const cplx y_leak(params.leak_conductance, 0.0);

  for (int k = 0; k < g.node_count(); ++k) {
    const bool on = layout.conductive(k);
    net.add(id[k], 0, on ? y_cond : y_leak, BranchKind::Shunt);
    if (!on) continue;
    // +x and +y neighbors only, so each edge is visited once.
    const int i = g.col(k), j = g.row(k);
    if (i + 1 < g.nx() && layout.conductive(k + 1)) net.add(id[k], id[k + 1], y_trace, BranchKind::Trace);
    if (j + 1 < g.ny() && layout.conductive(k + g.nx()))
      net.add(id[k], id[k + g.nx()], y_trace, BranchKind::Trace);
  }

  auto pad_node = [](Pad p) { return 1 + static_cast<int>(p); };
  net.add(pad_node(Pad::C1), 0, capacitor_branch(comps.c1, comps.esl_c1, comps.esr_c1, w),
          BranchKind::Component);
  net.add(pad_node(Pad::C2), 0, capacitor_branch(comps.c2, comps.esl_c2, comps.esr_c2, w),
          BranchKind::Component);
  net.add(pad_node(Pad::L1Left), pad_node(Pad::L1Right), 1.0 / cplx(0.0, w * comps.l1),
          BranchKind::Component);
  return net;
}

struct TwoPort {
  cplx s11;
  cplx s21;
};

// Port 1 driven by 2 V behind z0 (Norton form), port 2 loaded by z0.
inline TwoPort solve_two_port(const ComplexNetwork& net, double z0) {
  detail::require(z0 > 0.0, "z0 must be positive");
  const int n = net.node_count - 1;
  detail::require(n >= 1, "network has no signal nodes");
  detail::require(net.port1 >= 1 && net.port1 <= n && net.port2 >= 1 && net.port2 <= n &&
                      net.port1 != net.port2,
                  "invalid port nodes");

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(net.branches.size() * 4 + 2);
  for (const Branch& b : net.branches) {
    detail::require(b.i >= 0 && b.i <= n && b.j >= 0 && b.j <= n && b.i != b.j,
                    "invalid branch nodes");
    const int r = b.i - 1, c = b.j - 1;
    if (r >= 0) trip.emplace_back(r, r, b.y);
    if (c >= 0) trip.emplace_back(c, c, b.y);
    if (r >= 0 && c >= 0) {
      trip.emplace_back(r, c, -b.y);
      trip.emplace_back(c, r, -b.y);
    }
  }
  trip.emplace_back(net.port1 - 1, net.port1 - 1, cplx(1.0 / z0, 0.0));
  trip.emplace_back(net.port2 - 1, net.port2 - 1, cplx(1.0 / z0, 0.0));

  Eigen::SparseMatrix<cplx> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs[net.port1 - 1] = 2.0 / z0;

  auto fail = [&](const char* what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s at %.6g Hz", what, net.frequency_hz);
    return NumericalError(buf);
  };
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw fail("singular nodal matrix");
  const Eigen::VectorXcd v = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !v.allFinite()) throw fail("nodal solve failed");
  return {v[net.port1 - 1] - 1.0, v[net.port2 - 1]};
}

inline ComplexNetwork swap_ports(ComplexNetwork net) {
  std::swap(net.port1, net.port2);
  return net;
}

inline double to_db(cplx s, double floor) {
  const double m = std::abs(s);
  if (!(m > 0.0)) return floor;
  return std::max(20.0 * std::log10(m), floor);
}

inline TwoPort solve_layout(const ResolvedLayout& layout, const PhysicsParams& params,
                            const Components& comps, double freq) {
  return solve_two_port(extract_network(layout, params, comps, freq), params.z0);
}

inline double s21_db(const ResolvedLayout& layout, const PhysicsParams& params,
                     const Components& comps, double freq) {
  return to_db(solve_layout(layout, params, comps, freq).s21, params.db_floor);
}

struct Targets {
  double f1 = 100e3;
  double f2 = 10e6;
  double f3 = 1e3;
  double g_bar = -35.0;

  void validate() const {
    detail::require(f3 > 0.0 && f3 < f1 && f1 < f2, "frequencies must satisfy 0 < f3 < f1 < f2");
  }
  friend bool operator==(const Targets&, const Targets&) = default;
};

struct EvalRecord {
  double j1_db = 0.0;
  double j2_db = 0.0;
  double g_db = 0.0;
  bool feasible = false;
  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

inline EvalRecord evaluate(const ResolvedLayout& layout, const PhysicsParams& params,
                           const Components& comps, const Targets& t) {
  t.validate();
  EvalRecord r;
  r.j1_db = s21_db(layout, params, comps, t.f1);
  r.j2_db = s21_db(layout, params, comps, t.f2);
  r.g_db = s21_db(layout, params, comps, t.f3);
  r.feasible = r.g_db >= t.g_bar;
  return r;
}

struct SweepResult {
  std::vector<double> frequencies;
  std::vector<cplx> s21;
  std::vector<cplx> s11;
};

// Log-spaced, both ends included; an integer number of decades gives exactly
// points_per_decade intervals per decade.
inline std::vector<double> log_frequencies(double f_lo, double f_hi, int points_per_decade) {
  detail::require(f_lo > 0.0 && f_lo < f_hi, "sweep needs 0 < f_lo < f_hi");
  detail::require(points_per_decade >= 1, "points_per_decade must be at least 1");
  const double decades = std::log10(f_hi / f_lo);
  const int intervals = std::max(1, static_cast<int>(std::ceil(decades * points_per_decade - 1e-9)));
  std::vector<double> f(static_cast<std::size_t>(intervals + 1));
  for (int i = 0; i <= intervals; ++i)
    f[i] = f_lo * std::pow(10.0, decades * i / intervals);
  f.front() = f_lo;
  f.back() = f_hi;
  return f;
}

inline SweepResult sweep(const ResolvedLayout& layout, const PhysicsParams& params,
                         const Components& comps, double f_lo, double f_hi, int points_per_decade) {
  SweepResult out;
  out.frequencies = log_frequencies(f_lo, f_hi, points_per_decade);
  for (double f : out.frequencies) {
    const TwoPort tp = solve_layout(layout, params, comps, f);
    out.s21.push_back(tp.s21);
    out.s11.push_back(tp.s11);
  }
  return out;
}

inline std::string sweep_csv(const SweepResult& r, double floor) {
  std::string s = "freq_hz,s21_db,s21_re,s21_im,s11_db\n";
  char buf[192];
  for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6g\n", r.frequencies[i],
                  to_db(r.s21[i], floor), r.s21[i].real(), r.s21[i].imag(), to_db(r.s11[i], floor));
    s += buf;
  }
  return s;
}

struct InsertionRow {
  double esl = 0.0;
  double esr = 0.0;
  double s21_db = 0.0;
};

// Inserts (esl, esr) in series with both capacitors. The two lists are zipped;
// a list of length 1 is repeated against the other.
inline std::vector<InsertionRow> esl_esr_study(const ResolvedLayout& layout,
                                               const PhysicsParams& params, const Components& comps,
                                               const std::vector<double>& esl_list,
                                               const std::vector<double>& esr_list, double freq) {
  detail::require(!esl_list.empty() && !esr_list.empty(), "esl and esr lists must be nonempty");
  const std::size_t n = std::max(esl_list.size(), esr_list.size());
  detail::require((esl_list.size() == n || esl_list.size() == 1) &&
                      (esr_list.size() == n || esr_list.size() == 1),
                  "esl and esr lists must have equal length or length 1");
  std::vector<InsertionRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double esl = esl_list[esl_list.size() == 1 ? 0 : i];
    const double esr = esr_list[esr_list.size() == 1 ? 0 : i];
    Components c = comps;
    c.esl_c1 = c.esl_c2 = esl;
    c.esr_c1 = c.esr_c2 = esr;
    rows.push_back({esl, esr, s21_db(layout, params, c, freq)});
  }
  return rows;
}

inline std::pair<double, double> l1_doubling_study(const ResolvedLayout& layout,
                                                   const PhysicsParams& params,
                                                   const Components& comps, double freq) {
  Components doubled = comps;
  doubled.l1 *= 2.0;
  return {s21_db(layout, params, comps, freq), s21_db(layout, params, doubled, freq)};
}

// Frequency of minimum |S21| in [f_lo, f_hi]: coarse log sweep, then golden
// section on log f around the best coarse point.
inline double find_dip_frequency(const ResolvedLayout& layout, const PhysicsParams& params,
                                 const Components& comps, double f_lo, double f_hi,
                                 int points_per_decade = 20) {
  auto mag = [&](double logf) {
    return std::abs(solve_layout(layout, params, comps, std::pow(10.0, logf)).s21);
  };
  const std::vector<double> f = log_frequencies(f_lo, f_hi, points_per_decade);
  std::size_t best = 0;
  double best_m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double m = mag(std::log10(f[i]));
    if (m < best_m) {
      best_m = m;
      best = i;
    }
  }
  double a = std::log10(f[best == 0 ? 0 : best - 1]);
  double b = std::log10(f[std::min(best + 1, f.size() - 1)]);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double mc = mag(c), md = mag(d);
  for (int it = 0; it < 60 && b - a > 1e-9; ++it) {
    if (mc < md) {
      b = d;
      d = c;
      md = mc;
      c = b - r * (b - a);
      mc = mag(c);
    } else {
      a = c;
      c = d;
      mc = md;
      d = a + r * (b - a);
      md = mag(d);
    }
  }
  return std::pow(10.0, 0.5 * (a + b));
}

}  // namespace ddtd
