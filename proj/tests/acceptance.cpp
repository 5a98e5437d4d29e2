// Acceptance checks, one PASS/FAIL line each. Optional arguments pick a
// subset by number ("acceptance 1 2 10"); no arguments runs all of them.
// Exit status is non-zero if any selected check fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "ddtd/ddtd.hpp"
#include "oracles.hpp"

using namespace ddtd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(const char* spec, double v) { return fmt(spec, v); }

Outcome two_port_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> lc(-8.0, -3.0), ll(-8.0, -3.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double c1 = std::pow(10.0, lc(rng)), c2 = std::pow(10.0, lc(rng)), l1 = std::pow(10.0, ll(rng));
    // 20 log-spaced points from 100 Hz to 100 MHz
    for (int i = 0; i < 20; ++i) {
      const double fr = 1e2 * std::pow(1e6, i / 19.0);
      const cplx want = oracle::pi_s21(c1, c2, l1, fr, 50.0);
      const cplx got = solve_two_port(oracle::pi_network(c1, c2, l1, fr), 50.0).s21;
      worst = std::max(worst, std::abs(got - want) / std::abs(want));
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 1.0,
          "max relative error " + f("%.2e", worst) + " (limit 1e-9), " + f("%.3f", t) + " s (limit 1 s)"};
}

Outcome dominance_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(1, 200);
  std::uniform_real_distribution<double> u(-1.0, 0.0);
  int mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<Objective2> p(static_cast<std::size_t>(size(rng)));
    for (auto& q : p) q = {u(rng), u(rng)};
    if (k % 4 == 0 && p.size() > 4) p[1] = p[0];  // include exact ties
    mismatches += nondominated_sort(p) != oracle::brute_ranks(p);
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 5.0,
          std::to_string(mismatches) + " of 100 sets differ, " + f("%.3f", t) + " s (limit 5 s)"};
}

// Loss plus the sign pattern of every ReLU input, from a single forward pass.
double loss_and_pattern(const VaeParams& p, const Batch& x, const Eigen::MatrixXd& eps,
                        std::vector<char>& pattern) {
  Forward fw;
  const double l = detail::forward_loss(p, x, 0.5, eps, fw, RcnReduction::Mean).total;
  pattern.clear();
  for (Eigen::Index i = 0; i < fw.a1.size(); ++i) pattern.push_back(fw.a1.data()[i] > 0);
  for (Eigen::Index i = 0; i < fw.a2.size(); ++i) pattern.push_back(fw.a2.data()[i] > 0);
  return l;
}

Outcome vae_gradient_check() {
  const auto t0 = Clock::now();
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int net = 0; net < 3; ++net) {
    std::mt19937_64 rng(300 + static_cast<unsigned>(net));
    VaeParams p = init_params(12, rng);
    std::normal_distribution<double> n(0.0, 0.1);
    for (Vec* b : {&p.enc_b1, &p.enc_bmu, &p.enc_blv, &p.dec_b1, &p.dec_b2})
      for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = n(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Batch x(12, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    const Eigen::MatrixXd eps = draw_noise(rng, 4);
    const VaeParams g = gradients(p, x, 0.5, eps).grad;
    std::vector<char> base, pat;
    loss_and_pattern(p, x, eps, base);
    auto tp = p.tensors();
    const auto tg = g.tensors();
    for (std::size_t k = 0; k < tp.size(); ++k) {
      for (std::size_t i = 0; i < tp[k].size(); ++i) {
        const double keep = tp[k][i];
        tp[k][i] = keep + h;
        const double lp = loss_and_pattern(p, x, eps, pat);
        bool smooth = pat == base;
        tp[k][i] = keep - h;
        const double lm = loss_and_pattern(p, x, eps, pat);
        smooth = smooth && pat == base;
        tp[k][i] = keep;
        // a difference straddling a ReLU kink measures the kink, not the gradient
        if (!smooth) {
          ++skipped;
          continue;
        }
        const double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - tg[k][i]) / std::max({std::abs(fd), std::abs(tg[k][i]), 1e-6}));
        ++checked;
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 10.0,
          "max relative error " + f("%.2e", worst) + " (limit 1e-4) over " + std::to_string(checked) +
              " parameters, " + std::to_string(skipped) + " at ReLU kinks skipped, " + f("%.2f", t) +
              " s (limit 10 s)"};
}

struct Board {
  RunConfig cfg = preset_config("example1");
  Grid grid{cfg.geometry};
  ResolvedLayout ref = ResolvedLayout::resolve(grid, reference_layout(grid));
};

const Board& board() {
  static const Board b;
  return b;
}

Outcome constraint_behavior() {
  const Board& b = board();
  const ResolvedLayout cut = ResolvedLayout::resolve(b.grid, oracle::cut_reference(b.grid));
  const bool really_cut = !copper_connected(cut, Pad::Port1, Pad::L1Left);
  const double g_cut = s21_db(cut, b.cfg.physics, b.cfg.components, 1e3);
  const EvalRecord rc = evaluate(cut, b.cfg.physics, b.cfg.components, b.cfg.targets);
  const EvalRecord rr = evaluate(b.ref, b.cfg.physics, b.cfg.components, b.cfg.targets);
  return {really_cut && g_cut <= -100.0 && !rc.feasible && rr.feasible,
          "cut layout G(1 kHz) " + fmt_db(g_cut) + " dB (limit -100), " + (rc.feasible ? "feasible" : "infeasible") +
              "; reference G " + fmt_db(rr.g_db) + " dB, " + (rr.feasible ? "feasible" : "infeasible")};
}

std::string series(const std::vector<InsertionRow>& rows) {
  std::string s;
  for (const auto& r : rows) s += (s.empty() ? "" : " ") + fmt_db(r.s21_db);
  return s;
}

Outcome esl_trend() {
  const Board& b = board();
  std::vector<double> esl;
  for (int i = 1; i <= 10; ++i) esl.push_back(i * 1e-9);
  const auto rows = esl_esr_study(b.ref, b.cfg.physics, b.cfg.components, esl, {0.0}, 10e6);
  int up = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) up += rows[i].s21_db > rows[i - 1].s21_db;
  return {rows.size() == 10 && up == 9,
          std::to_string(up) + "/9 steps increase; S21(10 MHz) dB: " + series(rows)};
}

Outcome esr_trend() {
  const Board& b = board();
  const double dip = find_dip_frequency(b.ref, b.cfg.physics, b.cfg.components, b.cfg.targets.f3, b.cfg.targets.f2);
  std::vector<double> esr;
  for (int i = 1; i <= 10; ++i) esr.push_back(i * 1e-3);
  const auto rows = esl_esr_study(b.ref, b.cfg.physics, b.cfg.components, {0.0}, esr, dip);
  int up = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) up += rows[i].s21_db > rows[i - 1].s21_db;
  return {rows.size() == 10 && up == 9,
          std::to_string(up) + "/9 steps increase at the dip " + f("%.4g", dip) + " Hz; S21 dB: " + series(rows)};
}

Outcome l1_study() {
  const Board& b = board();
  const auto [base, doubled] = l1_doubling_study(b.ref, b.cfg.physics, b.cfg.components, 10e6);
  const Components& c = b.cfg.components;
  const double o1 = to_db(oracle::pi_s21(c.c1, c.c2, c.l1, 10e6, b.cfg.physics.z0), -300.0);
  const double o2 = to_db(oracle::pi_s21(c.c1, c.c2, 2.0 * c.l1, 10e6, b.cfg.physics.z0), -300.0);
  const double d = doubled - base, od = o2 - o1;
  return {std::abs(d + 6.0) <= 1.5 && std::abs(od + 6.0) <= 1.5,
          "layout change " + fmt_db(d) + " dB (" + fmt_db(base) + " -> " + fmt_db(doubled) + "), lumped oracle " +
              fmt_db(od) + " dB, window -6 +/- 1.5"};
}

Outcome desk_run() {
  RunConfig cfg = preset_config("example1");
  cfg.n_initial = 100;
  cfg.n_generate = 100;
  cfg.iterations = 30;
  const auto t0 = Clock::now();
  const int threads = default_thread_count();
  auto log = [&](const std::string& s) { std::fprintf(stderr, "  [%7.1fs] %s\n", seconds_since(t0), s.c_str()); };

  RunState s = initial_state(cfg, threads, log);
  bool monotone = true, feasible = true;
  auto archive_ok = [&] {
    for (const auto& c : s.archive) feasible = feasible && c.eval.feasible && c.eval.g_db >= cfg.targets.g_bar;
  };
  archive_ok();
  while (s.iteration < cfg.iterations) {
    iterate(s, cfg, threads, log);
    const auto& m = s.metrics;
    monotone = monotone && m.back().hypervolume >= m[m.size() - 2].hypervolume;
    archive_ok();
  }
  const double t = seconds_since(t0);
  const double h0 = s.metrics.front().hypervolume, h1 = s.metrics.back().hypervolume;
  return {monotone && feasible && h1 > h0,
          "hypervolume " + f("%.6g", h0) + " -> " + f("%.6g", h1) + (monotone ? ", non-decreasing" : ", DECREASED") +
              ", elites " + std::to_string(s.metrics.front().elite_count) + " -> " +
              std::to_string(s.archive.size()) + ", archive " + (feasible ? "always feasible" : "INFEASIBLE member") +
              "; " + f("%.0f", t) + " s on " + std::to_string(threads) + " thread(s) (target 1800 s" +
              (t < 1800.0 ? ", met)" : ", missed)")};
}

Outcome reproducibility() {
  RunConfig cfg = preset_config("smoke");
  cfg.iterations = 3;
  const fs::path root = fs::temp_directory_path() / "ddtd_acceptance_repro";
  fs::remove_all(root);
  RunOptions a;
  a.threads = 1;
  RunOptions b;
  b.threads = std::max(2, default_thread_count());
  run(cfg, root / "a", a);
  run(cfg, root / "b", b);
  const std::string last = "pareto/iter_" + std::to_string(cfg.iterations) + ".csv";
  const bool same_metrics = binio::read_file(root / "a" / "metrics.csv") == binio::read_file(root / "b" / "metrics.csv");
  const bool same_pareto = binio::read_file(root / "a" / last) == binio::read_file(root / "b" / last);
  fs::remove_all(root);
  return {same_metrics && same_pareto, std::string("metrics.csv ") + (same_metrics ? "identical" : "DIFFERENT") +
                                           ", final Pareto CSV " + (same_pareto ? "identical" : "DIFFERENT") +
                                           " (1 vs " + std::to_string(b.threads) + " threads)"};
}

Outcome normalization() {
  const Board& b = board();
  const double t = b.cfg.normalize_transition;
  const double tol = 1.0 / (2.0 * std::max(b.grid.nx(), b.grid.ny()));
  std::mt19937_64 rng(1010);
  double worst = 0.0;
  bool in_range = true;
  for (int k = 0; k < 100; ++k) {
    const DensityField n1 = normalize(oracle::smooth_field(b.grid, rng), b.grid, t);
    for (double v : n1.values()) in_range = in_range && v >= 0.0 && v <= 1.0;
    worst = std::max(worst, oracle::max_abs_diff(n1, normalize(n1, b.grid, t)));
  }
  return {worst <= tol && in_range,
          "max change on re-application " + f("%.2e", worst) + " (limit " + f("%.4g", tol) + "), outputs " +
              (in_range ? "in [0,1]" : "OUT OF RANGE")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"two-port vs lumped ABCD oracle", two_port_oracle},
      {"non-dominated sort vs brute force", dominance_oracle},
      {"VAE gradient vs finite differences", vae_gradient_check},
      {"disconnection is infeasible, reference is feasible", constraint_behavior},
      {"ESL trend at 10 MHz", esl_trend},
      {"ESR trend at the shunt dip", esr_trend},
      {"L1 doubling at 10 MHz", l1_study},
      {"end-to-end desk run", desk_run},
      {"reproducibility", reproducibility},
      {"normalization idempotence", normalization},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!pick.empty() && !pick.count(id)) continue;
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, checks[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
