// ddtd: command-line front end for the topology design loop.
//
//   ddtd init --out cfg.json [--preset example1|example2|smoke] [--force]
//   ddtd seed --config cfg.json --out dir [--seed N] [--count N]
//   ddtd run --config cfg.json --out dir [--resume] [--force] [--seed N]
//   ddtd evaluate --config cfg.json (layout.json | --reference)
//   ddtd sweep --config cfg.json (layout.json | --reference) [--out f.csv]
//   ddtd pareto run_dir [--iteration k] [--out f.csv]
//   ddtd render (layout.json | --reference --config cfg.json) --out f.svg
//   ddtd diagnose --config cfg.json (layout.json | --reference) --study esl|esr|l1x2
//
// Exit status: 0 ok, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ddtd/ddtd.hpp"

namespace fs = std::filesystem;
using namespace ddtd;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_or_print(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
  } else {
    binio::write_file_atomic(out, text);
  }
}

RunConfig read_config(const std::string& path) {
  if (path.empty()) throw UsageError("--config is required");
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  return load_config(path);
}

// Layout from file, or the built-in reference layout on the config grid.
LayoutFile pick_layout(const std::string& path, bool reference, const RunConfig& cfg) {
  if (reference == !path.empty()) throw UsageError("give exactly one of a layout file or --reference");
  if (reference) {
    LayoutFile lf;
    lf.geometry = cfg.geometry;
    lf.field = reference_layout(Grid(cfg.geometry));
    return lf;
  }
  return load_layout(path);
}

int cmd_init(const std::string& out, const std::string& preset, bool force) {
  if (out.empty()) throw UsageError("init needs an output path (--out)");
  if (fs::exists(out) && !force) {
    std::fprintf(stderr, "error: %s exists; pass --force to overwrite\n", out.c_str());
    return 1;
  }
  binio::write_file_atomic(out, config_text(preset_config(preset)));
  return 0;
}

int cmd_seed(RunConfig cfg, const std::string& out, std::optional<std::uint64_t> seed,
             std::optional<int> count) {
  if (out.empty()) throw UsageError("seed needs an output directory (--out)");
  if (seed) cfg.rng_seed = *seed;
  if (count) cfg.n_initial = *count;
  cfg.validate();
  const Grid grid(cfg.geometry);
  Rng rng(cfg.rng_seed);
  std::uint64_t next_id = 0;
  const auto pop = seed_population(cfg, grid, rng, next_id, default_thread_count());
  fs::create_directories(out);
  std::string csv = "id,J1_db,J2_db,G_db,feasible\n";
  for (const Candidate& c : pop) {
    const std::string stem = "seed_" + std::to_string(c.id);
    save_layout(fs::path(out) / (stem + ".json"), cfg.geometry, c.field);
    binio::write_file_atomic(fs::path(out) / (stem + ".svg"), to_svg(ResolvedLayout::resolve(grid, c.field)));
    csv += std::to_string(c.id) + "," + fmt_g6(c.eval.j1_db) + "," + fmt_g6(c.eval.j2_db) + "," +
           fmt_g6(c.eval.g_db) + "," + (c.eval.feasible ? "1" : "0") + "\n";
  }
  binio::write_file_atomic(fs::path(out) / "seeds.csv", csv);
  std::size_t feasible = 0;
  for (const auto& c : pop) feasible += c.eval.feasible;
  std::printf("%zu seeds, %zu feasible\n", pop.size(), feasible);
  return 0;
}

int cmd_run(RunConfig cfg, const std::string& out, bool resume, bool force,
            std::optional<std::uint64_t> seed) {
  if (out.empty()) throw UsageError("run needs an output directory (--out)");
  if (seed) cfg.rng_seed = *seed;
  RunOptions opt;
  opt.resume = resume;
  opt.force = force;
  opt.threads = default_thread_count();
  opt.log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  const RunState s = run(cfg, out, opt);
  const auto& m = s.metrics.back();
  std::printf("iteration %d: %zu elites, hypervolume %s\n", s.iteration, m.elite_count,
              fmt_g6(m.hypervolume).c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const LayoutFile& lf) {
  const Grid grid(lf.geometry);
  const EvalRecord r = evaluate(ResolvedLayout::resolve(grid, lf.field), cfg.physics, cfg.components, cfg.targets);
  std::printf("J1 %s dB\nJ2 %s dB\nG %s dB\n%s\n", fmt_db(r.j1_db).c_str(), fmt_db(r.j2_db).c_str(),
              fmt_db(r.g_db).c_str(), r.feasible ? "FEASIBLE" : "INFEASIBLE");
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const LayoutFile& lf, double f_lo, double f_hi, int ppd,
              const std::string& out) {
  const Grid grid(lf.geometry);
  const SweepResult r = sweep(ResolvedLayout::resolve(grid, lf.field), cfg.physics, cfg.components, f_lo, f_hi, ppd);
  write_or_print(sweep_csv(r, cfg.physics.db_floor), out);
  return 0;
}

int cmd_pareto(const std::string& dir, std::optional<int> iteration, const std::string& out) {
  if (dir.empty()) throw UsageError("pareto needs a run directory");
  const RunConfig cfg = read_config((fs::path(dir) / "config.json").string());
  const int k = iteration ? *iteration : latest_checkpoint(dir);
  if (k < 0) throw IoError(dir + ": no checkpoints");
  const RunState s = load_checkpoint(checkpoint_path(dir, k), cfg);
  write_or_print(pareto_csv(s.archive), out);
  return 0;
}

int cmd_render(const LayoutFile& lf, const std::string& out) {
  if (out.empty()) throw UsageError("render needs an output file (--out)");
  const Grid grid(lf.geometry);
  binio::write_file_atomic(out, to_svg(ResolvedLayout::resolve(grid, lf.field)));
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const LayoutFile& lf, const std::string& study) {
  const Grid grid(lf.geometry);
  const ResolvedLayout layout = ResolvedLayout::resolve(grid, lf.field);
  std::vector<double> steps;
  for (int i = 1; i <= 10; ++i) steps.push_back(i);
  std::string csv;
  char buf[160];
  if (study == "esl" || study == "esr") {
    std::vector<double> esl{0.0}, esr{0.0};
    double f = cfg.targets.f2;
    if (study == "esl") {
      esl.clear();
      for (double s : steps) esl.push_back(s * 1e-9);
    } else {
      esr.clear();
      for (double s : steps) esr.push_back(s * 1e-3);
      // The dip of the shunt branch sits between f3 and f2.
      f = find_dip_frequency(layout, cfg.physics, cfg.components, cfg.targets.f3, cfg.targets.f2);
    }
    csv = "esl_h,esr_ohm,freq_hz,s21_db\n";
    for (const auto& row : esl_esr_study(layout, cfg.physics, cfg.components, esl, esr, f)) {
      std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g\n", row.esl, row.esr, f, row.s21_db);
      csv += buf;
    }
  } else if (study == "l1x2") {
    const double f = cfg.targets.f2;
    const auto [base, doubled] = l1_doubling_study(layout, cfg.physics, cfg.components, f);
    csv = "l1_h,freq_hz,s21_db\n";
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g\n", cfg.components.l1, f, base);
    csv += buf;
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g\n", 2.0 * cfg.components.l1, f, doubled);
    csv += buf;
  } else {
    throw UsageError("unknown study '" + study + "' (esl, esr, l1x2)");
  }
  write_or_print(csv, "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven topology design of pi-filter conductor layouts"};
  app.require_subcommand(1);

  std::string config, out, layout, preset = "example1", study;
  bool force = false, resume = false, reference = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> count, iteration;
  double f_lo = 1e3, f_hi = 100e6;
  int ppd = 10;

  auto* init = app.add_subcommand("init", "write a default configuration");
  init->add_option("--out,path", out, "config file to write");
  init->add_option("--preset", preset, "example1, example2 or smoke");
  init->add_flag("--force", force, "overwrite an existing file");

  auto* seed_cmd = app.add_subcommand("seed", "rasterize and evaluate the initial population");
  seed_cmd->add_option("--config", config, "configuration file");
  seed_cmd->add_option("--out", out, "output directory");
  seed_cmd->add_option("--seed", seed, "override the random seed");
  seed_cmd->add_option("--count", count, "override the number of seeds");

  auto* run_cmd = app.add_subcommand("run", "run the design loop");
  run_cmd->add_option("--config", config, "configuration file");
  run_cmd->add_option("--out", out, "run directory");
  run_cmd->add_flag("--resume", resume, "continue from the latest checkpoint");
  run_cmd->add_flag("--force", force, "discard an existing run in the directory");
  run_cmd->add_option("--seed", seed, "override the random seed");

  auto* eval_cmd = app.add_subcommand("evaluate", "print J1, J2, G and feasibility of a layout");
  auto* sweep_cmd = app.add_subcommand("sweep", "S21/S11 over a log frequency range as CSV");
  auto* diag_cmd = app.add_subcommand("diagnose", "ESL, ESR and L1 insertion studies as CSV");
  for (auto* sc : {eval_cmd, sweep_cmd, diag_cmd}) {
    sc->add_option("--config", config, "configuration file");
    sc->add_option("layout", layout, "layout JSON file");
    sc->add_flag("--reference", reference, "use the built-in straight-trace layout");
  }
  sweep_cmd->add_option("--out", out, "CSV file (default stdout)");
  sweep_cmd->add_option("--f-lo", f_lo, "lowest frequency, Hz");
  sweep_cmd->add_option("--f-hi", f_hi, "highest frequency, Hz");
  sweep_cmd->add_option("--points-per-decade", ppd, "sampling density");
  diag_cmd->add_option("--study", study, "esl, esr or l1x2");

  auto* pareto_cmd = app.add_subcommand("pareto", "export an elite archive as CSV");
  std::string run_dir;
  pareto_cmd->add_option("run_dir", run_dir, "run directory");
  pareto_cmd->add_option("--iteration", iteration, "iteration (default latest)");
  pareto_cmd->add_option("--out", out, "CSV file (default stdout)");

  auto* render_cmd = app.add_subcommand("render", "draw a layout as SVG");
  render_cmd->add_option("layout", layout, "layout JSON file");
  render_cmd->add_flag("--reference", reference, "use the built-in straight-trace layout");
  render_cmd->add_option("--config", config, "configuration (with --reference)");
  render_cmd->add_option("--out", out, "SVG file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* used = app.get_subcommands().front();
  try {
    if (used == init) return cmd_init(out, preset, force);
    if (used == seed_cmd) return cmd_seed(read_config(config), out, seed, count);
    if (used == run_cmd) return cmd_run(read_config(config), out, resume, force, seed);
    if (used == pareto_cmd) return cmd_pareto(run_dir, iteration, out);
    if (used == render_cmd) {
      if (reference) return cmd_render(pick_layout("", true, read_config(config)), out);
      if (layout.empty()) throw UsageError("render needs a layout file or --reference");
      return cmd_render(load_layout(layout), out);
    }
    const RunConfig cfg = read_config(config);
    const LayoutFile lf = pick_layout(layout, reference, cfg);
    if (used == eval_cmd) return cmd_evaluate(cfg, lf);
    if (used == sweep_cmd) return cmd_sweep(cfg, lf, f_lo, f_hi, ppd, out);
    if (study.empty()) throw UsageError("diagnose needs --study");
    return cmd_diagnose(cfg, lf, study);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n\n%s", e.what(), used->help().c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
