#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddtd/binary_io.hpp"
#include "ddtd/circuit.hpp"
#include "ddtd/config.hpp"
#include "ddtd/error.hpp"
#include "ddtd/field.hpp"
#include "ddtd/format.hpp"
#include "ddtd/layout_io.hpp"
#include "ddtd/moo.hpp"
#include "ddtd/normalize.hpp"
#include "ddtd/parallel.hpp"
#include "ddtd/svg.hpp"
#include "ddtd/vae.hpp"

namespace ddtd {

using Rng = std::mt19937_64;

struct IterationMetrics {
  int iteration = 0;
  std::size_t elite_count = 0;
  double hypervolume = 0.0;
  double best_j1 = 0.0;
  double best_j2 = 0.0;
  friend bool operator==(const IterationMetrics&, const IterationMetrics&) = default;
};

struct RunState {
  int iteration = 0;  // completed iterations; 0 right after seeding
  std::vector<Candidate> archive;
  std::optional<VaeParams> vae;  // model trained in the latest iteration
  Rng rng;
  std::vector<IterationMetrics> metrics;  // metrics[k] describes the archive after k iterations
  std::uint64_t next_id = 0;

  friend bool operator==(const RunState& a, const RunState& b) {
    return a.iteration == b.iteration && a.archive == b.archive && a.vae == b.vae && a.rng == b.rng &&
           a.metrics == b.metrics && a.next_id == b.next_id;
  }
};

using LogFn = std::function<void(const std::string&)>;

inline EvalRecord evaluate_field(const RunConfig& cfg, const Grid& grid, const DensityField& field) {
  return evaluate(ResolvedLayout::resolve(grid, field), cfg.physics, cfg.components, cfg.targets);
}

// Seeds are drawn sequentially from rng, then rasterized and evaluated in parallel.
inline std::vector<Candidate> seed_population(const RunConfig& cfg, const Grid& grid, Rng& rng,
                                              std::uint64_t& next_id, int threads) {
  std::vector<ParametricSeed> seeds;
  for (int i = 0; i < cfg.n_initial; ++i) seeds.push_back(random_seed(rng, grid, cfg.seed_bounds));
  std::vector<Candidate> out = parallel_map(
      seeds.size(),
      [&](std::size_t i) {
        try {
          Candidate c;
          c.field = rasterize_seed(seeds[i], grid, cfg.bezier_min_samples);
          c.eval = evaluate_field(cfg, grid, c.field);
          return c;
        } catch (const Error& e) {
          throw NumericalError("seed " + std::to_string(i) + ": " + e.what());
        }
      },
      threads);
  for (Candidate& c : out) {
    c.id = next_id++;
    c.iteration = 0;
    c.origin = Origin::Seed;
  }
  return out;
}

// Feasible, rank-one, capped. Order follows the input.
inline std::vector<Candidate> update_archive(const std::vector<Candidate>& pool, double g_bar,
                                             std::size_t cap) {
  return truncate(rank_one(feasibility_filter(pool, g_bar)), cap);
}

inline IterationMetrics measure(const std::vector<Candidate>& archive, int iteration, Objective2 ref) {
  IterationMetrics m;
  m.iteration = iteration;
  m.elite_count = archive.size();
  std::vector<Objective2> pts;
  m.best_j1 = m.best_j2 = std::numeric_limits<double>::infinity();
  for (const Candidate& c : archive) {
    const Objective2 o = c.objectives();
    // Points outside the reference box add no area.
    pts.push_back({std::min(o.j1, ref.j1), std::min(o.j2, ref.j2)});
    m.best_j1 = std::min(m.best_j1, o.j1);
    m.best_j2 = std::min(m.best_j2, o.j2);
  }
  m.hypervolume = hypervolume2d(pts, ref);
  return m;
}

inline RunState initial_state(const RunConfig& cfg, int threads, const LogFn& log = {}) {
  cfg.validate();
  const Grid grid(cfg.geometry);
  RunState s;
  s.rng.seed(cfg.rng_seed);
  const std::vector<Candidate> pop = seed_population(cfg, grid, s.rng, s.next_id, threads);
  s.archive = update_archive(pop, cfg.targets.g_bar, static_cast<std::size_t>(cfg.elite_cap));
  if (s.archive.empty())
    throw Error("no feasible initial layout among " + std::to_string(pop.size()) +
                " seeds; increase population.n_initial or relax targets.g_bar_db");
  s.metrics.push_back(measure(s.archive, 0, cfg.hv_reference));
  if (log) {
    std::size_t feasible = 0;
    for (const auto& c : pop) feasible += c.eval.feasible;
    log("iteration 0: " + std::to_string(feasible) + "/" + std::to_string(pop.size()) + " seeds feasible, " +
        std::to_string(s.archive.size()) + " elites, hv " + fmt_g6(s.metrics.back().hypervolume));
  }
  return s;
}

inline Batch elite_matrix(const std::vector<Candidate>& elites) {
  Batch m(static_cast<Eigen::Index>(elites.front().field.size()), static_cast<Eigen::Index>(elites.size()));
  for (std::size_t j = 0; j < elites.size(); ++j)
    for (std::size_t i = 0; i < elites[j].field.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = elites[j].field[i];
  return m;
}

// One cycle: train a fresh VAE on the (augmented) elites, sample, normalize,
// evaluate, merge with the elite snapshot.
inline void iterate(RunState& s, const RunConfig& cfg, int threads, const LogFn& log = {}) {
  if (s.archive.empty()) throw Error("empty elite archive; nothing to train on");
  const Grid grid(cfg.geometry);
  const std::vector<Candidate> elites = s.archive;
  const int k = s.iteration + 1;

  const Batch train_set = augment(elite_matrix(elites), cfg.train.training_set_size);
  VaeParams init = init_params(static_cast<int>(grid.design_size()), s.rng);
  TrainResult tr = train(std::move(init), train_set, cfg.train, s.rng);
  const Batch samples = sample_latent(tr.params, cfg.n_generate, s.rng, cfg.latent_range);
  s.vae = std::move(tr.params);

  std::vector<Candidate> fresh = parallel_map(
      static_cast<std::size_t>(samples.cols()),
      [&](std::size_t j) {
        const auto col = samples.col(static_cast<Eigen::Index>(j));
        std::vector<double> v(col.data(), col.data() + col.size());
        Candidate c;
        c.field = normalize(DensityField(std::move(v)), grid, cfg.normalize_transition);
        c.eval = evaluate_field(cfg, grid, c.field);
        return c;
      },
      threads);
  std::size_t feasible = 0;
  for (Candidate& c : fresh) {
    c.id = s.next_id++;
    c.iteration = k;
    c.origin = Origin::Generated;
    feasible += c.eval.feasible;
  }

  std::vector<Candidate> pool = elites;
  pool.insert(pool.end(), fresh.begin(), fresh.end());
  s.archive = update_archive(pool, cfg.targets.g_bar, static_cast<std::size_t>(cfg.elite_cap));
  s.iteration = k;
  s.metrics.push_back(measure(s.archive, k, cfg.hv_reference));
  if (log) {
    const auto& last = tr.report.epochs.back();
    log("iteration " + std::to_string(k) + ": loss " + fmt_g6(last.total) + " (rcn " + fmt_g6(last.rcn) +
        ", kl " + fmt_g6(last.kl) + "), " + std::to_string(feasible) + "/" + std::to_string(fresh.size()) +
        " generated feasible, " + std::to_string(s.archive.size()) + " elites, hv " +
        fmt_g6(s.metrics.back().hypervolume));
  }
}

// ---- checkpoints ----

inline constexpr char kRunMagic[8] = {'D', 'D', 'T', 'D', 'R', 'U', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Config text with the iteration budget removed, so a run may be extended.
inline std::string config_fingerprint(const RunConfig& cfg) {
  ojson j = to_json(cfg);
  j["population"].erase("iterations");
  j.erase("render_every");
  return j.dump();
}

inline std::string encode_checkpoint(const RunState& s, const RunConfig& cfg) {
  const Grid grid(cfg.geometry);
  binio::Writer w;
  w.bytes(kRunMagic, sizeof kRunMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.nx()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.ny()));
  w.put<std::uint64_t>(grid.design_size());
  w.str(config_fingerprint(cfg));

  w.put<std::int32_t>(s.iteration);
  w.put<std::uint64_t>(s.next_id);
  std::ostringstream rs;
  rs << s.rng;
  w.str(rs.str());

  w.put<std::uint64_t>(s.metrics.size());
  for (const auto& m : s.metrics) {
    w.put<std::int32_t>(m.iteration);
    w.put<std::uint64_t>(m.elite_count);
    w.put<double>(m.hypervolume);
    w.put<double>(m.best_j1);
    w.put<double>(m.best_j2);
  }
  w.put<std::uint64_t>(s.archive.size());
  for (const Candidate& c : s.archive) {
    detail::require(c.field.size() == grid.design_size(), "archive field size does not match grid");
    w.put<std::uint64_t>(c.id);
    w.put<std::int32_t>(c.iteration);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(c.origin));
    w.put<double>(c.eval.j1_db);
    w.put<double>(c.eval.j2_db);
    w.put<double>(c.eval.g_db);
    w.put<std::uint8_t>(c.eval.feasible ? 1 : 0);
    w.bytes(c.field.values().data(), c.field.size() * sizeof(double));
  }
  w.put<std::uint8_t>(s.vae ? 1 : 0);
  if (s.vae) write_vae(w, *s.vae);
  w.put<std::uint32_t>(binio::crc32(w.data()));
  return std::move(w.data());
}

inline RunState decode_checkpoint(std::string_view data, const RunConfig& cfg, const std::string& what) {
  const Grid grid(cfg.geometry);
  if (data.size() < sizeof kRunMagic + 4 || !std::equal(kRunMagic, kRunMagic + 8, data.begin()))
    throw FormatError(what + ": not a run checkpoint");
  {
    binio::Reader tail(data.substr(data.size() - 4), what);
    if (tail.get<std::uint32_t>() != binio::crc32(data.substr(0, data.size() - 4)))
      throw FormatError(what + ": checksum mismatch (corrupted or truncated)");
  }
  binio::Reader r(data.substr(sizeof kRunMagic, data.size() - sizeof kRunMagic - 4), what);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(what + ": checkpoint version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
  const auto nx = r.get<std::uint32_t>(), ny = r.get<std::uint32_t>();
  const auto d = r.get<std::uint64_t>();
  if (nx != static_cast<std::uint32_t>(grid.nx()) || ny != static_cast<std::uint32_t>(grid.ny()) ||
      d != grid.design_size())
    throw FormatError(what + ": checkpoint grid " + std::to_string(nx) + "x" + std::to_string(ny) + " (" +
                      std::to_string(d) + " design nodes) does not match config grid " +
                      std::to_string(grid.nx()) + "x" + std::to_string(grid.ny()) + " (" +
                      std::to_string(grid.design_size()) + ")");
  if (r.str() != config_fingerprint(cfg))
    throw FormatError(what + ": checkpoint was written with a different configuration");

  RunState s;
  s.iteration = r.get<std::int32_t>();
  s.next_id = r.get<std::uint64_t>();
  {
    std::istringstream rs(r.str());
    rs >> s.rng;
    if (!rs) throw FormatError(what + ": bad random state");
  }
  const auto nm = r.get<std::uint64_t>();
  if (nm > r.remaining()) throw FormatError(what + ": truncated");
  for (std::uint64_t i = 0; i < nm; ++i) {
    IterationMetrics m;
    m.iteration = r.get<std::int32_t>();
    m.elite_count = r.get<std::uint64_t>();
    m.hypervolume = r.get<double>();
    m.best_j1 = r.get<double>();
    m.best_j2 = r.get<double>();
    s.metrics.push_back(m);
  }
  const auto na = r.get<std::uint64_t>();
  if (na > r.remaining()) throw FormatError(what + ": truncated");
  for (std::uint64_t i = 0; i < na; ++i) {
    Candidate c;
    c.id = r.get<std::uint64_t>();
    c.iteration = r.get<std::int32_t>();
    const auto o = r.get<std::uint8_t>();
    if (o > 1) throw FormatError(what + ": bad candidate origin");
    c.origin = static_cast<Origin>(o);
    c.eval.j1_db = r.get<double>();
    c.eval.j2_db = r.get<double>();
    c.eval.g_db = r.get<double>();
    c.eval.feasible = r.get<std::uint8_t>() != 0;
    std::vector<double> v(grid.design_size());
    r.bytes(v.data(), v.size() * sizeof(double));
    try {
      c.field = DensityField(std::move(v));
    } catch (const InvalidArgument&) {
      throw FormatError(what + ": density outside [0, 1]");
    }
    s.archive.push_back(std::move(c));
  }
  if (r.get<std::uint8_t>() != 0) {
    s.vae = read_vae(r);
    if (s.vae->input_dim() != static_cast<int>(grid.design_size()))
      throw FormatError(what + ": VAE input size does not match grid");
  }
  r.expect_end();
  return s;
}

inline void save_checkpoint(const std::filesystem::path& path, const RunState& s, const RunConfig& cfg) {
  binio::write_file_atomic(path, encode_checkpoint(s, cfg));
}

inline RunState load_checkpoint(const std::filesystem::path& path, const RunConfig& cfg) {
  const std::string data = binio::read_file(path);
  return decode_checkpoint(data, cfg, path.string());
}

// ---- run directory ----

inline std::string pareto_csv(const std::vector<Candidate>& archive) {
  std::string s = "id,iteration,J1_db,J2_db,G_db,provenance\n";
  for (const Candidate& c : archive) {
    s += std::to_string(c.id) + "," + std::to_string(c.iteration) + "," + fmt_g6(c.eval.j1_db) + "," +
         fmt_g6(c.eval.j2_db) + "," + fmt_g6(c.eval.g_db) + "," + std::string(origin_name(c.origin)) + "\n";
  }
  return s;
}

inline std::string metrics_csv(const std::vector<IterationMetrics>& ms) {
  std::string s = "iteration,elite_count,hypervolume,best_J1_db,best_J2_db\n";
  for (const auto& m : ms) {
    s += std::to_string(m.iteration) + "," + std::to_string(m.elite_count) + "," + fmt("%.9g", m.hypervolume) +
         "," + fmt_g6(m.best_j1) + "," + fmt_g6(m.best_j2) + "\n";
  }
  return s;
}

namespace fs = std::filesystem;

inline fs::path checkpoint_path(const fs::path& dir, int k) {
  return dir / "checkpoints" / ("iter_" + std::to_string(k) + ".bin");
}

// Highest k with checkpoints/iter_<k>.bin, or -1.
inline int latest_checkpoint(const fs::path& dir) {
  int best = -1;
  const fs::path cp = dir / "checkpoints";
  if (!fs::is_directory(cp)) return best;
  for (const auto& e : fs::directory_iterator(cp)) {
    const std::string name = e.path().filename().string();
    if (name.size() < 10 || name.rfind("iter_", 0) != 0 || e.path().extension() != ".bin") continue;
    const std::string num = name.substr(5, name.size() - 9);
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) continue;
    best = std::max(best, std::stoi(num));
  }
  return best;
}

inline bool should_render(const RunConfig& cfg, int k) {
  if (k == 0 || k == cfg.iterations) return true;
  return cfg.render_every > 0 && k % cfg.render_every == 0;
}

inline void write_iteration_outputs(const fs::path& dir, const RunState& s, const RunConfig& cfg) {
  const int k = s.iteration;
  binio::write_file_atomic(dir / "pareto" / ("iter_" + std::to_string(k) + ".csv"), pareto_csv(s.archive));
  binio::write_file_atomic(dir / "metrics.csv", metrics_csv(s.metrics));
  if (should_render(cfg, k)) {
    const Grid grid(cfg.geometry);
    const fs::path ld = dir / "layouts" / ("iter_" + std::to_string(k));
    fs::create_directories(ld);
    for (const Candidate& c : s.archive) {
      const std::string stem = std::to_string(c.id);
      binio::write_file_atomic(ld / (stem + ".svg"), to_svg(ResolvedLayout::resolve(grid, c.field)));
      save_layout(ld / (stem + ".json"), cfg.geometry, c.field);
    }
  }
  save_checkpoint(checkpoint_path(dir, k), s, cfg);
}

struct RunOptions {
  bool resume = false;
  bool force = false;  // discard an existing run in the directory
  int threads = 1;
  LogFn log;
};

inline RunState run(const RunConfig& cfg, const fs::path& dir, const RunOptions& opt) {
  cfg.validate();
  RunState s;
  const int last = latest_checkpoint(dir);
  if (opt.resume && last >= 0) {
    s = load_checkpoint(checkpoint_path(dir, last), cfg);
    if (opt.log) opt.log("resuming from iteration " + std::to_string(s.iteration));
  } else {
    if (last >= 0 || fs::exists(dir / "metrics.csv")) {
      if (!opt.force && !opt.resume)
        throw Error(dir.string() + " already holds a run; pass --resume to continue or --force to restart");
      for (const char* sub : {"checkpoints", "pareto", "layouts"}) fs::remove_all(dir / sub);
      fs::remove(dir / "metrics.csv");
    }
    fs::create_directories(dir);
    binio::write_file_atomic(dir / "config.json", config_text(cfg));
    s = initial_state(cfg, opt.threads, opt.log);
    write_iteration_outputs(dir, s, cfg);
  }
  binio::write_file_atomic(dir / "config.json", config_text(cfg));
  while (s.iteration < cfg.iterations) {
    iterate(s, cfg, opt.threads, opt.log);
    write_iteration_outputs(dir, s, cfg);
  }
  return s;
}

// In-memory run without files.
inline RunState run_in_memory(const RunConfig& cfg, int threads, const LogFn& log = {}) {
  RunState s = initial_state(cfg, threads, log);
  while (s.iteration < cfg.iterations) iterate(s, cfg, threads, log);
  return s;
}

}  // namespace ddtd
