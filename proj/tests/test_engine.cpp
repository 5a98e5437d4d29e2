#include "catch_amalgamated.hpp"

#include <filesystem>

#include "ddtd/ddtd.hpp"

using namespace ddtd;
namespace fs = std::filesystem;

namespace {

RunConfig quick(int iterations = 3) {
  RunConfig c = preset_config("smoke");
  c.train.epochs = 15;
  c.iterations = iterations;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ddtd_engine_" + name);
  fs::remove_all(d);
  return d;
}

void check_archive(const RunState& s, const RunConfig& cfg) {
  REQUIRE_FALSE(s.archive.empty());
  REQUIRE(s.archive.size() <= static_cast<std::size_t>(cfg.elite_cap));
  for (const auto& c : s.archive) {
    REQUIRE(c.eval.g_db >= cfg.targets.g_bar);
    REQUIRE(c.eval.feasible);
  }
  const auto ranks = nondominated_sort(objectives_of(s.archive));
  for (int r : ranks) REQUIRE(r == 1);
}

}  // namespace

TEST_CASE("seed population sizes") {
  for (const char* name : {"example1", "example2"}) {
    RunConfig c = preset_config(name);
    const Grid g(c.geometry);
    Rng rng(c.rng_seed);
    std::uint64_t next = 0;
    const auto pop = seed_population(c, g, rng, next, 1);
    CHECK(pop.size() == static_cast<std::size_t>(c.n_initial));
    CHECK(next == pop.size());
    if (c.n_initial == 100) {
      Rng again(c.rng_seed);
      std::uint64_t n2 = 0;
      CHECK(seed_population(c, g, again, n2, 1) == pop);
    }
  }
}

TEST_CASE("invalid run configs") {
  RunConfig c = quick();
  c.iterations = 0;
  CHECK_THROWS_AS(run_in_memory(c, 1), ConfigError);
  c = quick();
  c.targets.g_bar = 10.0;  // nothing can pass
  CHECK_THROWS_AS(run_in_memory(c, 1), Error);
}

TEST_CASE("in-memory run keeps its invariants") {
  const RunConfig cfg = quick();
  RunState s = initial_state(cfg, 1);
  check_archive(s, cfg);
  for (int k = 1; k <= cfg.iterations; ++k) {
    const double before = s.metrics.back().hypervolume;
    iterate(s, cfg, 1);
    REQUIRE(s.iteration == k);
    REQUIRE(s.metrics.size() == static_cast<std::size_t>(k + 1));
    REQUIRE(s.metrics.back().hypervolume >= before);
    REQUIRE(s.vae.has_value());
    check_archive(s, cfg);
  }
  CHECK(run_in_memory(cfg, 1) == s);
  CHECK(run_in_memory(cfg, 3) == s);
}

TEST_CASE("checkpoint round trip and corruption") {
  const RunConfig cfg = quick(1);
  const RunState s = run_in_memory(cfg, 1);
  const std::string blob = encode_checkpoint(s, cfg);
  CHECK(decode_checkpoint(blob, cfg, "mem") == s);

  // continuing from the decoded state matches continuing from the original
  RunState a = s, b = decode_checkpoint(blob, cfg, "mem");
  RunConfig longer = cfg;
  longer.iterations = 2;
  iterate(a, longer, 1);
  iterate(b, longer, 1);
  CHECK(a == b);
  CHECK(decode_checkpoint(blob, longer, "mem") == s);

  CHECK_THROWS_AS(decode_checkpoint(blob.substr(0, blob.size() / 2), cfg, "mem"), FormatError);
  std::string flipped = blob;
  flipped[blob.size() / 3] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped, cfg, "mem"), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("garbage", cfg, "mem"), FormatError);

  RunConfig other = cfg;
  other.geometry = default_geometry(16, 10, 9e-3);
  other.seed_bounds = default_seed_bounds(Grid(other.geometry));
  CHECK_THROWS_AS(decode_checkpoint(blob, other, "mem"), FormatError);

  RunConfig changed = cfg;
  changed.train.beta = 0.25;
  CHECK_THROWS_AS(decode_checkpoint(blob, changed, "mem"), FormatError);

  // version field follows the magic; re-seal so only the version is wrong
  std::string old = blob.substr(0, blob.size() - 4);
  old[8] = 9;
  binio::Writer w;
  w.put<std::uint32_t>(binio::crc32(old));
  CHECK_THROWS_AS(decode_checkpoint(old + w.data(), cfg, "mem"), FormatError);
}

TEST_CASE("run directory layout and resume") {
  const RunConfig cfg = quick(3);
  const fs::path full = fresh_dir("full");
  RunOptions opt;
  const RunState s = run(cfg, full, opt);
  CHECK(fs::exists(full / "config.json"));
  CHECK(fs::exists(full / "metrics.csv"));
  for (int k = 0; k <= 3; ++k) {
    CHECK(fs::exists(checkpoint_path(full, k)));
    CHECK(fs::exists(full / "pareto" / ("iter_" + std::to_string(k) + ".csv")));
  }
  CHECK(fs::is_directory(full / "layouts" / "iter_0"));
  CHECK(fs::is_directory(full / "layouts" / "iter_3"));
  CHECK_FALSE(fs::exists(full / "layouts" / "iter_1"));
  CHECK(fs::exists(full / "layouts" / "iter_3" / (std::to_string(s.archive.front().id) + ".svg")));
  CHECK(latest_checkpoint(full) == 3);

  const std::string metrics = binio::read_file(full / "metrics.csv");
  CHECK(metrics == metrics_csv(s.metrics));
  CHECK(metrics.rfind("iteration,elite_count,hypervolume,best_J1_db,best_J2_db\n", 0) == 0);
  const std::string pareto = binio::read_file(full / "pareto" / "iter_3.csv");
  CHECK(std::count(pareto.begin(), pareto.end(), '\n') == static_cast<long>(s.archive.size() + 1));

  CHECK_THROWS_AS(run(cfg, full, opt), Error);

  // stop after one iteration, then resume to the full budget
  const fs::path part = fresh_dir("part");
  RunConfig first = cfg;
  first.iterations = 1;
  run(first, part, opt);
  RunOptions res;
  res.resume = true;
  const RunState resumed = run(cfg, part, res);
  CHECK(resumed == s);
  CHECK(binio::read_file(part / "metrics.csv") == metrics);
  CHECK(binio::read_file(part / "pareto" / "iter_3.csv") == pareto);

  // --force restarts cleanly and reproduces the same files
  RunOptions force;
  force.force = true;
  run(cfg, part, force);
  CHECK(binio::read_file(part / "metrics.csv") == metrics);

  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("metrics are measured against the reference point") {
  std::vector<Candidate> arch(2);
  arch[0].eval = {-10, -2, -20, true};
  arch[1].eval = {-2, -10, -20, true};
  const IterationMetrics m = measure(arch, 4, {0, 0});
  CHECK(m.iteration == 4);
  CHECK(m.elite_count == 2);
  CHECK(m.hypervolume == 10 * 2 + 2 * 8);
  CHECK(m.best_j1 == -10);
  CHECK(m.best_j2 == -10);
  // a point outside the box contributes nothing and does not throw
  arch[1].eval = {5, -10, -20, true};
  CHECK(measure(arch, 0, {0, 0}).hypervolume == 20);
}
