#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ddtd/binary_io.hpp"
#include "ddtd/circuit.hpp"
#include "ddtd/error.hpp"
#include "ddtd/field.hpp"
#include "ddtd/grid.hpp"
#include "ddtd/moo.hpp"
#include "ddtd/vae.hpp"

namespace ddtd {

using ojson = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

// Modelling choices with a single supported value. They are written to every
// config so a run directory states them, and rejected if edited.
struct FixedChoice {
  const char* key;
  const char* value;
};
inline constexpr FixedChoice kFixedChoices[] = {
    {"density_interpolation", "bilinear_grid"},
    {"conductor_rule", "both_edge_ends_at_least_0.5"},
    {"pad_nodes", "merged_per_pad"},
    {"normalization", "signed_distance_band"},
    {"normalize_generated_before_evaluation", "yes"},
    {"optimizer", "adam"},
    {"kl_reduction", "batch_mean_of_latent_sum"},
    {"vae_init", "xavier_uniform_zero_bias"},
    {"vae_warm_start", "no"},
    {"latent_sampling", "uniform_independent"},
    {"augmentation", "cyclic_replication"},
    {"validation_split", "none"},
    {"elite_truncation", "crowding_distance"},
    {"dominance_ties", "identical_points_share_rank"},
    {"infeasible_generated", "discard"},
    {"convergence", "fixed_iteration_budget"},
};

struct RunConfig {
  std::string preset = "example1";
  GridGeometry geometry = default_geometry(48, 32, 3e-3);
  Targets targets;
  PhysicsParams physics;
  Components components;
  TrainConfig train;
  SeedBounds seed_bounds = default_seed_bounds(Grid(default_geometry(48, 32, 3e-3)));
  double normalize_transition = 4.5e-3;  // meters
  int bezier_min_samples = 64;
  double latent_range = 4.0;
  int n_initial = 100;
  int n_generate = 400;
  int elite_cap = 400;
  int iterations = 70;
  std::uint64_t rng_seed = 1;
  Objective2 hv_reference{0.0, 0.0};
  int render_every = 0;  // 0 renders only iteration 0 and the last one

  void validate() const {
    const Grid grid(geometry);
    targets.validate();
    physics.validate();
    components.validate();
    train.validate();
    auto cfg_require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    cfg_require(n_initial >= 1 && n_generate >= 1 && elite_cap >= 1, "counts must be at least 1");
    cfg_require(iterations >= 1, "iterations must be at least 1");
    cfg_require(train.training_set_size >= elite_cap,
                "vae.training_set_size must be at least the elite cap");
    cfg_require(normalize_transition > 0.0, "normalize_transition_m must be positive");
    cfg_require(bezier_min_samples >= 2, "bezier_min_samples must be at least 2");
    cfg_require(latent_range > 0.0, "latent_range must be positive");
    cfg_require(render_every >= 0, "render_every must be non-negative");
    cfg_require(seed_bounds.transition > 0.0, "seed transition must be positive");
  }
};

// example1: the desk-scale default. example2: quarter-area board, same node
// counts. smoke: 12x8 nodes, a couple of iterations.
inline RunConfig preset_config(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  auto regrid = [&](int nx, int ny, double pitch) {
    c.geometry = default_geometry(nx, ny, pitch);
    c.seed_bounds = default_seed_bounds(Grid(c.geometry));
    c.normalize_transition = 1.5 * pitch;
  };
  if (name == "example1") {
    regrid(48, 32, 3e-3);
  } else if (name == "example2") {
    regrid(48, 32, 1.5e-3);
    c.targets.g_bar = -40.0;
    c.components.c1 = 500e-6;
    c.components.c2 = 100e-9;
    c.components.l1 = 100e-6;
    c.n_initial = 400;
  } else if (name == "smoke") {
    regrid(12, 8, 12e-3);
    c.n_initial = 10;
    c.n_generate = 20;
    c.iterations = 2;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (example1, example2, smoke)");
  }
  return c;
}

namespace detail {

inline ojson rect_json(const NodeRect& r) { return ojson::array({r.x0, r.y0, r.x1, r.y1}); }

inline NodeRect rect_from(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(what + " must be [x0, y0, x1, y1]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline ojson interval_json(Interval iv) { return ojson::array({iv.lo, iv.hi}); }

inline Interval interval_from(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(what + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline ojson box_json(const Box& b) { return {{"x", interval_json(b.x)}, {"y", interval_json(b.y)}}; }

inline Box box_from(const ojson& j, const std::string& what) {
  if (!j.is_object() || !j.contains("x") || !j.contains("y"))
    throw ConfigError(what + " needs x and y ranges");
  return {interval_from(j["x"], what + ".x"), interval_from(j["y"], what + ".y")};
}

// Rejects keys outside `known` so typos do not silently fall back to defaults.
inline void check_keys(const ojson& j, std::initializer_list<std::string_view> known,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read_opt(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace detail

inline ojson geometry_json(const GridGeometry& g) {
  ojson pads = ojson::object();
  for (Pad p : kAllPads) pads[std::string(pad_name(p))] = detail::rect_json(g.pads[static_cast<std::size_t>(p)]);
  ojson extra = ojson::array(), voids = ojson::array();
  for (const auto& r : g.extra_conductor) extra.push_back(detail::rect_json(r));
  for (const auto& r : g.fixed_void) voids.push_back(detail::rect_json(r));
  return {{"nx", g.nx}, {"ny", g.ny}, {"pitch_m", g.pitch}, {"pads", pads},
          {"extra_conductor", extra}, {"fixed_void", voids}};
}

// Without "pads" the default footprint for nx, ny is used; with it, all six
// pads must be listed and regions default to none.
inline GridGeometry geometry_from(const ojson& j) {
  detail::check_keys(j, {"nx", "ny", "pitch_m", "pads", "extra_conductor", "fixed_void"}, "grid");
  if (!j.contains("nx") || !j.contains("ny") || !j.contains("pitch_m"))
    throw ConfigError("grid needs nx, ny and pitch_m");
  const int nx = j["nx"].get<int>(), ny = j["ny"].get<int>();
  const double pitch = j["pitch_m"].get<double>();
  GridGeometry g;
  if (!j.contains("pads")) {
    try {
      g = default_geometry(nx, ny, pitch);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  } else {
    g.nx = nx;
    g.ny = ny;
    g.pitch = pitch;
    const ojson& pj = j["pads"];
    detail::check_keys(pj, {"port1", "port2", "c1", "c2", "l1_left", "l1_right"}, "grid.pads");
    for (Pad p : kAllPads) {
      const std::string name(pad_name(p));
      if (!pj.contains(name)) throw ConfigError("grid.pads." + name + " is missing");
      g.pads[static_cast<std::size_t>(p)] = detail::rect_from(pj[name], "grid.pads." + name);
    }
  }
  auto rects = [&](const char* key, std::vector<NodeRect>& out) {
    if (!j.contains(key)) return;
    out.clear();
    for (const auto& r : j[key]) out.push_back(detail::rect_from(r, std::string("grid.") + key));
  };
  rects("extra_conductor", g.extra_conductor);
  rects("fixed_void", g.fixed_void);
  return g;
}

inline ojson seed_bounds_json(const SeedBounds& b) {
  ojson controls = ojson::array();
  for (const Box& c : b.control) controls.push_back(detail::box_json(c));
  return {{"point_a", detail::box_json(b.point_a)},
          {"point_b", detail::box_json(b.point_b)},
          {"control", controls},
          {"halfwidth_m", detail::interval_json(b.halfwidth)},
          {"transition_m", b.transition}};
}

inline SeedBounds seed_bounds_from(const ojson& j, SeedBounds b) {
  detail::check_keys(j, {"point_a", "point_b", "control", "halfwidth_m", "transition_m"}, "seeding.bounds");
  if (j.contains("point_a")) b.point_a = detail::box_from(j["point_a"], "point_a");
  if (j.contains("point_b")) b.point_b = detail::box_from(j["point_b"], "point_b");
  if (j.contains("control")) {
    if (!j["control"].is_array() || j["control"].size() != 6)
      throw ConfigError("seeding.bounds.control needs 6 boxes");
    for (std::size_t i = 0; i < 6; ++i) b.control[i] = detail::box_from(j["control"][i], "control");
  }
  if (j.contains("halfwidth_m")) b.halfwidth = detail::interval_from(j["halfwidth_m"], "halfwidth_m");
  detail::read_opt(j, "transition_m", b.transition);
  return b;
}

inline constexpr const char* kRcnMean = "mean_over_batch_and_components";
inline constexpr const char* kRcnSum = "sum_over_components_mean_over_batch";

inline const char* reduction_name(RcnReduction r) { return r == RcnReduction::Mean ? kRcnMean : kRcnSum; }

inline RcnReduction reduction_from(const std::string& s) {
  if (s == kRcnMean) return RcnReduction::Mean;
  if (s == kRcnSum) return RcnReduction::SumComponents;
  throw ConfigError("vae.reconstruction_reduction must be \"" + std::string(kRcnMean) + "\" or \"" + kRcnSum + "\"");
}

inline ojson to_json(const RunConfig& c) {
  ojson decisions = ojson::object();
  for (const auto& fc : kFixedChoices) decisions[fc.key] = fc.value;
  const PhysicsParams& p = c.physics;
  const Components& m = c.components;
  const TrainConfig& t = c.train;
  return {
      {"version", kConfigVersion},
      {"preset", c.preset},
      {"grid", geometry_json(c.geometry)},
      {"targets",
       {{"f1_hz", c.targets.f1}, {"f2_hz", c.targets.f2}, {"f3_hz", c.targets.f3}, {"g_bar_db", c.targets.g_bar}}},
      {"physics",
       {{"sheet_resistance_ohm_sq", p.sheet_resistance},
        {"sheet_inductance_h_sq", p.sheet_inductance},
        {"permittivity_rel", p.permittivity_rel},
        {"board_thickness_m", p.board_thickness},
        {"z0_ohm", p.z0},
        {"leak_conductance_s", p.leak_conductance},
        {"db_floor", p.db_floor}}},
      {"components",
       {{"c1_f", m.c1}, {"c2_f", m.c2}, {"l1_h", m.l1}, {"esl_c1_h", m.esl_c1}, {"esl_c2_h", m.esl_c2},
        {"esr_c1_ohm", m.esr_c1}, {"esr_c2_ohm", m.esr_c2}}},
      {"population",
       {{"n_initial", c.n_initial}, {"n_generate", c.n_generate}, {"elite_cap", c.elite_cap},
        {"iterations", c.iterations}, {"rng_seed", c.rng_seed}}},
      {"seeding",
       {{"bounds", seed_bounds_json(c.seed_bounds)}, {"bezier_min_samples", c.bezier_min_samples}}},
      {"normalize_transition_m", c.normalize_transition},
      {"vae",
       {{"epochs", t.epochs}, {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
        {"beta", t.beta}, {"training_set_size", t.training_set_size}, {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2}, {"adam_eps", t.adam_eps}, {"latent_range", c.latent_range},
        {"reconstruction_reduction", reduction_name(t.reduction)}}},
      {"hv_reference_db", ojson::array({c.hv_reference.j1, c.hv_reference.j2})},
      {"render_every", c.render_every},
      {"decisions", decisions},
  };
}

// Starts from the named preset (default example1) and applies the keys that
// are present. Grid-dependent defaults follow the parsed grid.
inline RunConfig config_from_json(const ojson& j) {
  try {
    detail::check_keys(j, {"version", "preset", "grid", "targets", "physics", "components", "population",
                           "seeding", "normalize_transition_m", "vae", "hv_reference_db",
                           "render_every", "decisions"},
                       "config");
    if (j.contains("version") && j["version"].get<int>() != kConfigVersion)
      throw ConfigError("unsupported config version " + j["version"].dump());
    RunConfig c = preset_config(j.value("preset", std::string("example1")));
    if (j.contains("grid")) {
      c.geometry = geometry_from(j["grid"]);
      c.seed_bounds = default_seed_bounds(Grid(c.geometry));
      c.normalize_transition = 1.5 * c.geometry.pitch;
    }
    if (j.contains("targets")) {
      const ojson& s = j["targets"];
      detail::check_keys(s, {"f1_hz", "f2_hz", "f3_hz", "g_bar_db"}, "targets");
      detail::read_opt(s, "f1_hz", c.targets.f1);
      detail::read_opt(s, "f2_hz", c.targets.f2);
      detail::read_opt(s, "f3_hz", c.targets.f3);
      detail::read_opt(s, "g_bar_db", c.targets.g_bar);
    }
    if (j.contains("physics")) {
      const ojson& s = j["physics"];
      detail::check_keys(s, {"sheet_resistance_ohm_sq", "sheet_inductance_h_sq", "permittivity_rel",
                             "board_thickness_m", "z0_ohm", "leak_conductance_s", "db_floor"},
                         "physics");
      detail::read_opt(s, "sheet_resistance_ohm_sq", c.physics.sheet_resistance);
      detail::read_opt(s, "sheet_inductance_h_sq", c.physics.sheet_inductance);
      detail::read_opt(s, "permittivity_rel", c.physics.permittivity_rel);
      detail::read_opt(s, "board_thickness_m", c.physics.board_thickness);
      detail::read_opt(s, "z0_ohm", c.physics.z0);
      detail::read_opt(s, "leak_conductance_s", c.physics.leak_conductance);
      detail::read_opt(s, "db_floor", c.physics.db_floor);
    }
    if (j.contains("components")) {
      const ojson& s = j["components"];
      detail::check_keys(s, {"c1_f", "c2_f", "l1_h", "esl_c1_h", "esl_c2_h", "esr_c1_ohm", "esr_c2_ohm"},
                         "components");
      detail::read_opt(s, "c1_f", c.components.c1);
      detail::read_opt(s, "c2_f", c.components.c2);
      detail::read_opt(s, "l1_h", c.components.l1);
      detail::read_opt(s, "esl_c1_h", c.components.esl_c1);
      detail::read_opt(s, "esl_c2_h", c.components.esl_c2);
      detail::read_opt(s, "esr_c1_ohm", c.components.esr_c1);
      detail::read_opt(s, "esr_c2_ohm", c.components.esr_c2);
    }
    if (j.contains("population")) {
      const ojson& s = j["population"];
      detail::check_keys(s, {"n_initial", "n_generate", "elite_cap", "iterations", "rng_seed"}, "population");
      detail::read_opt(s, "n_initial", c.n_initial);
      detail::read_opt(s, "n_generate", c.n_generate);
      detail::read_opt(s, "elite_cap", c.elite_cap);
      detail::read_opt(s, "iterations", c.iterations);
      detail::read_opt(s, "rng_seed", c.rng_seed);
    }
    if (j.contains("seeding")) {
      const ojson& s = j["seeding"];
      detail::check_keys(s, {"bounds", "bezier_min_samples"}, "seeding");
      if (s.contains("bounds")) c.seed_bounds = seed_bounds_from(s["bounds"], c.seed_bounds);
      detail::read_opt(s, "bezier_min_samples", c.bezier_min_samples);
    }
    detail::read_opt(j, "normalize_transition_m", c.normalize_transition);
    if (j.contains("vae")) {
      const ojson& s = j["vae"];
      detail::check_keys(s, {"epochs", "learning_rate", "batch_size", "beta", "training_set_size",
                             "adam_beta1", "adam_beta2", "adam_eps", "latent_range", "reconstruction_reduction"},
                         "vae");
      detail::read_opt(s, "epochs", c.train.epochs);
      detail::read_opt(s, "learning_rate", c.train.learning_rate);
      detail::read_opt(s, "batch_size", c.train.batch_size);
      detail::read_opt(s, "beta", c.train.beta);
      detail::read_opt(s, "training_set_size", c.train.training_set_size);
      detail::read_opt(s, "adam_beta1", c.train.adam_beta1);
      detail::read_opt(s, "adam_beta2", c.train.adam_beta2);
      detail::read_opt(s, "adam_eps", c.train.adam_eps);
      detail::read_opt(s, "latent_range", c.latent_range);
      if (s.contains("reconstruction_reduction"))
        c.train.reduction = reduction_from(s["reconstruction_reduction"].get<std::string>());
    }
    if (j.contains("hv_reference_db")) {
      const Interval r = detail::interval_from(j["hv_reference_db"], "hv_reference_db");
      c.hv_reference = {r.lo, r.hi};
    }
    detail::read_opt(j, "render_every", c.render_every);
    if (j.contains("decisions")) {
      const ojson& d = j["decisions"];
      if (!d.is_object()) throw ConfigError("decisions must be an object");
      for (const auto& [k, v] : d.items()) {
        bool found = false;
        for (const auto& fc : kFixedChoices) {
          if (k != fc.key) continue;
          found = true;
          if (!v.is_string() || v.get<std::string>() != fc.value)
            throw ConfigError("decisions." + k + " supports only \"" + fc.value + "\"");
        }
        if (!found) throw ConfigError("unknown key '" + k + "' in decisions");
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline std::string config_text(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = binio::read_file(path);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ddtd
