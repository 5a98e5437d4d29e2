#include "catch_amalgamated.hpp"

#include <filesystem>

#include "ddtd/ddtd.hpp"

using namespace ddtd;

namespace {
ojson base_json() { return to_json(preset_config("example1")); }
}  // namespace

TEST_CASE("example-1 defaults") {
  const RunConfig c = preset_config("example1");
  CHECK(c.targets.f1 == 100e3);
  CHECK(c.targets.f2 == 10e6);
  CHECK(c.targets.f3 == 1e3);
  CHECK(c.targets.g_bar == -35.0);
  CHECK(c.components.c1 == 100e-6);
  CHECK(c.components.c2 == 100e-6);
  CHECK(c.components.l1 == 10e-6);
  CHECK(c.n_initial == 100);
  CHECK(c.n_generate == 400);
  CHECK(c.elite_cap == 400);
  CHECK(c.iterations == 70);
  CHECK(c.train.epochs == 400);
  CHECK(c.train.batch_size == 20);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.train.beta == 0.5);
  CHECK(c.train.reduction == RcnReduction::Mean);
  CHECK(c.latent_range == 4.0);
  CHECK(c.geometry.nx == 48);
  CHECK(c.geometry.ny == 32);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("example-2 preset") {
  const RunConfig c = preset_config("example2");
  CHECK(c.targets.g_bar == -40.0);
  CHECK(c.components.c1 == 500e-6);
  CHECK(c.components.c2 == 100e-9);
  CHECK(c.components.l1 == 100e-6);
  CHECK(c.n_initial == 400);
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(preset_config("example3"), ConfigError);
}

TEST_CASE("config text round trips") {
  for (const char* name : {"example1", "example2", "smoke"}) {
    RunConfig c = preset_config(name);
    c.rng_seed = 987654321987ULL;
    c.components.esl_c1 = 3.3e-9;
    c.train.reduction = RcnReduction::SumComponents;
    const std::string text = config_text(c);
    const RunConfig back = config_from_json(ojson::parse(text));
    CHECK(config_text(back) == text);
    CHECK(back.rng_seed == c.rng_seed);
    CHECK(back.train.reduction == RcnReduction::SumComponents);
    CHECK(back.geometry == c.geometry);
  }
}

TEST_CASE("every fixed decision is surfaced") {
  const ojson j = base_json();
  for (const auto& fc : kFixedChoices) CHECK(j["decisions"][fc.key] == fc.value);
  CHECK(j["vae"]["reconstruction_reduction"] == kRcnMean);
}

TEST_CASE("partial configs start from the preset") {
  const RunConfig c = config_from_json(ojson::parse(R"({"preset": "smoke", "population": {"iterations": 5}})"));
  CHECK(c.iterations == 5);
  CHECK(c.geometry.nx == 12);
  CHECK(c.n_initial == 10);
}

TEST_CASE("bad configs are rejected") {
  auto rejects = [](const ojson& j) {
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  };
  ojson j = base_json();
  j["population"]["typo"] = 1;
  rejects(j);
  j = base_json();
  j["extra"] = true;
  rejects(j);
  j = base_json();
  j["decisions"]["optimizer"] = "sgd";
  rejects(j);
  j = base_json();
  j["decisions"]["new_decision"] = "x";
  rejects(j);
  j = base_json();
  j["population"]["iterations"] = 0;
  rejects(j);
  j = base_json();
  j["targets"]["f3_hz"] = 1e6;
  rejects(j);
  j = base_json();
  j["vae"]["reconstruction_reduction"] = "median";
  rejects(j);
  j = base_json();
  j["version"] = 99;
  rejects(j);
  j = base_json();
  j["population"]["n_initial"] = "many";
  rejects(j);
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "ddtd_config_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.json";
  binio::write_file_atomic(path, config_text(preset_config("smoke")));
  CHECK(config_text(load_config(path)) == config_text(preset_config("smoke")));
  binio::write_file_atomic(path, "{ not json");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("layout files") {
  const Grid g(default_geometry(12, 8, 12e-3));
  const DensityField f = reference_layout(g);
  const std::string text = layout_text(g.geometry(), f);
  const LayoutFile back = parse_layout(text, "mem");
  CHECK(back.geometry == g.geometry());
  CHECK(layout_text(back.geometry, back.field) == text);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(back.field[i] - f[i]) <= 5e-7);

  CHECK_THROWS_AS(parse_layout("[]", "mem"), FormatError);
  ojson j = ojson::parse(text);
  j["density"].erase(0);
  CHECK_THROWS_AS(parse_layout(j.dump(), "mem"), FormatError);
  j = ojson::parse(text);
  j["density"][0] = 2.0;
  CHECK_THROWS_AS(parse_layout(j.dump(), "mem"), FormatError);
}
