#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddtd/binary_io.hpp"
#include "ddtd/config.hpp"
#include "ddtd/error.hpp"
#include "ddtd/field.hpp"

namespace ddtd {

// {"grid": <geometry>, "density": [...]} with densities at 6 decimals.
inline std::string layout_text(const GridGeometry& geom, const DensityField& field) {
  std::string s = "{\n  \"grid\": " + geometry_json(geom).dump() + ",\n  \"density\": [";
  char buf[32];
  for (std::size_t i = 0; i < field.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6f", i == 0 ? "" : ",", field[i]);
    s += buf;
  }
  s += "]\n}\n";
  return s;
}

inline void save_layout(const std::filesystem::path& path, const GridGeometry& geom,
                        const DensityField& field) {
  binio::write_file_atomic(path, layout_text(geom, field));
}

struct LayoutFile {
  GridGeometry geometry;
  DensityField field;
};

inline LayoutFile parse_layout(const std::string& text, const std::string& what) {
  try {
    const ojson j = ojson::parse(text);
    if (!j.is_object() || !j.contains("grid") || !j.contains("density"))
      throw FormatError(what + ": layout needs grid and density");
    LayoutFile out;
    out.geometry = geometry_from(j["grid"]);
    const Grid grid(out.geometry);
    auto values = j["density"].get<std::vector<double>>();
    if (values.size() != grid.design_size())
      throw FormatError(what + ": density has " + std::to_string(values.size()) + " entries, grid has " +
                        std::to_string(grid.design_size()) + " design nodes");
    out.field = DensityField(std::move(values));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline LayoutFile load_layout(const std::filesystem::path& path) {
  return parse_layout(binio::read_file(path), path.string());
}

}  // namespace ddtd
