#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "ddtd/error.hpp"
#include "ddtd/field.hpp"

namespace ddtd {

inline constexpr const char* kCopperColor = "#1a1a1a";
inline constexpr const char* kFixedColor = "#6b6b6b";
inline constexpr const char* kPadColor = "#c8102e";

// One square per node with density >= 0.5, centred on the node, y up.
// Units are millimeters.
inline std::string to_svg(const ResolvedLayout& layout) {
  const Grid& g = *layout.grid;
  const double p = g.pitch() * 1e3;
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.6g %.6g\" "
                "width=\"%.6gmm\" height=\"%.6gmm\">\n",
                g.nx() * p, g.ny() * p, g.nx() * p, g.ny() * p);
  s += buf;
  for (int k = 0; k < g.node_count(); ++k) {
    if (!layout.conductive(k)) continue;
    const char* fill = g.pad_of(k) >= 0                      ? kPadColor
                       : g.kind(k) == NodeKind::Conductor ? kFixedColor
                                                            : kCopperColor;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.6g\" y=\"%.6g\" width=\"%.6g\" height=\"%.6g\" fill=\"%s\"/>\n",
                  g.col(k) * p, (g.ny() - 1 - g.row(k)) * p, p, p, fill);
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

inline void render_svg(const ResolvedLayout& layout, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << to_svg(layout);
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace ddtd
