#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ddtd/error.hpp"

namespace ddtd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2, Point2) = default;
};

// The six named copper pads of the pi filter footprint.
enum class Pad : int { Port1 = 0, Port2, C1, C2, L1Left, L1Right };
inline constexpr std::size_t kPadCount = 6;
inline constexpr std::array<Pad, kPadCount> kAllPads = {Pad::Port1, Pad::Port2, Pad::C1,
                                                        Pad::C2,    Pad::L1Left, Pad::L1Right};

inline std::string_view pad_name(Pad p) {
  switch (p) {
    case Pad::Port1: return "port1";
    case Pad::Port2: return "port2";
    case Pad::C1: return "c1";
    case Pad::C2: return "c2";
    case Pad::L1Left: return "l1_left";
    case Pad::L1Right: return "l1_right";
  }
  return "?";
}

// Inclusive node-index rectangle [x0, x1] x [y0, y1].
struct NodeRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const NodeRect&, const NodeRect&) = default;
};

// Serializable description of the board: grid size, pads and fixed regions.
struct GridGeometry {
  int nx = 0;
  int ny = 0;
  double pitch = 0.0;  // meters between adjacent nodes
  std::array<NodeRect, kPadCount> pads{};
  std::vector<NodeRect> extra_conductor;  // feeder traces etc.
  std::vector<NodeRect> fixed_void;       // component bodies, keep-outs
  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

enum class NodeKind : unsigned char { Design, Conductor, Void };

// Regular nx-by-ny node lattice. Node (i, j) sits at (i * pitch, j * pitch),
// flat index j * nx + i.
class Grid {
 public:
  Grid() = default;

  explicit Grid(const GridGeometry& geom) : geom_(geom) {
    detail::require(geom.nx >= 2 && geom.ny >= 2, "grid needs at least 2x2 nodes");
    detail::require(geom.pitch > 0.0, "grid pitch must be positive");
    const int n = geom.nx * geom.ny;
    kind_.assign(static_cast<std::size_t>(n), NodeKind::Design);

    auto check_rect = [&](const NodeRect& r, std::string_view what) {
      if (r.x0 < 0 || r.y0 < 0 || r.x1 >= geom.nx || r.y1 >= geom.ny || r.x0 > r.x1 ||
          r.y0 > r.y1) {
        throw InvalidArgument(std::string(what) + " rectangle outside the grid or empty");
      }
    };
    auto paint = [&](const NodeRect& r, NodeKind k) {
      for (int j = r.y0; j <= r.y1; ++j)
        for (int i = r.x0; i <= r.x1; ++i) kind_[static_cast<std::size_t>(index(i, j))] = k;
    };

    for (const auto& r : geom.fixed_void) {
      check_rect(r, "void");
      paint(r, NodeKind::Void);
    }
    for (const auto& r : geom.extra_conductor) {
      check_rect(r, "conductor");
      for (int j = r.y0; j <= r.y1; ++j)
        for (int i = r.x0; i <= r.x1; ++i)
          if (kind_[static_cast<std::size_t>(index(i, j))] == NodeKind::Void)
            throw InvalidArgument("fixed conductor overlaps fixed void");
      paint(r, NodeKind::Conductor);
    }

    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    for (Pad p : kAllPads) {
      const NodeRect& r = geom.pads[static_cast<std::size_t>(p)];
      check_rect(r, pad_name(p));
      auto& set = pads_[static_cast<std::size_t>(p)];
      for (int j = r.y0; j <= r.y1; ++j) {
        for (int i = r.x0; i <= r.x1; ++i) {
          const int k = index(i, j);
          if (kind_[static_cast<std::size_t>(k)] == NodeKind::Void)
            throw InvalidArgument("pad " + std::string(pad_name(p)) + " overlaps fixed void");
          if (owner[static_cast<std::size_t>(k)] >= 0)
            throw InvalidArgument("pads " + std::string(pad_name(p)) + " and " +
                                  std::string(pad_name(static_cast<Pad>(owner[k]))) + " overlap");
          owner[static_cast<std::size_t>(k)] = static_cast<int>(p);
          kind_[static_cast<std::size_t>(k)] = NodeKind::Conductor;
          set.push_back(k);
        }
      }
    }
    pad_of_.swap(owner);

    design_index_.assign(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
      if (kind_[static_cast<std::size_t>(k)] == NodeKind::Design) {
        design_index_[static_cast<std::size_t>(k)] = static_cast<int>(design_nodes_.size());
        design_nodes_.push_back(k);
      }
    }
    detail::require(!design_nodes_.empty(), "grid has no design nodes");
  }

  int nx() const { return geom_.nx; }
  int ny() const { return geom_.ny; }
  int node_count() const { return geom_.nx * geom_.ny; }
  double pitch() const { return geom_.pitch; }
  const GridGeometry& geometry() const { return geom_; }

  int index(int i, int j) const { return j * geom_.nx + i; }
  int col(int k) const { return k % geom_.nx; }
  int row(int k) const { return k / geom_.nx; }
  Point2 position(int k) const { return {col(k) * geom_.pitch, row(k) * geom_.pitch}; }

  // Extent of the design domain in meters.
  double width() const { return (geom_.nx - 1) * geom_.pitch; }
  double height() const { return (geom_.ny - 1) * geom_.pitch; }
  bool contains(Point2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width() && p.y <= height();
  }

  NodeKind kind(int k) const { return kind_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& design_nodes() const { return design_nodes_; }
  std::size_t design_size() const { return design_nodes_.size(); }
  // Position in design_nodes(), or -1 for fixed nodes.
  int design_index(int k) const { return design_index_[static_cast<std::size_t>(k)]; }

  const std::vector<int>& pad(Pad p) const { return pads_[static_cast<std::size_t>(p)]; }
  // Pad owning node k, or -1.
  int pad_of(int k) const { return pad_of_[static_cast<std::size_t>(k)]; }

  std::size_t void_count() const {
    return static_cast<std::size_t>(std::count(kind_.begin(), kind_.end(), NodeKind::Void));
  }

  Point2 pad_center(Pad p) const {
    Point2 c{};
    const auto& set = pad(p);
    for (int k : set) c = c + position(k);
    return (1.0 / static_cast<double>(set.size())) * c;
  }

  // 4-neighbors of node k, up to four entries, -1 padded.
  std::array<int, 4> neighbors(int k) const {
    const int i = col(k), j = row(k);
    return {i > 0 ? k - 1 : -1, i + 1 < geom_.nx ? k + 1 : -1, j > 0 ? k - geom_.nx : -1,
            j + 1 < geom_.ny ? k + geom_.nx : -1};
  }

 private:
  GridGeometry geom_{};
  std::vector<NodeKind> kind_;
  std::vector<int> design_nodes_;
  std::vector<int> design_index_;
  std::vector<int> pad_of_;
  std::array<std::vector<int>, kPadCount> pads_{};
};

// Pi-filter footprint scaled to an nx-by-ny lattice: ports on the short edges,
// L1 at the center with a copper keep-out under its body, C1/C2 near the
// bottom edge. Everything else is design domain.
inline GridGeometry default_geometry(int nx, int ny, double pitch) {
  detail::require(nx >= 8 && ny >= 6, "default footprint needs at least 8x6 nodes");
  GridGeometry g;
  g.nx = nx;
  g.ny = ny;
  g.pitch = pitch;

  const int ph = std::max(1, ny / 8);       // pad height
  const int yc = ny / 2;
  const int py0 = yc - ph / 2, py1 = py0 + ph - 1;
  const int port_w = std::max(1, nx / 24);
  const int gap = std::max(1, nx / 24);     // half-width of the L1 body keep-out
  const int l1_w = std::max(1, nx / 16);
  const int cx = nx / 2;
  const int c_w = std::max(1, nx / 12);
  const int c_h = std::max(1, ny / 16);
  const int c_x0 = std::max(port_w + 1, static_cast<int>(0.22 * nx) - c_w / 2);
  const int c_y0 = std::min(1, py0 - c_h - 1);

  auto mirror = [&](NodeRect r) { return NodeRect{nx - 1 - r.x1, r.y0, nx - 1 - r.x0, r.y1}; };

  g.pads[static_cast<std::size_t>(Pad::Port1)] = {0, py0, port_w - 1, py1};
  g.pads[static_cast<std::size_t>(Pad::Port2)] = mirror(g.pads[0]);
  g.pads[static_cast<std::size_t>(Pad::L1Left)] = {cx - gap - l1_w, py0, cx - gap - 1, py1};
  g.pads[static_cast<std::size_t>(Pad::L1Right)] = {cx + gap, py0, cx + gap + l1_w - 1, py1};
  g.pads[static_cast<std::size_t>(Pad::C1)] = {c_x0, std::max(0, c_y0), c_x0 + c_w - 1,
                                               std::max(0, c_y0) + c_h - 1};
  g.pads[static_cast<std::size_t>(Pad::C2)] = mirror(g.pads[static_cast<std::size_t>(Pad::C1)]);
  g.fixed_void.push_back({cx - gap, py0, cx + gap - 1, py1});
  return g;
}

}  // namespace ddtd
