#pragma once

// Planar workspace, obstacles, label regions, and the uniform grid used as
// the fine region decomposition.

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mrc/common.hpp"

namespace mrc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

struct Segment {
  Vec2 a;
  Vec2 b;
};

// Closed axis-aligned rectangle.
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  Vec2 center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
};

// Closed convex polygon, counter-clockwise vertices.
struct Polygon {
  std::vector<Vec2> pts;

  static Polygon rect(double x0, double y0, double x1, double y1) {
    return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
  }

  bool contains(Vec2 p) const {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (cross(pts[(i + 1) % n] - pts[i], p - pts[i]) < -1e-12) return false;
    }
    return n >= 3;
  }

  Rect bbox() const {
    Rect r{kInf, kInf, -kInf, -kInf};
    for (auto p : pts) {
      r.x0 = std::min(r.x0, p.x);
      r.y0 = std::min(r.y0, p.y);
      r.x1 = std::max(r.x1, p.x);
      r.y1 = std::max(r.y1, p.y);
    }
    return r;
  }
};

inline double point_segment_distance(Vec2 p, Segment s) {
  const Vec2 d = s.b - s.a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return distance(p, s.a);
  const double t = std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
  return distance(p, s.a + d * t);
}

inline bool segments_intersect(Segment s, Segment t) {
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
    const double v = cross(b - a, c - a);
    return (v > 1e-12) - (v < -1e-12);
  };
  auto on_seg = [](Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
  };
  const int o1 = orient(s.a, s.b, t.a), o2 = orient(s.a, s.b, t.b);
  const int o3 = orient(t.a, t.b, s.a), o4 = orient(t.a, t.b, s.b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(s.a, s.b, t.a)) return true;
  if (o2 == 0 && on_seg(s.a, s.b, t.b)) return true;
  if (o3 == 0 && on_seg(t.a, t.b, s.a)) return true;
  if (o4 == 0 && on_seg(t.a, t.b, s.b)) return true;
  return false;
}

inline double segment_segment_distance(Segment s, Segment t) {
  if (segments_intersect(s, t)) return 0.0;
  return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t), point_segment_distance(t.a, s),
                   point_segment_distance(t.b, s)});
}

// Exact distance between a segment and a convex polygon (0 when they meet).
inline double segment_polygon_distance(Segment s, const Polygon& poly) {
  if (poly.contains(s.a) || poly.contains(s.b)) return 0.0;
  double best = kInf;
  const std::size_t n = poly.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, segment_segment_distance(s, {poly.pts[i], poly.pts[(i + 1) % n]}));
    if (best == 0.0) break;
  }
  return best;
}

inline double rect_point_distance(const Rect& r, Vec2 p) {
  const double dx = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
  const double dy = std::max({r.y0 - p.y, 0.0, p.y - r.y1});
  return std::hypot(dx, dy);
}

inline double rect_segment_distance(const Rect& r, Segment s) {
  return segment_polygon_distance(s, Polygon::rect(r.x0, r.y0, r.x1, r.y1));
}

inline double rect_rect_distance(const Rect& a, const Rect& b) {
  const double dx = std::max({a.x0 - b.x1, 0.0, b.x0 - a.x1});
  const double dy = std::max({a.y0 - b.y1, 0.0, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

// Separating-axis test between a closed rectangle and a closed convex polygon.
inline bool rect_polygon_intersect(const Rect& r, const Polygon& poly) {
  const Polygon rp = Polygon::rect(r.x0, r.y0, r.x1, r.y1);
  auto separated = [](const Polygon& a, const Polygon& b) {
    const std::size_t n = a.pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e = a.pts[(i + 1) % n] - a.pts[i];
      const Vec2 axis{-e.y, e.x};
      double amin = kInf, amax = -kInf, bmin = kInf, bmax = -kInf;
      for (auto p : a.pts) {
        amin = std::min(amin, dot(p, axis));
        amax = std::max(amax, dot(p, axis));
      }
      for (auto p : b.pts) {
        bmin = std::min(bmin, dot(p, axis));
        bmax = std::max(bmax, dot(p, axis));
      }
      if (amax < bmin - 1e-12 || bmax < amin - 1e-12) return true;
    }
    return false;
  };
  return !separated(rp, poly) && !separated(poly, rp);
}

// Shapes accepted by the region query.
struct Disc {
  Vec2 center;
  double radius = 0.0;
};
struct Capsule {  // segment swept by a disc
  Segment seg;
  double radius = 0.0;
};
struct InflatedRect {
  Rect rect;
  double radius = 0.0;
};
using Shape = std::variant<Disc, Capsule, Polygon, InflatedRect>;

// Disc footprint of a robot.
struct Footprint {
  double radius = 0.0;

  explicit Footprint(double r) : radius(r) {
    if (!(r > 0.0)) throw Error("footprint radius must be positive");
  }
};

// The braking-area over-approximation: footprint inflated by d.
inline Disc inflate(const Footprint& fp, Vec2 p, double d) {
  if (d < 0) throw Error("inflation distance must be non-negative");
  return Disc{p, fp.radius + d};
}

struct Region {
  std::string name;
  Polygon shape;
};

struct Workspace {
  Rect bounds;
  std::vector<Region> obstacles;
  std::vector<Region> labels;
  std::string workspace_label = "W";
  std::string obstacle_label = "O";

  std::vector<Polygon> obstacle_polygons() const {
    std::vector<Polygon> out;
    for (const auto& o : obstacles) out.push_back(o.shape);
    return out;
  }
};

// Distance from a segment to the union of obstacles; +inf when there are none.
inline double dist_to_obstacles(Segment seg, const std::vector<Polygon>& obstacles) {
  double best = kInf;
  for (const auto& o : obstacles) best = std::min(best, segment_polygon_distance(seg, o));
  return best;
}

// Distance from a segment to the complement of the workspace rectangle.
inline double dist_to_boundary(Segment seg, const Rect& bounds) {
  auto inner = [&](Vec2 p) {
    return std::min({p.x - bounds.x0, bounds.x1 - p.x, p.y - bounds.y0, bounds.y1 - p.y});
  };
  return std::min(inner(seg.a), inner(seg.b));
}

using CellId = int;

// Uniform grid over the workspace rectangle. Cell (ix, iy) covers
// (x0 + ix*g, x0 + (ix+1)*g] x (...] so a point on a shared edge belongs to
// the lower-index cell; the first row/column is closed on its outer edge.
class Grid {
 public:
  Grid() = default;

  Grid(const Workspace& ws, double cell_size) : ws_(ws), g_(cell_size) {
    if (!(g_ > 0)) throw Error("grid cell size must be positive");
    const double w = ws.bounds.x1 - ws.bounds.x0;
    const double h = ws.bounds.y1 - ws.bounds.y0;
    nx_ = static_cast<int>(std::llround(w / g_));
    ny_ = static_cast<int>(std::llround(h / g_));
    if (nx_ <= 0 || ny_ <= 0 || std::fabs(nx_ * g_ - w) > 1e-9 || std::fabs(ny_ * g_ - h) > 1e-9)
      throw Error("workspace extent must be a positive multiple of the grid size");
    auto problems = alignment_problems();
    if (!problems.empty()) throw ValidationError(problems);
    build_labels();
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }
  double cell_size() const { return g_; }
  const Workspace& workspace() const { return ws_; }

  CellId id(int ix, int iy) const { return iy * nx_ + ix; }
  int ix(CellId c) const { return c % nx_; }
  int iy(CellId c) const { return c / nx_; }
  bool valid(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }

  Rect cell_rect(CellId c) const {
    const double x0 = ws_.bounds.x0 + ix(c) * g_;
    const double y0 = ws_.bounds.y0 + iy(c) * g_;
    return {x0, y0, x0 + g_, y0 + g_};
  }
  Vec2 center(CellId c) const { return cell_rect(c).center(); }

  bool inside(Vec2 p) const { return ws_.bounds.contains(p); }

  CellId cell_of(Vec2 p) const {
    if (!inside(p)) throw Error("point outside workspace");
    return id(axis_cell(p.x - ws_.bounds.x0, nx_), axis_cell(p.y - ws_.bounds.y0, ny_));
  }

  // Cells whose closed rectangle meets the shape, sorted by id.
  std::vector<CellId> regions_intersecting(const Shape& s) const {
    Rect box = std::visit([](const auto& sh) { return shape_bbox(sh); }, s);
    std::vector<CellId> out;
    const int ix0 = std::max(0, static_cast<int>(std::floor((box.x0 - ws_.bounds.x0) / g_)) - 1);
    const int iy0 = std::max(0, static_cast<int>(std::floor((box.y0 - ws_.bounds.y0) / g_)) - 1);
    const int ix1 = std::min(nx_ - 1, static_cast<int>(std::floor((box.x1 - ws_.bounds.x0) / g_)) + 1);
    const int iy1 = std::min(ny_ - 1, static_cast<int>(std::floor((box.y1 - ws_.bounds.y0) / g_)) + 1);
    for (int y = iy0; y <= iy1; ++y) {
      for (int x = ix0; x <= ix1; ++x) {
        const CellId c = id(x, y);
        const Rect r = cell_rect(c);
        const bool hit = std::visit([&](const auto& sh) { return meets(r, sh); }, s);
        if (hit) out.push_back(c);
      }
    }
    return out;
  }

  const std::set<std::string>& label_of(CellId c) const { return labels_.at(c); }
  bool blocked(CellId c) const { return blocked_.at(c) != 0; }

  // Problems that violate label consistency: every obstacle and label region
  // must be an axis-aligned rectangle on grid lines inside the workspace.
  std::vector<std::string> alignment_problems() const {
    std::vector<std::string> out;
    auto check = [&](const Region& r, const char* what) {
      const auto& p = r.shape.pts;
      bool ok = p.size() >= 3;
      for (std::size_t i = 0; ok && i < p.size(); ++i) {
        const Vec2 a = p[i], b = p[(i + 1) % p.size()];
        if (std::fabs(a.x - b.x) > 1e-9 && std::fabs(a.y - b.y) > 1e-9) ok = false;
        if (!on_line(a.x - ws_.bounds.x0) || !on_line(a.y - ws_.bounds.y0)) ok = false;
        if (!ws_.bounds.contains(a)) ok = false;
      }
      if (!ok)
        out.push_back(std::string(what) + " '" + r.name + "' is not an axis-aligned rectangle on grid lines inside the workspace");
    };
    for (const auto& o : ws_.obstacles) check(o, "obstacle");
    for (const auto& l : ws_.labels) check(l, "label region");
    return out;
  }

 private:
  // Index of the half-open interval (k*g, (k+1)*g] holding offset.
  int axis_cell(double offset, int n) const {
    return std::clamp(static_cast<int>(std::ceil(offset / g_)) - 1, 0, n - 1);
  }

  bool on_line(double offset) const {
    const double k = offset / g_;
    return std::fabs(k - std::round(k)) < 1e-9;
  }

  static Rect shape_bbox(const Disc& d) {
    return {d.center.x - d.radius, d.center.y - d.radius, d.center.x + d.radius, d.center.y + d.radius};
  }
  static Rect shape_bbox(const Capsule& c) {
    return {std::min(c.seg.a.x, c.seg.b.x) - c.radius, std::min(c.seg.a.y, c.seg.b.y) - c.radius,
            std::max(c.seg.a.x, c.seg.b.x) + c.radius, std::max(c.seg.a.y, c.seg.b.y) + c.radius};
  }
  static Rect shape_bbox(const Polygon& p) { return p.bbox(); }
  static Rect shape_bbox(const InflatedRect& r) {
    return {r.rect.x0 - r.radius, r.rect.y0 - r.radius, r.rect.x1 + r.radius, r.rect.y1 + r.radius};
  }

  static bool meets(const Rect& cell, const Disc& d) { return rect_point_distance(cell, d.center) <= d.radius; }
  static bool meets(const Rect& cell, const Capsule& c) { return rect_segment_distance(cell, c.seg) <= c.radius; }
  static bool meets(const Rect& cell, const Polygon& p) { return rect_polygon_intersect(cell, p); }
  static bool meets(const Rect& cell, const InflatedRect& r) { return rect_rect_distance(cell, r.rect) <= r.radius; }

  void build_labels() {
    labels_.assign(size(), {});
    blocked_.assign(size(), 0);
    for (CellId c = 0; c < size(); ++c) {
      const Vec2 p = center(c);
      labels_[c].insert(ws_.workspace_label);
      for (const auto& o : ws_.obstacles) {
        if (o.shape.contains(p)) {
          labels_[c].insert(ws_.obstacle_label);
          blocked_[c] = 1;
        }
      }
      for (const auto& l : ws_.labels)
        if (l.shape.contains(p)) labels_[c].insert(l.name);
    }
  }

  Workspace ws_;
  double g_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::set<std::string>> labels_;
  std::vector<char> blocked_;
};

}  // namespace mrc
