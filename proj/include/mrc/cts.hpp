#pragma once

// Finite controlled transition system over a motion-primitive lattice.
//
// States sit on grid-cell centers. Unicycle states carry one of 8 headings
// and a speed in {0, v/2, v}; double-integrator states are at rest or move
// along one of 8 directions at speed v/2 or v. Every edge is a constant-input
// segment that lands exactly on its target, so plans built from edges can be
// replayed without drift. Edge durations vary per primitive.

#include <map>
#include <memory>

#include "mrc/dynamics.hpp"
#include "mrc/geometry.hpp"
#include "mrc/ltl.hpp"

namespace mrc {

struct CtsEdge {
  int target = 0;
  Input u{};
  double duration = 0.0;
};

inline constexpr std::array<std::array<int, 2>, 8> kLatticeDirs{
    {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

struct Cts {
  RobotModel model;
  double radius = 0.0;
  double d_br = 0.0;
  double tau_s = 0.5;  // duration of the wait primitive
  std::shared_ptr<const Grid> grid;

  std::vector<State> states;
  std::vector<CellId> cell;
  std::vector<int> label_class;  // index into label_classes
  std::vector<ltl::Letter> label_classes;
  std::vector<std::vector<CtsEdge>> out;
  std::vector<std::vector<int>> in;  // distinct predecessors
  std::vector<int> initial;

  // Lattice lookup: index[cell * kinds + kind] -> state id or -1.
  int kinds = 0;
  std::vector<int> index;

  int size() const { return static_cast<int>(states.size()); }
  Vec2 pos(int id) const { return position(states[id]); }
  const ltl::Letter& label(int id) const { return label_classes[label_class[id]]; }

  const CtsEdge* edge(int from, int to) const {
    for (const auto& e : out[from])
      if (e.target == to) return &e;
    return nullptr;
  }

  int lookup(CellId c, int kind) const {
    if (c < 0 || kind < 0 || kind >= kinds) return -1;
    const std::size_t k = static_cast<std::size_t>(c) * kinds + kind;
    return k < index.size() ? index[k] : -1;
  }

  // Lattice state id of x or -1 when x is not (numerically) a lattice state.
  int find(const State& x) const {
    if (!grid || !grid->inside(position(x))) return -1;
    const CellId c = grid->cell_of(position(x));
    if (distance(grid->center(c), position(x)) > 1e-6) return -1;
    const int k = kind_of(x);
    const int id = lookup(c, k);
    if (id < 0) return -1;
    const State& s = states[id];
    if (model.kind == ModelKind::Unicycle) {
      if (angle_diff(s[2], x[2]) > 1e-6 || std::fabs(s[3] - x[3]) > 1e-6) return -1;
    } else if (std::hypot(s[2] - x[2], s[3] - x[3]) > 1e-6) {
      return -1;
    }
    return id;
  }

  // Non-position lattice index nearest to x.
  int kind_of(const State& x) const {
    const double half = model.v_max / 2;
    if (model.kind == ModelKind::Unicycle) {
      const int h = static_cast<int>(std::lround(wrap_angle(x[2]) / (kPi / 4))) % 8;
      const int s = std::clamp(static_cast<int>(std::lround(x[3] / half)), 0, 2);
      return h * 3 + s;
    }
    const double sp = std::hypot(x[2], x[3]);
    const int l = std::clamp(static_cast<int>(std::lround(sp / half)), 0, 2);
    if (l == 0) return 0;
    const int h = static_cast<int>(std::lround(wrap_angle(std::atan2(x[3], x[2])) / (kPi / 4))) % 8;
    return 1 + h * 2 + (l - 1);
  }

  void link_predecessors() {
    in.assign(states.size(), {});
    for (int x = 0; x < size(); ++x)
      for (const auto& e : out[x]) in[e.target].push_back(x);
    for (auto& v : in) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }
};

inline Vec2 lattice_dir(int h) {
  const auto& d = kLatticeDirs[h];
  const double n = std::hypot(d[0], d[1]);
  return {d[0] / n, d[1] / n};
}

// Lattice state for (cell center, kind).
inline State lattice_state(const RobotModel& m, Vec2 c, int kind) {
  const double half = m.v_max / 2;
  if (m.kind == ModelKind::Unicycle) return {c.x, c.y, (kind / 3) * kPi / 4, (kind % 3) * half};
  if (kind == 0) return {c.x, c.y, 0.0, 0.0};
  const Vec2 d = lattice_dir((kind - 1) / 2);
  const double sp = ((kind - 1) % 2 + 1) * half;
  return {c.x, c.y, d.x * sp, d.y * sp};
}

// A state is safe when its braking area keeps clear of obstacles and stays
// inside the workspace.
inline bool position_safe(const Grid& grid, Vec2 p, double clearance) {
  const Segment s{p, p};
  return dist_to_boundary(s, grid.workspace().bounds) >= clearance - 1e-9 &&
         dist_to_obstacles(s, grid.workspace().obstacle_polygons()) >= clearance - 1e-9;
}

inline std::shared_ptr<Cts> build_cts(const RobotModel& model, std::shared_ptr<const Grid> grid, double tau_s,
                                      double d_br, const Footprint& fp) {
  model.validate();
  if (!(tau_s > 0)) throw Error("tau_s must be positive");
  auto cts = std::make_shared<Cts>();
  cts->model = model;
  cts->radius = fp.radius;
  cts->d_br = d_br;
  cts->tau_s = tau_s;
  cts->grid = grid;
  const bool uni = model.kind == ModelKind::Unicycle;
  cts->kinds = uni ? 24 : 17;
  const double clearance = fp.radius + d_br;
  const auto obstacles = grid->workspace().obstacle_polygons();

  cts->index.assign(static_cast<std::size_t>(grid->size()) * cts->kinds, -1);
  std::map<ltl::Letter, int> classes;
  for (CellId c = 0; c < grid->size(); ++c) {
    if (!position_safe(*grid, grid->center(c), clearance)) continue;
    const auto& lab = grid->label_of(c);
    auto [it, fresh] = classes.emplace(lab, static_cast<int>(cts->label_classes.size()));
    if (fresh) cts->label_classes.push_back(lab);
    for (int k = 0; k < cts->kinds; ++k) {
      cts->index[static_cast<std::size_t>(c) * cts->kinds + k] = cts->size();
      cts->states.push_back(lattice_state(model, grid->center(c), k));
      cts->cell.push_back(c);
      cts->label_class.push_back(it->second);
    }
  }
  if (cts->states.empty()) throw Error("no obstacle-safe lattice states: the grid is fully blocked");

  const double half = model.v_max / 2;
  cts->out.assign(cts->states.size(), {});
  auto add_edge = [&](int from, int to, Input u, double dur) {
    const State reached = integrate(model, cts->states[from], u, dur);
    const State& goal = cts->states[to];
    double err = std::hypot(reached[0] - goal[0], reached[1] - goal[1]);
    err = std::max(err, uni ? std::max(angle_diff(reached[2], goal[2]), std::fabs(reached[3] - goal[3]))
                            : std::hypot(reached[2] - goal[2], reached[3] - goal[3]));
    if (err > 1e-6) throw Error("motion primitive does not land on its target state");
    cts->out[from].push_back({to, u, dur});
  };
  // Straight primitive from (c, speed v) to the neighbor along direction h.
  auto straight = [&](int from, CellId c, int h, double v, int kind_of_level(int, int), int lo) {
    const int nx = grid->ix(c) + kLatticeDirs[h][0], ny = grid->iy(c) + kLatticeDirs[h][1];
    if (!grid->valid(nx, ny)) return;
    const CellId nc = grid->id(nx, ny);
    if (cts->lookup(nc, 0) < 0) return;
    const Segment seg{grid->center(c), grid->center(nc)};
    if (dist_to_obstacles(seg, obstacles) < clearance - 1e-9) return;
    const double L = distance(seg.a, seg.b);
    const Vec2 d = lattice_dir(h);
    for (int level = lo; level <= 2; ++level) {
      const double v2 = level * half;
      if (v + v2 <= 0) continue;
      const double a = (v2 * v2 - v * v) / (2 * L);
      if (std::fabs(a) > model.accel_max * (1 + 1e-12)) continue;
      const int to = cts->lookup(nc, kind_of_level(h, level));
      const Input u = uni ? Input{0.0, a} : Input{a * d.x, a * d.y};
      add_edge(from, to, u, 2 * L / (v + v2));
    }
  };
  auto uni_kind = [](int h, int level) { return h * 3 + level; };
  auto di_kind = [](int h, int level) { return level == 0 ? 0 : 1 + h * 2 + (level - 1); };

  for (int id = 0; id < cts->size(); ++id) {
    const CellId c = cts->cell[id];
    const int k = id - cts->lookup(c, 0);
    if (uni) {
      const int h = k / 3, level = k % 3;
      if (level == 0) {
        add_edge(id, id, {0.0, 0.0}, tau_s);
        const double dur = (kPi / 4) / model.omega_max;
        add_edge(id, cts->lookup(c, ((h + 1) % 8) * 3), {model.omega_max, 0.0}, dur);
        add_edge(id, cts->lookup(c, ((h + 7) % 8) * 3), {-model.omega_max, 0.0}, dur);
      }
      straight(id, c, h, level * half, uni_kind, 0);
    } else if (k == 0) {
      add_edge(id, id, {0.0, 0.0}, tau_s);
      for (int h = 0; h < 8; ++h) straight(id, c, h, 0.0, di_kind, 1);
    } else {
      straight(id, c, (k - 1) / 2, ((k - 1) % 2 + 1) * half, di_kind, 0);
    }
  }
  cts->link_predecessors();
  return cts;
}

}  // namespace mrc
