#pragma once

// Local tree growth with Buchi-frontier tracking, time-indexed reservations,
// steering over motion primitives, global completion and initial plans.

#include <optional>
#include <random>
#include <unordered_map>

#include "mrc/coordination.hpp"
#include "mrc/product.hpp"
#include "mrc/trajectory.hpp"

namespace mrc {

using Frontier = std::vector<int>;

// Automaton states one enabled move away from prev under `letter`. Every
// lattice arrival is one product move, so prev itself is not kept.
inline Frontier update_frontier(const Frontier& prev, const ltl::Nba& nba, std::uint64_t letter) {
  Frontier out;
  for (int s : prev) nba.for_each_successor(s, letter, [&](int t) { out.push_back(t); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Frontier after arriving at CTS state x: beta_P(x) ∩ Post_L(x)(prev).
inline Frontier update_frontier(const Frontier& prev, const Pba& pba, int x) {
  Frontier out;
  for (int s : update_frontier(prev, *pba.nba, pba.letter_of(x)))
    if (pba.reachable[pba.id(x, s)]) out.push_back(s);
  return out;
}

inline Frontier initial_frontier(const Pba& pba, int x0) { return pba.beta(x0); }

// Cells reserved by higher-priority neighbors (NI), with their intervals,
// plus discs held by neighbors that stay put from now on.
class Reservations {
 public:
  void add(CellId c, Interval iv) { cells_[c].add(iv); }
  void hold(Disc d) { discs_.push_back(d); }
  const std::vector<Disc>& held() const { return discs_; }

  void add(const ReservationSchedule& s) {
    for (const auto& [c, ivs] : s.by_cell)
      for (const auto& iv : ivs.items()) add(c, iv);
  }

  bool blocked(CellId c, Interval window) const {
    auto it = cells_.find(c);
    return it != cells_.end() && it->second.intersects(window);
  }

  bool blocked(const CellSet& cells, Interval window) const {
    for (CellId c : cells)
      if (blocked(c, window)) return true;
    return false;
  }

  bool empty() const { return cells_.empty() && discs_.empty(); }

  std::vector<CellId> cells() const {
    std::vector<CellId> out;
    for (const auto& [c, s] : cells_) out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::unordered_map<CellId, IntervalSet> cells_;
  std::vector<Disc> discs_;
};

struct ObstacleSet {
  std::vector<Polygon> polygons;  // static obstacles
  CellSet cells;                  // reserved cells active in the window
};

// Static obstacles plus cells reserved during `window` that touch `area`.
inline ObstacleSet obstacles_at(const Grid& grid, const Reservations& ni, Interval window, const Disc& area) {
  ObstacleSet o{grid.workspace().obstacle_polygons(), {}};
  for (CellId c : ni.cells())
    if (ni.blocked(c, window) && rect_point_distance(grid.cell_rect(c), area.center) <= area.radius)
      o.cells.push_back(c);
  return o;
}

// Weighted state distance used for nearest-node queries and steering.
inline double state_metric(const RobotModel& m, double g, const State& a, const State& b) {
  const double d = std::hypot(a[0] - b[0], a[1] - b[1]);
  if (m.kind == ModelKind::Unicycle)
    return d + 0.5 * g * angle_diff(a[2], b[2]) / kPi + 0.5 * g * std::fabs(a[3] - b[3]) / m.v_max;
  return d + 0.5 * g * std::hypot(a[2] - b[2], a[3] - b[3]) / m.v_max;
}

struct SteerResult {
  int target = -1;
  const CtsEdge* edge = nullptr;
};

// Primitive out of `from` whose end state is closest to `toward`; ties go to
// the smaller target id.
inline SteerResult steer(const Cts& cts, int from, const State& toward) {
  SteerResult best;
  double best_d = kInf;
  for (const auto& e : cts.out[from]) {
    const double d = state_metric(cts.model, cts.grid->cell_size(), cts.states[e.target], toward);
    if (d < best_d || (d == best_d && e.target < best.target)) {
      best_d = d;
      best = {e.target, &e};
    }
  }
  if (!best.edge) throw ConstraintViolation("no feasible input from this state");
  return best;
}

// A way to reach a lattice state from the robot's current state at t_k.
struct TreeEntry {
  std::vector<PlanSegment> segments;
  int node = -1;
  double arrival = 0.0;
  bool advances = true;  // arrival counts as a new lattice visit
};

struct TreeNode {
  int parent = -1;
  int id = -1;  // CTS state, -1 for the root
  double t = 0.0;
  int steps = 0;
  Frontier frontier;
  std::vector<PlanSegment> edge;  // segments from the parent
};

struct LocalTree {
  std::vector<TreeNode> nodes;
  int leaf = -1;
  int iterations = 0;

  bool has_leaf() const { return leaf >= 0; }

  // Node indices from the root to n.
  std::vector<int> branch(int n) const {
    std::vector<int> out;
    for (; n >= 0; n = nodes[n].parent) out.push_back(n);
    std::reverse(out.begin(), out.end());
    return out;
  }
};

struct TreeRequest {
  double t_k = 0.0;
  State root{};
  Vec2 center;
  Frontier frontier;
  std::vector<TreeEntry> entries;
  double R = 0.0;
  double eta = 0.0;
  int n_max = 2000;
  std::uint64_t seed = 0;
  const Reservations* ni = nullptr;
  const BrakingReachMap* reach = nullptr;
  double t_br = 0.0;
  double clearance = 0.0;  // footprint radius plus braking distance
  int max_waits = 4;
  std::optional<State> goal;  // sampled with probability goal_bias
  double goal_bias = 0.5;
  // after the first leaf, keep growing this many iterations and return the
  // leaf with the lowest time-to-leaf plus potential; 0 stops at the first
  int extra_iterations = 0;
};

// Cells a robot may cover while braking anywhere along the segments.
inline CellSet swept_reach(const Grid& grid, const BrakingReachMap& m, const RobotModel& model,
                           const std::vector<PlanSegment>& segs) {
  CellSet cells;
  for (const auto& s : segs) {
    const Vec2 a = position(s.x0);
    const Vec2 b = position(detail::flow(model, s.x0, s.u, s.duration));
    for (CellId c : grid.regions_intersecting(Capsule{{a, b}, 0.0})) cells.push_back(c);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return reach_of(m, cells);
}

inline bool segments_clear(const Grid& grid, const TreeRequest& rq, const RobotModel& model,
                           const std::vector<PlanSegment>& segs, double t0, double t1) {
  if (!rq.ni || rq.ni->empty() || segs.empty()) return true;
  for (const auto& s : segs) {
    const Segment path{position(s.x0), position(detail::flow(model, s.x0, s.u, s.duration))};
    for (const Disc& d : rq.ni->held()) {
      const double need = rq.clearance + d.radius;
      const double here = distance(path.a, d.center);
      const double low = point_segment_distance(d.center, path);
      // moving straight away never closes the gap
      if (low < need && !(low >= here - 1e-12 && distance(path.b, d.center) >= here)) return false;
    }
  }
  return !rq.ni->blocked(swept_reach(grid, *rq.reach, model, segs), {t0, t1 + rq.t_br});
}

// Grows a tree of lattice states from the robot's entries until a node leaves
// B(center, R) or n_max iterations pass. Every stored node has a nonempty
// frontier with finite potential and its incoming segments avoid the
// reserved cells over the segment's time window extended by t_br.
inline LocalTree grow_local_tree(const Pba& pba, const PotentialTable& pot, const TreeRequest& rq) {
  const Cts& cts = *pba.cts;
  const Grid& grid = *cts.grid;
  LocalTree tree;
  tree.nodes.push_back({-1, -1, rq.t_k, 0, rq.frontier, {}});
  if (rq.frontier.empty()) return tree;

  std::unordered_map<int, int> count;
  auto gate = [&](int x, const Frontier& f) { return !f.empty() && potential_of(pba, x, f, pot) < kInf; };
  auto outside = [&](int x) { return distance(cts.pos(x), rq.center) > rq.R; };

  for (const auto& e : rq.entries) {
    const Frontier f = e.advances ? update_frontier(rq.frontier, pba, e.node) : rq.frontier;
    if (!gate(e.node, f)) continue;
    if (!segments_clear(grid, rq, cts.model, e.segments, rq.t_k, e.arrival)) continue;
    if (count[e.node] > 0) continue;
    count[e.node] = 1;
    tree.nodes.push_back({0, e.node, e.arrival, 1, f, e.segments});
    if (outside(e.node)) {
      tree.leaf = static_cast<int>(tree.nodes.size()) - 1;
      return tree;
    }
  }
  if (tree.nodes.size() == 1) return tree;

  std::mt19937_64 rng(rq.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const RobotModel& m = cts.model;
  const double g = grid.cell_size();
  const double rate = m.v_max + pba.time_weight;
  double best_score = kInf;
  int stop_at = rq.n_max;
  for (int it = 0; it < stop_at; ++it) {
    tree.iterations = it + 1;
    State xs{};
    const double rad = (rq.R + rq.eta) * std::sqrt(U(rng));
    const double ang = 2 * kPi * U(rng);
    xs[0] = rq.center.x + rad * std::cos(ang);
    xs[1] = rq.center.y + rad * std::sin(ang);
    if (m.kind == ModelKind::Unicycle) {
      xs[2] = 2 * kPi * U(rng);
      xs[3] = m.v_max * U(rng);
    } else {
      const double vr = m.v_max * std::sqrt(U(rng));
      const double va = 2 * kPi * U(rng);
      xs[2] = vr * std::cos(va);
      xs[3] = vr * std::sin(va);
    }
    if (rq.goal && U(rng) < rq.goal_bias) xs = *rq.goal;
    // nearest lattice node; exact ties (wait duplicates) are broken at random
    int near = -1;
    double best = kInf;
    int ties = 0;
    for (int n = 1; n < static_cast<int>(tree.nodes.size()); ++n) {
      const double d = state_metric(m, g, cts.states[tree.nodes[n].id], xs);
      if (d < best) {
        best = d;
        near = n;
        ties = 1;
      } else if (d == best && U(rng) * (++ties) < 1.0) {
        near = n;
      }
    }
    const TreeNode& parent = tree.nodes[near];
    if (cts.out[parent.id].empty()) continue;
    const SteerResult st = steer(cts, parent.id, xs);
    const int xr = st.target;
    if (xr == parent.id) {
      if (count[xr] >= rq.max_waits) continue;
    } else if (count[xr] > 0) {
      continue;
    }
    const Frontier f = update_frontier(parent.frontier, pba, xr);
    if (!gate(xr, f)) continue;
    PlanSegment seg{cts.states[parent.id], st.edge->u, st.edge->duration, xr};
    const double t0 = parent.t, t1 = parent.t + st.edge->duration;
    if (!segments_clear(grid, rq, m, {seg}, t0, t1)) continue;
    ++count[xr];
    tree.nodes.push_back({near, xr, t1, parent.steps + 1, f, {seg}});
    if (outside(xr)) {
      const double score = (t1 - rq.t_k) * rate + potential_of(pba, xr, f, pot);
      if (score < best_score) {
        best_score = score;
        tree.leaf = static_cast<int>(tree.nodes.size()) - 1;
      }
      if (rq.extra_iterations <= 0) break;
      stop_at = std::min(stop_at, it + 1 + rq.extra_iterations);
    }
  }
  return tree;
}

struct Completion {
  int start = -1;  // chosen product state
  graph::Run run;
  bool is_cycle = false;
};

// Best candidate by potential (ties to the smaller id); a cycle when it is an
// accepting state on a cycle, otherwise a shortest path to such a state. A
// member of F_p* need not lie on a cycle itself, only reach one.
inline Completion global_completion(const Pba& pba, const PotentialTable& pot, const std::vector<int>& candidates) {
  int best = -1;
  for (int p : candidates)
    if (pot[p] < kInf && (best < 0 || pot[p] < pot[best] || (pot[p] == pot[best] && p < best))) best = p;
  if (best < 0) throw UnsatisfiableError("no candidate product state can reach an accepting cycle");
  Completion c;
  c.start = best;
  if (pba.cyclic[best]) {
    c.run = dijkstra_cycle(pba, best);
    c.is_cycle = true;
  } else {
    c.run = dijkstra_targets(pba, best, pba.cyclic);
  }
  return c;
}

// Product run from p to an accepting state followed by an accepting cycle.
struct Lasso {
  std::vector<int> prefix;  // product states, first is the start
  std::vector<int> cycle;   // product states, first == last
  double potential = 0.0;
};

inline Lasso lasso_from(const Pba& pba, const PotentialTable& pot, const std::vector<int>& candidates) {
  Completion c = global_completion(pba, pot, candidates);
  Lasso l;
  l.potential = pot[c.start];
  if (c.is_cycle) {
    l.prefix = {c.start};
    l.cycle = c.run.states;
  } else {
    l.prefix = c.run.states;
    l.cycle = dijkstra_cycle(pba, l.prefix.back()).states;
  }
  return l;
}

// Segments along a product run, tagged with the run's automaton states.
inline std::vector<PlanSegment> segments_along(const Pba& pba, const std::vector<int>& run) {
  const Cts& cts = *pba.cts;
  std::vector<PlanSegment> out;
  for (std::size_t i = 1; i < run.size(); ++i) {
    const int a = pba.x_of(run[i - 1]), b = pba.x_of(run[i]);
    const CtsEdge* e = cts.edge(a, b);
    if (!e) throw Error("run uses a transition missing from the CTS");
    out.push_back({cts.states[a], e->u, e->duration, b, pba.s_of(run[i])});
  }
  return out;
}

inline Plan plan_from_lasso(const Pba& pba, double t0, std::vector<PlanSegment> head, const Lasso& l) {
  auto prefix = segments_along(pba, l.prefix);
  head.insert(head.end(), prefix.begin(), prefix.end());
  return Plan(pba.cts->model, t0, std::move(head), segments_along(pba, l.cycle));
}

// Tags the tree branch ending at the leaf with one automaton run that ends in
// s_leaf, walking the stored frontiers backwards.
inline void tag_branch(const Pba& pba, LocalTree& tree, const std::vector<int>& br, int s_leaf) {
  int s = s_leaf;
  for (std::size_t j = br.size() - 1; j >= 1; --j) {
    TreeNode& node = tree.nodes[br[j]];
    if (node.edge.empty()) continue;
    node.edge.back().nba_state = s;
    const std::uint64_t letter = pba.letter_of(node.id);
    int prev = -1;
    for (int c : tree.nodes[br[j - 1]].frontier) {
      pba.nba->for_each_successor(c, letter, [&](int t) {
        if (t == s && prev < 0) prev = c;
      });
      if (prev >= 0) break;
    }
    if (prev < 0) return;
    s = prev;
  }
}

struct InitialPlan {
  Plan plan;
  Lasso lasso;
};

// Shortest prefix-suffix plan from the product's initial states.
inline InitialPlan initial_plan(const Pba& pba, const PotentialTable& pot, double t0 = 0.0) {
  Lasso l;
  try {
    l = lasso_from(pba, pot, pba.initial);
  } catch (const UnsatisfiableError&) {
    throw UnsatisfiableError("specification cannot be satisfied from the start state");
  }
  return {plan_from_lasso(pba, t0, {}, l), l};
}

// Label word read along a lasso of product states.
inline ltl::LassoWord label_lasso(const Pba& pba, const Lasso& l) {
  ltl::LassoWord w;
  for (int p : l.prefix) w.prefix.push_back(pba.cts->label(pba.x_of(p)));
  for (std::size_t i = 1; i < l.cycle.size(); ++i) w.cycle.push_back(pba.cts->label(pba.x_of(l.cycle[i])));
  return w;
}

// Braking from x at t0, then rest forever.
inline Plan braking_plan(const Cts& cts, const BrakingProfile& prof, double t0, const State& x) {
  const Input u = braking_control(cts.model, prof, x);
  const double T = braking_duration(cts.model, x);
  if (T <= 0) return Plan::hold(cts.model, t0, x, cts.find(x));
  State end = detail::flow(cts.model, x, u, T);
  if (cts.model.kind == ModelKind::Unicycle) {
    end[3] = 0.0;
  } else {
    end[2] = end[3] = 0.0;
  }
  const int node = cts.find(end);
  return Plan(cts.model, t0, {PlanSegment{x, u, T, node}}, {PlanSegment{end, {0.0, 0.0}, 1.0, node}});
}

// Rest-to-rest moves from a stopped off-lattice state back onto the lattice,
// nearest first: rotation to an adjacent lattice heading, or a straight move
// to a nearby cell center (along the heading for the unicycle).
inline std::vector<TreeEntry> recovery_entries(const Cts& cts, double t_k, const State& x) {
  std::vector<TreeEntry> out;
  const RobotModel& m = cts.model;
  if (speed(m, x) > 1e-9) return out;
  const Grid& grid = *cts.grid;
  const Vec2 p = position(x);
  if (!grid.inside(p)) return out;
  const CellId c = grid.cell_of(p);
  if (m.kind == ModelKind::Unicycle) {
    const double q = wrap_angle(x[2]) / (kPi / 4);
    if (std::fabs(q - std::round(q)) > 1e-6) {
      if (distance(p, grid.center(c)) > 1e-6) return out;
      for (int dir : {+1, -1}) {
        const int h = ((dir > 0 ? static_cast<int>(std::ceil(q)) : static_cast<int>(std::floor(q))) % 8 + 8) % 8;
        const int id = cts.lookup(c, h * 3);
        if (id < 0) continue;
        const double turn = angle_diff(x[2], h * kPi / 4);
        const double dur = turn / m.omega_max;
        State from{p.x, p.y, x[2], 0.0};
        out.push_back({{PlanSegment{from, {dir * m.omega_max, 0.0}, dur, id}}, id, t_k + dur, true});
      }
      std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
      return out;
    }
  }
  const double clearance = cts.radius + cts.d_br;
  const auto obstacles = grid.workspace().obstacle_polygons();
  std::vector<std::pair<double, TreeEntry>> cand;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int ix = grid.ix(c) + dx, iy = grid.iy(c) + dy;
      if (!grid.valid(ix, iy)) continue;
      const CellId nc = grid.id(ix, iy);
      const Vec2 target = grid.center(nc);
      const Vec2 d = target - p;
      const double L = norm(d);
      int kind = 0;
      double sign = 1.0;
      if (m.kind == ModelKind::Unicycle) {
        const Vec2 h{std::cos(x[2]), std::sin(x[2])};
        if (std::fabs(cross(h, d)) > 1e-6) continue;
        sign = dot(h, d) >= 0 ? 1.0 : -1.0;
        kind = static_cast<int>(std::lround(wrap_angle(x[2]) / (kPi / 4))) % 8 * 3;
      }
      const int id = cts.lookup(nc, kind);
      if (id < 0) continue;
      if (L < 1e-9) {
        cand.push_back({0.0, TreeEntry{{}, id, t_k, false}});
        continue;
      }
      if (dist_to_obstacles({p, target}, obstacles) < clearance - 1e-9) continue;
      const double a = std::min(m.accel_max, m.v_max * m.v_max / L);
      const double th = std::sqrt(L / a);
      State s0 = x;
      Input u1, u2;
      if (m.kind == ModelKind::Unicycle) {
        s0[3] = 0.0;
        u1 = {0.0, sign * a};
        u2 = {0.0, -sign * a};
      } else {
        s0[2] = s0[3] = 0.0;
        u1 = {a * d.x / L, a * d.y / L};
        u2 = {-u1[0], -u1[1]};
      }
      State mid = detail::flow(m, s0, u1, th);
      TreeEntry e{{PlanSegment{s0, u1, th, -1}, PlanSegment{mid, u2, th, id}}, id, t_k + 2 * th, true};
      cand.push_back({L, e});
    }
  }
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [d, e] : cand) out.push_back(std::move(e));
  return out;
}

struct ReplanRequest {
  const Pba* pba = nullptr;
  const PotentialTable* pot = nullptr;
  const BrakingReachMap* reach = nullptr;
  double t_br = 0.0;
  const Plan* current = nullptr;
  double t_k = 0.0;
  Frontier frontier;  // at the last lattice arrival
  double R = 0.0;
  double eta = 0.0;
  int n_max = 2000;
  std::uint64_t seed = 0;
  const Reservations* ni = nullptr;
  const Plan* reference = nullptr;  // plan the tree is drawn toward, if any
  int extra_iterations = 300;        // leaf search after the first leaf
};

// State where `plan` first leaves B(center, R) after t, searched up to t + horizon.
inline std::optional<State> exit_state(const Plan& plan, double t, Vec2 center, double R, double horizon,
                                       double dt = 0.05) {
  if (plan.stationary_from() <= t) return std::nullopt;
  for (double s = t; s <= t + horizon; s += dt) {
    const State x = plan.state_at(s);
    if (distance(position(x), center) > R) return x;
  }
  return std::nullopt;
}

struct ReplanResult {
  std::optional<Plan> plan;
  LocalTree tree;
  double potential = kInf;
  std::string reason;
};

// One planning step: commit to the running segment, grow a local tree,
// complete globally and splice everything into one infinite plan.
inline ReplanResult replan(const ReplanRequest& rq) {
  const Pba& pba = *rq.pba;
  const Cts& cts = *pba.cts;
  ReplanResult res;
  TreeRequest tr;
  tr.t_k = rq.t_k;
  tr.root = rq.current->state_at(rq.t_k);
  tr.center = position(tr.root);
  tr.frontier = rq.frontier;
  tr.R = rq.R;
  tr.eta = rq.eta;
  tr.n_max = rq.n_max;
  tr.seed = rq.seed;
  tr.ni = rq.ni;
  tr.reach = rq.reach;
  tr.t_br = rq.t_br;
  tr.clearance = cts.radius + cts.d_br;
  tr.extra_iterations = rq.extra_iterations;
  if (rq.reference)
    tr.goal = exit_state(*rq.reference, rq.t_k, tr.center, rq.R + 0.5 * rq.eta,
                         schedule_horizon(rq.R, cts.model.v_max, rq.t_br) + 10 * rq.R / cts.model.v_max);

  auto [t_end, segs] = rq.current->commit_to_node(rq.t_k, [&](const State& x) { return cts.find(x) >= 0; });
  if (rq.current->stationary_from() <= rq.t_k) {
    segs.clear();
    t_end = rq.t_k;
  }
  const State end = segs.empty() ? tr.root : detail::flow(cts.model, segs.back().x0, segs.back().u, segs.back().duration);
  const int id = cts.find(end);
  if (id >= 0) {
    tr.entries.push_back({segs, id, t_end, !segs.empty()});
  } else if (segs.empty()) {
    tr.entries = recovery_entries(cts, rq.t_k, tr.root);
  }
  if (tr.entries.empty()) {
    res.reason = "no lattice entry from the current state";
    return res;
  }
  res.tree = grow_local_tree(pba, *rq.pot, tr);
  if (!res.tree.has_leaf()) {
    res.reason = res.tree.nodes.size() == 1 ? "entry blocked" : "no leaf outside the sensing area";
    return res;
  }
  const TreeNode& leaf = res.tree.nodes[res.tree.leaf];
  std::vector<int> cands;
  for (int s : leaf.frontier) cands.push_back(pba.id(leaf.id, s));
  Lasso l = lasso_from(pba, *rq.pot, cands);
  const auto br = res.tree.branch(res.tree.leaf);
  tag_branch(pba, res.tree, br, pba.s_of(l.prefix.front()));
  std::vector<PlanSegment> head;
  for (int n : br)
    head.insert(head.end(), res.tree.nodes[n].edge.begin(), res.tree.nodes[n].edge.end());
  res.potential = l.potential;
  res.plan = plan_from_lasso(pba, rq.t_k, std::move(head), l);
  return res;
}

}  // namespace mrc
