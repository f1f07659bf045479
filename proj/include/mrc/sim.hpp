#pragma once

// Round-synchronous multi-robot simulation: broadcast, conflict detection,
// planning order, replanning waves, emergency braking and monitors.

#include <chrono>
#include <map>
#include <set>

#include <json.hpp>

#include "mrc/coordination.hpp"
#include "mrc/planner.hpp"

namespace mrc {

struct RobotSpec {
  int id = 0;
  std::string name;
  RobotModel model;
  double radius = 0.2;
  BrakingKind braking = BrakingKind::StraightLine;
  std::string formula;
  State start{};
  int p0 = 0;
};

struct SimConfig {
  Workspace workspace;
  double grid_size = 0.5;
  double delta = 0.1;        // detection period
  double h = 0.01;           // integration step
  double R = 3.5;            // sensing radius
  double duration = 60.0;
  double eta = -1.0;         // sampling margin; negative means one grid cell
  double t_max = 30.0;       // Emerg time counted as deadlock
  double tau_s = 0.5;        // wait primitive duration
  double schedule_dt = 0.02; // schedule sampling step
  double time_weight = 0.1;  // plan cost per second on top of path length
  int n_max = 2000;
  std::uint64_t seed = 1;
  bool abort_on_violation = true;
  bool record_trajectories = true;
  std::vector<RobotSpec> robots;
};

// Invariant problems that make a configuration unusable.
inline std::vector<std::string> config_problems(const SimConfig& c) {
  std::vector<std::string> out;
  auto pos = [&](double v, const char* what) {
    if (!(v > 0)) out.push_back(std::string(what) + " must be positive");
  };
  pos(c.grid_size, "grid size");
  pos(c.delta, "detection period");
  pos(c.h, "integration step");
  pos(c.R, "sensing radius");
  pos(c.duration, "duration");
  pos(c.t_max, "t_max");
  pos(c.tau_s, "tau_s");
  if (!(c.time_weight >= 0)) out.push_back("time_weight must be non-negative");
  if (c.n_max <= 0) out.push_back("n_max must be positive");
  if (c.robots.empty()) out.push_back("at least one robot is required");
  std::set<int> ids, p0s;
  for (const auto& r : c.robots) {
    if (!ids.insert(r.id).second) out.push_back("duplicate robot id " + std::to_string(r.id));
    if (!p0s.insert(r.p0).second) out.push_back("duplicate priority score p0=" + std::to_string(r.p0));
    if (!(r.radius > 0)) out.push_back("robot " + r.name + ": footprint radius must be positive");
    if (!(r.model.v_max > 0) || !(r.model.accel_max > 0) ||
        (r.model.kind == ModelKind::Unicycle && !(r.model.omega_max > 0)))
      out.push_back("robot " + r.name + ": model bounds must be positive");
    if ((r.model.kind == ModelKind::Unicycle) == (r.braking == BrakingKind::NormDecel))
      out.push_back("robot " + r.name + ": braking controller does not match the model");
    if (r.braking == BrakingKind::MaxTurn)
      out.push_back("robot " + r.name + ": the max-turn controller is not supported by the simulator");
    try {
      ltl::parse(r.formula);
    } catch (const ParseError& e) {
      out.push_back("robot " + r.name + ": formula: " + e.what());
    }
    if (!c.workspace.bounds.contains(position(r.start)))
      out.push_back("robot " + r.name + ": start outside the workspace");
  }
  return out;
}

// R > 2 max_i (D_i + delta * v_max_i), needed for the safety guarantee.
inline std::vector<std::string> config_warnings(const SimConfig& c) {
  std::vector<std::string> out;
  double worst = 0;
  for (const auto& r : c.robots) {
    try {
      worst = std::max(worst, braking_bounds(r.model, r.braking).second + c.delta * r.model.v_max);
    } catch (const Error&) {
    }
  }
  if (!(c.R > 2 * worst))
    out.push_back("sensing radius " + std::to_string(c.R) + " does not exceed 2*max(D_br + delta*v_max) = " +
                  std::to_string(2 * worst));
  return out;
}

struct RobotOffline {
  RobotSpec spec;
  BrakingProfile braking;
  ltl::FormulaPtr formula;
  std::shared_ptr<const ltl::Nba> nba;
  std::shared_ptr<const Cts> cts;
  ProductBundle product;
  BrakingReachMap reach;
  int start_node = -1;
  std::vector<std::string> recurrence;  // atoms a with []<>a as a top-level conjunct
};

// Atoms under top-level conjuncts of the form []<>a.
inline std::vector<std::string> recurrence_targets(const ltl::FormulaPtr& f) {
  std::vector<std::string> out;
  std::vector<ltl::FormulaPtr> stack{f};
  while (!stack.empty()) {
    auto g = stack.back();
    stack.pop_back();
    if (g->op == ltl::Op::And) {
      stack.push_back(g->rhs);
      stack.push_back(g->lhs);
    } else if (g->op == ltl::Op::Always && g->lhs->op == ltl::Op::Eventually && g->lhs->lhs->op == ltl::Op::Atom) {
      out.push_back(g->lhs->lhs->atom);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string describe_model(const RobotModel& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d:%.17g:%.17g:%.17g", static_cast<int>(m.kind), m.v_max, m.omega_max, m.accel_max);
  return buf;
}

inline std::string describe_workspace(const Workspace& ws, double g) {
  std::string s;
  char buf[96];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g,", v);
    s += buf;
  };
  num(ws.bounds.x0);
  num(ws.bounds.y0);
  num(ws.bounds.x1);
  num(ws.bounds.y1);
  num(g);
  for (const auto* group : {&ws.obstacles, &ws.labels}) {
    s += "|";
    for (const auto& r : *group) {
      s += r.name + ":";
      for (auto p : r.shape.pts) {
        num(p.x);
        num(p.y);
      }
    }
  }
  return s + ws.workspace_label + ws.obstacle_label;
}

// Offline stage: CTS, automaton, product and potentials per robot.
inline std::vector<RobotOffline> precompute(const SimConfig& cfg, std::shared_ptr<const Grid> grid = nullptr) {
  auto problems = config_problems(cfg);
  if (!problems.empty()) throw ValidationError(problems);
  if (!grid) grid = std::make_shared<Grid>(cfg.workspace, cfg.grid_size);
  std::map<std::string, std::shared_ptr<const Cts>> cts_cache;
  std::map<std::string, std::shared_ptr<const ltl::Nba>> nba_cache;
  std::vector<RobotOffline> out;
  std::vector<std::string> errors;
  const std::string ws_key = describe_workspace(cfg.workspace, cfg.grid_size);
  for (const auto& spec : cfg.robots) {
    RobotOffline r;
    r.spec = spec;
    r.braking = make_braking_profile(spec.model, spec.braking);
    r.formula = ltl::parse(spec.formula);
    r.recurrence = recurrence_targets(r.formula);
    const std::string fkey = ltl::to_string(r.formula);
    if (!nba_cache.count(fkey)) nba_cache[fkey] = std::make_shared<const ltl::Nba>(ltl::to_nba(r.formula));
    r.nba = nba_cache[fkey];
    char buf[128];
    std::snprintf(buf, sizeof buf, "|%.17g|%.17g|%.17g|%d", spec.radius, r.braking.d_br, cfg.tau_s,
                  static_cast<int>(spec.braking));
    const std::string ckey = describe_model(spec.model) + buf;
    if (!cts_cache.count(ckey))
      cts_cache[ckey] = build_cts(spec.model, grid, cfg.tau_s, r.braking.d_br, Footprint(spec.radius));
    r.cts = cts_cache[ckey];
    r.start_node = r.cts->find(spec.start);
    if (r.start_node < 0) {
      errors.push_back("robot " + spec.name + ": start state is not an obstacle-safe lattice state");
      continue;
    }
    r.reach = braking_reach_map(*grid, Footprint(spec.radius), r.braking.d_br);
    const std::string key = "pba|" + ws_key + "|" + ckey + "|" + fkey + "|" + std::to_string(r.start_node);
    r.product = build_product(r.cts, r.nba, {r.start_node}, key, cfg.time_weight);
    out.push_back(std::move(r));
  }
  if (!errors.empty()) throw ValidationError(errors);
  return out;
}

struct TrajectoryRow {
  double t = 0.0;
  int robot = 0;
  State x{};
  Mode mode = Mode::Free;
};

struct Violation {
  double t = 0.0;
  std::string kind;
  int robot = -1;
  int other = -1;
  double value = 0.0;
};

// Footprint overlaps and footprints leaving free space at one instant.
inline std::vector<Violation> safety_monitor(double t, const std::vector<Vec2>& pos, const std::vector<double>& radii,
                                             const Workspace& ws, const std::vector<int>& ids = {}) {
  std::vector<Violation> out;
  auto id = [&](std::size_t i) { return ids.empty() ? static_cast<int>(i) : ids[i]; };
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (std::size_t j = i + 1; j < pos.size(); ++j) {
      const double d = distance(pos[i], pos[j]);
      if (!(d > radii[i] + radii[j])) out.push_back({t, "collision", id(i), id(j), d});
    }
    const Segment p{pos[i], pos[i]};
    const double d = dist_to_obstacles(p, ws.obstacle_polygons());
    if (!(d > radii[i])) out.push_back({t, "obstacle", id(i), -1, d});
    const double b = dist_to_boundary(p, ws.bounds);
    if (b < radii[i] - 1e-9) out.push_back({t, "workspace", id(i), -1, b});
  }
  return out;
}

struct RobotStats {
  std::string name;
  int surveillance_rounds = 0;
  std::map<std::string, int> visits;
  double emerg_time = 0.0;
  double longest_emerg = 0.0;
  bool deadlock = false;
  int replans = 0;
  int replan_failures = 0;
  int emerg_entries = 0;
  int restarts = 0;
  int livelock_violations = 0;
  bool frontier_lost = false;
};

struct SimReport {
  std::vector<TrajectoryRow> rows;
  std::vector<nlohmann::json> events;
  std::vector<Violation> violations;             // safety
  std::vector<Violation> constraint_violations;  // dynamics bounds
  int witness_checks = 0;
  int witness_counterexamples = 0;
  int ct_rounds = 0;
  int ct_pairs = 0;
  int rounds = 0;
  std::vector<double> replan_seconds;  // wall clock, kept out of events
  std::vector<RobotStats> robots;
  std::vector<std::string> warnings;
  bool aborted = false;
  double end_time = 0.0;

  std::optional<double> atlr() const {
    if (replan_seconds.empty()) return std::nullopt;
    double s = 0;
    for (double v : replan_seconds) s += v;
    return s / static_cast<double>(replan_seconds.size());
  }
  std::optional<double> mtlr() const {
    if (replan_seconds.empty()) return std::nullopt;
    return *std::max_element(replan_seconds.begin(), replan_seconds.end());
  }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Simulator {
 public:
  Simulator(SimConfig cfg, std::vector<RobotOffline> offline, std::shared_ptr<const Grid> grid)
      : cfg_(std::move(cfg)), off_(std::move(offline)), grid_(std::move(grid)) {
    if (cfg_.eta < 0) cfg_.eta = cfg_.grid_size;
    const std::size_t n = off_.size();
    robots_.resize(n);
    report_.robots.resize(n);
    report_.warnings = config_warnings(cfg_);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = robots_[i];
      const auto& o = off_[i];
      InitialPlan ip = initial_plan(o.product.pba, o.product.potentials, 0.0);
      r.plan = ip.plan;
      r.reference = ip.plan;
      r.frontier = initial_frontier(o.product.pba, o.start_node);
      r.last_node = o.start_node;
      r.run_state = o.product.pba.s_of(ip.lasso.prefix.front());
      r.plan_potential = ip.lasso.potential;
      report_.robots[i].name = o.spec.name;
      for (const auto& a : o.recurrence) report_.robots[i].visits[a] = 0;
      r.labels = grid_->label_of(grid_->cell_of(position(o.spec.start)));
    }
  }

  const SimReport& report() const { return report_; }

  SimReport run() {
    const double start = 0.0;
    const int steps_per_round = std::max(1, static_cast<int>(std::lround(cfg_.delta / cfg_.h)));
    const double h = cfg_.delta / steps_per_round;
    const int total_rounds = static_cast<int>(std::ceil(cfg_.duration / cfg_.delta - 1e-9));
    record_rows(start);
    for (int k = 0; k < total_rounds && !report_.aborted; ++k) {
      const double t_k = k * cfg_.delta;
      round(k, t_k);
      for (int s = 1; s <= steps_per_round && !report_.aborted; ++s) {
        const double t = (static_cast<double>(k) * steps_per_round + s) * h;
        step(t - h, t);
      }
      report_.rounds = k + 1;
    }
    report_.end_time = report_.rounds * cfg_.delta;
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      auto& st = report_.robots[i];
      if (robots_[i].mode == Mode::Emerg) {
        const double span = report_.end_time - robots_[i].emerg_since;
        st.longest_emerg = std::max(st.longest_emerg, span);
        if (span > cfg_.t_max) st.deadlock = true;
      }
    }
    return report_;
  }

 private:
  struct RobotRun {
    Mode mode = Mode::Free;
    Plan plan;
    Plan reference;  // last plan not produced by braking
    Frontier frontier;
    int last_node = -1;
    int run_state = -1;  // automaton state of the followed plan, -1 if unknown
    double plan_potential = 0.0;
    double emerg_since = 0.0;
    ltl::Letter labels;
    std::set<std::string> pending_targets;
  };

  void event(nlohmann::json e) { report_.events.push_back(std::move(e)); }

  void set_mode(std::size_t i, Mode m, double t, const char* why) {
    auto& r = robots_[i];
    if (r.mode == m) return;
    auto& st = report_.robots[i];
    if (r.mode == Mode::Emerg) {
      const double span = t - r.emerg_since;
      st.longest_emerg = std::max(st.longest_emerg, span);
      if (span > cfg_.t_max) st.deadlock = true;
      ++st.restarts;
    }
    if (m == Mode::Emerg) {
      r.emerg_since = t;
      ++st.emerg_entries;
    }
    const Vec2 p = r.plan.position_at(t);
    event({{"t", t}, {"type", "mode"}, {"robot", off_[i].spec.id}, {"from", to_string(r.mode)},
           {"to", to_string(m)}, {"event", why}, {"x", p.x}, {"y", p.y}});
    r.mode = m;
  }

  ReservationSchedule schedule_of(std::size_t i, double t_k) const {
    const auto& o = off_[i];
    return build_schedule(o.spec.id, robots_[i].plan, t_k, cfg_.R, o.braking.t_br, o.reach, *grid_, cfg_.schedule_dt);
  }

  bool parked(std::size_t j, double t_k) const { return robots_[j].plan.stationary_from() <= t_k; }

  // A robot at rest for good only ever occupies its footprint.
  void reserve_parked(std::size_t j, double t_k, Reservations& ni) const {
    ni.hold(Disc{robots_[j].plan.position_at(t_k), off_[j].spec.radius});
  }

  // Reservation held by a lower-priority robot that is still replanning: it
  // either finishes its running segment or brakes where it stands.
  void reserve_committed(std::size_t j, double t_k, Reservations& ni) const {
    const auto& o = off_[j];
    if (parked(j, t_k)) return reserve_parked(j, t_k, ni);
    auto [t_end, segs] = robots_[j].plan.commit_to_node(t_k, [&](const State& x) { return o.cts->find(x) >= 0; });
    const Vec2 p = robots_[j].plan.position_at(t_k);
    ni.hold(Disc{p, o.spec.radius + o.braking.d_br});
    CellSet cells;
    for (const auto& s : segs) {
      const Vec2 a = position(s.x0), b = position(detail::flow(o.spec.model, s.x0, s.u, s.duration));
      for (CellId c : grid_->regions_intersecting(Capsule{{a, b}, 0.0})) cells.push_back(c);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    for (CellId c : reach_of(o.reach, cells)) ni.add(c, {t_k, t_end + o.braking.t_br});
  }

  bool try_replan(std::size_t i, double t_k, int k, const Reservations& ni, int attempt) {
    const auto& o = off_[i];
    auto& r = robots_[i];
    ReplanRequest rq;
    rq.pba = &o.product.pba;
    rq.pot = &o.product.potentials;
    rq.reach = &o.reach;
    rq.t_br = o.braking.t_br;
    rq.current = &r.plan;
    rq.t_k = t_k;
    rq.frontier = r.run_state >= 0 ? Frontier{r.run_state} : r.frontier;
    rq.R = cfg_.R;
    rq.eta = cfg_.eta;
    rq.n_max = cfg_.n_max;
    rq.seed = mix_seed(mix_seed(cfg_.seed, static_cast<std::uint64_t>(o.spec.id)),
                       static_cast<std::uint64_t>(k) * 4 + static_cast<std::uint64_t>(attempt));
    rq.ni = &ni;
    rq.reference = &r.reference;
    const auto w0 = std::chrono::steady_clock::now();
    ReplanResult res;
    std::string failure;
    try {
      res = replan(rq);
    } catch (const UnsatisfiableError& e) {
      failure = e.what();
    }
    const auto w1 = std::chrono::steady_clock::now();
    report_.replan_seconds.push_back(std::chrono::duration<double>(w1 - w0).count());
    auto& st = report_.robots[i];
    ++st.replans;
    const bool ok = res.plan.has_value();
    if (!ok) ++st.replan_failures;
    event({{"t", t_k}, {"type", "replan"}, {"robot", o.spec.id}, {"ok", ok},
           {"nodes", static_cast<int>(res.tree.nodes.size())}, {"iterations", res.tree.iterations},
           {"reason", ok ? std::string() : (failure.empty() ? res.reason : failure)}});
    if (ok) {
      r.plan = *res.plan;
      r.reference = r.plan;
      r.plan_potential = res.potential;
    }
    return ok;
  }

  void round(int k, double t_k) {
    const std::size_t n = robots_.size();
    std::vector<Vec2> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = robots_[i].plan.position_at(t_k);
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && distance(pos[i], pos[j]) <= cfg_.R) nbrs[i].push_back(j);

    // broadcast: every robot publishes its occupancy record; receivers rebuild
    // the reservation from the sender's static braking data
    std::vector<ReservationSchedule> own(n), heard(n);
    for (std::size_t i = 0; i < n; ++i) {
      own[i] = schedule_of(i, t_k);
      const Broadcast b = make_broadcast(own[i], robots_[i].mode, 0, 0, off_[i].spec.p0);
      heard[i] = schedule_from_broadcast(b, own[i].t_fl, off_[i].braking.t_br, off_[i].reach);
    }
    std::vector<std::vector<std::size_t>> conflicts(n);
    int pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j : nbrs[i]) {
        if (schedules_conflict(own[i], heard[j])) {
          conflicts[i].push_back(j);
          if (i < j) ++pairs;
        }
      }
    }
    if (pairs > 0) {
      ++report_.ct_rounds;
      report_.ct_pairs += pairs;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (conflicts[i].empty()) continue;
      nlohmann::json with = nlohmann::json::array();
      for (std::size_t j : conflicts[i]) with.push_back(off_[j].spec.id);
      event({{"t", t_k}, {"type", "conflict"}, {"robot", off_[i].spec.id}, {"with", with}});
    }
    no_conflict_witness(t_k, own, nbrs, conflicts);

    // livelock monitor: Free robots always hold a finite-potential plan
    for (std::size_t i = 0; i < n; ++i) {
      if (robots_[i].mode != Mode::Free) continue;
      const auto& o = off_[i];
      if (potential_of(o.product.pba, robots_[i].last_node, robots_[i].frontier, o.product.potentials) == kInf) {
        ++report_.robots[i].livelock_violations;
        report_.robots[i].frontier_lost = robots_[i].frontier.empty();
      }
    }

    std::vector<Mode> mode_at_tk(n);
    for (std::size_t i = 0; i < n; ++i) mode_at_tk[i] = robots_[i].mode;
    std::vector<char> busy(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (conflicts[i].empty() || robots_[i].mode == Mode::Emerg) continue;
      set_mode(i, mode_transition(robots_[i].mode, ModeEvent::ConflictsDetected), t_k, "conflicts_detected");
      busy[i] = 1;
    }
    std::vector<PriorityState> ps(n);
    for (std::size_t i = 0; i < n; ++i)
      ps[i] = {off_[i].spec.id, static_cast<int>(nbrs[i].size()), static_cast<int>(conflicts[i].size()),
               off_[i].spec.p0, robots_[i].mode};
    std::vector<std::set<std::size_t>> higher(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!busy[i]) continue;
      std::vector<PriorityState> ns;
      for (std::size_t j : nbrs[i]) ns.push_back(ps[j]);
      const auto ids = assign_priorities(ps[i], ns);
      for (std::size_t j : nbrs[i])
        if (std::binary_search(ids.begin(), ids.end(), off_[j].spec.id)) higher[i].insert(j);
    }

    // replanning waves
    std::vector<char> pending = busy;
    while (std::find(pending.begin(), pending.end(), 1) != pending.end()) {
      std::vector<std::size_t> wave;
      for (std::size_t i = 0; i < n; ++i) {
        if (!pending[i]) continue;
        bool ready = true;
        for (std::size_t j : higher[i])
          if (pending[j]) ready = false;
        if (ready) wave.push_back(i);
      }
      if (wave.empty()) {
        for (std::size_t i = 0; i < n; ++i)
          if (pending[i]) {
            wave.push_back(i);
            break;
          }
        event({{"t", t_k}, {"type", "wave_fallback"}, {"robot", off_[wave[0]].spec.id}});
      }
      for (std::size_t i : wave) {
        Reservations ni;
        for (std::size_t j : nbrs[i]) {
          if (parked(j, t_k)) {
            reserve_parked(j, t_k, ni);
          } else if (higher[i].count(j)) {
            ni.add(own[j]);
          } else {
            reserve_committed(j, t_k, ni);
          }
        }
        if (try_replan(i, t_k, k, ni, 0)) {
          set_mode(i, mode_transition(Mode::Busy, ModeEvent::PlanFound), t_k, "plan_found");
        } else {
          set_mode(i, mode_transition(Mode::Busy, ModeEvent::PlanInfeasible), t_k, "plan_infeasible");
          brake(i, t_k);
        }
        own[i] = schedule_of(i, t_k);
        pending[i] = 0;
      }
    }

    // stopped Emerg robots try to restart around everyone's current plans
    for (std::size_t i = 0; i < n; ++i) {
      if (mode_at_tk[i] != Mode::Emerg || robots_[i].mode != Mode::Emerg) continue;
      if (speed(off_[i].spec.model, robots_[i].plan.state_at(t_k)) > 1e-9) continue;
      Reservations ni;
      for (std::size_t j : nbrs[i]) {
        if (parked(j, t_k)) {
          reserve_parked(j, t_k, ni);
        } else {
          ni.add(own[j]);
        }
      }
      if (try_replan(i, t_k, k, ni, 1)) {
        set_mode(i, mode_transition(Mode::Emerg, ModeEvent::RestartPossible), t_k, "restart_possible");
        own[i] = schedule_of(i, t_k);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (robots_[i].mode != Mode::Emerg) continue;
      auto& st = report_.robots[i];
      const double span = t_k - robots_[i].emerg_since;
      if (span > cfg_.t_max && !st.deadlock) {
        st.deadlock = true;
        event({{"t", t_k}, {"type", "deadlock"}, {"robot", off_[i].spec.id}});
      }
    }
  }

  void brake(std::size_t i, double t_k) {
    auto& r = robots_[i];
    const auto& o = off_[i];
    r.plan = braking_plan(*o.cts, o.braking, t_k, r.plan.state_at(t_k));
  }

  // Whenever a robot sees no conflict, its braking area stays clear of every
  // neighbor's over the span both schedules cover.
  void no_conflict_witness(double t_k, const std::vector<ReservationSchedule>& sched,
                     const std::vector<std::vector<std::size_t>>& nbrs,
                     const std::vector<std::vector<std::size_t>>& conflicts) {
    const double dt = cfg_.schedule_dt;
    for (std::size_t i = 0; i < robots_.size(); ++i) {
      if (!conflicts[i].empty()) continue;
      const auto& oi = off_[i];
      for (std::size_t j : nbrs[i]) {
        const auto& oj = off_[j];
        const double reach = oi.spec.radius + oi.braking.d_br + oj.spec.radius + oj.braking.d_br;
        const double H = std::max(schedule_horizon(cfg_.R, oi.spec.model.v_max, oi.braking.t_br),
                                  schedule_horizon(cfg_.R, oj.spec.model.v_max, oj.braking.t_br));
        const double t_end = std::min({sched[i].t_fl, sched[j].t_fl, t_k + H});
        ++report_.witness_checks;
        for (double t = t_k; t < t_end; t += dt) {
          const double d = distance(robots_[i].plan.position_at(t), robots_[j].plan.position_at(t));
          if (d <= reach - 1e-9) {
            ++report_.witness_counterexamples;
            event({{"t", t_k}, {"type", "witness_counterexample"}, {"robot", oi.spec.id}, {"other", oj.spec.id},
                   {"at", t}, {"distance", d}});
            break;
          }
        }
      }
    }
  }

  void record_rows(double t) {
    if (!cfg_.record_trajectories) return;
    for (std::size_t i = 0; i < robots_.size(); ++i)
      report_.rows.push_back({t, off_[i].spec.id, robots_[i].plan.state_at(t), robots_[i].mode});
  }

  void step(double ta, double tb) {
    const std::size_t n = robots_.size();
    std::vector<Vec2> pos(n);
    std::vector<double> radii(n);
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = robots_[i];
      const auto& o = off_[i];
      const RobotModel& m = o.spec.model;
      const State x = r.plan.state_at(tb);
      pos[i] = position(x);
      radii[i] = o.spec.radius;
      ids[i] = o.spec.id;
      // the input applied over (ta, tb]
      const Input u = r.plan.input_at(0.5 * (ta + tb));
      if (!input_admissible(m, u)) report_.constraint_violations.push_back({tb, "input", o.spec.id, -1, 0.0});
      if (!state_admissible(m, x)) report_.constraint_violations.push_back({tb, "velocity", o.spec.id, -1, speed(m, x)});
      for (const auto& a : r.plan.arrivals(ta, tb)) {
        if (a.node < 0) continue;
        r.frontier = update_frontier(r.frontier, o.product.pba, a.node);
        r.last_node = a.node;
        const bool known = std::binary_search(r.frontier.begin(), r.frontier.end(), a.nba_state);
        r.run_state = known ? a.nba_state : -1;
      }
      if (r.mode == Mode::Emerg) report_.robots[i].emerg_time += tb - ta;
      if (grid_->inside(pos[i])) observe(i, grid_->label_of(grid_->cell_of(pos[i])), tb);
    }
    auto v = safety_monitor(tb, pos, radii, grid_->workspace(), ids);
    for (auto& e : v) {
      event({{"t", tb}, {"type", "violation"}, {"kind", e.kind}, {"robot", e.robot}, {"other", e.other},
             {"value", e.value}});
      report_.violations.push_back(e);
    }
    if (!v.empty() && cfg_.abort_on_violation) report_.aborted = true;
    record_rows(tb);
  }

  void observe(std::size_t i, const ltl::Letter& labels, double t) {
    auto& r = robots_[i];
    auto& st = report_.robots[i];
    const auto& targets = off_[i].recurrence;
    for (const auto& a : targets) {
      if (labels.count(a) && !r.labels.count(a)) {
        ++st.visits[a];
        event({{"t", t}, {"type", "visit"}, {"robot", off_[i].spec.id}, {"label", a}});
      }
      if (labels.count(a)) r.pending_targets.insert(a);
    }
    if (!targets.empty() && r.pending_targets.size() == targets.size()) {
      ++st.surveillance_rounds;
      r.pending_targets.clear();
      for (const auto& a : targets)
        if (labels.count(a)) r.pending_targets.insert(a);
    }
    r.labels = labels;
  }

  SimConfig cfg_;
  std::vector<RobotOffline> off_;
  std::shared_ptr<const Grid> grid_;
  std::vector<RobotRun> robots_;
  SimReport report_;
};

inline SimReport run(const SimConfig& cfg) {
  auto grid = std::make_shared<const Grid>(cfg.workspace, cfg.grid_size);
  auto off = precompute(cfg, grid);
  Simulator sim(cfg, std::move(off), grid);
  return sim.run();
}

}  // namespace mrc
