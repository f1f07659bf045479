#pragma once

// Reservation schedules, conflict detection, planning order and robot modes.

#include <functional>
#include <map>
#include <optional>

#include <json.hpp>

#include "mrc/geometry.hpp"
#include "mrc/trajectory.hpp"

namespace mrc {

using CellSet = std::vector<CellId>;

// M_i: for each cell, the cells a robot whose position lies in that cell may
// cover while braking.
struct BrakingReachMap {
  std::vector<CellSet> cells;

  const CellSet& operator()(CellId c) const { return cells.at(c); }
};

inline BrakingReachMap braking_reach_map(const Grid& grid, const Footprint& fp, double d_br) {
  BrakingReachMap m;
  m.cells.resize(grid.size());
  for (CellId c = 0; c < grid.size(); ++c)
    m.cells[c] = grid.regions_intersecting(InflatedRect{grid.cell_rect(c), fp.radius + d_br});
  return m;
}

// Union of M over a set of cells.
inline CellSet reach_of(const BrakingReachMap& m, const CellSet& cells) {
  CellSet out;
  for (CellId c : cells) out.insert(out.end(), m(c).begin(), m(c).end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

using PositionPath = std::function<Vec2(double)>;

// Visit of one cell during [begin, end).
struct CellVisit {
  CellId cell;
  Interval when;
};

// Sequence of cells occupied by path(t) for t in [t0, t1), sampled every h
// with each cell change located by bisection to 1e-6 s.
inline std::vector<CellVisit> traverse(const PositionPath& path, double t0, double t1, const Grid& grid,
                                       double h = 0.02) {
  std::vector<CellVisit> out;
  if (!(t1 > t0)) return out;
  auto cell_at = [&](double t) { return grid.cell_of(path(t)); };
  double t = t0;
  CellId cur = cell_at(t);
  double entered = t0;
  while (t < t1) {
    const double tn = std::min(t + h, t1);
    const CellId cn = cell_at(tn);
    if (cn == cur) {
      t = tn;
      continue;
    }
    double lo = t, hi = tn;
    while (hi - lo > 1e-7) {
      const double mid = 0.5 * (lo + hi);
      (cell_at(mid) == cur ? lo : hi) = mid;
    }
    out.push_back({cur, {entered, hi}});
    cur = cell_at(hi);
    entered = hi;
    t = hi;
  }
  out.push_back({cur, {entered, t1}});
  return out;
}

// Gamma: maximal half-open intervals during which the path lies in `region`.
inline std::vector<Interval> occupancy_intervals(const PositionPath& path, double t0, double t1, const Grid& grid,
                                                 CellId region, double h = 0.02) {
  IntervalSet s;
  for (const auto& v : traverse(path, t0, t1, grid, h))
    if (v.cell == region) s.add(v.when);
  return s.items();
}

struct RegionReservation {
  CellSet reserved;        // Res(region) = M(region)
  std::vector<Interval> gamma;
  IntervalSet intervals;   // gamma extended by the braking time
};

struct ReservationSchedule {
  int robot = -1;
  double t_k = 0.0;
  double t_fl = 0.0;
  double t_br = 0.0;
  std::map<CellId, RegionReservation> regions;           // keyed by S_i
  std::map<CellId, IntervalSet> by_cell;                 // reserved cell -> union of intervals

  CellSet traversed() const {
    CellSet out;
    for (const auto& [c, r] : regions) out.push_back(c);
    return out;
  }
};

// Assembles a schedule from occupancy intervals; reservations extend each
// interval by t_br on the right.
inline ReservationSchedule make_schedule(int robot, double t_k, double t_fl, double t_br,
                                         const std::map<CellId, std::vector<Interval>>& gamma,
                                         const BrakingReachMap& m) {
  ReservationSchedule s;
  s.robot = robot;
  s.t_k = t_k;
  s.t_fl = t_fl;
  s.t_br = t_br;
  for (const auto& [c, ivs] : gamma) {
    RegionReservation r;
    r.reserved = m(c);
    r.gamma = ivs;
    for (const auto& iv : ivs) r.intervals.add({iv.begin, iv.end + t_br});
    for (CellId rc : r.reserved)
      for (const auto& iv : r.intervals.items()) s.by_cell[rc].add(iv);
    s.regions.emplace(c, std::move(r));
  }
  return s;
}

inline double schedule_horizon(double R, double v_max, double t_br) { return 2 * R / v_max + t_br; }

// Schedule of `plan` from t_k until it first leaves B(p(t_k), R), truncated at
// t_k + H. When the plan comes to rest for good before that, the last
// occupied cell stays reserved indefinitely.
inline ReservationSchedule build_schedule(int robot, const Plan& plan, double t_k, double R, double t_br,
                                          const BrakingReachMap& m, const Grid& grid, double h = 0.02) {
  const Vec2 c = plan.position_at(t_k);
  const double H = schedule_horizon(R, plan.model().v_max, t_br);
  double t_fl = t_k + H;
  const double stop = std::max(plan.stationary_from(), t_k);
  for (double t = t_k; t < t_k + H && t < stop; t += h) {
    const double tn = std::min({t + h, t_k + H, stop});
    if (distance(plan.position_at(tn), c) > R) {
      double lo = t, hi = tn;
      while (hi - lo > 1e-7) {
        const double mid = 0.5 * (lo + hi);
        (distance(plan.position_at(mid), c) > R ? hi : lo) = mid;
      }
      t_fl = hi;
      break;
    }
  }
  const bool rests = stop <= t_fl;
  const double end = rests ? std::max(stop, t_k) : t_fl;
  auto path = [&](double t) { return plan.position_at(t); };
  std::map<CellId, std::vector<Interval>> gamma;
  auto visits = traverse(path, t_k, end, grid, h);
  if (visits.empty()) visits.push_back({grid.cell_of(plan.position_at(t_k)), {t_k, t_k}});
  if (rests) visits.back().when.end = kInf;
  for (const auto& v : visits) {
    auto& list = gamma[v.cell];
    if (!list.empty() && list.back().end >= v.when.begin) {
      list.back().end = std::max(list.back().end, v.when.end);
    } else {
      list.push_back(v.when);
    }
  }
  return make_schedule(robot, t_k, rests ? kInf : t_fl, t_br, gamma, m);
}

// Conflict test between two schedules: some reserved cell is shared with
// overlapping reservation intervals.
inline bool schedules_conflict(const ReservationSchedule& a, const ReservationSchedule& b) {
  auto ia = a.by_cell.begin();
  auto ib = b.by_cell.begin();
  while (ia != a.by_cell.end() && ib != b.by_cell.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      if (ia->second.intersects(ib->second)) return true;
      ++ia;
      ++ib;
    }
  }
  return false;
}

inline std::vector<int> detect_conflicts(const ReservationSchedule& mine,
                                         const std::vector<const ReservationSchedule*>& neighbors) {
  std::vector<int> out;
  for (const auto* n : neighbors)
    if (n->robot != mine.robot && schedules_conflict(mine, *n)) out.push_back(n->robot);
  std::sort(out.begin(), out.end());
  return out;
}

enum class Mode { Free, Busy, Emerg };
enum class ModeEvent { ConflictsDetected, PlanFound, PlanInfeasible, RestartPossible, NoConflict };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Free: return "Free";
    case Mode::Busy: return "Busy";
    case Mode::Emerg: return "Emerg";
  }
  return "?";
}

inline const char* to_string(ModeEvent e) {
  switch (e) {
    case ModeEvent::ConflictsDetected: return "conflicts_detected";
    case ModeEvent::PlanFound: return "plan_found";
    case ModeEvent::PlanInfeasible: return "plan_infeasible";
    case ModeEvent::RestartPossible: return "restart_possible";
    case ModeEvent::NoConflict: return "no_conflict";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "Free") return Mode::Free;
  if (s == "Busy") return Mode::Busy;
  if (s == "Emerg") return Mode::Emerg;
  throw Error("unknown mode '" + s + "'");
}

inline Mode mode_transition(Mode m, ModeEvent e) {
  using E = ModeEvent;
  switch (m) {
    case Mode::Free:
      if (e == E::ConflictsDetected) return Mode::Busy;
      if (e == E::NoConflict) return Mode::Free;
      break;
    case Mode::Busy:
      if (e == E::PlanFound) return Mode::Free;
      if (e == E::PlanInfeasible) return Mode::Emerg;
      break;
    case Mode::Emerg:
      if (e == E::RestartPossible) return Mode::Free;
      if (e == E::PlanInfeasible || e == E::ConflictsDetected || e == E::NoConflict) return Mode::Emerg;
      break;
  }
  throw Error(std::string("invalid mode transition: ") + to_string(m) + " on " + to_string(e));
}

struct PriorityState {
  int robot = -1;
  int n_neighbors = 0;
  int n_conflicts = 0;
  int p0 = 0;
  Mode mode = Mode::Free;
};

// a has advantage over b.
inline bool has_advantage(const PriorityState& a, const PriorityState& b) {
  if (b.n_conflicts == 0) return false;
  return a.n_neighbors > b.n_neighbors || (a.n_neighbors == b.n_neighbors && a.n_conflicts > b.n_conflicts);
}

// Y_i: neighbors that plan before `self`.
inline std::vector<int> assign_priorities(const PriorityState& self, const std::vector<PriorityState>& neighbors) {
  std::vector<int> out;
  for (const auto& j : neighbors) {
    if (j.robot == self.robot) continue;
    bool higher;
    if (j.mode == Mode::Emerg || j.n_conflicts == 0) {
      higher = true;
    } else if (has_advantage(j, self)) {
      higher = true;
    } else {
      higher = !has_advantage(self, j) && j.p0 > self.p0;
    }
    if (higher) out.push_back(j.robot);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// In-simulator broadcast record.
struct Broadcast {
  int robot = -1;
  double t_k = 0.0;
  Mode mode = Mode::Free;
  int n_neighbors = 0;
  int n_conflicts = 0;
  int p0 = 0;
  std::vector<std::pair<CellId, std::vector<Interval>>> regions;
};

inline Broadcast make_broadcast(const ReservationSchedule& s, Mode mode, int n_neighbors, int n_conflicts, int p0) {
  Broadcast b{s.robot, s.t_k, mode, n_neighbors, n_conflicts, p0, {}};
  for (const auto& [c, r] : s.regions) b.regions.push_back({c, r.gamma});
  return b;
}

// Receiver side: rebuilds the sender's schedule from the record and the
// sender's (static) braking reach map and braking time.
inline ReservationSchedule schedule_from_broadcast(const Broadcast& b, double t_fl, double t_br,
                                                   const BrakingReachMap& m) {
  std::map<CellId, std::vector<Interval>> gamma(b.regions.begin(), b.regions.end());
  return make_schedule(b.robot, b.t_k, t_fl, t_br, gamma, m);
}

namespace detail {
inline nlohmann::json time_json(double t) { return std::isinf(t) ? nlohmann::json(nullptr) : nlohmann::json(t); }
inline double time_from_json(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }
}  // namespace detail

inline nlohmann::json to_json(const Broadcast& b) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& [c, ivs] : b.regions) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& iv : ivs) list.push_back({detail::time_json(iv.begin), detail::time_json(iv.end)});
    regions.push_back({{"region", c}, {"intervals", list}});
  }
  return {{"robot", b.robot},     {"t_k", b.t_k},           {"mode", to_string(b.mode)},
          {"n_neighbors", b.n_neighbors}, {"n_conflicts", b.n_conflicts}, {"p0", b.p0},
          {"regions", regions}};
}

inline Broadcast broadcast_from_json(const nlohmann::json& j) {
  Broadcast b;
  b.robot = j.at("robot").get<int>();
  b.t_k = j.at("t_k").get<double>();
  b.mode = mode_from_string(j.at("mode").get<std::string>());
  b.n_neighbors = j.at("n_neighbors").get<int>();
  b.n_conflicts = j.at("n_conflicts").get<int>();
  b.p0 = j.at("p0").get<int>();
  for (const auto& r : j.at("regions")) {
    std::vector<Interval> ivs;
    for (const auto& iv : r.at("intervals"))
      ivs.push_back({detail::time_from_json(iv.at(0)), detail::time_from_json(iv.at(1))});
    b.regions.push_back({r.at("region").get<CellId>(), ivs});
  }
  return b;
}

}  // namespace mrc
