#include <gtest/gtest.h>

#include "support.hpp"

using namespace mrc;

namespace {

Grid open_grid(double w, double g) {
  Workspace ws;
  ws.bounds = {0, 0, w, w};
  return Grid(ws, g);
}

double rect_gap(const Rect& a, const Rect& b) {
  const double dx = std::max({a.x0 - b.x1, 0.0, b.x0 - a.x1});
  const double dy = std::max({a.y0 - b.y1, 0.0, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

// Reservation overlap straight from the occupancy lists.
bool brute_conflict(const std::map<CellId, std::vector<Interval>>& ga, double ta,
                    const std::map<CellId, std::vector<Interval>>& gb, double tb, const BrakingReachMap& m) {
  for (const auto& [ca, la] : ga)
    for (const auto& [cb, lb] : gb) {
      bool shared = false;
      for (CellId x : m(ca))
        for (CellId y : m(cb)) shared |= x == y;
      if (!shared) continue;
      for (const auto& ia : la)
        for (const auto& ib : lb)
          if (std::max(ia.begin, ib.begin) < std::min(ia.end + ta, ib.end + tb)) return true;
    }
  return false;
}

std::map<CellId, std::vector<Interval>> random_gamma(std::mt19937_64& rng, int cells) {
  std::uniform_int_distribution<int> C(0, cells - 1), K(1, 4);
  std::uniform_real_distribution<double> T(0, 10), L(0.05, 2);
  std::map<CellId, std::vector<Interval>> g;
  const int k = K(rng);
  for (int i = 0; i < k; ++i) {
    const double b = T(rng);
    auto& list = g[C(rng)];
    list.push_back({b, b + L(rng)});
    std::sort(list.begin(), list.end(), [](auto& x, auto& y) { return x.begin < y.begin; });
  }
  return g;
}

Plan straight_plan(Vec2 from, Vec2 dir, double speed, double t0, double duration) {
  const RobotModel m{ModelKind::DoubleIntegrator, 2.0, 0.0, 1.0};
  PlanSegment move{{from.x, from.y, dir.x * speed, dir.y * speed}, {0, 0}, duration, -1};
  const Vec2 end = from + dir * (speed * duration);
  PlanSegment rest{{end.x, end.y, 0, 0}, {0, 0}, 1.0, -1};
  return Plan(m, t0, {move}, {rest});
}

}  // namespace

TEST(ReachMap, MatchesDenseOracle) {
  const Grid g = open_grid(5, 0.5);
  const Footprint fp(0.2);
  const double d_br = 0.3;
  const auto m = braking_reach_map(g, fp, d_br);
  for (CellId c = 0; c < g.size(); ++c) {
    const std::set<CellId> got(m(c).begin(), m(c).end());
    const Rect rc = g.cell_rect(c);
    for (CellId o = 0; o < g.size(); ++o) {
      // a footprint centered somewhere in c, inflated by d_br, touches o
      double best = kInf;
      for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
          const Vec2 p{rc.x0 + (rc.x1 - rc.x0) * i / 20, rc.y0 + (rc.y1 - rc.y0) * j / 20};
          best = std::min(best, rect_gap(g.cell_rect(o), {p.x, p.y, p.x, p.y}));
        }
      EXPECT_EQ(got.count(o) > 0, best <= 0.5 + 1e-9) << c << " -> " << o;
    }
    EXPECT_TRUE(got.count(c));
  }
  // reach 0.5 from a 0.5 cell: the 5x5 block minus its corners
  EXPECT_EQ(m(g.id(4, 4)).size(), 21u);
}

TEST(Occupancy, StraightLineIntervals) {
  const Grid g = open_grid(4, 1.0);
  auto path = [](double t) { return Vec2{0.25 + t, 0.5}; };
  const auto a = occupancy_intervals(path, 0, 2, g, g.id(0, 0));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NEAR(a[0].begin, 0.0, 1e-12);
  EXPECT_NEAR(a[0].end, 0.75, 1e-6);
  const auto b = occupancy_intervals(path, 0, 2, g, g.id(1, 0));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(b[0].begin, 0.75, 1e-6);
  EXPECT_NEAR(b[0].end, 1.75, 1e-6);
  EXPECT_TRUE(occupancy_intervals(path, 0, 2, g, g.id(3, 0)).empty());
}

TEST(Occupancy, ReturningPathGivesTwoIntervals) {
  const Grid g = open_grid(4, 1.0);
  auto path = [](double t) { return Vec2{0.5 + std::fabs(t - 1.0) * -1 + 1.0, 0.5}; };  // 0.5 -> 1.5 -> 0.5
  const auto a = occupancy_intervals(path, 0, 2, g, g.id(0, 0));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_NEAR(a[0].end, 0.5, 1e-6);
  EXPECT_NEAR(a[1].begin, 1.5, 1e-6);
  EXPECT_NEAR(a[1].end, 2.0, 1e-12);
}

TEST(Schedule, RestingRobotReservesItsCellForever) {
  const Grid g = open_grid(4, 0.5);
  const auto m = braking_reach_map(g, Footprint(0.2), 0.25);
  const RobotModel model{ModelKind::Unicycle, 1.0, 0.5, 2.0};
  const Plan p = Plan::hold(model, 0.0, {1.25, 1.25, 0, 0});
  const auto s = build_schedule(3, p, 5.0, 3.5, 0.5, m, g);
  EXPECT_EQ(s.robot, 3);
  EXPECT_EQ(s.t_fl, kInf);
  ASSERT_EQ(s.regions.size(), 1u);
  const auto& r = s.regions.begin()->second;
  EXPECT_EQ(s.regions.begin()->first, g.cell_of({1.25, 1.25}));
  ASSERT_EQ(r.gamma.size(), 1u);
  EXPECT_EQ(r.gamma[0].begin, 5.0);
  EXPECT_EQ(r.gamma[0].end, kInf);
  EXPECT_EQ(r.reserved, m(s.regions.begin()->first));
  for (CellId c : r.reserved) EXPECT_TRUE(s.by_cell.at(c).contains(1e9));
}

TEST(Schedule, StopsAtTheSensingBoundary) {
  const Grid g = open_grid(10, 0.5);
  const auto m = braking_reach_map(g, Footprint(0.2), 0.25);
  const Plan p = straight_plan({0.25, 5.25}, {1, 0}, 1.0, 0.0, 9.0);
  const auto s = build_schedule(1, p, 0.0, 2.0, 0.5, m, g);
  EXPECT_NEAR(s.t_fl, 2.0, 1e-6);
  // cells beyond x = 2.25 are never traversed
  for (CellId c : s.traversed()) EXPECT_LE(g.center(c).x, 2.5);
  // each interval is stretched by the braking time
  const auto& r = s.regions.at(g.cell_of({0.25, 5.25}));
  EXPECT_NEAR(r.intervals.items().front().end, r.gamma.front().end + 0.5, 1e-12);
}

TEST(Schedule, HorizonCapsFastReturningPlans) {
  EXPECT_DOUBLE_EQ(schedule_horizon(3.5, 1.0, 0.5), 7.5);
}

TEST(Conflicts, MatchBruteForceAndAreSymmetric) {
  const Grid g = open_grid(3, 0.5);
  const auto m = braking_reach_map(g, Footprint(0.1), 0.1);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> Tb(0, 1);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto ga = random_gamma(rng, g.size()), gb = random_gamma(rng, g.size());
    const double ta = Tb(rng), tb = Tb(rng);
    const auto a = make_schedule(1, 0, 10, ta, ga, m), b = make_schedule(2, 0, 10, tb, gb, m);
    const bool want = brute_conflict(ga, ta, gb, tb, m);
    ASSERT_EQ(schedules_conflict(a, b), want) << "case " << i;
    ASSERT_EQ(schedules_conflict(b, a), want);
    hits += want;
  }
  EXPECT_GT(hits, 100);
  EXPECT_LT(hits, 1900);
}

TEST(Conflicts, HeadOnRobotsConflictParallelOnesDoNot) {
  const Grid g = open_grid(10, 0.5);
  const auto m = braking_reach_map(g, Footprint(0.2), 0.25);
  const Plan east = straight_plan({2.25, 5.25}, {1, 0}, 1.0, 0, 5);
  const Plan west = straight_plan({7.25, 5.25}, {-1, 0}, 1.0, 0, 5);
  const Plan far = straight_plan({2.25, 1.25}, {1, 0}, 1.0, 0, 5);
  const auto a = build_schedule(1, east, 0, 3.5, 0.5, m, g);
  const auto b = build_schedule(2, west, 0, 3.5, 0.5, m, g);
  const auto c = build_schedule(3, far, 0, 3.5, 0.5, m, g);
  EXPECT_EQ(detect_conflicts(a, {&a, &b, &c}), (std::vector<int>{2}));
  EXPECT_EQ(detect_conflicts(c, {&a, &b}), (std::vector<int>{}));
}

TEST(Priorities, Examples) {
  PriorityState a{1, 3, 1, 10, Mode::Busy}, b{2, 2, 2, 20, Mode::Busy};
  EXPECT_TRUE(has_advantage(a, b));
  EXPECT_EQ(assign_priorities(b, {a}), (std::vector<int>{1}));
  EXPECT_TRUE(assign_priorities(a, {b}).empty());
  // equal neighbour counts: more conflicts wins
  PriorityState c{3, 3, 2, 5, Mode::Busy};
  EXPECT_EQ(assign_priorities(a, {c}), (std::vector<int>{3}));
  // full tie: higher static score goes first
  PriorityState d{4, 3, 1, 11, Mode::Busy};
  EXPECT_EQ(assign_priorities(a, {d}), (std::vector<int>{4}));
  EXPECT_TRUE(assign_priorities(d, {a}).empty());
  // robots in Emerg or without conflicts keep their plans
  PriorityState e{5, 0, 0, 1, Mode::Emerg}, f{6, 1, 0, 2, Mode::Free};
  EXPECT_EQ(assign_priorities(a, {e, f}), (std::vector<int>{5, 6}));
  EXPECT_FALSE(has_advantage(a, f));
}

TEST(Priorities, WaitsForIsAcyclic) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::vector<int>> conflicts;
    const auto ps = mrc::testing::random_ensemble(rng, conflicts);
    ASSERT_FALSE(mrc::testing::waits_for_has_cycle(ps, conflicts)) << "ensemble " << i;
  }
}

TEST(Modes, TransitionTable) {
  EXPECT_EQ(mode_transition(Mode::Free, ModeEvent::ConflictsDetected), Mode::Busy);
  EXPECT_EQ(mode_transition(Mode::Free, ModeEvent::NoConflict), Mode::Free);
  EXPECT_EQ(mode_transition(Mode::Busy, ModeEvent::PlanFound), Mode::Free);
  EXPECT_EQ(mode_transition(Mode::Busy, ModeEvent::PlanInfeasible), Mode::Emerg);
  EXPECT_EQ(mode_transition(Mode::Emerg, ModeEvent::RestartPossible), Mode::Free);
  EXPECT_EQ(mode_transition(Mode::Emerg, ModeEvent::PlanInfeasible), Mode::Emerg);
  EXPECT_THROW(mode_transition(Mode::Free, ModeEvent::PlanFound), Error);
  EXPECT_THROW(mode_transition(Mode::Busy, ModeEvent::RestartPossible), Error);
  EXPECT_THROW(mode_transition(Mode::Emerg, ModeEvent::PlanFound), Error);
  EXPECT_THROW(mode_from_string("Idle"), Error);
}

TEST(Broadcast, JsonRoundTrip) {
  Broadcast b{7, 12.5, Mode::Emerg, 3, 2, 42, {{10, {{12.5, 13.0}, {14.0, kInf}}}, {11, {{13.0, 13.25}}}}};
  const auto j = to_json(b);
  EXPECT_TRUE(j["regions"][0]["intervals"][1][1].is_null());
  const Broadcast c = broadcast_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(c.robot, 7);
  EXPECT_EQ(c.t_k, 12.5);
  EXPECT_EQ(c.mode, Mode::Emerg);
  EXPECT_EQ(c.n_neighbors, 3);
  EXPECT_EQ(c.n_conflicts, 2);
  EXPECT_EQ(c.p0, 42);
  ASSERT_EQ(c.regions.size(), 2u);
  EXPECT_EQ(c.regions[0].second[1].end, kInf);
  EXPECT_EQ(c.regions[1].first, 11);
  EXPECT_EQ(c.regions[1].second[0].end, 13.25);
}

TEST(Broadcast, ReceiverRebuildsTheSchedule) {
  const Grid g = open_grid(10, 0.5);
  const auto m = braking_reach_map(g, Footprint(0.2), 0.25);
  const auto s = build_schedule(1, straight_plan({2.25, 5.25}, {1, 0}, 1.0, 0, 5), 0, 3.5, 0.5, m, g);
  const auto b = make_broadcast(s, Mode::Busy, 1, 1, 9);
  const auto r = schedule_from_broadcast(broadcast_from_json(to_json(b)), s.t_fl, s.t_br, m);
  EXPECT_EQ(r.traversed(), s.traversed());
  ASSERT_EQ(r.by_cell.size(), s.by_cell.size());
  for (const auto& [c, set] : s.by_cell) EXPECT_EQ(r.by_cell.at(c).items().size(), set.items().size());
}
