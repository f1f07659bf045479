#include <gtest/gtest.h>

#include "support.hpp"

using namespace mrc;

namespace {

RobotSpec robot(int id, Vec2 p, double heading, const std::string& f) {
  RobotSpec r;
  r.id = id;
  r.name = "r" + std::to_string(id);
  r.model = {ModelKind::Unicycle, 1.0, 0.5, 2.0};
  r.radius = 0.2;
  r.braking = BrakingKind::StraightLine;
  r.formula = f;
  r.start = {p.x, p.y, heading, 0.0};
  r.p0 = id;
  return r;
}

SimConfig open_config(double duration) {
  SimConfig c;
  c.workspace.bounds = {0, 0, 12, 12};
  c.workspace.labels = {{"A", Polygon::rect(1, 1, 2, 2)},
                        {"B", Polygon::rect(10, 10, 11, 11)},
                        {"C", Polygon::rect(1, 10, 2, 11)},
                        {"D", Polygon::rect(10, 1, 11, 2)}};
  c.grid_size = 0.5;
  c.duration = duration;
  c.schedule_dt = 0.02;
  return c;
}

// Right half is a one-lane dead end; P is a single cell inside it.
SimConfig dead_end_config() {
  SimConfig c;
  c.workspace.bounds = {0, 0, 10, 4.5};
  c.workspace.obstacles = {{"O1", Polygon::rect(5, 0, 10, 1.5)}, {"O2", Polygon::rect(5, 3, 10, 4.5)}};
  c.workspace.labels = {{"A", Polygon::rect(1, 1, 2, 2)}, {"P", Polygon::rect(6, 2, 6.5, 2.5)}};
  c.grid_size = 0.5;
  c.duration = 40;
  c.t_max = 30;
  c.robots = {robot(1, {9.25, 2.25}, kPi, "[](W & !O) & []<>A"), robot(2, {6.25, 2.25}, 0.0, "[](W & !O) & [](P)")};
  return c;
}

}  // namespace

TEST(SafetyMonitor, Examples) {
  Workspace ws;
  ws.bounds = {0, 0, 10, 10};
  ws.obstacles = {{"O", Polygon::rect(4, 4, 5, 5)}};
  EXPECT_TRUE(safety_monitor(0, {{1, 1}, {2, 1}}, {0.2, 0.2}, ws).empty());
  // touching counts as contact
  auto v = safety_monitor(1.5, {{1, 1}, {1.4, 1}}, {0.2, 0.2}, ws, {7, 9});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, "collision");
  EXPECT_EQ(v[0].robot, 7);
  EXPECT_EQ(v[0].other, 9);
  EXPECT_EQ(v[0].t, 1.5);
  v = safety_monitor(0, {{3.9, 4.5}}, {0.2}, ws);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, "obstacle");
  v = safety_monitor(0, {{0.1, 5}}, {0.2}, ws);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, "workspace");
  EXPECT_EQ(safety_monitor(0, {{0.2, 5}}, {0.2}, ws).size(), 0u);
}

TEST(Config, ProblemsAndWarnings) {
  SimConfig c = open_config(10);
  c.robots = {robot(1, {3.25, 3.25}, 0, "[]<>A"), robot(2, {8.25, 8.25}, 0, "[]<>B")};
  EXPECT_TRUE(config_problems(c).empty());
  EXPECT_TRUE(config_warnings(c).empty());
  c.robots[1].p0 = 1;
  c.time_weight = -1;
  EXPECT_EQ(config_problems(c).size(), 2u);
  c = open_config(10);
  c.robots = {robot(1, {3.25, 3.25}, 0, "[]<>A")};
  // the bound is 2 * (0.25 + 0.1) = 0.7
  c.R = 1.0;
  EXPECT_TRUE(config_warnings(c).empty());
  c.R = 0.6;
  EXPECT_EQ(config_warnings(c).size(), 1u);
}

TEST(Simulator, LoneRobotFollowsItsInitialPlan) {
  SimConfig c = open_config(60);
  c.robots = {robot(1, {3.25, 3.25}, 0, "[](W & !O) & []<>A & []<>B")};
  const auto off = precompute(c);
  const auto ip = initial_plan(off[0].product.pba, off[0].product.potentials);
  const auto rep = run(c);
  EXPECT_EQ(rep.ct_rounds, 0);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_TRUE(rep.constraint_violations.empty());
  EXPECT_EQ(rep.robots[0].replans, 0);
  ASSERT_FALSE(rep.rows.empty());
  for (const auto& row : rep.rows) {
    ASSERT_LT(distance(position(row.x), ip.plan.position_at(row.t)), 1e-6) << "t=" << row.t;
    ASSERT_EQ(row.mode, Mode::Free);
  }
  EXPECT_GE(rep.robots[0].surveillance_rounds, 1);
}

TEST(Simulator, DistantRobotsNeverConflict) {
  SimConfig c = open_config(30);
  c.robots = {robot(1, {1.75, 3.25}, 0, "[](W & !O) & []<>A & []<>C"),
              robot(2, {10.25, 3.25}, 0, "[](W & !O) & []<>B & []<>D")};
  const auto rep = run(c);
  EXPECT_EQ(rep.ct_rounds, 0);
  EXPECT_EQ(rep.ct_pairs, 0);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(Simulator, HeadOnRobotsStaySafe) {
  SimConfig c = open_config(60);
  c.robots = {robot(1, {2.25, 6.25}, 0, "[](W & !O) & []<>B & []<>A"),
              robot(2, {9.75, 6.25}, kPi, "[](W & !O) & []<>A & []<>B")};
  const auto rep = run(c);
  EXPECT_GT(rep.ct_rounds, 0);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_TRUE(rep.constraint_violations.empty());
  EXPECT_GT(rep.witness_checks, 0);
  EXPECT_EQ(rep.witness_counterexamples, 0);
  EXPECT_FALSE(rep.aborted);
  for (const auto& r : rep.robots) EXPECT_GE(r.visits.at("A") + r.visits.at("B"), 1) << r.name;
}

TEST(Simulator, BlockedDeadEndGoesToEmerg) {
  const auto rep = run(dead_end_config());
  int entries = 0;
  for (const auto& r : rep.robots) entries += r.emerg_entries;
  EXPECT_GT(entries, 0);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_TRUE(rep.constraint_violations.empty());
  EXPECT_EQ(rep.robots[0].surveillance_rounds, 0);
  bool seen = false;
  for (const auto& row : rep.rows) seen |= row.mode == Mode::Emerg;
  EXPECT_TRUE(seen);
}

TEST(Simulator, SameSeedSameRun) {
  SimConfig c = mrc::testing::scenario("example2_2").config;
  c.duration = 20;
  const auto a = run(c), b = run(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    ASSERT_EQ(a.rows[i].x, b.rows[i].x);
    ASSERT_EQ(a.rows[i].mode, b.rows[i].mode);
  }
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) ASSERT_EQ(a.events[i].dump(), b.events[i].dump());
}

TEST(Simulator, InvalidStartIsReported) {
  SimConfig c = open_config(5);
  c.robots = {robot(1, {3.3, 3.25}, 0, "[]<>A")};
  EXPECT_THROW(precompute(c), ValidationError);
}
