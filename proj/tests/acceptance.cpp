// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "support.hpp"

using namespace mrc;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& what, const std::string& detail, Clock::time_point t0) {
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!ok) ++failures;
  std::printf("criterion %d: %s  %s  [%s] (%.1f s)\n", n, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str(), s);
  std::fflush(stdout);
}

RobotModel uni(double v, double a) { return {ModelKind::Unicycle, v, 1.0, a}; }
RobotModel di(double v, double u) { return {ModelKind::DoubleIntegrator, v, 0.0, u}; }

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

void braking_closed_forms() {
  const auto t0 = Clock::now();
  std::ostringstream d;
  bool ok = true;
  auto [t1, d1] = braking_bounds(uni(1, 2), BrakingKind::StraightLine);
  ok &= near(t1, 0.5, 1e-12) && near(d1, 0.25, 1e-12);
  const double d15 = braking_bounds(uni(1, 1.5), BrakingKind::StraightLine).second;
  ok &= near(d15, 1.0 / 3.0, 1e-12);
  auto [t3, d3] = braking_bounds(di(3, 6), BrakingKind::NormDecel);
  ok &= near(t3, 0.5, 1e-12) && near(d3, 0.75, 1e-12);
  d << "(" << t1 << "," << d1 << ") D=" << d15 << " (" << t3 << "," << d3 << ")";
  double worst = 0;
  struct Case {
    RobotModel m;
    BrakingKind k;
    State x;
    double t, dist;
  };
  const Case cases[] = {{uni(1, 2), BrakingKind::StraightLine, {0, 0, 0.7, 1.0}, 0.5, 0.25},
                        {uni(1, 1.5), BrakingKind::StraightLine, {0, 0, -1.0, 1.0}, 2.0 / 3.0, 1.0 / 3.0},
                        {di(3, 6), BrakingKind::NormDecel, {0, 0, 3, 0}, 0.5, 0.75}};
  for (const auto& c : cases) {
    const auto p = make_braking_profile(c.m, c.k);
    const auto tr = braking_trajectory(c.m, p, c.x, 1e-5);
    worst = std::max({worst, std::fabs(tr.back().t - c.t), std::fabs(norm(position(tr.back().x)) - c.dist)});
  }
  ok &= worst <= 1e-4;
  d << " simulated max err " << worst;
  report(1, ok, "braking closed forms", d.str(), t0);
}

void curved_braking() {
  const auto t0 = Clock::now();
  double worst = 0;
  int n = 0;
  for (double v : {0.25, 0.5, 1.0, 1.5, 2.0})
    for (double a : {0.5, 1.0, 1.5, 2.0, 3.0}) {
      const double w = std::min(1.0, kPi * a / v);
      worst = std::max(worst, std::fabs(curved_braking_distance(v, w, a) - testing::numeric_curved_stop(v, w, a)));
      ++n;
    }
  std::ostringstream d;
  d << n << " cases, max err " << worst;
  report(2, worst <= 1e-4, "curved braking vs numeric integration", d.str(), t0);
}

void ltl_agreement() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  const std::vector<std::string> atoms{"a", "b", "c"};
  int bad = 0, words = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto f = testing::random_formula(rng, 4, atoms);
    const auto a = ltl::to_nba(f);
    for (int k = 0; k < 3; ++k) {
      const auto w = testing::random_lasso(rng, atoms, 4, 4);
      ++words;
      if (ltl::accepts_lasso(a, w) != ltl::eval_lasso_semantics(f, w)) ++bad;
    }
  }
  report(3, bad == 0, "automaton vs semantics on 10000 random formulas",
         std::to_string(words) + " words, " + std::to_string(bad) + " disagreements", t0);
}

int zero_mismatch(const Pba& p, const PotentialTable& pot) {
  int bad = 0;
  for (int q = 0; q < p.size(); ++q)
    if (p.reachable[q] && (pot[q] == 0.0) != (p.self_reachable[q] != 0)) ++bad;
  return bad;
}

void bellman() {
  const auto t0 = Clock::now();
  SimConfig cfg = testing::scenario("example1").config;
  cfg.robots.resize(1);
  const auto off = precompute(cfg);
  const auto& prod = off.front().product;
  int bad = testing::bellman_failures(prod.pba, prod.potentials) + zero_mismatch(prod.pba, prod.potentials);
  std::ostringstream d;
  d << "example robot pba " << prod.pba.size() << " states, " << bad << " failures";
  std::mt19937_64 rng(1);
  const std::vector<std::string> formulas{"[]<>a", "[]<>a & []<>b", "<>[]a", "[]!b & []<>a", "a U b", "[](a | <>b)"};
  int rbad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto cts = testing::random_cts(rng, 12, 0.2);
    const auto nba = std::make_shared<const ltl::Nba>(ltl::to_nba(ltl::parse(formulas[i % formulas.size()])));
    const Pba p = build_pba(cts, nba, std::nullopt, 0.1);
    const auto pot = potentials(p);
    rbad += testing::bellman_failures(p, pot) + zero_mismatch(p, pot);
  }
  d << "; 200 random products, " << rbad << " failures";
  report(4, bad == 0 && rbad == 0, "potential satisfies the Bellman equation, zero exactly on F*", d.str(), t0);
}

void acyclic_priorities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  int cyc = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::vector<int>> conflicts;
    const auto ps = testing::random_ensemble(rng, conflicts);
    cyc += testing::waits_for_has_cycle(ps, conflicts);
  }
  report(5, cyc == 0, "priority ensembles acyclic", "1000 ensembles, " + std::to_string(cyc) + " cycles", t0);
}

struct Run {
  std::string name;
  SimReport rep;
  double seconds = 0;
};

Run simulate(const std::string& name, double duration) {
  SimConfig cfg = testing::scenario(name).config;
  cfg.duration = duration;
  const auto t0 = Clock::now();
  Run r{name, run(cfg), 0};
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::string outputs(const SimReport& rep, const SimConfig& cfg) {
  std::ostringstream os;
  write_trajectories(os, rep.rows);
  write_events(os, rep.events);
  auto m = metrics_json(rep, cfg);
  // wall clock timings
  m.erase("atlr_s");
  m.erase("mtlr_s");
  os << m.dump();
  return os.str();
}

}  // namespace

int main() {
  try {
    braking_closed_forms();
    curved_braking();
    ltl_agreement();
    bellman();
    acyclic_priorities();

    const auto t6 = Clock::now();
    std::vector<Run> runs;
    runs.push_back(simulate("example1", 120));
    for (const char* s : {"example2_2", "example2_4", "example2_8"}) runs.push_back(simulate(s, 150));
    double total = 0;
    std::size_t safety = 0, constraint = 0;
    int checks = 0, counter = 0;
    std::ostringstream d6;
    for (const auto& r : runs) {
      total += r.seconds;
      safety += r.rep.violations.size();
      constraint += r.rep.constraint_violations.size();
      checks += r.rep.witness_checks;
      counter += r.rep.witness_counterexamples;
      const auto a = r.rep.atlr();
      d6 << r.name << ": ct " << r.rep.ct_rounds << ", atlr " << (a ? std::to_string(*a) : "n/a") << " s; ";
    }
    const auto a4 = runs[2].rep.atlr(), a8 = runs[3].rep.atlr();
    const bool ratio_ok = a4 && a8 && *a8 <= 3 * *a4;
    d6 << "safety " << safety << ", constraint " << constraint << ", wall " << total << " s";
    report(6, safety == 0 && constraint == 0 && total < 600 && ratio_ok,
           "zero violations in under 10 min, 8-robot atlr within 3x of 4-robot", d6.str(), t6);

    const auto t7 = Clock::now();
    const auto& ex1 = runs[0].rep;
    bool rounds_ok = true;
    std::ostringstream d7;
    d7 << "rounds";
    for (const auto& r : ex1.robots) {
      rounds_ok &= r.surveillance_rounds >= 1;
      d7 << " " << r.surveillance_rounds;
    }
    const auto off = precompute(testing::scenario("example1").config);
    int lasso_bad = 0;
    for (const auto& r : off) {
      const auto ip = initial_plan(r.product.pba, r.product.potentials);
      if (!ltl::eval_lasso_semantics(r.formula, label_lasso(r.product.pba, ip.lasso))) ++lasso_bad;
    }
    d7 << "; initial lassos failing semantics " << lasso_bad;
    report(7, rounds_ok && lasso_bad == 0, "every example1 robot completes a surveillance round", d7.str(), t7);

    const auto t8 = Clock::now();
    report(8, counter == 0 && checks > 0, "no-conflict clearance witness holds",
           std::to_string(checks) + " checks, " + std::to_string(counter) + " counterexamples", t8);

    const auto t9 = Clock::now();
    const SimConfig cfg = testing::scenario("example2_2").config;
    const Run again = simulate("example2_2", 150);
    const bool same = outputs(runs[1].rep, cfg) == outputs(again.rep, cfg);
    report(9, same, "same seed gives byte-identical outputs", "example2_2 run twice", t9);
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 1;
  }
  std::printf("%s\n", failures == 0 ? "all criteria PASS" : (std::to_string(failures) + " criteria FAIL").c_str());
  return failures == 0 ? 0 : 1;
}
