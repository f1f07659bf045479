#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner.

#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "mrc/mrc.hpp"

namespace mrc::testing {

inline std::string source_path(const std::string& rel) { return std::string(MRC_SOURCE_DIR) + "/" + rel; }

// ---- formulas and words ---------------------------------------------------

inline ltl::FormulaPtr random_formula(std::mt19937_64& rng, int depth, const std::vector<std::string>& atoms) {
  std::uniform_int_distribution<int> pick_atom(0, static_cast<int>(atoms.size()) - 1);
  if (depth == 0) {
    if (std::uniform_int_distribution<int>(0, 9)(rng) == 0) return ltl::top();
    return ltl::atom(atoms[pick_atom(rng)]);
  }
  const int k = std::uniform_int_distribution<int>(0, 7)(rng);
  auto sub = [&] { return random_formula(rng, std::uniform_int_distribution<int>(0, depth - 1)(rng), atoms); };
  switch (k) {
    case 0: return ltl::atom(atoms[pick_atom(rng)]);
    case 1: return ltl::neg(sub());
    case 2: return ltl::conj(sub(), sub());
    case 3: return ltl::disj(sub(), sub());
    case 4: return ltl::until(sub(), sub());
    case 5: return ltl::eventually(sub());
    case 6: return ltl::always(sub());
    default: return ltl::neg(ltl::until(sub(), sub()));
  }
}

inline ltl::LassoWord random_lasso(std::mt19937_64& rng, const std::vector<std::string>& atoms, int max_prefix,
                                   int max_cycle) {
  auto letter = [&] {
    ltl::Letter l;
    for (const auto& a : atoms)
      if (rng() & 1) l.insert(a);
    return l;
  };
  ltl::LassoWord w;
  const int p = std::uniform_int_distribution<int>(0, max_prefix)(rng);
  const int c = std::uniform_int_distribution<int>(1, max_cycle)(rng);
  for (int i = 0; i < p; ++i) w.prefix.push_back(letter());
  for (int i = 0; i < c; ++i) w.cycle.push_back(letter());
  return w;
}

// Direct recursive semantics. Positions past the prefix repeat with the
// cycle length, so every temporal quantifier only needs |prefix|+|cycle|
// positions starting at i.
inline bool naive_holds(const ltl::FormulaPtr& f, const ltl::LassoWord& w, int i) {
  const int p = static_cast<int>(w.prefix.size());
  const int c = static_cast<int>(w.cycle.size());
  auto fold = [&](int k) { return k < p ? k : p + (k - p) % c; };
  auto letter = [&](int k) -> const ltl::Letter& { k = fold(k); return k < p ? w.prefix[k] : w.cycle[k - p]; };
  const int span = p + c;
  switch (f->op) {
    case ltl::Op::True: return true;
    case ltl::Op::Atom: return letter(i).count(f->atom) > 0;
    case ltl::Op::Not: return !naive_holds(f->lhs, w, i);
    case ltl::Op::And: return naive_holds(f->lhs, w, i) && naive_holds(f->rhs, w, i);
    case ltl::Op::Or: return naive_holds(f->lhs, w, i) || naive_holds(f->rhs, w, i);
    case ltl::Op::Until:
      for (int j = i; j < i + span; ++j) {
        if (naive_holds(f->rhs, w, fold(j))) return true;
        if (!naive_holds(f->lhs, w, fold(j))) return false;
      }
      return false;
    case ltl::Op::Eventually:
      for (int j = i; j < i + span; ++j)
        if (naive_holds(f->lhs, w, fold(j))) return true;
      return false;
    case ltl::Op::Always:
      for (int j = i; j < i + span; ++j)
        if (!naive_holds(f->lhs, w, fold(j))) return false;
      return true;
  }
  return false;
}

// ---- graphs ---------------------------------------------------------------

struct Digraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> out;
  std::vector<char> accepting;

  graph::Enumerate succ() const {
    return [this](int v, const graph::Visit& fn) {
      for (auto [w, c] : out[v]) fn(w, c);
    };
  }
  graph::Enumerate pred() const {
    return [this](int v, const graph::Visit& fn) {
      for (int u = 0; u < n; ++u)
        for (auto [w, c] : out[u])
          if (w == v) fn(u, c);
    };
  }
};

inline Digraph random_digraph(std::mt19937_64& rng, int n, double p_edge, double p_acc) {
  std::uniform_real_distribution<double> U(0, 1);
  Digraph g;
  g.n = n;
  g.out.resize(n);
  g.accepting.resize(n);
  for (int v = 0; v < n; ++v) {
    g.accepting[v] = U(rng) < p_acc;
    for (int w = 0; w < n; ++w)
      if (U(rng) < p_edge) g.out[v].push_back({w, std::round(U(rng) * 8) / 4});
  }
  return g;
}

// Reachability by nonempty paths via Warshall closure.
inline std::vector<std::vector<char>> closure(const Digraph& g) {
  std::vector<std::vector<char>> r(g.n, std::vector<char>(g.n, 0));
  for (int v = 0; v < g.n; ++v)
    for (auto [w, c] : g.out[v]) r[v][w] = 1;
  for (int k = 0; k < g.n; ++k)
    for (int i = 0; i < g.n; ++i)
      if (r[i][k])
        for (int j = 0; j < g.n; ++j)
          if (r[k][j]) r[i][j] = 1;
  return r;
}

// Accepting states that can reach an accepting state lying on a cycle.
inline std::vector<char> self_reachable_oracle(const Digraph& g) {
  const auto r = closure(g);
  std::vector<char> out(g.n, 0);
  for (int v = 0; v < g.n; ++v) {
    if (!g.accepting[v]) continue;
    for (int a = 0; a < g.n; ++a)
      if (g.accepting[a] && r[a][a] && r[v][a]) out[v] = 1;
  }
  return out;
}

// ---- transition systems ---------------------------------------------------

// A CTS given by hand: positions, labels and edges with durations.
inline std::shared_ptr<Cts> hand_cts(const std::vector<Vec2>& pos, const std::vector<ltl::Letter>& labels,
                                     const std::vector<std::tuple<int, int, double>>& edges) {
  auto c = std::make_shared<Cts>();
  c->model = RobotModel{ModelKind::DoubleIntegrator, 1.0, 0.0, 1.0};
  std::map<ltl::Letter, int> classes;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    c->states.push_back({pos[i].x, pos[i].y, 0.0, 0.0});
    c->cell.push_back(static_cast<int>(i));
    auto [it, fresh] = classes.emplace(labels[i], static_cast<int>(c->label_classes.size()));
    if (fresh) c->label_classes.push_back(labels[i]);
    c->label_class.push_back(it->second);
  }
  c->out.assign(pos.size(), {});
  for (auto [a, b, d] : edges) c->out[a].push_back({b, {0.0, 0.0}, d});
  c->link_predecessors();
  c->initial = {0};
  return c;
}

// Random CTS over atoms {a, b}.
inline std::shared_ptr<Cts> random_cts(std::mt19937_64& rng, int n, double p_edge) {
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<Vec2> pos;
  std::vector<ltl::Letter> labels;
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < n; ++i) {
    pos.push_back({std::round(U(rng) * 10) / 2, std::round(U(rng) * 10) / 2});
    ltl::Letter l;
    if (U(rng) < 0.3) l.insert("a");
    if (U(rng) < 0.3) l.insert("b");
    labels.push_back(l);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (U(rng) < p_edge) edges.push_back({i, j, 0.5 + std::round(U(rng) * 4) / 4});
  return hand_cts(pos, labels, edges);
}

// Bellman residuals of a potential table. Returns the number of states that
// break V = 0 on F* or V(p) = min(w + V(q)) elsewhere. With zero_only_on_f,
// V = 0 outside F* also counts (holds when every edge has positive length).
inline int bellman_failures(const Pba& pba, const PotentialTable& pot, bool zero_only_on_f = true,
                            double tol = 1e-9) {
  int bad = 0;
  for (int p = 0; p < pba.size(); ++p) {
    if (!pba.reachable[p]) continue;
    const double v = pot[p];
    if (pba.self_reachable[p]) {
      if (v != 0.0) ++bad;
      continue;
    }
    if (zero_only_on_f && v == 0.0) ++bad;
    if (!std::isfinite(v)) continue;
    double best = kInf;
    pba.for_each_successor(p, [&](int q, double w) {
      if (pba.reachable[q]) best = std::min(best, w + pot[q]);
    });
    if (std::fabs(best - v) > tol * std::max(1.0, v)) ++bad;
  }
  return bad;
}

// ---- coordination ---------------------------------------------------------

// Random neighbor and conflict structure with unique static scores.
inline std::vector<PriorityState> random_ensemble(std::mt19937_64& rng, std::vector<std::vector<int>>& conflicts) {
  const int n = std::uniform_int_distribution<int>(2, 10)(rng);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<std::vector<char>> nb(n, std::vector<char>(n, 0)), cf(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (U(rng) < 0.5) {
        nb[i][j] = nb[j][i] = 1;
        if (U(rng) < 0.6) cf[i][j] = cf[j][i] = 1;
      }
  std::vector<int> p0(n);
  std::iota(p0.begin(), p0.end(), 1);
  std::shuffle(p0.begin(), p0.end(), rng);
  std::vector<PriorityState> out(n);
  conflicts.assign(n, {});
  for (int i = 0; i < n; ++i) {
    out[i].robot = i;
    out[i].p0 = p0[i];
    for (int j = 0; j < n; ++j) {
      out[i].n_neighbors += nb[i][j];
      out[i].n_conflicts += cf[i][j];
      if (cf[i][j]) conflicts[i].push_back(j);
    }
    const double m = U(rng);
    out[i].mode = m < 0.1 ? Mode::Emerg : (out[i].n_conflicts > 0 ? Mode::Busy : Mode::Free);
  }
  return out;
}

// Directed "i waits for j" among conflicting robots that plan this round;
// true when it has a cycle.
inline bool waits_for_has_cycle(const std::vector<PriorityState>& ps, const std::vector<std::vector<int>>& conflicts) {
  const int n = static_cast<int>(ps.size());
  std::vector<std::vector<int>> edges(n);
  for (int i = 0; i < n; ++i) {
    if (ps[i].mode == Mode::Emerg || conflicts[i].empty()) continue;
    std::vector<PriorityState> nbrs;
    for (int j : conflicts[i]) nbrs.push_back(ps[j]);
    for (int j : assign_priorities(ps[i], nbrs)) edges[i].push_back(j);
  }
  std::vector<int> color(n, 0);
  std::function<bool(int)> dfs = [&](int v) {
    color[v] = 1;
    for (int w : edges[v]) {
      if (color[w] == 1) return true;
      if (color[w] == 0 && dfs(w)) return true;
    }
    color[v] = 2;
    return false;
  };
  for (int v = 0; v < n; ++v)
    if (color[v] == 0 && dfs(v)) return true;
  return false;
}

// ---- dynamics -------------------------------------------------------------

// Stop point of constant-turn braking by explicit midpoint steps of size h.
inline double numeric_curved_stop(double v, double w, double a, double h = 1e-5) {
  const double T = v / a;
  double x = 0, y = 0, th = 0, s = v, t = 0;
  while (t < T - 1e-15) {
    const double dt = std::min(h, T - t);
    const double thm = th + 0.5 * dt * w, sm = s - 0.5 * dt * a;
    x += dt * sm * std::cos(thm);
    y += dt * sm * std::sin(thm);
    th += dt * w;
    s -= dt * a;
    t += dt;
  }
  return std::hypot(x, y);
}

// ---- scenarios ------------------------------------------------------------

inline Scenario scenario(const std::string& name) { return load_scenario(source_path("scenarios/" + name + ".json")); }

}  // namespace mrc::testing
