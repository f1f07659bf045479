#pragma once

// Product of a CTS with a Buchi automaton, its self-reachable accepting set,
// potential values and shortest-run queries.
//
// The product is implicit: state (x, s) has id x * |S| + s and edges are
// enumerated on the fly from the CTS and the automaton. A Buchi move into
// (x', s') is enabled when the label of x' satisfies the transition guard.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <queue>

#include "mrc/cts.hpp"
#include "mrc/ltl.hpp"

namespace mrc {

// Generic weighted-digraph routines. A neighbor enumerator has the shape
// void(int node, function<void(int other, double weight)>).
namespace graph {

using Visit = std::function<void(int, double)>;
using Enumerate = std::function<void(int, const Visit&)>;

// Nodes (restricted to `active`) lying in a strongly connected component with
// at least one edge.
inline std::vector<char> on_cycle(int n, const std::vector<char>& active, const Enumerate& succ) {
  std::vector<int> order(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0), result(n, 0), self_loop(n, 0);
  std::vector<int> stack;
  int counter = 0;
  struct Frame {
    int node;
    std::vector<int> next;
    std::size_t pos;
  };
  for (int root = 0; root < n; ++root) {
    if (!active[root] || order[root] >= 0) continue;
    std::vector<Frame> frames;
    auto open = [&](int v) {
      order[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = 1;
      Frame f{v, {}, 0};
      succ(v, [&](int w, double) {
        if (!active[w]) return;
        if (w == v) self_loop[v] = 1;
        f.next.push_back(w);
      });
      frames.push_back(std::move(f));
    };
    open(root);
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.pos < f.next.size()) {
        const int w = f.next[f.pos++];
        if (order[w] < 0) {
          open(w);
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], order[w]);
        }
        continue;
      }
      const int v = f.node;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().node] = std::min(low[frames.back().node], low[v]);
      if (low[v] == order[v]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        if (comp.size() > 1 || self_loop[v])
          for (int c : comp) result[c] = 1;
      }
    }
  }
  return result;
}

// Largest subset A of `accepting` whose members each reach a member of A by a
// nonempty path.
inline std::vector<char> max_self_reachable(int n, const std::vector<char>& active, const std::vector<char>& accepting,
                                            const Enumerate& succ, const Enumerate& pred) {
  const auto cyc = on_cycle(n, active, succ);
  std::vector<char> reach(n, 0);
  std::vector<int> queue;
  for (int v = 0; v < n; ++v)
    if (active[v] && accepting[v] && cyc[v]) queue.push_back(v);
  // reach[v]: v has a nonempty path into the seed set
  for (std::size_t i = 0; i < queue.size(); ++i) {
    pred(queue[i], [&](int p, double) {
      if (active[p] && !reach[p]) {
        reach[p] = 1;
        queue.push_back(p);
      }
    });
  }
  std::vector<char> out(n, 0);
  for (int v = 0; v < n; ++v) out[v] = active[v] && accepting[v] && reach[v];
  return out;
}

// Multi-source shortest distance to `targets` following edges forward; pred
// enumerates incoming edges.
inline std::vector<double> distance_to(int n, const std::vector<char>& targets, const Enumerate& pred) {
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int v = 0; v < n; ++v)
    if (targets[v]) {
      dist[v] = 0;
      pq.push({0.0, v});
    }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    pred(v, [&](int p, double w) {
      const double nd = dist[v] + w;
      if (nd < dist[p]) {
        dist[p] = nd;
        pq.push({nd, p});
      }
    });
  }
  return dist;
}

struct Run {
  std::vector<int> states;
  double length = 0.0;
};

// Shortest path from source to any target. With `nonempty`, the path must use
// at least one edge (so a source in targets yields a cycle). Among equal
// lengths the predecessor with the smaller id wins.
inline Run shortest_run(int n, int source, const std::vector<char>& targets, const Enumerate& succ,
                        bool nonempty = false) {
  if (!nonempty && targets[source]) return {{source}, 0.0};
  std::vector<double> dist(n, kInf);
  std::vector<int> parent(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  // with nonempty paths the source may be re-entered; a virtual node n stands
  // for the start
  const int start = nonempty ? n : source;
  dist.resize(n + 1, kInf);
  parent.resize(n + 1, -1);
  std::vector<char> done(n + 1, 0);
  dist[start] = 0;
  pq.push({0.0, start});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v] || done[v]) continue;
    done[v] = 1;
    if (v != start && targets[v]) {
      Run r;
      r.length = d;
      for (int u = v; u != start; u = parent[u]) r.states.push_back(u);
      r.states.push_back(source);
      std::reverse(r.states.begin(), r.states.end());
      return r;
    }
    succ(v == n ? source : v, [&](int q, double w) {
      const double nd = d + w;
      if (done[q]) return;
      if (nd < dist[q] || (nd == dist[q] && v < parent[q])) {
        dist[q] = nd;
        parent[q] = v;
        pq.push({nd, q});
      }
    });
  }
  throw NoPathError("no run reaches the target set");
}

}  // namespace graph

struct PotentialTable {
  std::vector<double> value;

  double operator[](int p) const { return value[p]; }
};

struct Pba {
  std::shared_ptr<const Cts> cts;
  std::shared_ptr<const ltl::Nba> nba;
  int ns = 0;
  std::vector<std::uint64_t> letter;  // per CTS label class
  std::vector<std::vector<std::pair<int, ltl::Guard>>> nba_rev;
  std::vector<int> initial;
  std::vector<char> reachable;
  std::vector<char> accepting;       // F_p
  std::vector<char> self_reachable;  // F_p*
  std::vector<char> cyclic;          // members of F_p* lying on a cycle

  int size() const { return static_cast<int>(reachable.size()); }
  int id(int x, int s) const { return x * ns + s; }
  int x_of(int p) const { return p / ns; }
  int s_of(int p) const { return p % ns; }
  std::uint64_t letter_of(int x) const { return letter[cts->label_class[x]]; }

  // Edge length is the position displacement plus time_weight per second of
  // edge duration (0 gives pure path length).
  double time_weight = 0.0;

  double weight(int x, int x2) const {
    const CtsEdge* e = cts->edge(x, x2);
    return distance(cts->pos(x), cts->pos(x2)) + time_weight * (e ? e->duration : 0.0);
  }

  // All product edges out of p, ignoring reachability.
  template <typename Fn>
  void for_each_successor(int p, Fn&& fn) const {
    const int x = x_of(p), s = s_of(p);
    for (const auto& e : cts->out[x]) {
      const std::uint64_t l = letter_of(e.target);
      const double w = distance(cts->pos(x), cts->pos(e.target)) + time_weight * e.duration;
      for (const auto& t : nba->transitions[s])
        if (t.guard.accepts(l)) fn(id(e.target, t.target), w);
    }
  }

  template <typename Fn>
  void for_each_predecessor(int q, Fn&& fn) const {
    const int x2 = x_of(q), s2 = s_of(q);
    const std::uint64_t l = letter_of(x2);
    for (int x : cts->in[x2]) {
      const double w = weight(x, x2);
      for (const auto& [s, guard] : nba_rev[s2])
        if (guard.accepts(l)) fn(id(x, s), w);
    }
  }

  graph::Enumerate successors() const {
    return [this](int p, const graph::Visit& fn) { for_each_successor(p, fn); };
  }
  graph::Enumerate predecessors() const {
    return [this](int p, const graph::Visit& fn) {
      for_each_predecessor(p, [&](int q, double w) {
        if (reachable[q]) fn(q, w);
      });
    };
  }

  // beta_P(x): automaton states paired with x in reachable product states.
  std::vector<int> beta(int x) const {
    std::vector<int> out;
    for (int s = 0; s < ns; ++s)
      if (reachable[id(x, s)]) out.push_back(s);
    return out;
  }
};

// Product restricted to states reachable from (x0, s) with x0 a start state
// (default: the CTS initial states) and s a successor of an automaton initial state under L(x0).
inline Pba build_pba(std::shared_ptr<const Cts> cts, std::shared_ptr<const ltl::Nba> nba,
                     std::optional<std::vector<int>> starts = std::nullopt, double time_weight = 0.0) {
  nba->validate();
  Pba p;
  p.time_weight = time_weight;
  p.cts = cts;
  p.nba = nba;
  p.ns = nba->num_states();
  for (const auto& lab : cts->label_classes) p.letter.push_back(nba->letter_of(lab));
  p.nba_rev.assign(p.ns, {});
  for (int s = 0; s < p.ns; ++s)
    for (const auto& t : nba->transitions[s]) p.nba_rev[t.target].push_back({s, t.guard});
  const int n = cts->size() * p.ns;
  p.reachable.assign(n, 0);
  std::vector<int> queue;
  for (int x0 : starts ? *starts : cts->initial) {
    if (x0 < 0 || x0 >= cts->size()) throw Error("product start state is not a CTS state");
    for (int s0 : nba->initial) {
      nba->for_each_successor(s0, p.letter_of(x0), [&](int s) {
        const int q = p.id(x0, s);
        if (!p.reachable[q]) {
          p.reachable[q] = 1;
          queue.push_back(q);
          p.initial.push_back(q);
        }
      });
    }
  }
  std::sort(p.initial.begin(), p.initial.end());
  for (std::size_t i = 0; i < queue.size(); ++i) {
    p.for_each_successor(queue[i], [&](int q, double) {
      if (!p.reachable[q]) {
        p.reachable[q] = 1;
        queue.push_back(q);
      }
    });
  }
  p.accepting.assign(n, 0);
  for (int q = 0; q < n; ++q) p.accepting[q] = p.reachable[q] && nba->accepting[p.s_of(q)];
  p.self_reachable = graph::max_self_reachable(n, p.reachable, p.accepting, p.successors(), p.predecessors());
  p.cyclic = graph::on_cycle(n, p.reachable, p.successors());
  for (int q = 0; q < n; ++q) p.cyclic[q] = p.cyclic[q] && p.self_reachable[q];
  return p;
}

inline std::vector<char> max_self_reachable(const Pba& p) { return p.self_reachable; }

inline PotentialTable potentials(const Pba& p) {
  return {graph::distance_to(p.size(), p.self_reachable, p.predecessors())};
}

// Minimum potential over (x, s), s in M.
inline double potential_of(const Pba& p, int x, const std::vector<int>& M, const PotentialTable& table) {
  double best = kInf;
  for (int s : M) best = std::min(best, table[p.id(x, s)]);
  return best;
}

inline graph::Run dijkstra_targets(const Pba& p, int source, const std::vector<char>& targets) {
  return graph::shortest_run(p.size(), source, targets, p.successors());
}

inline graph::Run dijkstra_cycle(const Pba& p, int source) {
  std::vector<char> t(p.size(), 0);
  t[source] = 1;
  return graph::shortest_run(p.size(), source, t, p.successors(), true);
}

// On-disk cache of the expensive product artifacts. The blob records a format
// version and the content key; either mismatch discards it.
namespace cache {

inline constexpr std::uint32_t kVersion = 5;

inline std::filesystem::path directory() {
  const char* env = std::getenv("MRC_CACHE_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path();
}

template <typename T>
void put(std::ofstream& f, const std::vector<T>& v) {
  const std::uint64_t n = v.size();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
bool get(std::ifstream& f, std::vector<T>& v) {
  std::uint64_t n = 0;
  if (!f.read(reinterpret_cast<char*>(&n), sizeof n) || n > (1ull << 32)) return false;
  v.resize(n);
  return static_cast<bool>(f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))));
}

inline void save(const std::filesystem::path& path, std::uint64_t key, const Pba& p, const PotentialTable& t) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    f.write(reinterpret_cast<const char*>(&key), sizeof key);
    put(f, p.initial);
    put(f, p.reachable);
    put(f, p.self_reachable);
    put(f, p.cyclic);
    put(f, t.value);
  }
  std::filesystem::rename(tmp, path);
}

// Fills the reachability, F_p* and potentials of an already wired Pba.
inline bool load(const std::filesystem::path& path, std::uint64_t key, Pba& p, PotentialTable& t) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::uint32_t version = 0;
  std::uint64_t stored = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  f.read(reinterpret_cast<char*>(&stored), sizeof stored);
  if (!f || version != kVersion || stored != key) return false;
  Pba q = p;
  if (!get(f, q.initial) || !get(f, q.reachable) || !get(f, q.self_reachable) || !get(f, q.cyclic) ||
      !get(f, t.value))
    return false;
  const std::size_t n = static_cast<std::size_t>(q.cts->size()) * q.ns;
  if (q.reachable.size() != n || q.self_reachable.size() != n || q.cyclic.size() != n ||
      t.value.size() != n)
    return false;
  q.accepting.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) q.accepting[i] = q.reachable[i] && q.nba->accepting[i % q.ns];
  p = std::move(q);
  return true;
}

}  // namespace cache

struct ProductBundle {
  std::shared_ptr<const Cts> cts;
  std::shared_ptr<const ltl::Nba> nba;
  Pba pba;
  PotentialTable potentials;
  bool from_cache = false;
};

// Builds (or loads from the cache directory, when configured) the product and
// its potentials. `key_text` must describe every input that shapes them.
inline ProductBundle build_product(std::shared_ptr<const Cts> cts, std::shared_ptr<const ltl::Nba> nba,
                                   const std::vector<int>& starts, const std::string& key_text,
                                   double time_weight = 0.0) {
  ProductBundle b{cts, nba, {}, {}, false};
  char tw[32];
  std::snprintf(tw, sizeof tw, "|tw%.17g", time_weight);
  const std::uint64_t key = fnv1a(key_text + tw);
  const auto dir = cache::directory();
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.pba", static_cast<unsigned long long>(key));
  if (!dir.empty()) {
    Pba shell;
    shell.cts = cts;
    shell.nba = nba;
    shell.ns = nba->num_states();
    shell.time_weight = time_weight;
    for (const auto& lab : cts->label_classes) shell.letter.push_back(nba->letter_of(lab));
    shell.nba_rev.assign(shell.ns, {});
    for (int s = 0; s < shell.ns; ++s)
      for (const auto& t : nba->transitions[s]) shell.nba_rev[t.target].push_back({s, t.guard});
    if (cache::load(dir / name, key, shell, b.potentials)) {
      b.pba = std::move(shell);
      b.from_cache = true;
      return b;
    }
  }
  b.pba = build_pba(cts, nba, starts, time_weight);
  b.potentials = potentials(b.pba);
  if (!dir.empty()) cache::save(dir / name, key, b.pba, b.potentials);
  return b;
}

}  // namespace mrc
