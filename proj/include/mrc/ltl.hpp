#pragma once

// LTL without "next": syntax tree, parser, printer, translation to a
// nondeterministic Buchi automaton, lasso acceptance, and a direct
// semantics evaluator on ultimately periodic words.

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mrc/common.hpp"

namespace mrc::ltl {

enum class Op { True, Atom, Not, And, Or, Until, Eventually, Always };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  Op op = Op::True;
  std::string atom;  // Op::Atom only
  FormulaPtr lhs;    // unary operand or left operand
  FormulaPtr rhs;    // right operand of binary operators
};

inline FormulaPtr top() { return std::make_shared<Formula>(Formula{Op::True, {}, nullptr, nullptr}); }
inline FormulaPtr atom(std::string name) {
  return std::make_shared<Formula>(Formula{Op::Atom, std::move(name), nullptr, nullptr});
}
inline FormulaPtr neg(FormulaPtr f) { return std::make_shared<Formula>(Formula{Op::Not, {}, std::move(f), nullptr}); }
inline FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(Formula{Op::And, {}, std::move(a), std::move(b)});
}
inline FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(Formula{Op::Or, {}, std::move(a), std::move(b)});
}
inline FormulaPtr until(FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(Formula{Op::Until, {}, std::move(a), std::move(b)});
}
inline FormulaPtr eventually(FormulaPtr f) {
  return std::make_shared<Formula>(Formula{Op::Eventually, {}, std::move(f), nullptr});
}
inline FormulaPtr always(FormulaPtr f) {
  return std::make_shared<Formula>(Formula{Op::Always, {}, std::move(f), nullptr});
}

inline bool equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op || a->atom != b->atom) return false;
  return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
}

// Fully parenthesized rendering in the concrete grammar accepted by parse().
inline std::string to_string(const FormulaPtr& f) {
  switch (f->op) {
    case Op::True: return "true";
    case Op::Atom: return f->atom;
    case Op::Not: return "!" + to_string(f->lhs);
    case Op::Eventually: return "<>" + to_string(f->lhs);
    case Op::Always: return "[]" + to_string(f->lhs);
    case Op::And: return "(" + to_string(f->lhs) + " & " + to_string(f->rhs) + ")";
    case Op::Or: return "(" + to_string(f->lhs) + " | " + to_string(f->rhs) + ")";
    case Op::Until: return "(" + to_string(f->lhs) + " U " + to_string(f->rhs) + ")";
  }
  return {};
}

inline void collect_atoms(const FormulaPtr& f, std::set<std::string>& out) {
  if (!f) return;
  if (f->op == Op::Atom) out.insert(f->atom);
  collect_atoms(f->lhs, out);
  collect_atoms(f->rhs, out);
}

inline std::vector<std::string> atoms(const FormulaPtr& f) {
  std::set<std::string> s;
  collect_atoms(f, s);
  return {s.begin(), s.end()};
}

namespace detail {

enum class Tok { End, True, False, Ident, Not, And, Or, Until, Eventually, Always, LParen, RParen };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      std::string word(s.substr(start, i - start));
      if (word == "true") {
        out.push_back({Tok::True, word, start});
      } else if (word == "false") {
        out.push_back({Tok::False, word, start});
      } else if (word == "U") {
        out.push_back({Tok::Until, word, start});
      } else {
        out.push_back({Tok::Ident, word, start});
      }
      continue;
    }
    switch (c) {
      case '!': out.push_back({Tok::Not, "!", start}); ++i; continue;
      case '&': out.push_back({Tok::And, "&", start}); ++i; continue;
      case '|': out.push_back({Tok::Or, "|", start}); ++i; continue;
      case '(': out.push_back({Tok::LParen, "(", start}); ++i; continue;
      case ')': out.push_back({Tok::RParen, ")", start}); ++i; continue;
      default: break;
    }
    if (s.substr(i, 2) == "<>") {
      out.push_back({Tok::Eventually, "<>", start});
      i += 2;
      continue;
    }
    if (s.substr(i, 2) == "[]") {
      out.push_back({Tok::Always, "[]", start});
      i += 2;
      continue;
    }
    throw ParseError("unknown operator token '" + std::string(1, c) + "'", start);
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  FormulaPtr parse() {
    auto f = parse_or();
    if (peek().kind != Tok::End) throw ParseError("unexpected token '" + peek().text + "'", peek().pos);
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  FormulaPtr parse_or() {
    auto lhs = parse_and();
    while (peek().kind == Tok::Or) {
      next();
      lhs = disj(lhs, parse_and());
    }
    return lhs;
  }

  FormulaPtr parse_and() {
    auto lhs = parse_until();
    while (peek().kind == Tok::And) {
      next();
      lhs = conj(lhs, parse_until());
    }
    return lhs;
  }

  FormulaPtr parse_until() {
    auto lhs = parse_unary();
    if (peek().kind == Tok::Until) {
      next();
      return until(lhs, parse_until());
    }
    return lhs;
  }

  FormulaPtr parse_unary() {
    switch (peek().kind) {
      case Tok::Not: next(); return neg(parse_unary());
      case Tok::Eventually: next(); return eventually(parse_unary());
      case Tok::Always: next(); return always(parse_unary());
      default: return parse_primary();
    }
  }

  FormulaPtr parse_primary() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::True: return top();
      case Tok::False: return neg(top());
      case Tok::Ident: return atom(t.text);
      case Tok::LParen: {
        auto f = parse_or();
        if (peek().kind != Tok::RParen) {
          throw ParseError(peek().kind == Tok::End ? "missing ')' at end of input" : "expected ')'",
                           peek().pos);
        }
        next();
        return f;
      }
      case Tok::End: throw ParseError("unexpected end of input", t.pos);
      default: throw ParseError("unexpected token '" + t.text + "'", t.pos);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline FormulaPtr parse(std::string_view text) { return detail::Parser(text).parse(); }

// A letter of the alphabet 2^AP, given as the set of true proposition names.
using Letter = std::set<std::string>;

// Ultimately periodic word prefix . cycle^omega.
struct LassoWord {
  std::vector<Letter> prefix;
  std::vector<Letter> cycle;
};

// Conjunction of literals over the automaton's proposition indices.
struct Guard {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  bool accepts(std::uint64_t letter) const { return (letter & pos) == pos && (letter & neg) == 0; }
  bool operator==(const Guard&) const = default;
};

struct Transition {
  Guard guard;
  int target = 0;
};

struct Nba {
  std::vector<std::string> ap;  // bit i of a letter mask <-> ap[i]
  std::vector<int> initial;
  std::vector<bool> accepting;
  std::vector<std::vector<Transition>> transitions;

  int num_states() const { return static_cast<int>(accepting.size()); }

  std::size_t num_edges() const {
    std::size_t n = 0;
    for (const auto& ts : transitions) n += ts.size();
    return n;
  }

  // Names outside ap are ignored.
  std::uint64_t letter_of(const Letter& names) const {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < ap.size(); ++i)
      if (names.count(ap[i])) m |= (1ull << i);
    return m;
  }

  template <typename Fn>
  void for_each_successor(int s, std::uint64_t letter, Fn&& fn) const {
    for (const auto& t : transitions[s])
      if (t.guard.accepts(letter)) fn(t.target);
  }

  std::vector<int> successors(int s, std::uint64_t letter) const {
    std::vector<int> out;
    for_each_successor(s, letter, [&](int t) { out.push_back(t); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Label-agnostic successor set.
  std::vector<int> post(int s) const {
    std::vector<int> out;
    for (const auto& t : transitions[s]) out.push_back(t.target);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void validate() const {
    const int n = num_states();
    if (static_cast<int>(transitions.size()) != n) throw Error("nba: transition table size mismatch");
    for (int s : initial)
      if (s < 0 || s >= n) throw Error("nba: initial state out of range");
    for (const auto& ts : transitions)
      for (const auto& t : ts)
        if (t.target < 0 || t.target >= n) throw Error("nba: transition target out of range");
  }
};

namespace detail {

// Negation normal form with release, hash-consed to integer ids.
enum class NKind { T, F, Pos, Neg, And, Or, U, R };

struct NNode {
  NKind kind;
  int atom = -1;
  int a = -1;
  int b = -1;
};

class NnfTable {
 public:
  explicit NnfTable(const std::vector<std::string>& ap) {
    for (std::size_t i = 0; i < ap.size(); ++i) atom_index_[ap[i]] = static_cast<int>(i);
  }

  int make(NKind k, int atom = -1, int a = -1, int b = -1) {
    if (k == NKind::And) {
      if (kind(a) == NKind::F || kind(b) == NKind::F) return make(NKind::F);
      if (kind(a) == NKind::T) return b;
      if (kind(b) == NKind::T) return a;
      if (a == b) return a;
      if (a > b) std::swap(a, b);
    } else if (k == NKind::Or) {
      if (kind(a) == NKind::T || kind(b) == NKind::T) return make(NKind::T);
      if (kind(a) == NKind::F) return b;
      if (kind(b) == NKind::F) return a;
      if (a == b) return a;
      if (a > b) std::swap(a, b);
    }
    auto key = std::make_tuple(static_cast<int>(k), atom, a, b);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({k, atom, a, b});
    index_.emplace(key, id);
    return id;
  }

  int from(const FormulaPtr& f, bool negated) {
    switch (f->op) {
      case Op::True: return make(negated ? NKind::F : NKind::T);
      case Op::Atom: return make(negated ? NKind::Neg : NKind::Pos, atom_index_.at(f->atom));
      case Op::Not: return from(f->lhs, !negated);
      case Op::And:
        return make(negated ? NKind::Or : NKind::And, -1, from(f->lhs, negated), from(f->rhs, negated));
      case Op::Or:
        return make(negated ? NKind::And : NKind::Or, -1, from(f->lhs, negated), from(f->rhs, negated));
      case Op::Until:
        return make(negated ? NKind::R : NKind::U, -1, from(f->lhs, negated), from(f->rhs, negated));
      case Op::Eventually:
        return negated ? make(NKind::R, -1, make(NKind::F), from(f->lhs, true))
                       : make(NKind::U, -1, make(NKind::T), from(f->lhs, false));
      case Op::Always:
        return negated ? make(NKind::U, -1, make(NKind::T), from(f->lhs, true))
                       : make(NKind::R, -1, make(NKind::F), from(f->lhs, false));
    }
    throw Error("ltl: unknown operator");
  }

  NKind kind(int id) const { return nodes_[id].kind; }
  const NNode& node(int id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<NNode> nodes_;
  std::map<std::tuple<int, int, int, int>, int> index_;
  std::unordered_map<std::string, int> atom_index_;
};

// Tableau construction of a generalized Buchi automaton (on-the-fly node
// expansion over Old/New/Next obligation sets).
class Tableau {
 public:
  struct Node {
    std::set<int> incoming;  // -1 denotes the virtual initial node
    std::set<int> fresh;     // "New"
    std::set<int> old;
    std::set<int> next;
  };

  explicit Tableau(NnfTable& table) : t_(table) {}

  void run(int root) {
    Node n;
    n.incoming.insert(-1);
    n.fresh.insert(root);
    expand(std::move(n));
  }

  const std::vector<Node>& nodes() const { return done_; }

 private:
  void add_fresh(Node& n, int f) {
    if (!n.old.count(f)) n.fresh.insert(f);
  }

  int complement(int lit) {
    const auto& nd = t_.node(lit);
    return t_.make(nd.kind == NKind::Pos ? NKind::Neg : NKind::Pos, nd.atom);
  }

  void expand(Node n) {
    if (n.fresh.empty()) {
      for (auto& d : done_) {
        if (d.old == n.old && d.next == n.next) {
          d.incoming.insert(n.incoming.begin(), n.incoming.end());
          return;
        }
      }
      const int id = static_cast<int>(done_.size());
      done_.push_back(n);
      Node succ;
      succ.incoming.insert(id);
      succ.fresh = n.next;
      expand(std::move(succ));
      return;
    }
    const int f = *n.fresh.begin();
    n.fresh.erase(n.fresh.begin());
    if (n.old.count(f)) {
      expand(std::move(n));
      return;
    }
    const NNode nd = t_.node(f);
    switch (nd.kind) {
      case NKind::F: return;
      case NKind::T:
        n.old.insert(f);
        expand(std::move(n));
        return;
      case NKind::Pos:
      case NKind::Neg:
        if (n.old.count(complement(f))) return;
        n.old.insert(f);
        expand(std::move(n));
        return;
      case NKind::And:
        n.old.insert(f);
        add_fresh(n, nd.a);
        add_fresh(n, nd.b);
        expand(std::move(n));
        return;
      case NKind::Or:
      case NKind::U:
      case NKind::R: {
        Node n1 = n;
        Node n2 = std::move(n);
        n1.old.insert(f);
        n2.old.insert(f);
        if (nd.kind == NKind::Or) {
          add_fresh(n1, nd.a);
          add_fresh(n2, nd.b);
        } else if (nd.kind == NKind::U) {
          add_fresh(n1, nd.a);
          n1.next.insert(f);
          add_fresh(n2, nd.b);
        } else {
          add_fresh(n1, nd.b);
          n1.next.insert(f);
          add_fresh(n2, nd.a);
          add_fresh(n2, nd.b);
        }
        expand(std::move(n1));
        expand(std::move(n2));
        return;
      }
    }
  }

  NnfTable& t_;
  std::vector<Node> done_;
};

}  // namespace detail

// Translate to an NBA: tableau to a generalized automaton, then
// counter-based degeneralization. Transitions are labelled with the literal
// conjunction of their target tableau node; unreachable states are removed.
inline Nba to_nba(const FormulaPtr& f) {
  Nba out;
  out.ap = atoms(f);
  if (out.ap.size() > 64) throw Error("ltl: at most 64 atomic propositions are supported");

  detail::NnfTable table(out.ap);
  const int root = table.from(f, false);
  detail::Tableau tab(table);
  tab.run(root);
  const auto& nodes = tab.nodes();

  std::vector<int> untils;
  for (std::size_t id = 0; id < table.size(); ++id)
    if (table.kind(static_cast<int>(id)) == detail::NKind::U) untils.push_back(static_cast<int>(id));
  // Only until-formulas that appear in some node matter for acceptance.
  std::erase_if(untils, [&](int u) {
    return std::none_of(nodes.begin(), nodes.end(), [&](const auto& n) { return n.old.count(u) > 0; });
  });

  const int num_nodes = static_cast<int>(nodes.size());
  std::vector<Guard> label(num_nodes);
  for (int q = 0; q < num_nodes; ++q) {
    for (int lit : nodes[q].old) {
      const auto& nd = table.node(lit);
      if (nd.kind == detail::NKind::Pos) label[q].pos |= (1ull << nd.atom);
      if (nd.kind == detail::NKind::Neg) label[q].neg |= (1ull << nd.atom);
    }
  }
  const int k = std::max<int>(1, static_cast<int>(untils.size()));
  auto in_set = [&](int q, int i) {
    if (untils.empty()) return true;
    const int u = untils[i];
    return !nodes[q].old.count(u) || nodes[q].old.count(table.node(u).b) > 0;
  };

  // Degeneralized state (q, i) -> 1 + q*k + i; state 0 is the initial state.
  const int total = 1 + num_nodes * k;
  std::vector<std::vector<Transition>> trans(total);
  std::vector<bool> acc(total, false);
  for (int q = 0; q < num_nodes; ++q) {
    for (int i = 0; i < k; ++i) {
      const int sid = 1 + q * k + i;
      acc[sid] = (i == 0) && in_set(q, 0);
    }
  }
  for (int q2 = 0; q2 < num_nodes; ++q2) {
    for (int src : nodes[q2].incoming) {
      if (src < 0) {
        trans[0].push_back({label[q2], 1 + q2 * k});
        continue;
      }
      for (int i = 0; i < k; ++i) {
        const int j = in_set(src, i) ? (i + 1) % k : i;
        trans[1 + src * k + i].push_back({label[q2], 1 + q2 * k + j});
      }
    }
  }

  // Keep states reachable from the initial state, renumbered in BFS order.
  std::vector<int> remap(total, -1);
  std::vector<int> order{0};
  remap[0] = 0;
  for (std::size_t h = 0; h < order.size(); ++h) {
    for (const auto& t : trans[order[h]]) {
      if (remap[t.target] < 0) {
        remap[t.target] = static_cast<int>(order.size());
        order.push_back(t.target);
      }
    }
  }
  out.initial = {0};
  out.accepting.resize(order.size());
  out.transitions.resize(order.size());
  for (std::size_t n = 0; n < order.size(); ++n) {
    out.accepting[n] = acc[order[n]];
    for (const auto& t : trans[order[n]]) out.transitions[n].push_back({t.guard, remap[t.target]});
    std::sort(out.transitions[n].begin(), out.transitions[n].end(), [](const Transition& a, const Transition& b) {
      return std::tie(a.target, a.guard.pos, a.guard.neg) < std::tie(b.target, b.guard.pos, b.guard.neg);
    });
    out.transitions[n].erase(std::unique(out.transitions[n].begin(), out.transitions[n].end(),
                                         [](const Transition& a, const Transition& b) {
                                           return a.target == b.target && a.guard == b.guard;
                                         }),
                             out.transitions[n].end());
  }
  return out;
}

// True iff some run over prefix.cycle^omega visits an accepting state
// infinitely often.
inline bool accepts_lasso(const Nba& a, const LassoWord& w) {
  if (w.cycle.empty()) throw Error("lasso word needs a nonempty cycle");
  const int n = a.num_states();
  std::vector<char> cur(n, 0);
  for (int s : a.initial) cur[s] = 1;
  for (const auto& letter : w.prefix) {
    std::vector<char> nxt(n, 0);
    const auto m = a.letter_of(letter);
    for (int s = 0; s < n; ++s)
      if (cur[s]) a.for_each_successor(s, m, [&](int t) { nxt[t] = 1; });
    cur = std::move(nxt);
  }

  // Product of the automaton with the cycle positions: node = s * c + j.
  const int c = static_cast<int>(w.cycle.size());
  std::vector<std::uint64_t> masks(c);
  for (int j = 0; j < c; ++j) masks[j] = a.letter_of(w.cycle[j]);
  const int total = n * c;
  auto succ = [&](int v, auto&& fn) {
    const int s = v / c, j = v % c;
    a.for_each_successor(s, masks[j], [&](int t) { fn(t * c + (j + 1) % c); });
  };

  std::vector<char> reach(total, 0);
  std::vector<int> stack;
  for (int s = 0; s < n; ++s)
    if (cur[s]) {
      reach[s * c] = 1;
      stack.push_back(s * c);
    }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    succ(v, [&](int u) {
      if (!reach[u]) {
        reach[u] = 1;
        stack.push_back(u);
      }
    });
  }

  // An accepting node that can return to itself.
  for (int v = 0; v < total; ++v) {
    if (!reach[v] || !a.accepting[v / c]) continue;
    std::vector<char> seen(total, 0);
    std::vector<int> st;
    succ(v, [&](int u) {
      if (!seen[u]) {
        seen[u] = 1;
        st.push_back(u);
      }
    });
    while (!st.empty()) {
      int x = st.back();
      st.pop_back();
      if (x == v) return true;
      succ(x, [&](int u) {
        if (!seen[u]) {
          seen[u] = 1;
          st.push_back(u);
        }
      });
    }
  }
  return false;
}

// Standard LTL semantics on prefix.cycle^omega, evaluated per subformula
// over the folded positions 0..|prefix|+|cycle|-1.
inline bool eval_lasso_semantics(const FormulaPtr& f, const LassoWord& w) {
  if (w.cycle.empty()) throw Error("lasso word needs a nonempty cycle");
  const int p = static_cast<int>(w.prefix.size());
  const int n = p + static_cast<int>(w.cycle.size());
  auto letter = [&](int i) -> const Letter& { return i < p ? w.prefix[i] : w.cycle[i - p]; };
  auto next = [&](int i) { return i + 1 < n ? i + 1 : p; };

  std::unordered_map<const Formula*, std::vector<char>> memo;
  auto eval = [&](auto&& self, const FormulaPtr& g) -> const std::vector<char>& {
    auto it = memo.find(g.get());
    if (it != memo.end()) return it->second;
    std::vector<char> v(n, 0);
    auto until_fix = [&](const std::vector<char>& lhs, const std::vector<char>& rhs) {
      std::vector<char> u = rhs;
      for (int sweep = 0; sweep <= n; ++sweep) {
        bool changed = false;
        for (int i = n - 1; i >= 0; --i) {
          char val = rhs[i] || (lhs[i] && u[next(i)]);
          if (val != u[i]) {
            u[i] = val;
            changed = true;
          }
        }
        if (!changed) break;
      }
      return u;
    };
    switch (g->op) {
      case Op::True: std::fill(v.begin(), v.end(), 1); break;
      case Op::Atom:
        for (int i = 0; i < n; ++i) v[i] = letter(i).count(g->atom) ? 1 : 0;
        break;
      case Op::Not: {
        const auto& a = self(self, g->lhs);
        for (int i = 0; i < n; ++i) v[i] = !a[i];
        break;
      }
      case Op::And: {
        const auto a = self(self, g->lhs);
        const auto& b = self(self, g->rhs);
        for (int i = 0; i < n; ++i) v[i] = a[i] && b[i];
        break;
      }
      case Op::Or: {
        const auto a = self(self, g->lhs);
        const auto& b = self(self, g->rhs);
        for (int i = 0; i < n; ++i) v[i] = a[i] || b[i];
        break;
      }
      case Op::Until: {
        const auto a = self(self, g->lhs);
        const auto b = self(self, g->rhs);
        v = until_fix(a, b);
        break;
      }
      case Op::Eventually: {
        const auto b = self(self, g->lhs);
        v = until_fix(std::vector<char>(n, 1), b);
        break;
      }
      case Op::Always: {
        const auto a = self(self, g->lhs);
        std::vector<char> na(n);
        for (int i = 0; i < n; ++i) na[i] = !a[i];
        auto ev = until_fix(std::vector<char>(n, 1), na);
        for (int i = 0; i < n; ++i) v[i] = !ev[i];
        break;
      }
    }
    return memo.emplace(g.get(), std::move(v)).first->second;
  };
  return eval(eval, f)[0] != 0;
}

}  // namespace mrc::ltl
