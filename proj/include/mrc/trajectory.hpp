#pragma once

// Timed plans: a finite prefix of constant-input segments followed by a cycle
// of segments repeated forever.

#include "mrc/cts.hpp"

namespace mrc {

struct PlanSegment {
  State x0{};
  Input u{};
  double duration = 0.0;
  int end_node = -1;  // lattice state reached at the end, -1 if off-lattice
  int nba_state = -1;  // automaton state of the planned run at end_node, -1 if unknown
};

struct Arrival {
  double t;
  int node;
  int nba_state;
};

class Plan {
 public:
  Plan() = default;

  Plan(RobotModel model, double t0, std::vector<PlanSegment> prefix, std::vector<PlanSegment> cycle)
      : model_(model), t0_(t0), prefix_(std::move(prefix)), cycle_(std::move(cycle)) {
    if (cycle_.empty()) throw Error("plan needs a nonempty cycle");
    starts_.reserve(prefix_.size());
    double t = t0_;
    for (const auto& s : prefix_) {
      starts_.push_back(t);
      t += s.duration;
    }
    cycle_start_ = t;
    for (const auto& s : cycle_) {
      cycle_offsets_.push_back(period_);
      period_ += s.duration;
    }
    if (!(period_ > 0)) throw Error("plan cycle must have positive duration");
    // stationary tail: the cycle and the trailing prefix segments do not move
    stationary_from_ = kInf;
    const bool still = std::all_of(cycle_.begin(), cycle_.end(), [&](const auto& s) { return !moves(s); });
    if (still) {
      stationary_from_ = cycle_start_;
      for (int i = static_cast<int>(prefix_.size()) - 1; i >= 0 && !moves(prefix_[i]); --i) stationary_from_ = starts_[i];
    }
  }

  // Plan that holds x forever from t0.
  static Plan hold(RobotModel model, double t0, const State& x, int node = -1) {
    return Plan(model, t0, {}, {PlanSegment{x, {0.0, 0.0}, 1.0, node}});
  }

  const RobotModel& model() const { return model_; }
  double start_time() const { return t0_; }
  double cycle_start() const { return cycle_start_; }
  double period() const { return period_; }
  const std::vector<PlanSegment>& prefix() const { return prefix_; }
  const std::vector<PlanSegment>& cycle() const { return cycle_; }
  // After this time the position never changes again.
  double stationary_from() const { return stationary_from_; }
  bool empty() const { return cycle_.empty(); }

  struct Locator {
    const PlanSegment* seg;
    double seg_start;
  };

  Locator locate(double t) const {
    if (t <= t0_) return {&first(), t0_};
    if (t < cycle_start_) {
      const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
      const std::size_t i = static_cast<std::size_t>(it - starts_.begin()) - 1;
      return {&prefix_[i], starts_[i]};
    }
    const double k = std::floor((t - cycle_start_) / period_);
    const double base = cycle_start_ + k * period_;
    double off = t - base;
    auto it = std::upper_bound(cycle_offsets_.begin(), cycle_offsets_.end(), off);
    std::size_t i = static_cast<std::size_t>(it - cycle_offsets_.begin());
    i = i == 0 ? 0 : i - 1;
    return {&cycle_[i], base + cycle_offsets_[i]};
  }

  State state_at(double t) const {
    if (t <= t0_) return first().x0;
    const Locator l = locate(t);
    const double dt = std::clamp(t - l.seg_start, 0.0, l.seg->duration);
    return detail::flow(model_, l.seg->x0, l.seg->u, dt);
  }

  Vec2 position_at(double t) const { return position(state_at(t)); }

  Input input_at(double t) const { return t < t0_ ? Input{0, 0} : locate(t).seg->u; }

  // Segment boundaries (end time, lattice node) with end time in (ta, tb].
  std::vector<Arrival> arrivals(double ta, double tb) const {
    std::vector<Arrival> out;
    for (std::size_t i = 0; i < prefix_.size(); ++i) {
      const double te = starts_[i] + prefix_[i].duration;
      if (te > ta && te <= tb) out.push_back({te, prefix_[i].end_node, prefix_[i].nba_state});
    }
    if (tb >= cycle_start_) {
      const double k0 = std::max(0.0, std::floor((ta - cycle_start_) / period_));
      for (double k = k0; cycle_start_ + k * period_ <= tb; k += 1) {
        for (std::size_t i = 0; i < cycle_.size(); ++i) {
          const double te = cycle_start_ + k * period_ + cycle_offsets_[i] + cycle_[i].duration;
          if (te > ta && te <= tb) out.push_back({te, cycle_[i].end_node, cycle_[i].nba_state});
        }
      }
    }
    return out;
  }

  // Remaining part of the segment running at t, trimmed to start at t, and its
  // end time. Empty when t sits on a segment boundary.
  std::pair<double, std::vector<PlanSegment>> remainder_to_boundary(double t) const {
    const Locator l = locate(t);
    PlanSegment s = *l.seg;
    const double used = std::clamp(t - l.seg_start, 0.0, s.duration);
    const double end = l.seg_start + s.duration;
    if (used <= 1e-9 || used >= s.duration - 1e-9) return {t, {}};
    s.x0 = detail::flow(model_, s.x0, s.u, used);
    s.duration -= used;
    return {end, {s}};
  }

  // Segments from t through the first one that ends on a lattice node, with
  // the first trimmed to start at t, and their end time. Empty when the state
  // at t already satisfies `on_lattice` at a segment boundary.
  template <typename OnLattice>
  std::pair<double, std::vector<PlanSegment>> commit_to_node(double t, OnLattice&& on_lattice,
                                                            int max_segments = 16) const {
    std::vector<PlanSegment> out;
    double cur = t;
    for (int n = 0; n < max_segments; ++n) {
      const Locator l = locate(cur + 1e-9);
      PlanSegment s = *l.seg;
      const double used = std::max(0.0, cur - l.seg_start);
      const double end = l.seg_start + s.duration;
      if (used >= s.duration - 1e-9) {
        cur = end;
        continue;
      }
      if (used > 1e-9) {
        s.x0 = detail::flow(model_, s.x0, s.u, used);
        s.duration -= used;
      } else if (out.empty() && on_lattice(s.x0)) {
        return {cur, {}};
      }
      out.push_back(s);
      cur = end;
      if (s.end_node >= 0) break;
    }
    return {cur, out};
  }

 private:
  bool moves(const PlanSegment& s) const {
    if (s.duration == 0.0) return false;
    if (model_.kind == ModelKind::Unicycle) return s.x0[3] != 0.0 || s.u[1] != 0.0;
    return s.x0[2] != 0.0 || s.x0[3] != 0.0 || s.u[0] != 0.0 || s.u[1] != 0.0;
  }

  const PlanSegment& first() const { return prefix_.empty() ? cycle_.front() : prefix_.front(); }

  RobotModel model_;
  double t0_ = 0.0;
  std::vector<PlanSegment> prefix_;
  std::vector<PlanSegment> cycle_;
  std::vector<double> starts_;
  std::vector<double> cycle_offsets_;
  double cycle_start_ = 0.0;
  double period_ = 0.0;
  double stationary_from_ = kInf;
};

}  // namespace mrc
