#pragma once

// Robot models, constrained integration and braking controllers.

#include <array>
#include <complex>
#include <vector>

#include "mrc/common.hpp"
#include "mrc/geometry.hpp"

namespace mrc {

enum class ModelKind { Unicycle, DoubleIntegrator };

// Unicycle state (x, y, theta, v), input (omega, a).
// Double integrator state (x, y, vx, vy), input (ux, uy).
using State = std::array<double, 4>;
using Input = std::array<double, 2>;

struct RobotModel {
  ModelKind kind = ModelKind::Unicycle;
  double v_max = 1.0;
  double omega_max = 1.0;  // unused by the double integrator
  double accel_max = 1.0;  // a_max or u_max

  void validate() const {
    if (!(v_max > 0) || !(accel_max > 0) || (kind == ModelKind::Unicycle && !(omega_max > 0)))
      throw Error("robot model bounds must be strictly positive");
  }
};

enum class BrakingKind { StraightLine, MaxTurn, NormDecel };

struct BrakingProfile {
  BrakingKind kind = BrakingKind::StraightLine;
  double t_br = 0.0;
  double d_br = 0.0;
};

inline constexpr double kConstraintTol = 1e-9;

inline Vec2 position(const State& x) { return {x[0], x[1]}; }

inline double speed(const RobotModel& m, const State& x) {
  return m.kind == ModelKind::Unicycle ? std::fabs(x[3]) : std::hypot(x[2], x[3]);
}

inline bool state_admissible(const RobotModel& m, const State& x) {
  return speed(m, x) <= m.v_max * (1 + kConstraintTol) + kConstraintTol;
}

inline bool input_admissible(const RobotModel& m, const Input& u) {
  const double tol = kConstraintTol;
  if (m.kind == ModelKind::Unicycle)
    return std::fabs(u[0]) <= m.omega_max * (1 + tol) + tol && std::fabs(u[1]) <= m.accel_max * (1 + tol) + tol;
  return std::hypot(u[0], u[1]) <= m.accel_max * (1 + tol) + tol;
}

namespace detail {

inline State unicycle_rhs(const State& x, const Input& u) {
  return {x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u[0], u[1]};
}

inline State rk4_step(const State& x, const Input& u, double h) {
  auto add = [](const State& a, const State& b, double s) {
    return State{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]};
  };
  const State k1 = unicycle_rhs(x, u);
  const State k2 = unicycle_rhs(add(x, k1, h / 2), u);
  const State k3 = unicycle_rhs(add(x, k2, h / 2), u);
  const State k4 = unicycle_rhs(add(x, k3, h), u);
  State out;
  for (int i = 0; i < 4; ++i) out[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

// State after holding u for dt, without constraint checks.
inline State flow(const RobotModel& m, const State& x, const Input& u, double dt) {
  if (dt <= 0) return x;
  if (m.kind == ModelKind::DoubleIntegrator) {
    return {x[0] + x[2] * dt + 0.5 * u[0] * dt * dt, x[1] + x[3] * dt + 0.5 * u[1] * dt * dt, x[2] + u[0] * dt,
            x[3] + u[1] * dt};
  }
  if (u[0] == 0.0) {
    const double s = x[3] * dt + 0.5 * u[1] * dt * dt;
    return {x[0] + s * std::cos(x[2]), x[1] + s * std::sin(x[2]), x[2], x[3] + u[1] * dt};
  }
  if (x[3] == 0.0 && u[1] == 0.0) return {x[0], x[1], x[2] + u[0] * dt, 0.0};
  const double step = std::min(dt / 10, 1e-3);
  const int n = static_cast<int>(std::ceil(dt / step - 1e-9));
  const double h = dt / n;
  State s = x;
  for (int i = 0; i < n; ++i) s = rk4_step(s, u, h);
  // heading and speed are linear in time; use the exact values
  s[2] = x[2] + u[0] * dt;
  s[3] = x[3] + u[1] * dt;
  return s;
}

}  // namespace detail

// Holds u constant for dt. Throws ConstraintViolation if x or u is not
// admissible or the velocity bound is exceeded during [0, dt]; the speed is
// affine in time for both models so checking the endpoints suffices.
inline State integrate(const RobotModel& m, const State& x, const Input& u, double dt) {
  if (dt < 0) throw Error("negative integration step");
  if (!input_admissible(m, u)) throw ConstraintViolation("input outside the admissible set");
  if (!state_admissible(m, x)) throw ConstraintViolation("state outside the admissible set");
  const State out = detail::flow(m, x, u, dt);
  if (!state_admissible(m, out)) throw ConstraintViolation("velocity bound exceeded during integration");
  return out;
}

inline BrakingKind default_braking(const RobotModel& m) {
  return m.kind == ModelKind::Unicycle ? BrakingKind::StraightLine : BrakingKind::NormDecel;
}

inline void check_braking_kind(const RobotModel& m, BrakingKind k) {
  const bool uni = m.kind == ModelKind::Unicycle;
  if (uni == (k == BrakingKind::NormDecel)) throw Error("braking controller does not match the robot model");
}

// Stop-point distance for constant-turn braking from speed v with turn rate w
// and deceleration a.
inline double curved_braking_distance(double v, double w, double a) {
  const double T = v / a;
  const double phi = w * T;
  const double g = 2 * a * a * (1 - std::cos(phi)) + v * v * w * w - 2 * v * w * a * std::sin(phi);
  return std::sqrt(std::max(g, 0.0)) / (w * w);
}

namespace detail {

// Exact position offset after t seconds of constant-turn braking.
inline Vec2 curved_offset(double v, double w, double a, double t) {
  using C = std::complex<double>;
  const C i(0, 1);
  const C e = std::exp(i * w * t);
  const C p = v * (e - 1.0) / (i * w) - a * (t * e / (i * w) + (e - 1.0) / (w * w));
  return {p.real(), p.imag()};
}

}  // namespace detail

inline std::pair<double, double> braking_bounds(const RobotModel& m, BrakingKind kind) {
  m.validate();
  check_braking_kind(m, kind);
  const double T = m.v_max / m.accel_max;
  if (kind != BrakingKind::MaxTurn) return {T, m.v_max * m.v_max / (2 * m.accel_max)};
  const double w = m.omega_max;
  if (w * T <= kPi) return {T, curved_braking_distance(m.v_max, w, m.accel_max)};
  double best = 0;
  const int n = 20000;
  for (int k = 1; k <= n; ++k)
    best = std::max(best, norm(detail::curved_offset(m.v_max, w, m.accel_max, T * k / n)));
  return {T, best};
}

inline BrakingProfile make_braking_profile(const RobotModel& m, BrakingKind kind) {
  auto [t, d] = braking_bounds(m, kind);
  return {kind, t, d};
}

inline Input braking_control(const RobotModel& m, const BrakingProfile& p, const State& x) {
  check_braking_kind(m, p.kind);
  if (m.kind == ModelKind::DoubleIntegrator) {
    const double s = std::hypot(x[2], x[3]);
    if (s == 0.0) return {0, 0};
    return {-m.accel_max * x[2] / s, -m.accel_max * x[3] / s};
  }
  if (x[3] == 0.0) return {0, 0};
  const double a = x[3] > 0 ? -m.accel_max : m.accel_max;
  return {p.kind == BrakingKind::MaxTurn ? m.omega_max : 0.0, a};
}

// Time until the braking controller brings the robot to rest.
inline double braking_duration(const RobotModel& m, const State& x) { return speed(m, x) / m.accel_max; }

struct TimedState {
  double t = 0.0;
  State x{};
};

// Trajectory under the braking controller until rest, sampled every dt plus
// the exact stop time. A robot already at rest yields a single sample.
inline std::vector<TimedState> braking_trajectory(const RobotModel& m, const BrakingProfile& p, const State& x,
                                                  double dt = 1e-3) {
  const Input u = braking_control(m, p, x);
  const double T = braking_duration(m, x);
  std::vector<TimedState> out{{0.0, x}};
  if (T == 0.0) return out;
  for (double t = dt; t < T; t += dt) out.push_back({t, integrate(m, x, u, t)});
  State end = integrate(m, x, u, T);
  if (m.kind == ModelKind::Unicycle) {
    end[3] = 0.0;
  } else {
    end[2] = end[3] = 0.0;
  }
  out.push_back({T, end});
  return out;
}

}  // namespace mrc
