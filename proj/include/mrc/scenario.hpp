#pragma once

// JSON scenario files and the run artifacts: trajectories.csv, events.jsonl,
// metrics.json and plot.svg.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mrc/sim.hpp"

namespace mrc {

using nlohmann::json;

namespace detail {

// Collects every field problem instead of stopping at the first.
class FieldReader {
 public:
  std::vector<std::string> problems;

  const json* child(const json& obj, const std::string& path, const char* key, bool required = true) {
    if (!obj.is_object()) {
      problems.push_back(path + ": expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) problems.push_back(path + "." + key + ": missing");
      return nullptr;
    }
    return &*it;
  }

  template <class T>
  T get(const json& obj, const std::string& path, const char* key, T fallback, bool required = true) {
    const json* v = child(obj, path, key, required);
    if (!v) return fallback;
    try {
      if constexpr (std::is_arithmetic_v<T>) {
        if (!v->is_number()) throw std::runtime_error("not a number");
      }
      return v->get<T>();
    } catch (const std::exception&) {
      problems.push_back(path + "." + key + ": wrong type");
      return fallback;
    }
  }

  std::optional<Polygon> shape(const json& r, const std::string& path) {
    if (r.contains("rect_m")) {
      const auto& a = r["rect_m"];
      if (!a.is_array() || a.size() != 4 || !std::all_of(a.begin(), a.end(), [](const json& v) { return v.is_number(); })) {
        problems.push_back(path + ".rect_m: expected [x0, y0, x1, y1]");
        return std::nullopt;
      }
      const double x0 = a[0], y0 = a[1], x1 = a[2], y1 = a[3];
      if (!(x1 > x0 && y1 > y0)) {
        problems.push_back(path + ".rect_m: empty rectangle");
        return std::nullopt;
      }
      return Polygon::rect(x0, y0, x1, y1);
    }
    if (r.contains("polygon_m")) {
      const auto& a = r["polygon_m"];
      Polygon p;
      if (a.is_array()) {
        for (const auto& v : a) {
          if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            problems.push_back(path + ".polygon_m: vertices must be [x, y]");
            return std::nullopt;
          }
          p.pts.push_back({v[0].get<double>(), v[1].get<double>()});
        }
      }
      if (p.pts.size() < 3) {
        problems.push_back(path + ".polygon_m: needs at least three vertices");
        return std::nullopt;
      }
      return p;
    }
    problems.push_back(path + ": needs rect_m or polygon_m");
    return std::nullopt;
  }
};

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

struct Scenario {
  std::string name;
  SimConfig config;
  std::vector<std::string> warnings;
  json source;
};

// Parses scenario text. Syntax errors raise ParseError with the byte offset;
// every structural or semantic problem is gathered into one ValidationError.
inline Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
  detail::FieldReader rd;
  Scenario sc;
  sc.source = doc;
  SimConfig& c = sc.config;
  if (!doc.is_object()) throw ValidationError({"scenario: expected a JSON object"});
  sc.name = rd.get<std::string>(doc, "scenario", "name", "scenario", false);

  if (const json* ws = rd.child(doc, "scenario", "workspace")) {
    const json* b = rd.child(*ws, "workspace", "bounds_m");
    if (b) {
      if (b->is_array() && b->size() == 4 && std::all_of(b->begin(), b->end(), [](const json& v) { return v.is_number(); }))
        c.workspace.bounds = {(*b)[0], (*b)[1], (*b)[2], (*b)[3]};
      else
        rd.problems.push_back("workspace.bounds_m: expected [x0, y0, x1, y1]");
    }
    c.workspace.workspace_label = rd.get<std::string>(*ws, "workspace", "workspace_label", "W", false);
    c.workspace.obstacle_label = rd.get<std::string>(*ws, "workspace", "obstacle_label", "O", false);
    for (const char* group : {"obstacles", "targets"}) {
      const json* arr = rd.child(*ws, "workspace", group, false);
      if (!arr) continue;
      if (!arr->is_array()) {
        rd.problems.push_back(std::string("workspace.") + group + ": expected an array");
        continue;
      }
      for (std::size_t i = 0; i < arr->size(); ++i) {
        const std::string path = std::string("workspace.") + group + "[" + std::to_string(i) + "]";
        const json& r = (*arr)[i];
        const std::string name = rd.get<std::string>(r, path, "name", "");
        auto poly = r.is_object() ? rd.shape(r, path) : std::nullopt;
        if (!poly) continue;
        (std::string(group) == "obstacles" ? c.workspace.obstacles : c.workspace.labels).push_back({name, *poly});
      }
    }
  }
  c.grid_size = rd.get<double>(doc, "scenario", "grid_size_m", 0.0);

  if (const json* s = rd.child(doc, "scenario", "sim")) {
    c.delta = rd.get<double>(*s, "sim", "delta_s", c.delta, false);
    c.h = rd.get<double>(*s, "sim", "step_s", c.h, false);
    c.R = rd.get<double>(*s, "sim", "sensing_radius_m", c.R);
    c.duration = rd.get<double>(*s, "sim", "duration_s", c.duration);
    c.eta = rd.get<double>(*s, "sim", "eta_m", c.eta, false);
    c.t_max = rd.get<double>(*s, "sim", "t_max_s", c.t_max, false);
    c.tau_s = rd.get<double>(*s, "sim", "wait_s", c.tau_s, false);
    c.schedule_dt = rd.get<double>(*s, "sim", "schedule_dt_s", c.schedule_dt, false);
    c.time_weight = rd.get<double>(*s, "sim", "time_weight_m_per_s", c.time_weight, false);
    c.n_max = rd.get<int>(*s, "sim", "n_max", c.n_max, false);
    c.seed = rd.get<std::uint64_t>(*s, "sim", "seed", c.seed, false);
  }

  if (const json* arr = rd.child(doc, "scenario", "robots")) {
    if (!arr->is_array()) rd.problems.push_back("robots: expected an array");
    for (std::size_t i = 0; arr->is_array() && i < arr->size(); ++i) {
      const std::string path = "robots[" + std::to_string(i) + "]";
      const json& r = (*arr)[i];
      if (!r.is_object()) {
        rd.problems.push_back(path + ": expected an object");
        continue;
      }
      RobotSpec spec;
      spec.id = rd.get<int>(r, path, "id", static_cast<int>(i) + 1);
      spec.name = rd.get<std::string>(r, path, "name", "robot" + std::to_string(spec.id), false);
      spec.radius = rd.get<double>(r, path, "radius_m", 0.0);
      spec.formula = rd.get<std::string>(r, path, "formula", "");
      spec.p0 = rd.get<int>(r, path, "p0", spec.id);
      const std::string kind = rd.get<std::string>(r, path, "model", "");
      const json* st = rd.child(r, path, "start");
      if (kind == "unicycle") {
        spec.model = {ModelKind::Unicycle, rd.get<double>(r, path, "v_max_mps", 0.0),
                      rd.get<double>(r, path, "omega_max_radps", 0.0), rd.get<double>(r, path, "a_max_mps2", 0.0)};
        const std::string br = rd.get<std::string>(r, path, "braking", "straight_line", false);
        if (br == "straight_line")
          spec.braking = BrakingKind::StraightLine;
        else if (br == "max_turn")
          spec.braking = BrakingKind::MaxTurn;
        else
          rd.problems.push_back(path + ".braking: unknown controller '" + br + "'");
        if (st)
          spec.start = {rd.get<double>(*st, path + ".start", "x_m", 0.0), rd.get<double>(*st, path + ".start", "y_m", 0.0),
                        rd.get<double>(*st, path + ".start", "theta_rad", 0.0, false),
                        rd.get<double>(*st, path + ".start", "v_mps", 0.0, false)};
      } else if (kind == "double_integrator") {
        spec.model = {ModelKind::DoubleIntegrator, rd.get<double>(r, path, "v_max_mps", 0.0), 0.0,
                      rd.get<double>(r, path, "u_max_mps2", 0.0)};
        spec.braking = BrakingKind::NormDecel;
        if (st)
          spec.start = {rd.get<double>(*st, path + ".start", "x_m", 0.0), rd.get<double>(*st, path + ".start", "y_m", 0.0),
                        rd.get<double>(*st, path + ".start", "vx_mps", 0.0, false),
                        rd.get<double>(*st, path + ".start", "vy_mps", 0.0, false)};
      } else if (!kind.empty()) {
        rd.problems.push_back(path + ".model: unknown model '" + kind + "'");
      }
      c.robots.push_back(spec);
    }
  }

  if (rd.problems.empty()) {
    for (auto& p : config_problems(c)) rd.problems.push_back(p);
    if (c.grid_size > 0) {
      try {
        Grid g(c.workspace, c.grid_size);
      } catch (const ValidationError& e) {
        for (const auto& p : e.problems) rd.problems.push_back(p);
      } catch (const Error& e) {
        rd.problems.push_back(e.what());
      }
    }
  }
  if (!rd.problems.empty()) throw ValidationError(rd.problems);
  sc.warnings = config_warnings(c);
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// Columns: t, robot, x, y, theta_or_vx, v_or_vy, mode.
inline void write_trajectories(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "t,robot,x,y,theta_or_vx,v_or_vy,mode\n";
  for (const auto& r : rows) {
    os << detail::fmt(r.t, "%.3f") << ',' << r.robot << ',' << detail::fmt(r.x[0]) << ',' << detail::fmt(r.x[1]) << ','
       << detail::fmt(r.x[2]) << ',' << detail::fmt(r.x[3]) << ',' << to_string(r.mode) << '\n';
  }
}

inline void write_events(std::ostream& os, const std::vector<json>& events) {
  for (const auto& e : events) os << e.dump() << '\n';
}

inline json metrics_json(const SimReport& rep, const SimConfig& cfg) {
  json m;
  m["ct_rounds"] = rep.ct_rounds;
  m["ct_pairs"] = rep.ct_pairs;
  m["ct_unit"] = "ct_rounds counts rounds with any conflict; ct_pairs counts conflicting pairs per round";
  const auto a = rep.atlr(), mx = rep.mtlr();
  m["atlr_s"] = a ? json(*a) : json(nullptr);
  m["mtlr_s"] = mx ? json(*mx) : json(nullptr);
  m["replans"] = rep.replan_seconds.size();
  m["rounds"] = rep.rounds;
  m["end_time_s"] = rep.end_time;
  m["aborted"] = rep.aborted;
  m["safety_violations"] = rep.violations.size();
  m["constraint_violations"] = rep.constraint_violations.size();
  m["witness_checks"] = rep.witness_checks;
  m["witness_counterexamples"] = rep.witness_counterexamples;
  m["warnings"] = rep.warnings;
  m["seed"] = cfg.seed;
  json robots = json::array();
  for (std::size_t i = 0; i < rep.robots.size(); ++i) {
    const auto& s = rep.robots[i];
    robots.push_back({{"id", i < cfg.robots.size() ? cfg.robots[i].id : static_cast<int>(i)},
                      {"name", s.name},
                      {"visits", s.visits},
                      {"surveillance_rounds", s.surveillance_rounds},
                      {"deadlock", s.deadlock},
                      {"emerg_time_s", s.emerg_time},
                      {"longest_emerg_s", s.longest_emerg},
                      {"emerg_entries", s.emerg_entries},
                      {"restarts", s.restarts},
                      {"replans", s.replans},
                      {"replan_failures", s.replan_failures},
                      {"livelock_violations", s.livelock_violations}});
  }
  m["robots"] = robots;
  return m;
}

struct PlotTrace {
  int robot = 0;
  std::vector<Vec2> points;
  std::vector<Vec2> emerg;  // where an Emerg stretch starts
};

// Reads trajectories.csv back into per-robot traces.
inline std::vector<PlotTrace> read_traces(std::istream& in) {
  std::map<int, PlotTrace> by_robot;
  std::map<int, bool> in_emerg;
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,robot,x,y", 0) != 0) throw Error("not a trajectory log: missing header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[7];
    for (auto& s : f) std::getline(ss, s, ',');
    try {
      const int id = std::stoi(f[1]);
      const Vec2 p{std::stod(f[2]), std::stod(f[3])};
      auto& tr = by_robot[id];
      tr.robot = id;
      tr.points.push_back(p);
      const bool e = f[6] == "Emerg";
      if (e && !in_emerg[id]) tr.emerg.push_back(p);
      in_emerg[id] = e;
    } catch (const std::exception&) {
      throw Error("bad trajectory row at line " + std::to_string(lineno));
    }
  }
  std::vector<PlotTrace> out;
  for (auto& [id, t] : by_robot) out.push_back(std::move(t));
  return out;
}

inline std::string render_svg(const Workspace& ws, const std::vector<PlotTrace>& traces) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                 "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};
  const double W = ws.bounds.x1 - ws.bounds.x0, H = ws.bounds.y1 - ws.bounds.y0;
  const double scale = 600.0 / std::max(W, H);
  auto X = [&](double x) { return detail::fmt((x - ws.bounds.x0) * scale, "%.2f"); };
  auto Y = [&](double y) { return detail::fmt((ws.bounds.y1 - y) * scale, "%.2f"); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << X(ws.bounds.x1) << "\" height=\"" << Y(ws.bounds.y0)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << X(ws.bounds.x1) << "\" height=\"" << Y(ws.bounds.y0)
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  auto poly = [&](const Region& r, const char* fill) {
    os << "<polygon fill=\"" << fill << "\" stroke=\"#555\" points=\"";
    for (auto p : r.shape.pts) os << X(p.x) << ',' << Y(p.y) << ' ';
    os << "\"/>\n";
    const Vec2 c = r.shape.bbox().center();
    os << "<text x=\"" << X(c.x) << "\" y=\"" << Y(c.y) << "\" font-size=\"12\" text-anchor=\"middle\">" << r.name
       << "</text>\n";
  };
  for (const auto& r : ws.labels) poly(r, "#add8e6");
  for (const auto& r : ws.obstacles) poly(r, "#999999");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const char* col = colors[i % 10];
    os << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << col << "\" points=\"";
    for (auto p : t.points) os << X(p.x) << ',' << Y(p.y) << ' ';
    os << "\"/>\n";
    if (!t.points.empty())
      os << "<circle r=\"4\" fill=\"" << col << "\" cx=\"" << X(t.points[0].x) << "\" cy=\"" << Y(t.points[0].y)
         << "\"/>\n";
    for (auto p : t.emerg) {
      const double px = (p.x - ws.bounds.x0) * scale, py = (ws.bounds.y1 - p.y) * scale;
      os << "<path stroke=\"red\" stroke-width=\"2\" d=\"M" << px - 5 << ',' << py - 5 << " L" << px + 5 << ','
         << py + 5 << " M" << px - 5 << ',' << py + 5 << " L" << px + 5 << ',' << py - 5 << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mrc
