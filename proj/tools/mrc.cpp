// Command line front end: precompute, run, check, plot.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "mrc/mrc.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  bool warn_as_error = false;
  std::string trajectories;
};

mrc::Scenario load(const Options& o) {
  mrc::Scenario sc = mrc::load_scenario(o.scenario);
  if (o.seed) {
    sc.config.seed = *o.seed;
    sc.source["sim"]["seed"] = *o.seed;
  }
  if (o.duration) {
    sc.config.duration = *o.duration;
    sc.source["sim"]["duration_s"] = *o.duration;
  }
  for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
  if (o.warn_as_error && !sc.warnings.empty()) throw mrc::ValidationError(sc.warnings);
  return sc;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw mrc::Error("cannot write " + p.string());
  f << text;
}

int cmd_check(const Options& o) {
  const auto sc = load(o);
  std::cout << sc.name << ": ok (" << sc.config.robots.size() << " robots)\n";
  return 0;
}

int cmd_precompute(const Options& o) {
  const auto sc = load(o);
  if (mrc::cache::directory().empty()) std::cerr << "warning: MRC_CACHE_DIR is not set, nothing will be stored\n";
  auto grid = std::make_shared<const mrc::Grid>(sc.config.workspace, sc.config.grid_size);
  const auto t0 = std::chrono::steady_clock::now();
  const auto off = mrc::precompute(sc.config, grid);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& r : off) {
    std::cout << r.spec.name << ": cts " << r.cts->size() << " states, nba " << r.nba->num_states() << " states, pba "
              << r.product.pba.size() << " states" << (r.product.from_cache ? " (cached)" : "") << "\n";
  }
  std::cout << "precompute took " << secs << " s\n";
  return 0;
}

int cmd_run(const Options& o) {
  const auto sc = load(o);
  fs::create_directories(o.out);
  const auto rep = mrc::run(sc.config);
  const fs::path out(o.out);
  {
    std::ofstream f(out / "trajectories.csv", std::ios::binary);
    mrc::write_trajectories(f, rep.rows);
  }
  {
    std::ofstream f(out / "events.jsonl", std::ios::binary);
    mrc::write_events(f, rep.events);
  }
  write_file(out / "metrics.json", mrc::metrics_json(rep, sc.config).dump(2) + "\n");
  {
    std::ifstream f(out / "trajectories.csv");
    write_file(out / "plot.svg", mrc::render_svg(sc.config.workspace, mrc::read_traces(f)));
  }
  const bool bad = !rep.violations.empty() || !rep.constraint_violations.empty();
  if (bad) {
    nlohmann::json bundle = {{"scenario", sc.source}, {"seed", sc.config.seed}, {"end_time_s", rep.end_time}};
    write_file(out / "repro.json", bundle.dump(2) + "\n");
    std::cerr << "violations detected; reproduction bundle written to " << (out / "repro.json").string() << "\n";
  }
  std::cout << "ct_rounds=" << rep.ct_rounds << " ct_pairs=" << rep.ct_pairs << " replans=" << rep.replan_seconds.size()
            << " violations=" << rep.violations.size() << "\n";
  return bad ? 3 : 0;
}

int cmd_plot(const Options& o) {
  const auto sc = load(o);
  const fs::path traj = o.trajectories.empty() ? fs::path(o.out) / "trajectories.csv" : fs::path(o.trajectories);
  std::ifstream f(traj);
  if (!f) throw mrc::Error("cannot open " + traj.string());
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "plot.svg", mrc::render_svg(sc.config.workspace, mrc::read_traces(f)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed multi-robot coordination under temporal logic tasks"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* s) {
    s->add_option("--scenario", o.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "override the scenario seed");
    s->add_option("--duration", o.duration, "override the simulated duration in seconds");
    s->add_flag("--warn-as-error", o.warn_as_error, "treat scenario warnings as errors");
  };
  auto* pre = app.add_subcommand("precompute", "build and cache transition systems, products and potentials");
  auto* run = app.add_subcommand("run", "simulate and write trajectories.csv, events.jsonl, metrics.json, plot.svg");
  auto* check = app.add_subcommand("check", "validate a scenario");
  auto* plot = app.add_subcommand("plot", "render plot.svg from a trajectory log");
  for (auto* s : {pre, run, check, plot}) common(s);
  plot->add_option("--trajectories", o.trajectories, "trajectory log (default: <out>/trajectories.csv)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pre) return cmd_precompute(o);
    if (*run) return cmd_run(o);
    if (*check) return cmd_check(o);
    if (*plot) return cmd_plot(o);
  } catch (const mrc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mrc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
