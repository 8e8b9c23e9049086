// Command-line front end: solve, hjbe, oracle, verify, doa, synthesize, demo.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "zubov/builtins.hpp"
#include "zubov/doa.hpp"
#include "zubov/error.hpp"
#include "zubov/oracle.hpp"
#include "zubov/run_config.hpp"
#include "zubov/solver.hpp"
#include "zubov/trajectory.hpp"
#include "zubov/verifier.hpp"

#ifndef ZUBOV_VERSION
#define ZUBOV_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zubov;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNoConvergence = 2, kBudget = 3, kVerification = 4 };

struct Flags {
  std::string config, builtin_name, nodes, box, points, field, x0, report_json, out;
  std::optional<double> dt, tol, switch_dt, rho, epsilon;
  std::optional<int> max_iters, controls, depth, threads, intervals;
  std::optional<std::uint64_t> seed;
};

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  try {
    json doc = json::parse(is);
    // A run's metadata file carries its resolved config.
    if (doc.is_object() && doc.contains("command") && doc.contains("config")) return doc.at("config");
    return doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Applies command-line flags on top of the config document.
json merge_flags(json doc, const Flags& f, const std::string& command) {
  if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");
  if (!f.builtin_name.empty()) {
    const bool same = doc.contains("system") && doc["system"].is_object() &&
                      doc["system"].value("builtin", std::string()) == f.builtin_name;
    if (!same) doc["system"] = {{"builtin", f.builtin_name}};
  }
  if (!doc.contains("system")) throw ConfigError("no system given: pass --builtin NAME or --config PATH");
  if (f.controls) {
    json& s = doc["system"];
    if (s.contains("builtin")) {
      s["overrides"]["control_samples"] = *f.controls;
    } else if (s.contains("inline") && s["inline"].contains("controls") && s["inline"]["controls"].contains("box")) {
      s["inline"]["controls"]["box"]["samples"] = *f.controls;
    } else {
      throw ConfigError("--controls needs a builtin or an inline box control set");
    }
  }
  if (!f.nodes.empty()) {
    json nodes = json::array();
    for (double v : parse_number_list(f.nodes, "--nodes")) nodes.push_back(v);
    doc["grid"]["nodes"] = nodes.size() == 1 ? nodes[0] : nodes;
  }
  if (!f.box.empty()) {
    const auto v = parse_number_list(f.box, "--box");
    if (v.size() % 2 != 0) throw ConfigError("--box needs LO,HI pairs");
    json lo = json::array(), hi = json::array();
    for (std::size_t i = 0; i < v.size(); i += 2) {
      lo.push_back(v[i]);
      hi.push_back(v[i + 1]);
    }
    doc["grid"]["lo"] = lo.size() == 1 ? lo[0] : lo;
    doc["grid"]["hi"] = hi.size() == 1 ? hi[0] : hi;
  }
  if (f.dt) doc["solver"]["dt"] = *f.dt;
  if (f.tol) doc["solver"]["tol"] = *f.tol;
  if (f.max_iters) doc["solver"]["max_iters"] = *f.max_iters;
  if (f.switch_dt) doc[command == "synthesize" ? "synthesis" : "oracle"]["switch_dt"] = *f.switch_dt;
  if (f.depth) doc["oracle"]["depth"] = *f.depth;
  if (f.rho) doc["oracle"]["rho"] = *f.rho;
  if (f.seed) doc["seed"] = *f.seed;
  if (f.threads) doc["threads"] = *f.threads;
  if (!f.out.empty()) doc["out"] = f.out;
  if (f.epsilon) {
    if (command == "synthesize")
      doc["synthesis"]["epsilon"] = *f.epsilon;
    else
      doc["epsilon"] = *f.epsilon;
  }
  if (!f.x0.empty()) doc["synthesis"]["x0"] = parse_number_list(f.x0, "--x0");
  if (f.intervals) doc["synthesis"]["intervals"] = *f.intervals;
  return doc;
}

RunConfig load_run(const Flags& f, const std::string& command) {
  json doc = f.config.empty() ? json::object() : read_json_file(f.config);
  return resolve_config(merge_flags(std::move(doc), f, command));
}

fs::path prepare_out(const RunConfig& rc) {
  const fs::path dir(rc.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".write-test";
  std::ofstream os(probe);
  if (ec || !os) throw ConfigError("output directory '" + rc.out_dir + "' is not writable");
  os.close();
  fs::remove(probe, ec);
  return dir;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << doc.dump(2) << '\n';
}

void write_metadata(const fs::path& dir, const std::string& command, const RunConfig& rc, const json& result) {
  write_json(dir / "metadata.json", {{"command", command},
                                     {"version", ZUBOV_VERSION},
                                     {"seed", rc.seed},
                                     {"config", rc.document},
                                     {"result", result}});
}

ValueField load_field(const Flags& f, const RunConfig& rc) {
  if (f.field.empty()) throw ConfigError("--field PATH is required");
  ValueField field = read_field_csv(f.field);
  if (!field.grid().same_as(rc.grid))
    throw ConfigError("field grid " + field.grid().to_json().dump() + " does not match the configured grid " +
                      rc.grid.to_json().dump());
  return field;
}

json field_result(const ValueField& field) {
  const auto& m = field.metadata();
  return {{"iterations", m.iterations}, {"final_change", m.residual}, {"converged", m.converged}};
}

// ---------------------------------------------------------------------------

int run_solve(const Flags& f, bool hjbe) {
  const std::string command = hjbe ? "hjbe" : "solve";
  const RunConfig rc = load_run(f, command);
  const fs::path dir = prepare_out(rc);
  const auto t0 = std::chrono::steady_clock::now();
  const ValueField field = hjbe ? solve_hjbe(rc.system, rc.grid, rc.solver) : solve_zubov(rc.system, rc.grid, rc.solver);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_field_csv((dir / "field.csv").string(), field);
  json result = field_result(field);
  result["seconds"] = seconds;
  if (hjbe && std::all_of(field.values().begin(), field.values().end(), [](double v) { return v >= 0; })) {
    write_field_csv((dir / "field_kruzhkov.csv").string(), kruzhkov_transform(field));
    result["kruzhkov_field"] = "field_kruzhkov.csv";
  }
  if (!field.metadata().converged) result["warning"] = "max_iters reached before tol";
  write_metadata(dir, command, rc, result);
  std::printf("%s: %d sweeps, final sup-change %.3e, %.2f s -> %s\n", command.c_str(), field.metadata().iterations,
              field.metadata().residual, seconds, (dir / "field.csv").string().c_str());
  if (!field.metadata().converged) {
    std::fprintf(stderr, "warning: not converged within %d sweeps\n", rc.solver.max_iters);
    return kNoConvergence;
  }
  return kOk;
}

std::vector<Vec> read_points(const std::string& path, int dim) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open points file '" + path + "'");
  std::vector<Vec> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.back() == '\r') line.pop_back();
    auto p = parse_number_list(line, path + ":" + std::to_string(lineno));
    if (static_cast<int>(p.size()) != dim)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) + " coordinates");
    pts.push_back(std::move(p));
  }
  if (pts.empty()) throw ConfigError("points file '" + path + "' holds no points");
  return pts;
}

int run_oracle(const Flags& f) {
  const RunConfig rc = load_run(f, "oracle");
  if (f.points.empty()) throw ConfigError("--points PATH is required");
  const auto pts = read_points(f.points, rc.system.state_dim);
  const fs::path dir = prepare_out(rc);
  const bool maximize = rc.system.mode == Mode::maximize;
  std::ofstream os(dir / "bounds.csv");
  for (int j = 0; j < rc.system.state_dim; ++j) os << 'x' << j + 1 << ',';
  os << "lower,upper,tail_bound,depth,horizon,truncated,kruzhkov_lower,kruzhkov_upper,status\n";
  int exit_code = kOk;
  json rows = json::array();
  char buf[256];
  for (const auto& x : pts) {
    for (double v : x) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      os << buf;
    }
    try {
      const ValueBounds b = maximize ? maximal_cost(rc.system, x, rc.oracle) : min_value(rc.system, x, rc.oracle);
      const ValueBounds k = kruzhkov_bounds(b);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%.17g,%d,%.17g,%.17g,ok\n", b.lower, b.upper,
                    b.tail_bound, b.depth, b.horizon, b.truncated ? 1 : 0, k.lower, k.upper);
      os << buf;
      rows.push_back({{"x", x}, {"lower", b.lower}, {"upper", b.upper}, {"truncated", b.truncated}});
    } catch (const BudgetExceeded& e) {
      os << "nan,nan,nan," << rc.oracle.depth << ',' << rc.oracle.horizon() << ",0,nan,nan,budget_exceeded\n";
      rows.push_back({{"x", x}, {"error", e.what()}});
      std::fprintf(stderr, "budget exceeded: %s\n", e.what());
      exit_code = kBudget;
    }
  }
  write_metadata(dir, "oracle", rc, {{"points", rows}});
  std::printf("oracle: %zu points -> %s\n", pts.size(), (dir / "bounds.csv").string().c_str());
  return exit_code;
}

int run_verify(const Flags& f) {
  const RunConfig rc = load_run(f, "verify");
  const ValueField field = load_field(f, rc);
  const fs::path dir = prepare_out(rc);
  const VerifyOptions& vo = rc.verify;
  const bool kruzhkov = field.transform() == Transform::kruzhkov;
  VerificationReport report;

  if (vo.fixed_point) report.add(fixed_point_check(rc.system, field, rc.solver, vo.fixed_point_tol));

  std::optional<DoaMask> mask;
  if (kruzhkov) {
    try {
      mask = extract_doa(field, rc.epsilon);
    } catch (const DomainError& e) {
      CheckResult c;
      c.name = "domain";
      c.pass = false;
      c.note = e.what();
      report.add(c);
    }
  }
  if (vo.residual) {
    ResidualSettings rs;
    rs.mask = mask ? &*mask : nullptr;
    rs.band = vo.band;
    rs.median_limit = vo.residual_median;
    rs.p95_limit = vo.residual_p95;
    if (vo.kink_cells > 0 && rc.system.state_dim == 2) {
      const double width = vo.kink_cells * rc.grid.max_cell_diameter();
      rs.exclude = [width](std::span<const double> x) { return lift2d_branch_distance(x) < width; };
    }
    report.add(residual_stats(rc.system, field, rs));
  }
  if (vo.lyapunov) {
    if (kruzhkov) {
      LyapunovSettings ls;
      ls.samples = vo.lyapunov_samples;
      ls.seed = rc.seed;
      report.add(check_lyapunov_decrease(rc.system, field, ls));
    } else {
      CheckResult c;
      c.name = "lyapunov";
      c.skipped = true;
      c.note = "needs a Kruzhkov field";
      report.add(c);
    }
  }
  if (vo.blowup && mask) report.add(check_boundary_blowup(rc.system, field, *mask));

  report.print(std::cout);
  const json rj = report.to_json();
  if (!f.report_json.empty()) write_json(f.report_json, rj);
  write_metadata(dir, "verify", rc, rj);
  std::printf("verify: %s\n", report.pass() ? "pass" : "FAIL");
  return report.pass() ? kOk : kVerification;
}

int run_doa(const Flags& f) {
  const RunConfig rc = load_run(f, "doa");
  const ValueField field = load_field(f, rc);
  const fs::path dir = prepare_out(rc);
  const DoaMask mask = extract_doa(field, rc.epsilon);
  {
    std::ofstream os(dir / "mask.csv");
    write_mask_csv(os, mask);
  }
  json result = {{"nodes_inside", mask.count()}, {"touches_boundary", mask.touches_boundary}};
  if (rc.grid.dims() == 2) {
    const auto lines = contour2d(field, 1 - rc.epsilon);
    std::ofstream os(dir / "contours.csv");
    write_contours_csv(os, lines);
    std::size_t closed = 0;
    for (const auto& l : lines) closed += l.closed;
    result["polylines"] = lines.size();
    result["closed_polylines"] = closed;
  }
  std::printf("doa: %zu of %zu nodes inside, %s the box boundary\n", mask.count(), rc.grid.size(),
              mask.touches_boundary ? "touches" : "clear of");
  if (result.contains("polylines"))
    std::printf("doa: %zu contour polylines (%zu closed)\n", result["polylines"].get<std::size_t>(),
                result["closed_polylines"].get<std::size_t>());
  write_metadata(dir, "doa", rc, result);
  return kOk;
}

int run_synthesize(const Flags& f) {
  const RunConfig rc = load_run(f, "synthesize");
  const ValueField field = load_field(f, rc);
  if (rc.synthesis.x0.empty()) throw ConfigError("--x0 is required");
  const fs::path dir = prepare_out(rc);
  SynthesisSettings ss;
  ss.switch_dt = rc.synthesis.switch_dt;
  ss.step = rc.synthesis.step;
  ss.threads = rc.threads;
  const SynthesisReport rep =
      synthesize_epsilon_optimal(rc.system, field, rc.synthesis.x0, rc.synthesis.epsilon, rc.synthesis.intervals, ss);
  {
    std::ofstream os(dir / "schedule.csv");
    os << "segment,start,duration";
    for (int j = 0; j < rc.system.control_dim(); ++j) os << ",a" << j + 1;
    os << '\n';
    double t = 0.0;
    char buf[64];
    for (std::size_t i = 0; i < rep.schedule.segments.size(); ++i) {
      const auto& s = rep.schedule.segments[i];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g", i, t, s.duration);
      os << buf;
      for (double a : s.control) {
        std::snprintf(buf, sizeof buf, ",%.17g", a);
        os << buf;
      }
      os << '\n';
      t += s.duration;
    }
  }
  {
    std::ofstream os(dir / "trajectory.csv");
    write_trajectory_csv(os, integrate(rc.system, rc.synthesis.x0, rep.schedule, ss.step));
  }
  write_json(dir / "synthesis.json", rep.to_json());
  if (!f.report_json.empty()) write_json(f.report_json, rep.to_json());
  write_metadata(dir, "synthesize", rc, rep.to_json());
  std::printf("synthesize: w(x0)=%.6f achieved=%.6f goal residual=%.6f (eps %.3g)\n", rep.field_value, rep.achieved,
              rep.goal_residual, rep.eps);
  for (const auto& s : rep.steps)
    std::printf("  step %d: defect %.3e, allowance %.3e %s\n", s.index, s.defect, s.allowance,
                s.accepted ? "ok" : "OVER");
  return rep.budget_ok ? kOk : kVerification;
}

// ---------------------------------------------------------------------------

int run_demo(const Flags& f) {
  const int threads = f.threads.value_or(0);
  std::printf("%-10s %8s %6s %7s %8s %10s  %s\n", "system", "nodes", "dt", "sweeps", "seconds", "sup_error",
              "compared against");
  auto clock = [] { return std::chrono::steady_clock::now(); };
  auto since = [](auto t0) { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  json rows = json::array();
  auto row = [&](const char* name, const Grid& g, double dt, const ValueField& v, double secs, double err,
                 const char* ref) {
    std::printf("%-10s %8zu %6.3g %7d %8.2f %10.4g  %s\n", name, g.size(), dt, v.metadata().iterations, secs, err, ref);
    rows.push_back({{"system", name}, {"nodes", g.size()}, {"sweeps", v.metadata().iterations}, {"sup_error", err}});
  };
  {
    SolverSettings st;
    st.threads = threads;
    const SystemDef sys = builtin("lift2d");
    const Grid g = Grid::cube(2, -1.2, 1.2, 201);
    const auto t0 = clock();
    const ValueField v = solve_zubov(sys, g, st);
    const double secs = since(t0);
    double err = 0.0;
    Vec x(2);
    for (std::size_t k = 0; k < g.size(); ++k) {
      g.node(k, x);
      if (std::max(std::abs(x[0]), std::abs(x[1])) > 0.8 + 1e-12) continue;
      err = std::max(err, std::abs(v.at(k) + std::expm1(-*closed_form_value("lift2d", x))));
    }
    row("lift2d", g, st.dt, v, secs, err, "1-exp(-V) closed form, |x|_inf <= 0.8");
  }
  {
    SolverSettings st;
    st.threads = threads;
    st.dt = 0.01;
    st.max_iters = 20000;
    const SystemDef sys = builtin("arctan1d");
    const Grid g = Grid::cube(1, -3, 3, 601);
    const auto t0 = clock();
    const ValueField v = solve_hjbe(sys, g, st);
    const double secs = since(t0);
    double err = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = g.node(k)[0];
      if (std::abs(x) <= 2.5 + 1e-12) err = std::max(err, std::abs(v.at(k) - std::atan(std::abs(x))));
    }
    row("arctan1d", g, st.dt, v, secs, err, "atan|x| on [-2.5,2.5] (raw field)");
  }
  {
    SolverSettings st;
    st.threads = threads;
    const SystemDef sys = builtin("ex1", {{"control_samples", 3}});
    const Grid g = Grid::cube(1, -2, 2, 801);
    const auto t0 = clock();
    const ValueField v = solve_zubov(sys, g, st);
    const double secs = since(t0);
    OracleSettings os;
    os.switch_dt = 1.0;
    os.rho = 0.005;
    os.threads = threads;
    double err = 0.0;
    for (double x : {-0.75, -0.5, -0.25, 0.25, 0.5, 0.75}) {
      const ValueBounds b = kruzhkov_value(sys, Vec{x}, os);
      const double w = v.interpolate(Vec{x});
      err = std::max(err, std::max({0.0, b.lower - w, w - b.upper}));
    }
    row("ex1", g, st.dt, v, secs, err, "distance to oracle brackets at +-0.25, +-0.5, +-0.75");
  }
  if (!f.report_json.empty()) write_json(f.report_json, {{"rows", rows}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust Lyapunov functions and domains of attraction via Zubov's method"};
  app.set_version_flag("--version", ZUBOV_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration (or a previous run's metadata.json)");
    sub->add_option("--builtin", f.builtin_name, "Builtin system name");
    sub->add_option("--nodes", f.nodes, "Node count per axis: K or K1,K2,...");
    sub->add_option("--box", f.box, "Box: LO,HI (all axes) or LO1,HI1,LO2,HI2,...");
    sub->add_option("--dt", f.dt, "Solver time step");
    sub->add_option("--tol", f.tol, "Solver stopping tolerance on the sup-change");
    sub->add_option("--max-iters", f.max_iters, "Solver sweep limit");
    sub->add_option("--controls", f.controls, "Control samples per axis");
    sub->add_option("--switch-dt", f.switch_dt, "Length of constant-control pieces");
    sub->add_option("--depth", f.depth, "Oracle enumeration depth");
    sub->add_option("--rho", f.rho, "Oracle ball radius");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--epsilon", f.epsilon, "Level 1-epsilon for doa/verify; epsilon budget for synthesize");
    sub->add_option("--report-json", f.report_json, "Write the machine-readable report here");
  };
  auto* solve = app.add_subcommand("solve", "Solve the Zubov equation; writes field.csv");
  auto* hjbe = app.add_subcommand("hjbe", "Solve the discounted Hamilton-Jacobi equation; writes field.csv");
  auto* oracle = app.add_subcommand("oracle", "Bracket the value at points by exhaustive enumeration");
  auto* verify = app.add_subcommand("verify", "Check a field against the equation and its properties");
  auto* doa = app.add_subcommand("doa", "Extract the domain of attraction mask and contour");
  auto* synth = app.add_subcommand("synthesize", "Build an epsilon-optimal perturbation from a field");
  auto* demo = app.add_subcommand("demo", "Compare builtin problems with their reference values");
  for (auto* s : {solve, hjbe, oracle, verify, doa, synth}) common(s);
  demo->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  demo->add_option("--report-json", f.report_json, "Write the table as JSON here");
  oracle->add_option("--points", f.points, "Points file: one comma-separated state per line")->required();
  for (auto* s : {verify, doa, synth}) s->add_option("--field", f.field, "Field CSV from solve/hjbe")->required();
  synth->add_option("--x0", f.x0, "Initial state x1,x2,...");
  synth->add_option("--intervals", f.intervals, "Number of unit intervals M");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return run_solve(f, false);
    if (*hjbe) return run_solve(f, true);
    if (*oracle) return run_oracle(f);
    if (*verify) return run_verify(f);
    if (*doa) return run_doa(f);
    if (*synth) return run_synthesize(f);
    if (*demo) return run_demo(f);
  } catch (const BudgetExceeded& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBudget;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kOk;
}
