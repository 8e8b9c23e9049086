#include "zubov/run_config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "zubov/builtins.hpp"
#include "zubov/error.hpp"

namespace zubov {

using nlohmann::json;

namespace {

// Collects problems while reading typed values out of one JSON object.
class Reader {
 public:
  Reader(const json& obj, std::string where, std::vector<std::string>& problems)
      : obj_(obj), where_(std::move(where)), problems_(problems) {
    if (!obj_.is_object()) problems_.push_back(where_ + " must be a JSON object");
  }

  void allow(std::initializer_list<const char*> keys) {
    if (!obj_.is_object()) return;
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : obj_.items()) {
      if (!known.count(key)) problems_.push_back(where_ + ": unknown key '" + key + "'");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::runtime_error("expected true/false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::runtime_error("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::runtime_error("expected a number");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      problems_.push_back(where_ + "." + key + ": " + e.what());
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string>& problems_;
};

Vec broadcast(const json& v, int n, const std::string& what, std::vector<std::string>& problems) {
  if (v.is_number()) return Vec(n, v.get<double>());
  if (v.is_array() && static_cast<int>(v.size()) == n) {
    Vec out;
    for (const auto& e : v) {
      if (!e.is_number()) {
        problems.push_back(what + " must hold numbers");
        return Vec(n, 0.0);
      }
      out.push_back(e.get<double>());
    }
    return out;
  }
  problems.push_back(what + " must be a number or a list of " + std::to_string(n) + " numbers");
  return Vec(n, 0.0);
}

bool lift2d_family(const std::string& name) { return name.rfind("lift2d", 0) == 0; }

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument("trailing text");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

GridDefaults default_grid(const std::string& name) {
  if (lift2d_family(name)) return {-1.2, 1.2, 201};
  if (name == "ex1") return {-2.0, 2.0, 801};
  if (name == "arctan1d") return {-3.0, 3.0, 601};
  if (name == "hav1d") return {-2.0, 2.0, 401};
  if (name == "fuller") return {-1.0, 1.0, 101};
  throw ConfigError("no default grid for '" + name + "'");
}

RunConfig resolve_config(const json& doc) {
  std::vector<std::string> problems;
  if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");
  Reader top(doc, "config", problems);
  top.allow({"system", "grid", "solver", "oracle", "seed", "threads", "epsilon", "verify", "synthesis", "out"});

  RunConfig rc;
  json system_doc;
  bool have_system = false;
  if (!doc.contains("system")) {
    problems.push_back("config: 'system' is required");
  } else {
    const json& s = doc.at("system");
    const bool has_builtin = s.is_object() && s.contains("builtin");
    const bool has_inline = s.is_object() && s.contains("inline");
    if (has_builtin == has_inline) {
      problems.push_back("system: exactly one of 'builtin' and 'inline' must be present");
    } else {
      Reader r(s, "system", problems);
      r.allow({"builtin", "overrides", "inline"});
      try {
        if (has_builtin) {
          if (!s.at("builtin").is_string()) throw ConfigError("system.builtin must be a string");
          rc.builtin_name = s.at("builtin").get<std::string>();
          const json overrides = s.value("overrides", json::object());
          rc.system = builtin(rc.builtin_name, overrides);
          system_doc = {{"builtin", rc.builtin_name}, {"overrides", overrides}};
        } else {
          if (s.contains("overrides")) throw ConfigError("system.overrides only applies to builtins");
          rc.system = load_system(s.at("inline"));
          system_doc = {{"inline", s.at("inline")}};
        }
        have_system = true;
      } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back(p);
      } catch (const Error& e) {
        problems.push_back(e.what());
      }
    }
  }

  // Grid.
  json grid_doc = doc.value("grid", json::object());
  if (have_system) {
    const int n = rc.system.state_dim;
    Reader r(grid_doc, "grid", problems);
    r.allow({"lo", "hi", "nodes"});
    std::optional<GridDefaults> defaults;
    if (!rc.builtin_name.empty()) defaults = default_grid(rc.builtin_name);
    auto field = [&](const char* key, double fallback) -> Vec {
      if (grid_doc.is_object() && grid_doc.contains(key)) return broadcast(grid_doc.at(key), n, std::string("grid.") + key, problems);
      if (!defaults) {
        problems.push_back(std::string("grid.") + key + " is required for inline systems");
        return Vec(n, 0.0);
      }
      return Vec(n, fallback);
    };
    const Vec lo = field("lo", defaults ? defaults->lo : 0.0);
    const Vec hi = field("hi", defaults ? defaults->hi : 0.0);
    const Vec nodes_d = field("nodes", defaults ? defaults->nodes : 0.0);
    std::vector<int> nodes;
    for (double v : nodes_d) {
      if (v != std::floor(v)) problems.push_back("grid.nodes must be integers");
      nodes.push_back(static_cast<int>(v));
    }
    try {
      rc.grid = Grid(lo, hi, nodes);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back("grid: " + p);
    }
    grid_doc = {{"lo", lo}, {"hi", hi}, {"nodes", nodes}};
  }

  // Solver.
  {
    const json s = doc.value("solver", json::object());
    Reader r(s, "solver", problems);
    r.allow({"dt", "tol", "max_iters", "exterior_value", "pin_origin", "rk4_foot"});
    r.get("dt", rc.solver.dt);
    r.get("tol", rc.solver.tol);
    r.get("max_iters", rc.solver.max_iters);
    r.get("pin_origin", rc.solver.pin_origin);
    r.get("rk4_foot", rc.solver.rk4_foot);
    if (s.is_object() && s.contains("exterior_value")) {
      double ext = 0.0;
      r.get("exterior_value", ext);
      rc.solver.exterior_value = ext;
    }
    try {
      rc.solver.validate(false);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back("solver: " + p);
    }
  }

  // Oracle.
  {
    const json s = doc.value("oracle", json::object());
    Reader r(s, "oracle", problems);
    r.allow({"switch_dt", "depth", "rho", "step", "budget", "prune"});
    r.get("switch_dt", rc.oracle.switch_dt);
    r.get("depth", rc.oracle.depth);
    r.get("rho", rc.oracle.rho);
    r.get("step", rc.oracle.step);
    r.get("budget", rc.oracle.budget);
    r.get("prune", rc.oracle.prune);
    if (!(rc.oracle.switch_dt > 0)) problems.push_back("oracle.switch_dt must be positive");
    if (rc.oracle.depth < 1) problems.push_back("oracle.depth must be at least 1");
    if (!(rc.oracle.rho >= 0)) problems.push_back("oracle.rho must be nonnegative");
    if (!(rc.oracle.step >= 0)) problems.push_back("oracle.step must be nonnegative");
  }

  top.get("seed", rc.seed);
  top.get("threads", rc.threads);
  top.get("epsilon", rc.epsilon);
  top.get("out", rc.out_dir);
  if (rc.threads < 0) problems.push_back("config.threads must be nonnegative");
  if (!(rc.epsilon > 0 && rc.epsilon < 1)) problems.push_back("config.epsilon must lie in (0,1)");
  rc.solver.threads = rc.threads;
  rc.oracle.threads = rc.threads;

  // Verify toggles.
  {
    VerifyOptions& v = rc.verify;
    if (lift2d_family(rc.builtin_name)) v.kink_cells = 2.0;
    const json s = doc.value("verify", json::object());
    Reader r(s, "verify", problems);
    r.allow({"fixed_point", "fixed_point_tol", "residual", "residual_median", "residual_p95", "band", "kink_cells",
             "lyapunov", "lyapunov_samples", "blowup"});
    r.get("fixed_point", v.fixed_point);
    r.get("fixed_point_tol", v.fixed_point_tol);
    r.get("residual", v.residual);
    r.get("residual_median", v.residual_median);
    r.get("residual_p95", v.residual_p95);
    r.get("band", v.band);
    r.get("kink_cells", v.kink_cells);
    r.get("lyapunov", v.lyapunov);
    r.get("lyapunov_samples", v.lyapunov_samples);
    r.get("blowup", v.blowup);
    if (v.band < 0) problems.push_back("verify.band must be nonnegative");
    if (v.lyapunov_samples < 1) problems.push_back("verify.lyapunov_samples must be positive");
  }

  // Synthesis.
  {
    SynthesisOptions& y = rc.synthesis;
    const json s = doc.value("synthesis", json::object());
    Reader r(s, "synthesis", problems);
    r.allow({"x0", "epsilon", "intervals", "switch_dt", "step"});
    r.get("x0", y.x0);
    r.get("epsilon", y.epsilon);
    r.get("intervals", y.intervals);
    r.get("switch_dt", y.switch_dt);
    r.get("step", y.step);
    if (!(y.epsilon > 0)) problems.push_back("synthesis.epsilon must be positive");
    if (y.intervals < 1) problems.push_back("synthesis.intervals must be at least 1");
    if (have_system && !y.x0.empty() && static_cast<int>(y.x0.size()) != rc.system.state_dim)
      problems.push_back("synthesis.x0 must have " + std::to_string(rc.system.state_dim) + " components");
  }

  if (!problems.empty()) throw ConfigError(problems);

  json solver_doc = {{"dt", rc.solver.dt},
                     {"tol", rc.solver.tol},
                     {"max_iters", rc.solver.max_iters},
                     {"pin_origin", rc.solver.pin_origin},
                     {"rk4_foot", rc.solver.rk4_foot}};
  if (rc.solver.exterior_value) solver_doc["exterior_value"] = *rc.solver.exterior_value;
  const VerifyOptions& v = rc.verify;
  rc.document = {
      {"system", system_doc},
      {"grid", grid_doc},
      {"solver", solver_doc},
      {"oracle",
       {{"switch_dt", rc.oracle.switch_dt},
        {"depth", rc.oracle.depth},
        {"rho", rc.oracle.rho},
        {"step", rc.oracle.step},
        {"budget", rc.oracle.budget},
        {"prune", rc.oracle.prune}}},
      {"seed", rc.seed},
      {"threads", rc.threads},
      {"epsilon", rc.epsilon},
      {"verify",
       {{"fixed_point", v.fixed_point},
        {"fixed_point_tol", v.fixed_point_tol},
        {"residual", v.residual},
        {"residual_median", v.residual_median},
        {"residual_p95", v.residual_p95},
        {"band", v.band},
        {"kink_cells", v.kink_cells},
        {"lyapunov", v.lyapunov},
        {"lyapunov_samples", v.lyapunov_samples},
        {"blowup", v.blowup}}},
      {"synthesis",
       {{"x0", rc.synthesis.x0},
        {"epsilon", rc.synthesis.epsilon},
        {"intervals", rc.synthesis.intervals},
        {"switch_dt", rc.synthesis.switch_dt},
        {"step", rc.synthesis.step}}},
      {"out", rc.out_dir}};
  return rc;
}

}  // namespace zubov
