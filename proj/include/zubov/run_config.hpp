#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zubov/grid.hpp"
#include "zubov/oracle.hpp"
#include "zubov/solver.hpp"
#include "zubov/system.hpp"

namespace zubov {

/// Which verifier checks `verify` runs, and their limits.
struct VerifyOptions {
  bool fixed_point = true;
  double fixed_point_tol = 1e-4;
  bool residual = true;
  double residual_median = 0.02;
  double residual_p95 = 0.05;
  int band = 2;
  /// Exclude nodes within this many cells of the lift2d branch line
  /// (0 disables; defaults to 2 for the lift2d family).
  double kink_cells = 0.0;
  bool lyapunov = true;
  int lyapunov_samples = 500;
  bool blowup = true;
};

struct SynthesisOptions {
  Vec x0;
  double epsilon = 0.05;
  int intervals = 4;
  double switch_dt = 0.25;
  double step = 0.025;
};

/// Fully resolved run configuration. `document` is the canonical JSON form:
/// feeding it back through resolve_config gives the same configuration.
struct RunConfig {
  std::string builtin_name;  // empty for inline systems
  SystemDef system;
  Grid grid = Grid::cube(1, -1.0, 1.0, 3);
  SolverSettings solver;
  OracleSettings oracle;
  std::uint64_t seed = 7;
  int threads = 0;
  double epsilon = 0.01;  // domain extraction threshold
  VerifyOptions verify;
  SynthesisOptions synthesis;
  std::string out_dir = "out";
  nlohmann::json document;
};

/// Resolves a run document (schema in docs/config.md), filling defaults.
/// Throws ConfigError listing every problem.
RunConfig resolve_config(const nlohmann::json& doc);

/// Default box and node count for a builtin.
struct GridDefaults {
  double lo, hi;
  int nodes;
};
GridDefaults default_grid(const std::string& builtin_name);

/// Parses "a,b,c" into numbers; throws ConfigError on malformed input.
std::vector<double> parse_number_list(const std::string& text, const std::string& what);

}  // namespace zubov
