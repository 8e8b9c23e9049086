#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "zubov/doa.hpp"
#include "zubov/grid.hpp"
#include "zubov/solver.hpp"
#include "zubov/system.hpp"

namespace zubov {

struct CheckResult {
  std::string name;
  bool pass = true;
  bool skipped = false;
  std::string note;
  std::size_t count = 0;  // nodes or samples examined
  double max = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  std::vector<nlohmann::json> witnesses;  // replayable failure cases

  nlohmann::json to_json() const;
};

struct VerificationReport {
  std::vector<CheckResult> checks;

  bool pass() const;
  void add(CheckResult c) { checks.push_back(std::move(c)); }
  const CheckResult* find(const std::string& name) const;
  nlohmann::json to_json() const;
  /// Human-readable table, one row per check.
  void print(std::ostream& os) const;
};

/// Nodes to leave out of a pointwise check (e.g. along a known kink line).
using NodeFilter = std::function<bool(std::span<const double>)>;

struct ResidualSettings {
  const DoaMask* mask = nullptr;  // restrict to mask nodes
  int band = 2;                   // cells excluded around the mask border
  NodeFilter exclude;             // extra exclusion zone (kinks)
  double median_limit = 0.02;
  double p95_limit = 0.05;
  std::size_t max_witnesses = 5;
};

/// Pointwise residual of the Zubov / Hamilton-Jacobi equation,
///   inf_a { -Dv f - l + h v }   (Kruzhkov fields: l = h = g; raw fields use
///                                sup instead of inf when minimizing),
/// at one interior node, with Dv from central differences.
double node_residual(const SystemDef& system, const ValueField& field, std::size_t node);

/// Statistics of |residual| over interior (masked, non-excluded) nodes.
CheckResult residual_stats(const SystemDef& system, const ValueField& field, const ResidualSettings& settings = {});

/// One scheme sweep applied to the field; fails at nodes that move by more
/// than tol. Catches isolated corrupted nodes that residual quantiles miss.
CheckResult fixed_point_check(const SystemDef& system, const ValueField& field, const SolverSettings& solver,
                              double tol, std::size_t max_witnesses = 5);

struct DppSettings {
  double t = 0.5;
  double switch_dt = 0.25;
  double step = 0.025;
  int threads = 0;
};

/// v(x) - best over schedules of the one-step DPP right-hand side along exact
/// RK4 trajectories: (1 - G) + G v(phi(t)) for Kruzhkov fields, J + e^{-int h} w
/// for raw ones (sign flipped when minimizing).
double dpp_defect(const SystemDef& system, const ValueField& field, std::span<const double> x,
                  const DppSettings& settings = {});

/// dpp_defect at the given nodes; fails where |defect| > tol.
CheckResult dpp_check(const SystemDef& system, const ValueField& field, std::span<const std::size_t> nodes,
                      double tol, const DppSettings& settings = {});

struct LyapunovSettings {
  int samples = 500;
  double t = 0.5;
  std::uint64_t seed = 7;
  double eps0 = 0.01;       // samples come from {v < 1 - eps0}
  double switch_dt = 0.125; // random schedules switch this often
  double step = 0.0125;
  double ball_cells = 10;   // excluded ball around the origin, in cells
  std::size_t max_witnesses = 5;
};

/// Random robust-decrease test: v(phi(t)) <= v(x) + tol_interp, and strict
/// decrease whenever int g along the sample exceeds 4 tol_interp.
CheckResult check_lyapunov_decrease(const SystemDef& system, const ValueField& field,
                                    const LyapunovSettings& settings = {});

enum class SandwichRole { sub, sup };

struct SandwichSettings {
  const DoaMask* mask = nullptr;  // where to compare residuals
  int band = 2;
  NodeFilter exclude;
  std::size_t max_witnesses = 5;
};

/// Comparison test for sub/supersolutions of the Zubov equation against a
/// reference field. Sub role: candidate <= reference + tol everywhere and the
/// candidate's residual does not exceed the reference's by more than tol.
/// Sup role mirrors both. Throws ConfigError when the candidate violates its
/// boundary condition (== 1 for sub, >= 1 for sup, to 1e-9).
CheckResult sandwich_check(const SystemDef& system, const ValueField& reference, const ValueField& candidate,
                           SandwichRole role, double tol, const SandwichSettings& settings = {});

/// Growth of -ln(1 - v) (capped) along node rays from the origin towards the
/// mask border. Skipped when the mask touches the box boundary.
CheckResult check_boundary_blowup(const SystemDef& system, const ValueField& field, const DoaMask& mask,
                                  double cap = 50.0);

/// Either a registered closed form or a solved field.
using LipschitzSource = std::variant<std::string, const ValueField*>;

/// Symmetric difference quotients (gradient norm for N > 1) of
/// v_s = 1 - exp(-s V) at each point.
std::vector<double> lipschitz_probe(const LipschitzSource& source, std::span<const Vec> points, double delta,
                                    double kruzhkov_scale = 1.0);

std::string to_string(SandwichRole r);

}  // namespace zubov
