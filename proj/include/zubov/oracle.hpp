#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zubov/grid.hpp"
#include "zubov/system.hpp"
#include "zubov/trajectory.hpp"

namespace zubov {

struct OracleSettings {
  double switch_dt = 0.25;  // length of each constant-control segment
  int depth = 8;            // number of segments; horizon = depth * switch_dt
  double rho = 0.05;        // ball whose entry triggers the ULES tail bound
  double step = 0.0;        // RK4 step; 0 picks switch_dt / 10
  std::uint64_t budget = 100'000'000;  // cap on depth * |A_d|^depth
  bool prune = false;       // branch and bound on the tail bound
  int threads = 0;

  double horizon() const { return switch_dt * depth; }
  double rk4_step() const { return step > 0 ? step : switch_dt / 10; }
};

/// Two-sided bracket of a value function at one point.
struct ValueBounds {
  double lower = 0.0;
  double upper = 0.0;
  double horizon = 0.0;
  int depth = 0;
  double tail_bound = 0.0;  // upper - lower
  bool truncated = false;   // the extremal schedule's tail is not covered by a bound
  ControlSchedule best;     // schedule attaining `lower` (max) or `upper` (min)
};

/// Brackets the maximal cost sup_a int_0^inf g by enumerating every
/// |A_d|^depth piecewise-constant schedule. The lower bound is the best cost
/// over the horizon; the upper bound adds the ULES tail bound from the state
/// at the first entry into the ball of radius rho (or from the final state
/// when the trajectory ends inside the ULES radius, and +inf otherwise).
/// Throws BudgetExceeded or ConfigError (mode or constants missing).
ValueBounds maximal_cost(const SystemDef& system, std::span<const double> x, const OracleSettings& settings);

/// Same bracket mapped through 1 - e^{-V}.
ValueBounds kruzhkov_value(const SystemDef& system, std::span<const double> x, const OracleSettings& settings);
ValueBounds kruzhkov_bounds(const ValueBounds& maximal);

/// Brackets inf_a J[l,h](x, inf, a) for minimize-mode systems. The tail over
/// [horizon, inf) is bounded by the growth constants of l when ULES constants
/// are declared, by e^{-int h} when |l| <= h, by (bound/floor) e^{-int h} when
/// |l| <= bound and h >= floor, and is left open (truncated) otherwise.
ValueBounds min_value(const SystemDef& system, std::span<const double> x, const OracleSettings& settings);

/// One enumerated schedule: control indices, augmented end state
/// [x, J, int g, int h], and the augmented state at the first entry into
/// |x| <= rho when there was one.
struct LeafInfo {
  std::span<const int> controls;
  std::span<const double> end;
  bool entered = false;
  std::span<const double> at_entry;
};

using LeafFn = std::function<void(int first_control, const LeafInfo&)>;
using PruneFn = std::function<bool(int first_control, int level, std::span<const double> state, bool entered)>;

/// Depth-first enumeration of every schedule of `segments` constant pieces of
/// length `switch_dt` over the discretized controls, sharing integration of
/// common prefixes. Runs in parallel over the first control; the leaves under
/// one first control are visited in lexicographic order, so callers that keep
/// one result slot per first control reduce deterministically.
///
/// `prune(first, level, state, entered)` may cut the subtree below an inner
/// node (level = segments applied so far); the caller then accounts for the
/// skipped leaves itself.
void for_each_schedule(const SystemDef& system, std::span<const double> x, int segments, double switch_dt,
                       double step, double rho, int threads, const LeafFn& leaf, const PruneFn& prune = {});

/// Tolerance allotted to the j-th unit step of the epsilon-optimal
/// construction: eps (e^{-(j-1)} - e^{-(t+j-1)}).
double step_tolerance(double eps, int j, double t = 1.0);
/// Sum of step_tolerance(eps, j, 1) over j = 1..m, i.e. eps (1 - e^{-m}).
double step_tolerance_sum(double eps, int m);

enum class WitnessKind { stationary, searched };

/// Finite-cost trajectory that does not approach the origin.
struct Counterexample {
  Vec x0;
  ControlSchedule schedule;
  double total_cost = 0.0;
  double final_norm = 0.0;
  WitnessKind kind = WitnessKind::stationary;
};

struct FalsifierSettings {
  double horizon = 20.0;
  double switch_dt = 1.0;
  double step = 0.05;
  double cost_threshold = 1e-3;
  double norm_threshold = 1e-2;
  double stationary_tol = 1e-9;
  double min_norm = 1e-3;
  std::uint64_t seed = 20240601;
  int threads = 0;
};

/// Two phases: a scan of grid nodes (nearest the origin first) and controls
/// for rest points with zero cost, then `budget` random long-horizon
/// trajectories. Returns the first witness found.
std::optional<Counterexample> falsify_quasistability(const SystemDef& system, const Grid& region,
                                                     std::uint64_t budget, const FalsifierSettings& settings = {});

struct SynthesisSettings {
  double switch_dt = 0.25;
  double step = 0.025;
  int threads = 0;
};

struct SynthesisStep {
  int index = 0;          // 1-based unit interval
  Vec start;
  double defect = 0.0;    // shortfall of the chosen piece against the field
  double allowance = 0.0; // step_tolerance(eps, index)
  bool accepted = false;
};

struct SynthesisReport {
  ControlSchedule schedule;
  std::vector<SynthesisStep> steps;
  double field_value = 0.0;  // w(x0)
  double achieved = 0.0;     // cost over [0,M] plus discounted w(phi(M))
  double goal_residual = 0.0;  // achieved - w(x0) (sign flipped when minimizing)
  double eps = 0.0;
  bool budget_ok = true;
  int failed_step = 0;  // first step over budget, 0 when none

  nlohmann::json to_json() const;
};

/// Greedy unit-interval construction of an eps-optimal perturbation from a
/// solved field: on [i, i+1] every schedule with switch_dt pieces is tried
/// and the one with the best cost-plus-continuation is kept.
SynthesisReport synthesize_epsilon_optimal(const SystemDef& system, const ValueField& field,
                                           std::span<const double> x0, double eps, int M,
                                           const SynthesisSettings& settings = {});

std::string to_string(WitnessKind k);

}  // namespace zubov
