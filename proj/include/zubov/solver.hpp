#pragma once

#include <functional>
#include <optional>
#include <span>

#include "zubov/grid.hpp"
#include "zubov/system.hpp"

namespace zubov {

struct SolverSettings {
  double dt = 0.05;
  double tol = 1e-6;
  int max_iters = 5000;
  /// Value assigned to foot points outside the box. Defaults to 1 for the
  /// Zubov equation (outside the domain of attraction) and 0 for raw fields.
  std::optional<double> exterior_value;
  bool pin_origin = true;
  /// One RK4 step instead of one Euler step for the foot point.
  bool rk4_foot = false;
  int threads = 0;  // 0 = all cores
  /// Called after every sweep with the sweep number (1-based), the sup-change
  /// and the new nodal values.
  std::function<void(int, double, std::span<const double>)> observer;

  /// Throws ConfigError when a setting is out of range.
  void validate(bool kruzhkov) const;
};

/// Semi-Lagrangian value iteration for the generalized Zubov equation,
///   v(x) = max_a { 1 - b + b v(x + dt f(x,a)) },  b = exp(-dt g(x,a)),
/// from v = 0 with Jacobi sweeps. Returns a Kruzhkov field; when max_iters is
/// hit first, metadata().converged is false.
ValueField solve_zubov(const SystemDef& system, const Grid& grid, const SolverSettings& settings);

/// Value iteration for the infinite-horizon equation with running cost l and
/// discount rate h,
///   v(x) = opt_a { dt l e^{-dt h/2} + e^{-dt h} v(x + dt f(x,a)) },
/// where opt is max or min according to the system mode. Returns a raw field.
ValueField solve_hjbe(const SystemDef& system, const Grid& grid, const SolverSettings& settings);

/// One sweep of the scheme matching the field's transform, started from the
/// field's values. A converged field moves by less than the solver tol.
ValueField apply_sweep(const SystemDef& system, const ValueField& field, const SolverSettings& settings);

/// 1 - e^{-w} nodewise (+inf maps to 1).
ValueField kruzhkov_transform(const ValueField& raw);

/// -ln(1 - v) nodewise, clamped at `cap`.
ValueField inverse_transform(const ValueField& kruzhkov, double cap);

}  // namespace zubov
