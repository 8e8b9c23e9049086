#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zubov/system.hpp"

namespace zubov {

/// Registered reference problems:
///
///   lift2d            f_i = (-x_i + a x_i^2) * cutoff, g = |x|^2, A = [-1,1]
///   lift2d-psi-sqrt   same dynamics, g = |x|^2 (sqrt|x1-3/4| + sqrt|x2-3/4|)
///   lift2d-psi-abs    same dynamics, g = |x|^2 (|x1-3/4| + |x2-3/4|)
///   ex1               scalar system whose cost vanishes outside [-1,1]
///   arctan1d          f = -x, g = |x|/(1+x^2), no control
///   hav1d             scalar system whose value has spikes of slope 10^k at 10^k
///   fuller            f = (x2, a), l = |x1|^gamma, minimize
///
/// `overrides` may carry "control_samples" (per axis), "gamma" (fuller only)
/// and any top-level key of the system schema except state_dim and dynamics.
SystemDef builtin(std::string_view name, const nlohmann::json& overrides = nlohmann::json::object());

/// JSON document of a builtin (before overrides). hav1d's cost is native and
/// shows up as a description string.
nlohmann::json builtin_document(std::string_view name);

std::vector<std::string> builtin_names();

/// Closed-form maximal cost V_L where one is known (lift2d, arctan1d, hav1d);
/// nullopt for other names. Throws DomainError for lift2d points outside the
/// open square (-1,1)^2, which is the domain of attraction.
std::optional<double> closed_form_value(std::string_view name, std::span<const double> x);

namespace hav {

/// Half-width of the k-th spike, 10^-(2k+1).
double spike_half_width(int k);

/// The odd continuous function whose integral is the hav1d value.
double Q(double x);

/// Exact integral of Q over [0, x] (even in x).
double integral(double x);

}  // namespace hav

/// Distance from the line x1 = -x2 where the lift2d closed form switches
/// branches (and the value has a kink).
double lift2d_branch_distance(std::span<const double> x);

}  // namespace zubov
