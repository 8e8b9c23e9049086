#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "zubov/expression.hpp"

namespace zubov {

using Vec = std::vector<double>;

/// The perturbation set A together with its finite discretization A_d.
///
/// A box [lo_j, hi_j]^M is sampled with `samples[j]` equally spaced points per
/// axis (corners always included). A control-free system has dimension 0 and a
/// single empty control point.
class ControlSpace {
 public:
  static ControlSpace none();
  static ControlSpace finite(std::vector<Vec> points);
  static ControlSpace box(Vec lo, Vec hi, std::vector<int> samples);

  int dim() const noexcept { return dim_; }
  bool is_box() const noexcept { return is_box_; }
  const std::vector<Vec>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Vec& lo() const noexcept { return lo_; }
  const Vec& hi() const noexcept { return hi_; }
  const std::vector<int>& samples() const noexcept { return samples_; }

  /// Same box with `per_axis` samples on every axis. Finite lists are returned
  /// unchanged.
  ControlSpace resampled(int per_axis) const;

  /// Inside the declared bounding box (within 1e-12).
  bool contains(std::span<const double> a) const;

  nlohmann::json to_json() const;

 private:
  int dim_ = 0;
  bool is_box_ = false;
  Vec lo_, hi_;
  std::vector<int> samples_;
  std::vector<Vec> points_;
};

/// A real function of (state, control). Usually backed by a parsed expression;
/// builtin systems may register a native function for terms the expression
/// language cannot express.
class ScalarTerm {
 public:
  using Fn = std::function<double(std::span<const double>, std::span<const double>)>;

  ScalarTerm();  // identically zero
  explicit ScalarTerm(expr::Expression e);
  ScalarTerm(std::string description, Fn fn);

  double operator()(std::span<const double> x, std::span<const double> a) const { return fn_(x, a); }
  const std::string& text() const noexcept { return text_; }
  const expr::Expression* expression() const noexcept { return expr_.get(); }
  bool is_zero() const noexcept { return zero_; }

 private:
  std::string text_;
  std::shared_ptr<const expr::Expression> expr_;
  Fn fn_;
  bool zero_ = false;
};

enum class Mode { maximize, minimize };

/// Which hypothesis keeps the infinite-horizon costs convergent in
/// minimization problems.
enum class ConvergenceGuard {
  none,
  nonnegative,     // l >= 0 and quasi-stability
  nonpositive,     // l <= 0 on an asymptotically null set
  bounded_rate,    // case (A): |l| <= bound and h >= floor > 0
  dominated,       // case (B): |l| <= h
};

/// ||phi(t)|| <= C ||x|| e^{-sigma t} for ||x|| <= r, for every perturbation.
struct UlesConstants {
  double C = 1.0;
  double sigma = 1.0;
  double r = 1.0;
};

/// running cost <= C_tilde ||x||^lambda on the ball of radius r.
struct GrowthConstants {
  double C_tilde = 1.0;
  double lambda = 1.0;
};

struct SystemDef {
  std::string name;
  int state_dim = 1;
  ControlSpace controls = ControlSpace::none();
  std::vector<ScalarTerm> dynamics;  // f, one term per state component
  ScalarTerm cost;                   // g >= 0
  std::optional<ScalarTerm> lagrangian;
  ScalarTerm discount;               // h >= 0, zero by default
  Mode mode = Mode::maximize;
  std::optional<UlesConstants> ules;
  std::optional<GrowthConstants> growth;
  ConvergenceGuard guard = ConvergenceGuard::none;
  double lagrangian_bound = 0.0;  // case (A) only
  double discount_floor = 0.0;    // case (A) only

  int control_dim() const noexcept { return controls.dim(); }

  /// f(x, a) written into `out` (size state_dim).
  void eval_dynamics(std::span<const double> x, std::span<const double> a, std::span<double> out) const;

  /// l if declared, otherwise g.
  const ScalarTerm& running_cost() const { return lagrangian ? *lagrangian : cost; }

  /// Problems found by the load-time checks (empty when valid).
  std::vector<std::string> check_invariants() const;

  /// Resampled control discretization; other fields are shared.
  SystemDef with_control_samples(int per_axis) const;

  nlohmann::json to_json() const;
};

/// Ball-tail bound C_tilde (C rho)^lambda / (lambda sigma): the largest cost a
/// ULES trajectory can still collect after entering the ball of radius rho.
double ules_tail_bound(const UlesConstants& ules, const GrowthConstants& growth, double rho);

/// Builds a SystemDef from a JSON document (schema in docs/config.md).
/// Throws ConfigError listing every schema and invariant violation.
SystemDef load_system(const nlohmann::json& doc);

std::string to_string(Mode m);
std::string to_string(ConvergenceGuard g);

}  // namespace zubov
