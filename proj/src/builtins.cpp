#include "zubov/builtins.hpp"

#include <cmath>
#include <numbers>

#include "zubov/error.hpp"

namespace zubov {

using nlohmann::json;

namespace {

// Smooth cutoff that is 1 on |x_i| <= 1.5 and 0 beyond 2, so the lifted
// dynamics stay bounded without touching the computational box.
std::string cutoff(const std::string& var) {
  const std::string t = "min(1, max(0, (abs(" + var + ") - 1.5)/0.5))";
  return "(1 - 3*" + t + "^2 + 2*" + t + "^3)";
}

json lift2d_doc(const std::string& name, const std::string& cost, double growth_c) {
  const std::string chi = cutoff("x1") + "*" + cutoff("x2");
  return {
      {"name", name},
      {"state_dim", 2},
      {"controls", {{"box", {{"lo", {-1.0}}, {"hi", {1.0}}, {"samples", {21}}}}}},
      {"dynamics", {"(-x1 + a1*x1^2)*" + chi, "(-x2 + a1*x2^2)*" + chi}},
      {"cost", cost},
      {"mode", "maximize"},
      // |x_i| <= 1/2 and |a| <= 1 give d|x_i|/dt <= -|x_i|/2 componentwise.
      {"ules", {{"C", 1.0}, {"sigma", 0.5}, {"r", 0.5}}},
      {"growth", {{"C_tilde", growth_c}, {"lambda", 2.0}}},
  };
}

const double kHavC6 = std::pow(0.9, 6);
const double kHavQ45 = kHavC6 * std::pow(0.45, 6);

// Tent on [a, b] peaking at the midpoint with height h.
double tent(double a, double b, double h, double y) {
  const double m = 0.5 * (a + b);
  if (y <= a || y >= b) return 0.0;
  return y <= m ? h * (y - a) / (m - a) : h * (b - y) / (b - m);
}

double tent_integral(double a, double b, double h, double y) {
  const double m = 0.5 * (a + b);
  if (y <= a) return 0.0;
  if (y >= b) return 0.5 * h * (b - a);
  if (y <= m) return 0.5 * h * (y - a) * (y - a) / (m - a);
  return 0.5 * h * (b - a) - 0.5 * h * (b - y) * (b - y) / (b - m);
}

double pow10(int k) { return std::pow(10.0, k); }
double t_minus(int k) { return pow10(k) - hav::spike_half_width(k); }
double t_plus(int k) { return pow10(k) + hav::spike_half_width(k); }

}  // namespace

namespace hav {

double spike_half_width(int k) { return std::pow(10.0, -(2 * k + 1)); }

double Q(double x) {
  if (x < 0) return -Q(-x);
  if (x <= 0.45) return kHavC6 * std::pow(x, 6);
  if (x <= 0.9) return kHavQ45 * (0.9 - x) / 0.45;
  for (int k = 0; k < 300; ++k) {
    if (x <= t_plus(k)) return tent(t_minus(k), t_plus(k), pow10(k), x);
    if (x < t_minus(k + 1)) return tent(t_plus(k), t_minus(k + 1), spike_half_width(k), x);
  }
  return 0.0;
}

double integral(double x) {
  x = std::abs(x);
  const double head = std::min(x, 0.45);
  double acc = kHavC6 * std::pow(head, 7) / 7.0;
  if (x <= 0.45) return acc;
  const double r = std::min(x, 0.9);
  acc += kHavQ45 / 0.45 * (0.5 * 0.45 * 0.45 - 0.5 * (0.9 - r) * (0.9 - r));
  for (int k = 0; k < 300 && x > t_minus(k); ++k) {
    acc += tent_integral(t_minus(k), t_plus(k), pow10(k), x);
    acc += tent_integral(t_plus(k), t_minus(k + 1), spike_half_width(k), x);
  }
  return acc;
}

}  // namespace hav

json builtin_document(std::string_view name) {
  if (name == "lift2d") return lift2d_doc("lift2d", "x1^2 + x2^2", 1.0);
  if (name == "lift2d-psi-sqrt")
    return lift2d_doc("lift2d-psi-sqrt", "(x1^2 + x2^2)*(sqrt(abs(x1 - 0.75)) + sqrt(abs(x2 - 0.75)))", 2.24);
  if (name == "lift2d-psi-abs")
    return lift2d_doc("lift2d-psi-abs", "(x1^2 + x2^2)*(abs(x1 - 0.75) + abs(x2 - 0.75))", 2.5);
  if (name == "ex1") {
    // c = clamp(x,-1,1). Inside [-1,1] this is -x + a x^2; outside it reduces
    // to a/x - 1 (x >= 1) and 1 - a/x (x <= -1).
    const std::string c = "max(-1, min(1, x1))";
    return {
        {"name", "ex1"},
        {"state_dim", 1},
        {"controls", {{"box", {{"lo", {-1.0}}, {"hi", {1.0}}, {"samples", {21}}}}}},
        {"dynamics", {"-" + c + " + a1*" + c + "^2 - a1*(1 - 1/max(1, abs(x1)))"}},
        {"cost", "abs(sin(3.141592653589793*" + c + "))"},
        {"mode", "maximize"},
        {"ules", {{"C", 1.0}, {"sigma", 0.5}, {"r", 0.5}}},
        {"growth", {{"C_tilde", std::numbers::pi}, {"lambda", 1.0}}},
    };
  }
  if (name == "arctan1d") {
    return {
        {"name", "arctan1d"},
        {"state_dim", 1},
        {"controls", "none"},
        {"dynamics", {"-x1"}},
        {"cost", "abs(x1)/(1 + x1^2)"},
        {"mode", "maximize"},
        {"ules", {{"C", 1.0}, {"sigma", 1.0}, {"r", 1.0}}},
        {"growth", {{"C_tilde", 1.0}, {"lambda", 1.0}}},
    };
  }
  if (name == "hav1d") {
    // -(10/9)^6 x on |x| <= 0.9 and -1/x^5 beyond.
    return {
        {"name", "hav1d"},
        {"state_dim", 1},
        {"controls", "none"},
        {"dynamics", {"-(10/9)^6*max(-0.9, min(0.9, x1))*(0.9/max(0.9, abs(x1)))^5"}},
        {"cost", "-Q(x1)*f(x1)"},
        {"mode", "maximize"},
        {"ules", {{"C", 1.0}, {"sigma", std::pow(10.0 / 9.0, 6)}, {"r", 0.9}}},
        {"growth", {{"C_tilde", 1.0}, {"lambda", 2.0}}},
    };
  }
  if (name == "fuller") {
    return {
        {"name", "fuller"},
        {"state_dim", 2},
        {"controls", {{"box", {{"lo", {-1.0}}, {"hi", {1.0}}, {"samples", {21}}}}}},
        {"dynamics", {"x2", "a1"}},
        {"cost", "0"},
        {"lagrangian", "abs(x1)^2"},
        {"mode", "minimize"},
        {"guard", "nonnegative"},
    };
  }
  throw ConfigError("unknown builtin system '" + std::string(name) + "'");
}

std::vector<std::string> builtin_names() {
  return {"lift2d", "lift2d-psi-sqrt", "lift2d-psi-abs", "ex1", "arctan1d", "hav1d", "fuller"};
}

SystemDef builtin(std::string_view name, const json& overrides) {
  json doc = builtin_document(name);
  if (!overrides.is_null() && !overrides.is_object()) throw ConfigError("builtin overrides must be a JSON object");
  std::vector<std::string> problems;
  int samples = 0;
  for (const auto& [key, value] : overrides.items()) {
    if (key == "control_samples") {
      if (!value.is_number_integer() || value.get<int>() < 2) problems.push_back("'control_samples' must be an integer >= 2");
      else samples = value.get<int>();
    } else if (key == "gamma") {
      if (name != "fuller") problems.push_back("'gamma' only applies to fuller");
      else if (!value.is_number() || !(value.get<double>() > 1)) problems.push_back("'gamma' must be a number > 1");
      else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "abs(x1)^%.17g", value.get<double>());
        doc["lagrangian"] = buf;
      }
    } else if (key == "state_dim" || key == "dynamics") {
      problems.push_back("'" + key + "' cannot be overridden for a builtin");
    } else {
      doc[key] = value;
    }
  }
  if (!problems.empty()) throw ConfigError(problems);

  const bool native_cost = name == "hav1d" && !overrides.contains("cost");
  if (native_cost) doc["cost"] = "0";
  SystemDef s = load_system(doc);
  if (native_cost) {
    const auto f = s.dynamics[0];
    s.cost = ScalarTerm("-Q(x1)*f(x1)", [f](std::span<const double> x, std::span<const double> a) {
      return -hav::Q(x[0]) * f(x, a);
    });
    if (auto bad = s.check_invariants(); !bad.empty()) throw ConfigError(bad);
  }
  if (samples > 0) s = s.with_control_samples(samples);
  return s;
}

std::optional<double> closed_form_value(std::string_view name, std::span<const double> x) {
  if (name == "lift2d") {
    if (x.size() != 2) throw ConfigError("lift2d closed form needs a 2-vector");
    if (std::abs(x[0]) >= 1 || std::abs(x[1]) >= 1) throw DomainError("outside D_o: lift2d value is infinite");
    if (x[0] >= -x[1]) return -std::log1p(-x[0]) - std::log1p(-x[1]) - x[0] - x[1];
    return -std::log1p(x[0]) - std::log1p(x[1]) + x[0] + x[1];
  }
  if (name == "arctan1d") return std::atan(std::abs(x[0]));
  if (name == "hav1d") return hav::integral(x[0]);
  return std::nullopt;
}

double lift2d_branch_distance(std::span<const double> x) { return std::abs(x[0] + x[1]) / std::numbers::sqrt2; }

}  // namespace zubov
