#include "zubov/system.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "zubov/error.hpp"

namespace zubov {

using nlohmann::json;

namespace {

constexpr double kOriginTol = 1e-12;

std::string format_point(std::span<const double> p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) os << ", ";
    os << p[i];
  }
  os << ')';
  return os.str();
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// ControlSpace

ControlSpace ControlSpace::none() {
  ControlSpace c;
  c.points_.push_back({});
  return c;
}

ControlSpace ControlSpace::finite(std::vector<Vec> points) {
  if (points.empty()) throw ConfigError("control list is empty");
  ControlSpace c;
  c.dim_ = static_cast<int>(points.front().size());
  c.lo_.assign(c.dim_, std::numeric_limits<double>::infinity());
  c.hi_.assign(c.dim_, -std::numeric_limits<double>::infinity());
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != c.dim_) throw ConfigError("control points have inconsistent dimensions");
    for (int j = 0; j < c.dim_; ++j) {
      if (!std::isfinite(p[j])) throw ConfigError("control point has a non-finite coordinate");
      c.lo_[j] = std::min(c.lo_[j], p[j]);
      c.hi_[j] = std::max(c.hi_[j], p[j]);
    }
  }
  c.points_ = std::move(points);
  return c;
}

ControlSpace ControlSpace::box(Vec lo, Vec hi, std::vector<int> samples) {
  if (lo.empty() || lo.size() != hi.size() || samples.size() != lo.size())
    throw ConfigError("control box needs matching, nonempty lo/hi/samples");
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (!(lo[j] <= hi[j])) throw ConfigError("control box has lo > hi on axis " + std::to_string(j + 1));
    if (samples[j] < 1 || (samples[j] == 1 && lo[j] != hi[j]))
      throw ConfigError("control box needs at least 2 samples per nondegenerate axis");
  }
  ControlSpace c;
  c.dim_ = static_cast<int>(lo.size());
  c.is_box_ = true;
  c.lo_ = std::move(lo);
  c.hi_ = std::move(hi);
  c.samples_ = std::move(samples);

  std::vector<int> idx(c.dim_, 0);
  while (true) {
    Vec p(c.dim_);
    for (int j = 0; j < c.dim_; ++j) {
      const int n = c.samples_[j];
      p[j] = n == 1 ? c.lo_[j] : c.lo_[j] + (c.hi_[j] - c.lo_[j]) * idx[j] / (n - 1);
      if (idx[j] == n - 1) p[j] = c.hi_[j];  // exact corner
    }
    c.points_.push_back(std::move(p));
    int j = 0;
    for (; j < c.dim_; ++j) {
      if (++idx[j] < c.samples_[j]) break;
      idx[j] = 0;
    }
    if (j == c.dim_) break;
  }
  return c;
}

ControlSpace ControlSpace::resampled(int per_axis) const {
  if (!is_box_) return *this;
  return box(lo_, hi_, std::vector<int>(dim_, per_axis));
}

bool ControlSpace::contains(std::span<const double> a) const {
  if (static_cast<int>(a.size()) != dim_) return false;
  for (int j = 0; j < dim_; ++j) {
    if (a[j] < lo_[j] - 1e-12 || a[j] > hi_[j] + 1e-12) return false;
  }
  return true;
}

json ControlSpace::to_json() const {
  if (dim_ == 0) return "none";
  if (is_box_) return json{{"box", {{"lo", lo_}, {"hi", hi_}, {"samples", samples_}}}};
  return json{{"points", points_}};
}

// ---------------------------------------------------------------------------
// ScalarTerm

ScalarTerm::ScalarTerm()
    : text_("0"), fn_([](std::span<const double>, std::span<const double>) { return 0.0; }), zero_(true) {}

ScalarTerm::ScalarTerm(expr::Expression e)
    : text_(e.source()), expr_(std::make_shared<const expr::Expression>(std::move(e))) {
  auto p = expr_;
  fn_ = [p](std::span<const double> x, std::span<const double> a) { return p->evaluate(x, a); };
  const auto nodes = expr_->nodes();
  zero_ = nodes.size() == 1 && nodes[0].op == expr::Op::constant && nodes[0].value == 0.0;
}

ScalarTerm::ScalarTerm(std::string description, Fn fn) : text_(std::move(description)), fn_(std::move(fn)) {}

// ---------------------------------------------------------------------------
// SystemDef

void SystemDef::eval_dynamics(std::span<const double> x, std::span<const double> a, std::span<double> out) const {
  for (int i = 0; i < state_dim; ++i) out[i] = dynamics[i](x, a);
}

std::vector<std::string> SystemDef::check_invariants() const {
  std::vector<std::string> problems;
  if (state_dim < 1) problems.push_back("state_dim must be at least 1");
  if (static_cast<int>(dynamics.size()) != state_dim) {
    problems.push_back("dynamics has " + std::to_string(dynamics.size()) + " components, expected " +
                       std::to_string(state_dim));
    return problems;
  }
  if (controls.size() == 0) problems.push_back("control space is empty");

  const Vec origin(state_dim, 0.0);
  Vec f(state_dim);
  bool some_equilibrium = false;
  for (const auto& a : controls.points()) {
    try {
      eval_dynamics(origin, a, f);
      const bool at_rest = norm(f) <= kOriginTol;
      some_equilibrium = some_equilibrium || at_rest;
      if (!at_rest && mode == Mode::maximize)
        problems.push_back("f(0,a) = " + format_point(f) + " != 0 at control a = " + format_point(a));
      const double g0 = cost(origin, a);
      if (std::abs(g0) > kOriginTol)
        problems.push_back("g(0,a) = " + std::to_string(g0) + " != 0 at control a = " + format_point(a));
      if (lagrangian) {
        const double l0 = (*lagrangian)(origin, a);
        if (std::abs(l0) > kOriginTol)
          problems.push_back("l(0,a) = " + std::to_string(l0) + " != 0 at control a = " + format_point(a));
      }
      const double h0 = discount(origin, a);
      if (h0 < -kOriginTol) problems.push_back("h(0,a) < 0 at control a = " + format_point(a));
    } catch (const DomainError& e) {
      problems.push_back(std::string("evaluation at the origin failed: ") + e.what() + " at control a = " +
                         format_point(a));
    }
  }
  // A minimizer only needs one control that keeps the origin at rest.
  if (mode == Mode::minimize && !some_equilibrium && !controls.points().empty())
    problems.push_back("no control a has f(0,a) = 0");

  if (ules) {
    if (!(ules->sigma > 0)) problems.push_back("ules.sigma must be positive");
    if (!(ules->r > 0)) problems.push_back("ules.r must be positive");
    if (!(ules->C >= 1)) problems.push_back("ules.C must be at least 1");
  }
  if (growth && !(growth->lambda > 0)) problems.push_back("growth.lambda must be positive");
  if (guard == ConvergenceGuard::bounded_rate && !(discount_floor > 0))
    problems.push_back("bounded_rate guard needs discount_floor > 0");

  // Spot check the local growth bound on a deterministic sample of B_r.
  if (growth && ules && problems.empty()) {
    const ScalarTerm& c = mode == Mode::maximize ? cost : running_cost();
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit;
    Vec x(state_dim);
    for (int s = 0; s < 256 && problems.size() < 5; ++s) {
      for (auto& v : x) v = gauss(rng);
      const double scale = ules->r * std::pow(unit(rng), 1.0 / state_dim) / std::max(norm(x), 1e-300);
      for (auto& v : x) v *= scale;
      const double bound = growth->C_tilde * std::pow(norm(x), growth->lambda);
      for (const auto& a : controls.points()) {
        double val = 0.0;
        try {
          val = std::abs(c(x, a));
        } catch (const DomainError&) {
          continue;
        }
        if (val > bound * (1 + 1e-9) + 1e-12) {
          problems.push_back("growth bound violated: |cost| = " + std::to_string(val) + " > " +
                             std::to_string(bound) + " at x = " + format_point(x) + ", a = " + format_point(a));
          break;
        }
      }
    }
  }
  return problems;
}

SystemDef SystemDef::with_control_samples(int per_axis) const {
  SystemDef copy = *this;
  copy.controls = controls.resampled(per_axis);
  return copy;
}

json SystemDef::to_json() const {
  json j;
  j["name"] = name;
  j["state_dim"] = state_dim;
  j["controls"] = controls.to_json();
  json dyn = json::array();
  for (const auto& t : dynamics) dyn.push_back(t.text());
  j["dynamics"] = dyn;
  j["cost"] = cost.text();
  if (lagrangian) j["lagrangian"] = lagrangian->text();
  if (!discount.is_zero()) j["discount"] = discount.text();
  j["mode"] = to_string(mode);
  if (ules) j["ules"] = {{"C", ules->C}, {"sigma", ules->sigma}, {"r", ules->r}};
  if (growth) j["growth"] = {{"C_tilde", growth->C_tilde}, {"lambda", growth->lambda}};
  if (guard != ConvergenceGuard::none) j["guard"] = to_string(guard);
  if (guard == ConvergenceGuard::bounded_rate) {
    j["lagrangian_bound"] = lagrangian_bound;
    j["discount_floor"] = discount_floor;
  }
  return j;
}

double ules_tail_bound(const UlesConstants& ules, const GrowthConstants& growth, double rho) {
  // Along the envelope |x(t)| <= C rho e^{-sigma t} the cost is at most
  // C_tilde (C rho)^lambda e^{-lambda sigma t}; integrate over [0, inf).
  return growth.C_tilde * std::pow(ules.C * rho, growth.lambda) / (growth.lambda * ules.sigma);
}

std::string to_string(Mode m) { return m == Mode::maximize ? "maximize" : "minimize"; }

std::string to_string(ConvergenceGuard g) {
  switch (g) {
    case ConvergenceGuard::nonnegative:
      return "nonnegative";
    case ConvergenceGuard::nonpositive:
      return "nonpositive";
    case ConvergenceGuard::bounded_rate:
      return "bounded_rate";
    case ConvergenceGuard::dominated:
      return "dominated";
    default:
      return "none";
  }
}

// ---------------------------------------------------------------------------
// JSON loading

namespace {

class Loader {
 public:
  explicit Loader(const json& doc) : doc_(doc) {}

  SystemDef run() {
    SystemDef s;
    if (!doc_.is_object()) throw ConfigError("system definition must be a JSON object");
    static const std::set<std::string> known{"name",  "state_dim", "controls", "dynamics",         "cost",
                                             "lagrangian", "discount", "mode", "ules", "growth",
                                             "guard", "lagrangian_bound", "discount_floor"};
    for (const auto& [k, v] : doc_.items()) {
      if (!known.count(k)) problem("unknown key '" + k + "'");
    }
    s.name = doc_.value("name", std::string("custom"));
    if (!doc_.contains("state_dim") || !doc_["state_dim"].is_number_integer() || doc_["state_dim"].get<int>() < 1) {
      problem("'state_dim' must be a positive integer");
      finish();
    }
    s.state_dim = doc_["state_dim"].get<int>();
    load_controls(s);
    load_mode(s);
    const int n = s.state_dim, m = s.control_dim();

    if (!doc_.contains("dynamics") || !doc_["dynamics"].is_array()) {
      problem("'dynamics' must be an array of expression strings");
    } else if (static_cast<int>(doc_["dynamics"].size()) != n) {
      problem("'dynamics' has " + std::to_string(doc_["dynamics"].size()) + " entries, expected " +
              std::to_string(n));
    } else {
      for (std::size_t i = 0; i < doc_["dynamics"].size(); ++i) {
        if (auto t = term(doc_["dynamics"][i], "dynamics[" + std::to_string(i) + "]", n, m)) s.dynamics.push_back(*t);
      }
    }
    if (!doc_.contains("cost")) {
      problem("'cost' is required");
    } else if (auto t = term(doc_["cost"], "cost", n, m)) {
      s.cost = *t;
    }
    if (doc_.contains("lagrangian")) {
      if (auto t = term(doc_["lagrangian"], "lagrangian", n, m)) s.lagrangian = *t;
    }
    if (doc_.contains("discount")) {
      if (auto t = term(doc_["discount"], "discount", n, m)) s.discount = *t;
    }
    if (doc_.contains("ules")) {
      const auto& u = doc_["ules"];
      UlesConstants c;
      if (number(u, "C", c.C, "ules") & number(u, "sigma", c.sigma, "ules") & number(u, "r", c.r, "ules"))
        s.ules = c;
    }
    if (doc_.contains("growth")) {
      const auto& g = doc_["growth"];
      GrowthConstants c;
      if (number(g, "C_tilde", c.C_tilde, "growth") & number(g, "lambda", c.lambda, "growth")) s.growth = c;
    }
    if (doc_.contains("guard")) {
      const auto& g = doc_["guard"];
      const std::string v = g.is_string() ? g.get<std::string>() : "";
      if (v == "none") s.guard = ConvergenceGuard::none;
      else if (v == "nonnegative") s.guard = ConvergenceGuard::nonnegative;
      else if (v == "nonpositive") s.guard = ConvergenceGuard::nonpositive;
      else if (v == "bounded_rate") s.guard = ConvergenceGuard::bounded_rate;
      else if (v == "dominated") s.guard = ConvergenceGuard::dominated;
      else problem("'guard' must be one of none, nonnegative, nonpositive, bounded_rate, dominated");
    }
    if (doc_.contains("lagrangian_bound")) number(doc_, "lagrangian_bound", s.lagrangian_bound, "");
    if (doc_.contains("discount_floor")) number(doc_, "discount_floor", s.discount_floor, "");

    finish();
    for (auto& p : s.check_invariants()) problem("invariant violation: " + p);
    finish();
    return s;
  }

 private:
  void problem(std::string p) { problems_.push_back(std::move(p)); }
  void finish() {
    if (!problems_.empty()) throw ConfigError(problems_);
  }

  bool number(const json& obj, const char* key, double& out, const std::string& where) {
    const std::string label = where.empty() ? std::string(key) : where + "." + key;
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number()) {
      problem("'" + label + "' must be a number");
      return false;
    }
    out = obj[key].get<double>();
    return true;
  }

  std::optional<ScalarTerm> term(const json& v, const std::string& label, int n, int m) {
    if (!v.is_string()) {
      problem("'" + label + "' must be an expression string");
      return std::nullopt;
    }
    try {
      return ScalarTerm(expr::Expression::parse(v.get<std::string>(), n, m));
    } catch (const ParseError& e) {
      problem("'" + label + "': " + e.what());
      return std::nullopt;
    }
  }

  void load_mode(SystemDef& s) {
    if (!doc_.contains("mode")) return;
    const auto& v = doc_["mode"];
    if (v == "maximize") s.mode = Mode::maximize;
    else if (v == "minimize") s.mode = Mode::minimize;
    else problem("'mode' must be \"maximize\" or \"minimize\"");
  }

  void load_controls(SystemDef& s) {
    if (!doc_.contains("controls") || doc_["controls"].is_null() || doc_["controls"] == "none") {
      s.controls = ControlSpace::none();
      return;
    }
    const auto& c = doc_["controls"];
    try {
      if (c.is_object() && c.contains("points")) {
        const auto& pts = c["points"];
        if (!pts.is_array() || pts.empty()) {
          problem("'controls.points' must be a nonempty array");
          return;
        }
        std::vector<Vec> points;
        for (const auto& p : pts) {
          if (p.is_number()) points.push_back({p.get<double>()});
          else points.push_back(p.get<Vec>());
        }
        s.controls = ControlSpace::finite(std::move(points));
      } else if (c.is_object() && c.contains("box")) {
        const auto& b = c["box"];
        Vec lo = b.at("lo").get<Vec>(), hi = b.at("hi").get<Vec>();
        std::vector<int> samples = b.contains("samples") ? b["samples"].get<std::vector<int>>()
                                                         : std::vector<int>(lo.size(), 21);
        s.controls = ControlSpace::box(std::move(lo), std::move(hi), std::move(samples));
      } else {
        problem("'controls' must be \"none\", {\"points\": [...]} or {\"box\": {...}}");
      }
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problem("'controls': " + p);
    } catch (const json::exception& e) {
      problem(std::string("'controls': ") + e.what());
    }
  }

  const json& doc_;
  std::vector<std::string> problems_;
};

}  // namespace

SystemDef load_system(const json& doc) { return Loader(doc).run(); }

}  // namespace zubov
