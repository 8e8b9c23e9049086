#include "zubov/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include "zubov/builtins.hpp"
#include "zubov/error.hpp"
#include "zubov/oracle.hpp"
#include "zubov/trajectory.hpp"

namespace zubov {

using nlohmann::json;

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void fill_stats(CheckResult& c, std::vector<double> values) {
  c.count = values.size();
  if (values.empty()) return;
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
  };
  c.max = values.back();
  c.median = q(0.5);
  c.p95 = q(0.95);
}

// Every node within `band` cells (Chebyshev) of `k` is inside the mask.
bool deep_inside(const DoaMask& mask, std::size_t k, int band) {
  const Grid& g = mask.grid;
  if (!mask.at(k)) return false;
  if (band <= 0) return true;
  const auto idx = g.unravel(k);
  const int n = g.dims();
  std::vector<int> off(n, -band);
  while (true) {
    std::size_t flat = 0;
    bool valid = true;
    for (int j = 0; j < n; ++j) {
      const int i = idx[j] + off[j];
      if (i < 0 || i >= g.counts()[j]) {
        valid = false;
        break;
      }
      flat += static_cast<std::size_t>(i) * g.strides()[j];
    }
    if (!valid || !mask.at(flat)) return false;
    int j = 0;
    for (; j < n; ++j) {
      if (++off[j] <= band) break;
      off[j] = -band;
    }
    if (j == n) return true;
  }
}

// Central-difference gradient of the nodal values at an interior node.
void gradient(const Grid& g, std::span<const double> v, std::size_t k, std::span<double> out) {
  for (int j = 0; j < g.dims(); ++j) {
    const std::size_t s = g.strides()[j];
    out[j] = (v[k + s] - v[k - s]) / (2 * g.spacing()[j]);
  }
}

double residual_at(const SystemDef& sys, const Grid& g, std::span<const double> v, Transform t, std::size_t k) {
  const int n = g.dims();
  Vec x(n), p(n), f(n);
  g.node(k, x);
  gradient(g, v, k, p);
  const bool take_inf = t == Transform::kruzhkov || sys.mode == Mode::maximize;
  double best = take_inf ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  for (const auto& a : sys.controls.points()) {
    sys.eval_dynamics(x, a, f);
    double pf = 0.0;
    for (int j = 0; j < n; ++j) pf += p[j] * f[j];
    double r;
    if (t == Transform::kruzhkov) {
      const double gx = sys.cost(x, a);
      r = -pf - gx + v[k] * gx;
    } else {
      r = -pf - sys.running_cost()(x, a) + sys.discount(x, a) * v[k];
    }
    best = take_inf ? std::min(best, r) : std::max(best, r);
  }
  return best;
}

// Zubov residuals of two Kruzhkov fields at node k from one evaluation of
// f and g per control.
std::pair<double, double> kruzhkov_residual_pair(const SystemDef& sys, const Grid& g, std::span<const double> u,
                                                 std::span<const double> w, std::size_t k) {
  const int n = g.dims();
  Vec x(n), pu(n), pw(n), f(n);
  g.node(k, x);
  gradient(g, u, k, pu);
  gradient(g, w, k, pw);
  double ru = std::numeric_limits<double>::infinity(), rw = ru;
  for (const auto& a : sys.controls.points()) {
    sys.eval_dynamics(x, a, f);
    const double gx = sys.cost(x, a);
    double fu = 0.0, fw = 0.0;
    for (int j = 0; j < n; ++j) {
      fu += pu[j] * f[j];
      fw += pw[j] * f[j];
    }
    ru = std::min(ru, -fu - gx + u[k] * gx);
    rw = std::min(rw, -fw - gx + w[k] * gx);
  }
  return {ru, rw};
}

json point_json(std::span<const double> x) { return json(std::vector<double>(x.begin(), x.end())); }

// Interpolated gradient norm by central differences of step h per axis.
double field_gradient(const ValueField& field, std::span<const double> x) {
  const Grid& g = field.grid();
  Vec y(x.begin(), x.end());
  double s = 0.0;
  for (int j = 0; j < g.dims(); ++j) {
    const double h = g.spacing()[j];
    y[j] = x[j] + h;
    const double up = field.interpolate(y);
    y[j] = x[j] - h;
    const double dn = field.interpolate(y);
    y[j] = x[j];
    const double d = (up - dn) / (2 * h);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Report

json CheckResult::to_json() const {
  return {{"name", name},      {"pass", pass},   {"skipped", skipped}, {"note", note}, {"count", count},
          {"max", max},        {"median", median}, {"p95", p95},       {"witnesses", witnesses}};
}

bool VerificationReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

const CheckResult* VerificationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

json VerificationReport::to_json() const {
  json arr = json::array();
  for (const auto& c : checks) arr.push_back(c.to_json());
  return {{"pass", pass()}, {"checks", arr}};
}

void VerificationReport::print(std::ostream& os) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %-6s %8s %12s %12s %12s\n", "check", "result", "count", "max", "median",
                "p95");
  os << buf;
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%-22s %-6s %8zu %12.4g %12.4g %12.4g\n", c.name.c_str(),
                  c.skipped ? "skip" : (c.pass ? "pass" : "FAIL"), c.count, c.max, c.median, c.p95);
    os << buf;
    if (!c.note.empty()) os << "    " << c.note << '\n';
    for (const auto& w : c.witnesses) os << "    witness " << w.dump() << '\n';
  }
}

std::string to_string(SandwichRole r) { return r == SandwichRole::sub ? "sub" : "sup"; }

// ---------------------------------------------------------------------------
// Residuals

double node_residual(const SystemDef& system, const ValueField& field, std::size_t node) {
  const Grid& g = field.grid();
  if (g.on_boundary(node)) throw ConfigError("residual needs an interior node");
  return residual_at(system, g, field.values(), field.transform(), node);
}

CheckResult residual_stats(const SystemDef& system, const ValueField& field, const ResidualSettings& st) {
  const Grid& g = field.grid();
  if (g.dims() != system.state_dim) throw ConfigError("field dimension does not match the system");
  CheckResult c;
  c.name = "residual";
  std::vector<double> abs_res;
  std::vector<std::pair<double, std::size_t>> worst;
  Vec x(g.dims());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k)) continue;
    if (st.mask && !deep_inside(*st.mask, k, st.band)) continue;
    g.node(k, x);
    if (st.exclude && st.exclude(x)) continue;
    const double r = std::abs(residual_at(system, g, field.values(), field.transform(), k));
    abs_res.push_back(r);
    worst.emplace_back(r, k);
  }
  fill_stats(c, abs_res);
  if (abs_res.empty()) {
    c.note = "no nodes left after masking";
    return c;
  }
  c.pass = c.median <= st.median_limit && c.p95 <= st.p95_limit;
  if (!c.pass) {
    const std::size_t keep = std::min(st.max_witnesses, worst.size());
    std::partial_sort(worst.begin(), worst.begin() + keep, worst.end(), std::greater<>());
    for (std::size_t i = 0; i < keep; ++i) {
      g.node(worst[i].second, x);
      c.witnesses.push_back({{"node", worst[i].second}, {"x", point_json(x)}, {"residual", worst[i].first}});
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "limits: median <= %g, p95 <= %g", st.median_limit, st.p95_limit);
    c.note = buf;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Scheme fixed point

CheckResult fixed_point_check(const SystemDef& system, const ValueField& field, const SolverSettings& solver,
                              double tol, std::size_t max_witnesses) {
  CheckResult c;
  c.name = "fixed-point";
  const ValueField next = apply_sweep(system, field, solver);
  const Grid& g = field.grid();
  std::vector<double> moves(g.size());
  std::vector<std::pair<double, std::size_t>> bad;
  for (std::size_t k = 0; k < g.size(); ++k) {
    moves[k] = std::abs(next.at(k) - field.at(k));
    if (moves[k] > tol) bad.emplace_back(moves[k], k);
  }
  fill_stats(c, moves);
  if (!bad.empty()) {
    c.pass = false;
    const std::size_t keep = std::min(max_witnesses, bad.size());
    std::partial_sort(bad.begin(), bad.begin() + keep, bad.end(), std::greater<>());
    for (std::size_t i = 0; i < keep; ++i) {
      c.witnesses.push_back({{"node", bad[i].second}, {"x", point_json(g.node(bad[i].second))},
                             {"value", field.at(bad[i].second)}, {"after_sweep", next.at(bad[i].second)}});
    }
    c.note = std::to_string(bad.size()) + " nodes move by more than " + std::to_string(tol);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Dynamic programming defect

double dpp_defect(const SystemDef& system, const ValueField& field, std::span<const double> x,
                  const DppSettings& st) {
  const int n = system.state_dim;
  const int segments = std::max(1, static_cast<int>(std::lround(st.t / st.switch_dt)));
  const double piece = st.t / segments;
  const bool kruzhkov = field.transform() == Transform::kruzhkov;
  const bool maximize = kruzhkov || system.mode == Mode::maximize;
  const double init = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  std::vector<double> best(system.controls.size(), init);
  for_each_schedule(system, x, segments, piece, st.step, 0.0, st.threads, [&](int first, const LeafInfo& info) {
    double J, disc;
    if (kruzhkov) {
      disc = std::exp(-info.end[n + 1]);
      J = -std::expm1(-info.end[n + 1]);
    } else {
      disc = std::exp(-info.end[n + 2]);
      J = info.end[n];
    }
    const double gain = J + disc * field.interpolate(info.end.first(n));
    best[first] = maximize ? std::max(best[first], gain) : std::min(best[first], gain);
  });
  double b = init;
  for (double v : best) b = maximize ? std::max(b, v) : std::min(b, v);
  const double here = field.interpolate(x);
  return maximize ? here - b : b - here;
}

CheckResult dpp_check(const SystemDef& system, const ValueField& field, std::span<const std::size_t> nodes,
                      double tol, const DppSettings& st) {
  CheckResult c;
  c.name = "dpp";
  std::vector<double> abs_def;
  for (std::size_t k : nodes) {
    const Vec x = field.grid().node(k);
    const double d = dpp_defect(system, field, x, st);
    abs_def.push_back(std::abs(d));
    if (std::abs(d) > tol) {
      c.pass = false;
      c.witnesses.push_back({{"node", k}, {"x", point_json(x)}, {"defect", d}});
    }
  }
  fill_stats(c, abs_def);
  if (!c.pass) c.note = "tolerance " + std::to_string(tol);
  return c;
}

// ---------------------------------------------------------------------------
// Robust Lyapunov decrease

CheckResult check_lyapunov_decrease(const SystemDef& system, const ValueField& field, const LyapunovSettings& st) {
  const Grid& g = field.grid();
  const int n = g.dims();
  CheckResult c;
  c.name = "lyapunov";
  std::mt19937_64 rng(st.seed);
  const auto& pts = system.controls.points();
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  const double ball = st.ball_cells * g.max_cell_diameter();
  const double diam = g.max_cell_diameter();
  const int segments = std::max(1, static_cast<int>(std::ceil(st.t / st.switch_dt - 1e-9)));

  std::vector<double> margins;
  Vec x(n);
  int strict = 0;
  for (int s = 0; s < st.samples; ++s) {
    bool found = false;
    for (int attempt = 0; attempt < 10000 && !found; ++attempt) {
      for (int j = 0; j < n; ++j) {
        std::uniform_real_distribution<double> u(g.coord(j, 0), g.coord(j, g.counts()[j] - 1));
        x[j] = u(rng);
      }
      found = norm(x) >= ball && field.interpolate(x) < 1 - st.eps0;
    }
    if (!found) {
      c.note = "sampling region {v < 1 - eps0} minus the origin ball is (nearly) empty";
      break;
    }
    ControlSchedule sched;
    std::vector<std::size_t> chosen;
    for (int k = 0; k < segments; ++k) {
      chosen.push_back(pick(rng));
      sched.append(st.t / segments, pts[chosen.back()]);
    }
    const auto rec = integrate(system, x, sched, st.step);
    const Vec& y = rec.final_state();
    const double vx = field.interpolate(x), vy = field.interpolate(y);
    const double tol = std::max(1e-12, 2 * diam * std::max(field_gradient(field, x), field_gradient(field, y)));
    const double cost = rec.g_integral.back();
    const bool gate = cost > 4 * tol;
    strict += gate;
    const bool ok = gate ? vy < vx : vy <= vx + tol;
    margins.push_back(vy - vx);
    if (!ok) {
      c.pass = false;
      if (c.witnesses.size() < st.max_witnesses) {
        c.witnesses.push_back({{"sample", s},
                               {"x", point_json(x)},
                               {"controls", chosen},
                               {"v_x", vx},
                               {"v_phi", vy},
                               {"cost", cost},
                               {"tol", tol},
                               {"strict", gate}});
      }
    }
  }
  fill_stats(c, margins);
  if (c.note.empty()) c.note = std::to_string(strict) + " samples under the strict-decrease gate";
  return c;
}

// ---------------------------------------------------------------------------
// Sandwich comparison

CheckResult sandwich_check(const SystemDef& system, const ValueField& reference, const ValueField& candidate,
                           SandwichRole role, double tol, const SandwichSettings& st) {
  const Grid& g = reference.grid();
  if (!g.same_as(candidate.grid())) throw ConfigError("sandwich check needs fields on the same grid");
  if (reference.transform() != Transform::kruzhkov || candidate.transform() != Transform::kruzhkov)
    throw ConfigError("sandwich check compares Kruzhkov fields");
  const bool sub = role == SandwichRole::sub;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) continue;
    const double w = candidate.at(k);
    if (sub ? std::abs(w - 1) > 1e-9 : w < 1 - 1e-9)
      throw ConfigError("candidate violates its boundary condition at node " + std::to_string(k) +
                        (sub ? " (sub role needs w == 1)" : " (sup role needs w >= 1)"));
  }
  CheckResult c;
  c.name = "sandwich-" + to_string(role);
  const auto& cv = candidate.values();
  const auto& rv = reference.values();
  auto saturated = [](double v) { return v <= 1e-12 || v >= 1 - 1e-12; };
  std::vector<double> gaps;
  Vec x(g.dims());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k)) continue;
    g.node(k, x);
    // Value ordering at every interior node.
    const double gap = sub ? cv[k] - rv[k] : rv[k] - cv[k];
    gaps.push_back(gap);
    if (gap > tol) {
      c.pass = false;
      if (c.witnesses.size() < st.max_witnesses)
        c.witnesses.push_back({{"kind", "value"}, {"node", k}, {"x", point_json(x)}, {"candidate", cv[k]},
                               {"reference", rv[k]}});
    }
    // One-sided residual test on smooth parts of the candidate.
    if (st.mask && !deep_inside(*st.mask, k, st.band)) continue;
    if (st.exclude && st.exclude(x)) continue;
    int sat = saturated(cv[k]);
    for (int j = 0; j < g.dims(); ++j) sat += saturated(cv[k - g.strides()[j]]) + saturated(cv[k + g.strides()[j]]);
    const int stencil = 1 + 2 * g.dims();
    if (sat != 0 && sat != stencil) continue;  // kink created by clamping
    const auto [rc, rr] = kruzhkov_residual_pair(system, g, cv, rv, k);
    const double d = sat == stencil ? rc : rc - rr;
    if (sub ? d > tol : d < -tol) {
      c.pass = false;
      if (c.witnesses.size() < st.max_witnesses)
        c.witnesses.push_back({{"kind", "residual"}, {"node", k}, {"x", point_json(x)}, {"residual_gap", d}});
    }
  }
  fill_stats(c, gaps);
  return c;
}

// ---------------------------------------------------------------------------
// Boundary blow-up

CheckResult check_boundary_blowup(const SystemDef& system, const ValueField& field, const DoaMask& mask, double cap) {
  (void)system;
  CheckResult c;
  c.name = "boundary-blowup";
  const Grid& g = field.grid();
  if (!g.same_as(mask.grid)) throw ConfigError("mask and field live on different grids");
  if (mask.touches_boundary) {
    c.skipped = true;
    c.note = "box does not contain cl(D_o) boundary: the mask touches the box, check skipped";
    return c;
  }
  auto W = [&](double v) {
    if (field.transform() == Transform::raw) return std::min(v, cap);
    return v >= 1 - 1e-300 ? cap : std::min(cap, -std::log1p(-v));
  };
  const int n = g.dims();
  const auto origin = g.origin_node();
  std::vector<int> dir(n, -1);
  std::vector<double> ratios;
  double top = 0.0;
  while (true) {
    if (std::any_of(dir.begin(), dir.end(), [](int d) { return d != 0; })) {
      std::vector<double> ray;
      std::vector<int> idx = origin;
      while (true) {
        bool ok = true;
        for (int j = 0; j < n; ++j) ok = ok && idx[j] >= 0 && idx[j] < g.counts()[j];
        if (!ok) break;
        const std::size_t k = g.ravel(idx);
        if (!mask.at(k)) break;
        ray.push_back(W(field.at(k)));
        for (int j = 0; j < n; ++j) idx[j] += dir[j];
      }
      if (ray.size() >= 4) {
        const std::size_t L = ray.size();
        const double last = ray[L - 1];
        const double quart = ray[(L - 1) / 4];
        const bool monotone = ray[L - 3] <= ray[L - 2] && ray[L - 2] <= ray[L - 1];
        const double ratio = quart > 0 ? last / quart : (last > 0 ? std::numeric_limits<double>::infinity() : 1.0);
        ratios.push_back(ratio);
        top = std::max(top, last);
        if (!monotone || ratio < 2) {
          c.pass = false;
          c.witnesses.push_back({{"direction", dir},
                                 {"ratio", ratio},
                                 {"last3", {ray[L - 3], ray[L - 2], ray[L - 1]}},
                                 {"monotone", monotone}});
        }
      }
    }
    int j = 0;
    for (; j < n; ++j) {
      if (++dir[j] <= 1) break;
      dir[j] = -1;
    }
    if (j == n) break;
  }
  fill_stats(c, ratios);
  c.max = top;
  c.note = "median/p95 columns are growth ratios; max is the largest capped value";
  if (ratios.empty()) {
    c.pass = false;
    c.note = "no ray has 4 nodes inside the mask";
  }
  return c;
}

// ---------------------------------------------------------------------------
// Lipschitz probe

std::vector<double> lipschitz_probe(const LipschitzSource& source, std::span<const Vec> points, double delta,
                                    double kruzhkov_scale) {
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  auto value = [&](std::span<const double> x) -> double {
    double V;
    if (const auto* name = std::get_if<std::string>(&source)) {
      const auto v = closed_form_value(*name, x);
      if (!v) throw ConfigError("no closed form registered for '" + *name + "'");
      V = *v;
    } else {
      const ValueField& f = *std::get<const ValueField*>(source);
      const double w = f.interpolate(x);
      if (f.transform() == Transform::raw) {
        V = w;
      } else {
        if (w >= 1) return 1.0;
        return -std::expm1(kruzhkov_scale * std::log1p(-w));
      }
    }
    return -std::expm1(-kruzhkov_scale * V);
  };
  std::vector<double> out;
  for (const auto& p : points) {
    Vec y = p;
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      y[j] = p[j] + delta;
      const double up = value(y);
      y[j] = p[j] - delta;
      const double dn = value(y);
      y[j] = p[j];
      const double d = (up - dn) / (2 * delta);
      s += d * d;
    }
    out.push_back(std::sqrt(s));
  }
  return out;
}

}  // namespace zubov
