// End-to-end acceptance runs. Each criterion prints one PASS/FAIL line with
// the measured numbers; `--criterion N` runs a single one.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zubov/builtins.hpp"
#include "zubov/doa.hpp"
#include "zubov/oracle.hpp"
#include "zubov/solver.hpp"
#include "zubov/trajectory.hpp"
#include "zubov/verifier.hpp"

using namespace zubov;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
  // Context only; does not affect the verdict.
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double lift_kruzhkov(std::span<const double> x) { return -std::expm1(-*closed_form_value("lift2d", x)); }

double lift_error(const ValueField& v, double radius) {
  const Grid& g = v.grid();
  double err = 0.0;
  Vec x(2);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.node(k, x);
    if (std::max(std::abs(x[0]), std::abs(x[1])) > radius + 1e-12) continue;
    err = std::max(err, std::abs(v.at(k) - lift_kruzhkov(x)));
  }
  return err;
}

const SystemDef& lift() {
  static const SystemDef s = builtin("lift2d");
  return s;
}

SolverSettings benchmark_settings() {
  SolverSettings s;
  s.dt = 0.05;
  s.tol = 1e-6;
  return s;
}

// Benchmark field: [-1.2,1.2]^2, 201 nodes per axis, 21 controls.
const ValueField& benchmark_field() {
  static const ValueField f = solve_zubov(lift(), Grid::cube(2, -1.2, 1.2, 201), benchmark_settings());
  return f;
}

NodeFilter branch_filter(const Grid& g, double cells) {
  const double width = cells * g.max_cell_diameter();
  return [width](std::span<const double> x) { return lift2d_branch_distance(x) < width; };
}

Outcome closed_form_benchmark() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ValueField& fine = benchmark_field();
  const double secs = seconds_since(t0);
  o.require(fine.metadata().converged && fine.metadata().iterations <= 2000,
            "sweeps " + std::to_string(fine.metadata().iterations));
  o.require(secs <= 60, fmt("%.1f s", secs));
  const double err = lift_error(fine, 0.8);
  o.require(err <= 0.02, fmt("sup error %.4f", err));

  SolverSettings coarse_settings = benchmark_settings();
  coarse_settings.dt = 0.1;
  const ValueField coarse = solve_zubov(lift(), Grid::cube(2, -1.2, 1.2, 101), coarse_settings);
  const double coarse_err = lift_error(coarse, 0.8);
  o.require(coarse_err / err >= 1.5, fmt("coarse error %.4f, refinement factor %.2f", coarse_err, coarse_err / err));
  return o;
}

Outcome domain_extraction() {
  Outcome o;
  const ValueField& v = benchmark_field();
  const DoaMask mask = extract_doa(v, 0.01);
  const auto d = region_distance(mask, [](std::span<const double> x) { return std::abs(x[0]) < 1 && std::abs(x[1]) < 1; });
  o.require(d.hausdorff_cells <= 3, fmt("hausdorff %.3f cells, symmetric difference %.4f", d.hausdorff_cells,
                                        d.symmetric_difference_fraction));
  const auto lines = contour2d(v, 1 - 0.01);
  o.require(lines.size() == 1 && lines[0].closed,
            std::to_string(lines.size()) + " polyline(s)" + (lines.size() == 1 && lines[0].closed ? ", closed" : ""));
  o.require(!mask.touches_boundary, mask.touches_boundary ? "mask touches the box" : "mask inside the box");

  // The exact values on the same nodes and threshold, for comparison.
  std::vector<double> exact(v.grid().size());
  Vec x(2);
  for (std::size_t k = 0; k < exact.size(); ++k) {
    v.grid().node(k, x);
    exact[k] = std::abs(x[0]) < 1 && std::abs(x[1]) < 1 ? lift_kruzhkov(x) : 1.0;
  }
  const DoaMask exact_mask = extract_doa(v.with_values(exact), 0.01);
  const auto de = region_distance(exact_mask, [](std::span<const double> y) { return std::abs(y[0]) < 1 && std::abs(y[1]) < 1; });
  o.note(fmt("closed-form values give %.3f cells", de.hausdorff_cells));
  return o;
}

Outcome oracle_agreement() {
  Outcome o;
  const SystemDef sys = builtin("lift2d", {{"control_samples", 3}});
  OracleSettings os;
  os.depth = 8;
  os.switch_dt = 0.25;
  os.rho = 0.05;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  const ValueField& v = benchmark_field();
  int contained = 0, near_solver = 0;
  double widest = 0.0, worst_slack = 0.0, worst_solver = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Vec x{u(rng), u(rng)};
    const ValueBounds b = kruzhkov_value(sys, x, os);
    const double exact = lift_kruzhkov(x);
    const double w = v.interpolate(x);
    const double slack = std::max({0.0, b.lower - exact, exact - b.upper});
    worst_slack = std::max(worst_slack, slack);
    if (slack <= 0.03) ++contained;
    widest = std::max(widest, b.upper - b.lower);
    const double off = std::max({0.0, b.lower - w, w - b.upper});
    worst_solver = std::max(worst_solver, off);
    if (off <= 0.02) ++near_solver;
  }
  o.require(contained == 10, std::to_string(contained) + fmt("/10 brackets contain the closed form, slack %.4f", worst_slack));
  o.note(fmt("widest bracket %.4f", widest));
  o.require(near_solver == 10, fmt("solver distance to brackets %.4f", worst_solver));
  return o;
}

Outcome non_lipschitz_cost() {
  Outcome o;
  const SystemDef sys = builtin("ex1", {{"control_samples", 3}});
  const Grid g = Grid::cube(1, -2, 2, 801);
  const ValueField v = solve_zubov(sys, g, {});
  OracleSettings os;
  os.switch_dt = 1.0;
  os.rho = 0.005;
  double worst = 0.0;
  for (double x : {-0.75, -0.5, -0.25, 0.25, 0.5, 0.75}) {
    const ValueBounds b = kruzhkov_value(sys, Vec{x}, os);
    const double w = v.interpolate(Vec{x});
    worst = std::max(worst, std::max({0.0, b.lower - w, w - b.upper}));
  }
  o.require(worst <= 0.02, fmt("solver distance to brackets %.4f", worst));

  const DoaMask mask = extract_doa(v, 0.01);
  const auto d = region_distance(mask, [](std::span<const double> x) { return std::abs(x[0]) < 1; });
  o.require(d.hausdorff_cells <= 3, fmt("domain hausdorff %.1f cells, v(1.5) = %.4f", d.hausdorff_cells,
                                        v.interpolate(Vec{1.5})));
  // The cost vanishes outside [-1,1], so the value there is a finite constant.
  OracleSettings outside = os;
  outside.depth = 6;
  outside.rho = 0.05;
  o.note(fmt("oracle lower bound at 1.5: %.4f", kruzhkov_value(sys, Vec{1.5}, outside).lower));

  const auto w = falsify_quasistability(builtin("ex1"), g, 200);
  const bool stationary = w && w->kind == WitnessKind::stationary && std::abs(w->x0[0] - 1) < 1e-12 &&
                          std::abs(w->schedule.segments.front().control[0] - 1) < 1e-12;
  o.require(stationary, w ? fmt("witness x = %g, a = %g", w->x0[0], w->schedule.segments.front().control[0])
                          : std::string("no witness"));
  return o;
}

Outcome degenerate_cost() {
  Outcome o;
  SolverSettings st;
  st.dt = 0.01;
  st.max_iters = 20000;
  const Grid g = Grid::cube(1, -3, 3, 601);
  const ValueField raw = solve_hjbe(builtin("arctan1d"), g, st);
  double err = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double x = g.node(k)[0];
    if (std::abs(x) <= 2.5 + 1e-12) err = std::max(err, std::abs(raw.at(k) - std::atan(std::abs(x))));
  }
  o.require(raw.metadata().converged && err <= 0.01, fmt("sup error %.4f", err));
  const ValueField k = kruzhkov_transform(raw);
  const double top = *std::max_element(k.values().begin(), k.values().end());
  const double bound = 1 - std::exp(-M_PI / 2) + 0.01;
  o.require(top <= bound, fmt("kruzhkov max %.4f, bound %.4f", top, bound));
  return o;
}

Outcome lipschitz_blowup() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> q;
  for (int k = 0; k <= 2; ++k) {
    const Vec x{std::pow(10.0, k)};
    q.push_back(lipschitz_probe(std::string("hav1d"), std::span<const Vec>(&x, 1), std::pow(10.0, -(2 * k + 3)), 1.0)[0]);
  }
  const double secs = seconds_since(t0);
  o.require(q[1] / q[0] >= 5 && q[2] / q[1] >= 5, fmt("growth per decade %.2f, %.2f", q[1] / q[0], q[2] / q[1]));
  o.require(secs < 1, fmt("%.3f s", secs));
  return o;
}

Outcome synthesis() {
  Outcome o;
  SynthesisSettings ss;
  ss.switch_dt = 0.25;
  ss.step = 0.025;
  const auto r = synthesize_epsilon_optimal(lift(), benchmark_field(), Vec{0.5, 0.5}, 0.05, 4, ss);
  o.require(r.goal_residual >= -0.05, fmt("goal residual %.4f", r.goal_residual));
  bool steps_ok = r.steps.size() == 4;
  double worst = 0.0;
  for (const auto& s : r.steps) {
    steps_ok = steps_ok && s.accepted && s.defect <= s.allowance;
    worst = std::max(worst, s.defect - s.allowance);
  }
  o.require(steps_ok && r.budget_ok, fmt("largest defect minus allowance %.4g", worst));
  return o;
}

Outcome sandwich() {
  Outcome o;
  const ValueField& v = benchmark_field();
  const Grid& g = v.grid();
  const DoaMask mask = extract_doa(v, 0.01);
  SandwichSettings ss;
  ss.mask = &mask;
  ss.exclude = branch_filter(g, 2);
  const bool self_sub = sandwich_check(lift(), v, v, SandwichRole::sub, 0.0, ss).pass;
  const bool self_sup = sandwich_check(lift(), v, v, SandwichRole::sup, 0.0, ss).pass;
  o.require(self_sub && self_sup, "reference against itself");

  auto shifted = [&](double m) {
    std::vector<double> w = v.values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = g.on_boundary(k) ? 1.0 : std::clamp(w[k] + m, 0.0, 1.0);
    return v.with_values(std::move(w));
  };
  const double tol = 0.01;
  const ValueField up = shifted(0.05), down = shifted(-0.05);
  const bool up_ok = !sandwich_check(lift(), v, up, SandwichRole::sub, tol, ss).pass &&
                     sandwich_check(lift(), v, up, SandwichRole::sup, tol, ss).pass;
  const bool down_ok = sandwich_check(lift(), v, down, SandwichRole::sub, tol, ss).pass &&
                       !sandwich_check(lift(), v, down, SandwichRole::sup, tol, ss).pass;
  o.require(up_ok, "+0.05 fails sub, passes sup");
  o.require(down_ok, "-0.05 passes sub, fails sup");
  return o;
}

Outcome property_suites() {
  Outcome o;
  {
    SolverSettings st;
    st.dt = 0.1;
    const Grid g = Grid::cube(2, -1.2, 1.2, 101);
    std::vector<double> prev(g.size(), 0.0);
    std::size_t drops = 0, outside = 0;
    st.observer = [&](int, double, std::span<const double> v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        drops += v[i] < prev[i];
        outside += v[i] < 0 || v[i] > 1;
        prev[i] = v[i];
      }
    };
    st.threads = 1;
    const ValueField one = solve_zubov(lift(), g, st);
    o.require(drops == 0, "monotone iteration");
    o.require(outside == 0, "range [0,1]");
    st.observer = nullptr;
    st.threads = 4;
    const ValueField four = solve_zubov(lift(), g, st);
    o.require(one.values() == four.values(), "bitwise identical with 1 and 4 threads");

    const ValueField round = kruzhkov_transform(inverse_transform(one, 50.0));
    double gap = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (one.at(k) < 0.99) gap = std::max(gap, std::abs(round.at(k) - one.at(k)));
    o.require(gap <= 1e-9, fmt("transform round trip %.1e", gap));
  }
  {
    const SystemDef decay = builtin("arctan1d");
    ControlSchedule hold;
    hold.append(1.0, {});
    const double e1 = std::abs(integrate(decay, Vec{1.0}, hold, 0.2).final_state()[0] - std::exp(-1.0));
    const double e2 = std::abs(integrate(decay, Vec{1.0}, hold, 0.1).final_state()[0] - std::exp(-1.0));
    o.require(e1 / e2 >= 12 && e1 / e2 <= 20, fmt("RK4 order factor %.2f", e1 / e2));
  }
  {
    RelaxedSchedule r{{{-1.0}, {1.0}}, {{2.0, {0.5, 0.5}}}};
    const double dt = 0.001;
    const auto relaxed = integrate_relaxed(lift(), Vec{0.5, 0.5}, r, dt);
    auto gap = [&](double period) {
      const auto rec = integrate(lift(), Vec{0.5, 0.5}, chatter(r, period), dt);
      double worst = 0.0;
      for (std::size_t i = 0; i < rec.size(); ++i) {
        const Vec y = state_at(relaxed, std::min(rec.times[i], relaxed.duration()));
        worst = std::max(worst, std::hypot(rec.states[i][0] - y[0], rec.states[i][1] - y[1]));
      }
      return worst;
    };
    const double ratio = gap(0.1) / gap(0.05);
    o.require(ratio >= 1.5 && ratio <= 2.5, fmt("chattering error ratio %.2f", ratio));
  }
  {
    LyapunovSettings ls;
    ls.samples = 500;
    const CheckResult c = check_lyapunov_decrease(lift(), benchmark_field(), ls);
    o.require(c.pass && c.count == 500, "Lyapunov decrease on " + std::to_string(c.count) + " samples, " +
                                            std::to_string(c.witnesses.size()) + " failures");
  }
  return o;
}

struct Criterion {
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"closed-form benchmark", closed_form_benchmark},
      {"domain extraction", domain_extraction},
      {"oracle agreement", oracle_agreement},
      {"non-Lipschitz cost (ex1)", non_lipschitz_cost},
      {"degenerate-cost limit (arctan1d)", degenerate_cost},
      {"Lipschitz blow-up (hav1d)", lipschitz_blowup},
      {"epsilon-optimal synthesis", synthesis},
      {"sandwich", sandwich},
      {"property suites", property_suites},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance runs"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (std::size_t i = 0; i < criteria().size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    Outcome out;
    try {
      out = criteria()[i].run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("error: ") + e.what();
    }
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, out.pass ? "PASS" : "FAIL", criteria()[i].title,
                out.detail.c_str());
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
