#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "zubov/builtins.hpp"
#include "zubov/error.hpp"
#include "zubov/system.hpp"

using namespace zubov;
using nlohmann::json;

namespace {

// Benchmark closed form, both branches written out independently.
double upper_branch(double x1, double x2) { return -std::log(1 - x1) - std::log(1 - x2) - x1 - x2; }
double lower_branch(double x1, double x2) { return -std::log(1 + x1) - std::log(1 + x2) + x1 + x2; }

json benchmark_doc() {
  return json::parse(R"({
    "name": "benchmark",
    "state_dim": 2,
    "controls": {"box": {"lo": [-1], "hi": [1], "samples": [21]}},
    "dynamics": ["-x1 + a1*x1^2", "-x2 + a1*x2^2"],
    "cost": "x1^2 + x2^2",
    "ules": {"C": 1, "sigma": 0.5, "r": 0.5},
    "growth": {"C_tilde": 1, "lambda": 2}
  })");
}

std::vector<std::string> problems_of(const json& doc) {
  try {
    load_system(doc);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  for (const auto& p : problems)
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("the benchmark document loads") {
  const SystemDef s = load_system(benchmark_doc());
  CHECK(s.state_dim == 2);
  CHECK(s.controls.size() == 21);
  Vec f(2);
  s.eval_dynamics(Vec{0.5, 0.5}, Vec{1.0}, f);
  CHECK(f[0] == doctest::Approx(-0.25));
  CHECK(s.cost(Vec{0.3, 0.4}, Vec{0.0}) == doctest::Approx(0.25));
}

TEST_CASE("load-time invariants name the offending control") {
  json doc = benchmark_doc();
  doc["cost"] = "x1^2 + 1";
  const auto p = problems_of(doc);
  REQUIRE_FALSE(p.empty());
  CHECK(mentions(p, "g(0,a)"));
  CHECK(mentions(p, "a = "));

  doc = benchmark_doc();
  doc["dynamics"][0] = "-x1 + a1";
  CHECK(mentions(problems_of(doc), "f(0,a)"));
}

TEST_CASE("schema violations are aggregated") {
  json doc = benchmark_doc();
  doc["controls"] = {{"points", json::array()}};
  CHECK(mentions(problems_of(doc), "nonempty"));

  doc = benchmark_doc();
  doc["mode"] = "sideways";
  doc["colour"] = "blue";
  doc["ules"]["C"] = "one";
  const auto p = problems_of(doc);
  CHECK(p.size() >= 3);
  CHECK(mentions(p, "colour"));
  CHECK(mentions(p, "mode"));

  doc = benchmark_doc();
  doc["ules"]["sigma"] = -1;
  CHECK(mentions(problems_of(doc), "sigma"));

  doc = benchmark_doc();
  doc["dynamics"][1] = "x3";
  CHECK(mentions(problems_of(doc), "dynamics[1]"));
}

TEST_CASE("declared growth is spot-checked") {
  json doc = benchmark_doc();
  doc["growth"] = {{"C_tilde", 0.1}, {"lambda", 2}};
  CHECK(mentions(problems_of(doc), "growth"));
}

TEST_CASE("control boxes include their corners") {
  const auto c = ControlSpace::box({-1, 0}, {1, 2}, {3, 5});
  CHECK(c.size() == 15);
  CHECK(c.points().front() == Vec{-1, 0});
  CHECK(c.points().back() == Vec{1, 2});
  for (const auto& p : c.points()) CHECK(c.contains(p));
  CHECK_FALSE(c.contains(Vec{1.5, 0}));
  CHECK(c.resampled(3).size() == 9);
}

TEST_CASE("builtin lift2d") {
  const SystemDef s = builtin("lift2d");
  CHECK(s.state_dim == 2);
  CHECK(s.control_dim() == 1);
  CHECK(s.controls.lo() == Vec{-1});
  CHECK(s.controls.hi() == Vec{1});
  Vec f(2);
  s.eval_dynamics(Vec{0.5, -0.25}, Vec{-1.0}, f);
  CHECK(f[0] == doctest::Approx(-0.5 - 0.25));
  CHECK(f[1] == doctest::Approx(0.25 - 0.0625));
  // Unchanged on [-1.5,1.5]^2, zero outside [-2,2]^2.
  s.eval_dynamics(Vec{1.5, 1.5}, Vec{1.0}, f);
  CHECK(f[0] == doctest::Approx(-1.5 + 2.25));
  s.eval_dynamics(Vec{2.1, 0.3}, Vec{1.0}, f);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 0.0);
  CHECK(s.cost(Vec{0.3, 0.4}, Vec{1.0}) == doctest::Approx(0.25));
  CHECK(builtin("lift2d", {{"control_samples", 3}}).controls.size() == 3);
}

TEST_CASE("builtin arctan1d and fuller") {
  const SystemDef a = builtin("arctan1d");
  CHECK(a.state_dim == 1);
  CHECK(a.control_dim() == 0);
  Vec f(1);
  a.eval_dynamics(Vec{2.0}, Vec{}, f);
  CHECK(f[0] == -2.0);
  CHECK(a.cost(Vec{2.0}, Vec{}) == doctest::Approx(0.4));

  const SystemDef fu = builtin("fuller");
  CHECK(fu.state_dim == 2);
  CHECK(fu.mode == Mode::minimize);
  REQUIRE(fu.lagrangian);
  CHECK((*fu.lagrangian)(Vec{-0.5, 1.0}, Vec{0.0}) == doctest::Approx(0.25));
  CHECK(fu.discount(Vec{0.5, 0.5}, Vec{1.0}) == 0.0);
  Vec g(2);
  fu.eval_dynamics(Vec{0.2, 0.7}, Vec{-1.0}, g);
  CHECK(g == Vec{0.7, -1.0});
  CHECK((*builtin("fuller", {{"gamma", 3}}).lagrangian)(Vec{-0.5, 0.0}, Vec{0.0}) == doctest::Approx(0.125));
}

TEST_CASE("builtin ex1 has a zero-cost rest point at x = 1") {
  const SystemDef s = builtin("ex1");
  Vec f(1);
  s.eval_dynamics(Vec{1.0}, Vec{1.0}, f);
  CHECK(std::abs(f[0]) <= 1e-15);
  CHECK(s.cost(Vec{1.0}, Vec{1.0}) <= 1e-15);
  CHECK(s.cost(Vec{0.5}, Vec{0.0}) == doctest::Approx(1.0));
}

TEST_CASE("unknown builtins and bad overrides are rejected") {
  CHECK_THROWS_AS(builtin("lift3d"), ConfigError);
  CHECK_THROWS_AS(builtin("lift2d", {{"dynamics", json::array()}}), ConfigError);
  CHECK_THROWS_AS(builtin("lift2d", {{"gamma", 2}}), ConfigError);
  for (const auto& name : builtin_names()) CHECK_NOTHROW(builtin(name));
}

TEST_CASE("lift2d closed form") {
  CHECK(*closed_form_value("lift2d", Vec{0.5, 0.5}) == doctest::Approx(2 * std::log(2.0) - 1).epsilon(1e-12));
  CHECK(*closed_form_value("lift2d", Vec{0.5, -0.5}) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(closed_form_value("lift2d", Vec{1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(closed_form_value("lift2d", Vec{0.2, -1.3}), DomainError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int i = 0; i < 100; ++i) {
    const double t = u(rng);
    CHECK(std::abs(upper_branch(t, -t) - lower_branch(t, -t)) <= 1e-12);
    const double x1 = u(rng), x2 = u(rng);
    const double want = x1 >= -x2 ? upper_branch(x1, x2) : lower_branch(x1, x2);
    CHECK(*closed_form_value("lift2d", Vec{x1, x2}) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("closed forms vanish at the origin") {
  for (const char* name : {"lift2d", "arctan1d", "hav1d"}) {
    const int n = std::string(name) == "lift2d" ? 2 : 1;
    CHECK(*closed_form_value(name, Vec(n, 0.0)) == 0.0);
  }
  CHECK_FALSE(closed_form_value("fuller", Vec{0.0, 0.0}));
}

TEST_CASE("arctan1d closed form approaches pi/2 from below") {
  CHECK(*closed_form_value("arctan1d", Vec{1.0}) == doctest::Approx(M_PI / 4));
  double prev = 0.0;
  for (double x : {10.0, 100.0, 1000.0}) {
    const double v = *closed_form_value("arctan1d", Vec{x});
    CHECK(v > prev);
    CHECK(v < M_PI / 2);
    CHECK(M_PI / 2 - v <= 1 / x);
    prev = v;
  }
}

TEST_CASE("hav1d spike function") {
  for (int k = 0; k <= 2; ++k) CHECK(hav::Q(std::pow(10.0, k)) == doctest::Approx(std::pow(10.0, k)));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-120, 120);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    CHECK(hav::Q(-x) == -hav::Q(x));
    CHECK(hav::integral(-x) == hav::integral(x));
  }
  // Off the triangle supports the slope stays within 1.
  auto in_spike = [](double a, double b) {
    for (int k = 0; k <= 3; ++k) {
      const double c = std::pow(10.0, k), w = hav::spike_half_width(k);
      if (b >= c - w && a <= c + w) return true;
    }
    return false;
  };
  const double h = 1e-3;
  for (double x = 0; x < 150; x += h) {
    if (in_spike(x, x + h)) continue;
    CHECK(std::abs(hav::Q(x + h) - hav::Q(x)) <= h * (1 + 1e-9));
  }
}

TEST_CASE("hav1d value matches numerical quadrature of its spike function") {
  // Composite trapezoid on a fine uniform mesh as the independent reference.
  const int steps = 2'000'000;
  const double top = 12.0, h = top / steps;
  double acc = 0.0, prev = hav::Q(0.0);
  std::vector<std::pair<double, double>> checkpoints{{1.5, 0}, {10.05, 0}, {12.0, 0}};
  std::size_t next = 0;
  for (int i = 1; i <= steps; ++i) {
    const double x = i * h;
    const double q = hav::Q(x);
    acc += 0.5 * h * (prev + q);
    prev = q;
    if (next < checkpoints.size() && std::abs(x - checkpoints[next].first) < h / 2) checkpoints[next++].second = acc;
  }
  REQUIRE(next == checkpoints.size());
  for (const auto& [x, want] : checkpoints) CHECK(hav::integral(x) == doctest::Approx(want).epsilon(1e-6));
  CHECK(*closed_form_value("hav1d", Vec{12.0}) == doctest::Approx(checkpoints.back().second).epsilon(1e-6));
}

TEST_CASE("tail bound formula") {
  CHECK(ules_tail_bound({1, 1, 1}, {1, 2}, 0.1) == doctest::Approx(0.005));
  CHECK(ules_tail_bound({2, 0.5, 1}, {3, 1}, 0.1) == doctest::Approx(3 * 0.2 / 0.5));
}

TEST_CASE("systems round-trip through their JSON form") {
  const SystemDef s = load_system(benchmark_doc());
  const SystemDef t = load_system(s.to_json());
  CHECK(t.to_json() == s.to_json());
}
