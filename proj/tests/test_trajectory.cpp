#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "zubov/builtins.hpp"
#include "zubov/error.hpp"
#include "zubov/trajectory.hpp"

using namespace zubov;
using nlohmann::json;

namespace {

SystemDef linear_decay() {
  return load_system(json{{"state_dim", 1}, {"controls", "none"}, {"dynamics", {"-x1"}}, {"cost", "x1^2"}});
}

ControlSchedule hold(double t, Vec a = {}) {
  ControlSchedule s;
  s.append(t, a);
  return s;
}

ControlSchedule random_schedule(std::mt19937_64& rng, const ControlSpace& space, int segments, double each) {
  ControlSchedule s;
  std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
  for (int i = 0; i < segments; ++i) s.segments.push_back({each, space.points()[pick(rng)]});
  return s;
}

double norm(const Vec& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("linear decay matches the exponential") {
  const auto rec = integrate(linear_decay(), Vec{1.0}, hold(1.0), 0.1);
  CHECK(rec.size() == 11);
  // Classical RK4 multiplies by the degree-4 Taylor polynomial of e^{-h} per step.
  const double h = 0.1, amp = 1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24;
  CHECK(rec.final_state()[0] == doctest::Approx(std::pow(amp, 10)).epsilon(1e-14));
  CHECK(std::abs(rec.final_state()[0] - std::exp(-1.0)) <= 4e-7);
}

TEST_CASE("halving the step cuts the error by about sixteen") {
  const auto sys = linear_decay();
  const double e1 = std::abs(integrate(sys, Vec{1.0}, hold(1.0), 0.2).final_state()[0] - std::exp(-1.0));
  const double e2 = std::abs(integrate(sys, Vec{1.0}, hold(1.0), 0.1).final_state()[0] - std::exp(-1.0));
  CHECK(e1 / e2 >= 12);
  CHECK(e1 / e2 <= 20);
}

TEST_CASE("the origin is at rest with zero cost") {
  const SystemDef s = builtin("lift2d");
  std::mt19937_64 rng(1);
  const auto rec = integrate(s, Vec{0.0, 0.0}, random_schedule(rng, s.controls, 5, 0.3), 0.05);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    CHECK(rec.states[i] == Vec{0.0, 0.0});
    CHECK(rec.running_cost[i] == 0.0);
    CHECK(rec.discount[i] == 1.0);
  }
}

TEST_CASE("arctan1d accumulates arctan of the start point") {
  const auto rec = integrate(builtin("arctan1d"), Vec{1.0}, hold(20.0), 0.01);
  CHECK(std::abs(rec.running_cost.back() - std::atan(1.0)) <= 1e-4);
  // Along x = e^{-t} the accumulated cost is atan(1) - atan(e^{-t}).
  for (std::size_t i = 0; i < rec.size(); i += 97)
    CHECK(rec.running_cost[i] == doctest::Approx(std::atan(1.0) - std::atan(std::exp(-rec.times[i]))).epsilon(1e-8));
}

TEST_CASE("discount factor under the uncontrolled lift") {
  const auto rec = integrate(builtin("lift2d"), Vec{0.5, 0.5}, hold(1.0, {0.0}), 0.01);
  CHECK(discount_factor(rec, 0.0) == 1.0);
  CHECK(discount_factor(rec, 1.0) == doctest::Approx(std::exp(-0.25 * (1 - std::exp(-2.0)))).epsilon(1e-9));
  CHECK_THROWS_AS(discount_factor(rec, 1.5), ConfigError);
  const double mid = discount_factor(rec, 0.505);
  CHECK(mid <= discount_factor(rec, 0.5));
  CHECK(mid >= discount_factor(rec, 0.51));
}

TEST_CASE("zero cost leaves the discount at one") {
  const SystemDef s = load_system(json{{"state_dim", 1}, {"controls", "none"}, {"dynamics", {"-x1"}}, {"cost", "0"}});
  const auto rec = integrate(s, Vec{0.7}, hold(2.0), 0.1);
  for (double g : rec.discount) CHECK(g == 1.0);
}

TEST_CASE("records are monotone where they should be") {
  const SystemDef s = builtin("lift2d");
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rec = integrate(s, Vec{0.6, -0.3}, random_schedule(rng, s.controls, 8, 0.25), 0.05);
    for (std::size_t i = 1; i < rec.size(); ++i) {
      CHECK(rec.times[i] > rec.times[i - 1]);
      CHECK(rec.discount[i] <= rec.discount[i - 1]);
      CHECK(rec.g_integral[i] >= rec.g_integral[i - 1]);
    }
  }
}

TEST_CASE("steps never straddle a switch") {
  ControlSchedule s;
  s.append(0.25, {1.0});
  s.append(0.3, {-1.0});
  const auto rec = integrate(builtin("lift2d"), Vec{0.5, 0.5}, s, 0.1);
  // 0.25 -> 3 steps, 0.3 -> 3 steps
  CHECK(rec.size() == 7);
  CHECK(rec.times[3] == 0.25);
  CHECK(rec.times.back() == doctest::Approx(0.55));
}

TEST_CASE("integration stops at the last sample inside the box") {
  const Grid box = Grid::cube(2, -1.2, 1.2, 5);
  const auto rec = integrate(builtin("lift2d"), Vec{1.1, 0.0}, hold(5.0, {1.0}), 0.01, &box);
  CHECK(rec.exited);
  CHECK(box.inside_box(rec.final_state()));
  CHECK(rec.duration() < 5.0);
  const auto inside = integrate(builtin("lift2d"), Vec{0.5, 0.0}, hold(5.0, {1.0}), 0.01, &box);
  CHECK_FALSE(inside.exited);
}

TEST_CASE("schedules are validated") {
  const auto space = builtin("lift2d").controls;
  ControlSchedule s;
  s.segments.push_back({0.5, {2.0}});
  CHECK_THROWS_AS(s.validate(space), ConfigError);
  s.segments = {{0.0, {1.0}}};
  CHECK_THROWS_AS(s.validate(space), ConfigError);
  s.segments = {{0.5, {1.0}}};
  s.append(0.25, {1.0});
  CHECK(s.segments.size() == 1);
  CHECK(s.total_duration() == 0.75);
  s.append(0.25, {0.0});
  CHECK(s.control_at(0.8) == Vec{0.0});
  CHECK(s.control_at(10.0) == Vec{0.0});
}

TEST_CASE("accumulated cost agrees with Simpson quadrature of the samples") {
  const SystemDef s = load_system(json{{"state_dim", 2},
                                       {"controls", {{"points", {-1.0, 1.0}}}},
                                       {"dynamics", {"-x1 + a1*x2", "-x2 - a1*x1"}},
                                       {"cost", "x1^2 + x2^2"},
                                       {"lagrangian", "x1^2 + 0.5*x2^2"},
                                       {"discount", "0.3 + x1^2"}});
  ControlSchedule sched;
  sched.append(1.0, {1.0});
  sched.append(1.0, {-1.0});
  const double dt = 0.01;
  const auto rec = integrate(s, Vec{0.8, -0.4}, sched, dt);
  REQUIRE(rec.size() == 201);
  auto integrand = [&](std::size_t i) {
    const auto& x = rec.states[i];
    return (x[0] * x[0] + 0.5 * x[1] * x[1]) * std::exp(-rec.h_integral[i]);
  };
  // Composite Simpson on each unit segment so the kink at t = 1 is a panel edge.
  double total = 0;
  for (std::size_t start : {0u, 100u}) {
    double acc = integrand(start) + integrand(start + 100);
    for (std::size_t i = 1; i < 100; ++i) acc += (i % 2 ? 4 : 2) * integrand(start + i);
    total += acc * dt / 3;
  }
  CHECK(std::abs(rec.running_cost.back() - total) <= 1e-6);
}

TEST_CASE("builtin trajectories respect their declared exponential stability") {
  std::mt19937_64 rng(9);
  for (const char* name : {"lift2d", "lift2d-psi-abs", "ex1", "arctan1d", "hav1d"}) {
    const SystemDef s = builtin(name);
    REQUIRE(s.ules);
    const auto [C, sigma, r] = *s.ules;
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 40; ++trial) {
      Vec x(s.state_dim);
      for (auto& v : x) v = u(rng);
      const double scale = r * std::uniform_real_distribution<double>(0, 1)(rng) / std::max(norm(x), 1e-12);
      for (auto& v : x) v *= scale;
      const auto rec = integrate(s, x, random_schedule(rng, s.controls, 10, 0.4), 0.02);
      for (std::size_t i = 0; i < rec.size(); ++i)
        CHECK(norm(rec.states[i]) <= C * norm(x) * std::exp(-sigma * rec.times[i]) * 1.05 + 1e-15);
    }
  }
}

TEST_CASE("time to ball") {
  const auto rec = integrate(linear_decay(), Vec{1.0}, hold(2.0), 0.01);
  CHECK(*time_to_ball(rec, 2.0) == 0.0);
  CHECK(std::abs(*time_to_ball(rec, std::exp(-1.0)) - 1.0) <= 0.01 + 1e-12);
  const auto stuck = integrate(builtin("ex1"), Vec{1.0}, hold(5.0, {1.0}), 0.05);
  CHECK_FALSE(time_to_ball(stuck, 0.99));
}

TEST_CASE("chattering a Dirac weight gives a constant control") {
  RelaxedSchedule r{{{-1.0}, {0.5}, {1.0}}, {{1.0, {0.0, 1.0, 0.0}}}};
  const auto s = chatter(r, 0.1);
  CHECK(s.total_duration() == doctest::Approx(1.0));
  for (const auto& seg : s.segments) CHECK(seg.control == Vec{0.5});
}

TEST_CASE("even weights alternate with equal dwell") {
  RelaxedSchedule r{{{-1.0}, {1.0}}, {{1.0, {0.5, 0.5}}}};
  const auto s = chatter(r, 0.1);
  REQUIRE(s.segments.size() == 20);
  for (std::size_t i = 0; i < s.segments.size(); ++i) {
    CHECK(s.segments[i].duration == doctest::Approx(0.05));
    CHECK(s.segments[i].control == Vec{i % 2 ? 1.0 : -1.0});
  }
}

TEST_CASE("chattered trajectories converge to the relaxed one at first order") {
  const SystemDef s = builtin("lift2d");
  RelaxedSchedule r{{{-1.0}, {1.0}}, {{2.0, {0.5, 0.5}}}};
  const double dt = 0.001;
  const auto relaxed = integrate_relaxed(s, Vec{0.5, 0.5}, r, dt);
  auto gap = [&](double period) {
    const auto rec = integrate(s, Vec{0.5, 0.5}, chatter(r, period), dt);
    double worst = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const Vec y = state_at(relaxed, std::min(rec.times[i], relaxed.duration()));
      worst = std::max(worst, std::hypot(rec.states[i][0] - y[0], rec.states[i][1] - y[1]));
    }
    return worst;
  };
  const double ratio = gap(0.1) / gap(0.05);
  MESSAGE("chatter error ratio " << ratio);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 2.5);
}

TEST_CASE("relaxed schedules are validated") {
  RelaxedSchedule r{{{-1.0}, {1.0}}, {{1.0, {0.7, 0.7}}}};
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r.segments[0].weights = {-0.5, 1.5};
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("non-finite states abort with a diagnostic") {
  const SystemDef s = load_system(json{{"state_dim", 1}, {"controls", "none"}, {"dynamics", {"x1^3"}}, {"cost", "0"}});
  CHECK_THROWS_AS(integrate(s, Vec{10.0}, hold(10.0), 0.1), Error);
}
