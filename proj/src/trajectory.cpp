#include "zubov/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "zubov/error.hpp"

namespace zubov {

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

int substeps(double duration, double dt) {
  // Tolerate duration/dt landing a hair above an integer.
  return std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-9)));
}

// Rates of the augmented system: out = (f, l e^{-H}, g, h).
template <class Rates>
void rk4(std::span<double> y, double dt, Rates&& rates, std::vector<double>& k1, std::vector<double>& k2,
         std::vector<double>& k3, std::vector<double>& k4, std::vector<double>& tmp) {
  const std::size_t w = y.size();
  rates(y, std::span<double>(k1));
  for (std::size_t i = 0; i < w; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  rates(std::span<const double>(tmp), std::span<double>(k2));
  for (std::size_t i = 0; i < w; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  rates(std::span<const double>(tmp), std::span<double>(k3));
  for (std::size_t i = 0; i < w; ++i) tmp[i] = y[i] + dt * k3[i];
  rates(std::span<const double>(tmp), std::span<double>(k4));
  for (std::size_t i = 0; i < w; ++i) y[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

void push_sample(TrajectoryRecord& rec, double t, std::span<const double> y, int n) {
  rec.times.push_back(t);
  rec.states.emplace_back(y.begin(), y.begin() + n);
  rec.running_cost.push_back(y[n]);
  rec.g_integral.push_back(y[n + 1]);
  rec.h_integral.push_back(y[n + 2]);
  rec.discount.push_back(std::exp(-y[n + 1]));
}

// Drives segment-wise integration; `rates_for(seg)` yields the rate functor
// of one segment.
template <class RatesFor>
TrajectoryRecord run(int n, std::span<const double> x0, const std::vector<double>& durations, double dt,
                     const Grid* box, RatesFor&& rates_for) {
  if (!(dt > 0)) throw ConfigError("integration step must be positive");
  if (static_cast<int>(x0.size()) != n) throw ConfigError("initial state has the wrong dimension");
  const std::size_t w = n + 3;
  std::vector<double> y(w, 0.0), k1(w), k2(w), k3(w), k4(w), tmp(w), prev(w);
  std::copy(x0.begin(), x0.end(), y.begin());

  TrajectoryRecord rec;
  push_sample(rec, 0.0, y, n);
  if (box && !box->inside_box(x0)) {
    rec.exited = true;
    return rec;
  }
  double t0 = 0.0;
  for (std::size_t s = 0; s < durations.size(); ++s) {
    auto rates = rates_for(s);
    const int steps = substeps(durations[s], dt);
    const double h = durations[s] / steps;
    for (int k = 1; k <= steps; ++k) {
      prev = y;
      rk4(std::span<double>(y), h, rates, k1, k2, k3, k4, tmp);
      for (double v : y) {
        if (!std::isfinite(v)) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "non-finite state at t = %.6g (last finite |x| = %.6g)", t0 + (k - 1) * h,
                        norm(std::span<const double>(prev.data(), n)));
          throw IntegrationError(buf);
        }
      }
      if (box && !box->inside_box(std::span<const double>(y.data(), n))) {
        rec.exited = true;
        return rec;
      }
      push_sample(rec, k == steps ? t0 + durations[s] : t0 + k * h, y, n);
    }
    t0 += durations[s];
  }
  return rec;
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedules

double ControlSchedule::total_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

void ControlSchedule::validate(const ControlSpace& space) const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].duration > 0)) throw ConfigError("segment " + std::to_string(i) + " has nonpositive duration");
    if (!space.contains(segments[i].control))
      throw ConfigError("segment " + std::to_string(i) + " control lies outside the control space");
  }
}

void ControlSchedule::append(double duration, const Vec& control) {
  if (!segments.empty() && segments.back().control == control) {
    segments.back().duration += duration;
  } else {
    segments.push_back({duration, control});
  }
}

const Vec& ControlSchedule::control_at(double t) const {
  double acc = 0.0;
  for (const auto& s : segments) {
    acc += s.duration;
    if (t < acc) return s.control;
  }
  return segments.back().control;
}

double RelaxedSchedule::total_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

void RelaxedSchedule::validate() const {
  if (support.empty()) throw ConfigError("relaxed schedule has an empty support");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.duration > 0)) throw ConfigError("relaxed segment " + std::to_string(i) + " has nonpositive duration");
    if (s.weights.size() != support.size())
      throw ConfigError("relaxed segment " + std::to_string(i) + " has the wrong number of weights");
    double sum = 0.0;
    for (double w : s.weights) {
      if (w < 0) throw ConfigError("relaxed segment " + std::to_string(i) + " has a negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("relaxed segment " + std::to_string(i) + " weights do not sum to 1");
  }
}

// ---------------------------------------------------------------------------
// Integration

AugmentedStepper::AugmentedStepper(const SystemDef& system)
    : sys_(system),
      n_(system.state_dim),
      has_discount_(!system.discount.is_zero()),
      k1_(n_ + 3),
      k2_(n_ + 3),
      k3_(n_ + 3),
      k4_(n_ + 3),
      tmp_(n_ + 3) {}

void AugmentedStepper::rates(std::span<const double> y, std::span<const double> a, std::span<double> out) const {
  const auto x = y.first(n_);
  sys_.eval_dynamics(x, a, out.first(n_));
  const double h = has_discount_ ? sys_.discount(x, a) : 0.0;
  const double g = sys_.cost(x, a);
  const double l = sys_.lagrangian ? (*sys_.lagrangian)(x, a) : g;
  out[n_] = has_discount_ ? l * std::exp(-y[n_ + 2]) : l;
  out[n_ + 1] = g;
  out[n_ + 2] = h;
}

void AugmentedStepper::step(std::span<double> state, std::span<const double> a, double dt) {
  rk4(
      state, dt, [&](std::span<const double> y, std::span<double> out) { rates(y, a, out); }, k1_, k2_, k3_, k4_,
      tmp_);
}

TrajectoryRecord integrate(const SystemDef& system, std::span<const double> x0, const ControlSchedule& schedule,
                           double dt, const Grid* box) {
  schedule.validate(system.controls);
  std::vector<double> durations;
  for (const auto& s : schedule.segments) durations.push_back(s.duration);
  AugmentedStepper stepper(system);
  return run(system.state_dim, x0, durations, dt, box, [&](std::size_t s) {
    const Vec* a = &schedule.segments[s].control;
    return [&stepper, a](std::span<const double> y, std::span<double> out) { stepper.rates(y, *a, out); };
  });
}

TrajectoryRecord integrate_relaxed(const SystemDef& system, std::span<const double> x0,
                                   const RelaxedSchedule& schedule, double dt, const Grid* box) {
  schedule.validate();
  for (const auto& a : schedule.support) {
    if (!system.controls.contains(a)) throw ConfigError("relaxed support point outside the control space");
  }
  std::vector<double> durations;
  for (const auto& s : schedule.segments) durations.push_back(s.duration);
  const int n = system.state_dim;
  const bool has_discount = !system.discount.is_zero();
  return run(n, x0, durations, dt, box, [&](std::size_t s) {
    const Vec* w = &schedule.segments[s].weights;
    return [&system, &schedule, w, n, has_discount](std::span<const double> y, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      std::vector<double> f(n);
      const auto x = y.first(n);
      double l_avg = 0.0;
      for (std::size_t k = 0; k < schedule.support.size(); ++k) {
        const double wk = (*w)[k];
        if (wk == 0.0) continue;
        const auto& a = schedule.support[k];
        system.eval_dynamics(x, a, f);
        for (int i = 0; i < n; ++i) out[i] += wk * f[i];
        const double g = system.cost(x, a);
        l_avg += wk * (system.lagrangian ? (*system.lagrangian)(x, a) : g);
        out[n + 1] += wk * g;
        if (has_discount) out[n + 2] += wk * system.discount(x, a);
      }
      out[n] = has_discount ? l_avg * std::exp(-y[n + 2]) : l_avg;
    };
  });
}

namespace {

// Index k with times[k] <= t <= times[k+1] and the interpolation weight.
std::pair<std::size_t, double> locate(const TrajectoryRecord& rec, double t) {
  if (rec.times.empty() || t < -1e-12 || t > rec.times.back() + 1e-9)
    throw ConfigError("time " + std::to_string(t) + " is outside the trajectory record");
  if (rec.times.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(rec.times.begin(), rec.times.end(), t);
  std::size_t k = it == rec.times.begin() ? 0 : static_cast<std::size_t>(it - rec.times.begin()) - 1;
  k = std::min(k, rec.times.size() - 2);
  const double span = rec.times[k + 1] - rec.times[k];
  return {k, std::clamp((t - rec.times[k]) / span, 0.0, 1.0)};
}

}  // namespace

double discount_factor(const TrajectoryRecord& record, double t) {
  const auto [k, w] = locate(record, t);
  if (record.times.size() == 1) return record.discount[0];
  const double gi = (1 - w) * record.g_integral[k] + w * record.g_integral[k + 1];
  return std::exp(-gi);
}

Vec state_at(const TrajectoryRecord& record, double t) {
  const auto [k, w] = locate(record, t);
  if (record.times.size() == 1) return record.states[0];
  Vec x(record.states[k].size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1 - w) * record.states[k][i] + w * record.states[k + 1][i];
  return x;
}

ControlSchedule chatter(const RelaxedSchedule& relaxed, double period) {
  relaxed.validate();
  if (!(period > 0)) throw ConfigError("chattering period must be positive");
  ControlSchedule out;
  for (const auto& seg : relaxed.segments) {
    if (period > seg.duration * (1 + 1e-9)) throw ConfigError("chattering period exceeds a segment duration");
    const int cycles = std::max(1, static_cast<int>(std::lround(seg.duration / period)));
    const double p = seg.duration / cycles;
    for (int c = 0; c < cycles; ++c) {
      for (std::size_t k = 0; k < relaxed.support.size(); ++k) {
        if (seg.weights[k] > 0) out.append(seg.weights[k] * p, relaxed.support[k]);
      }
    }
  }
  return out;
}

std::optional<double> time_to_ball(const TrajectoryRecord& record, double rho) {
  for (std::size_t k = 0; k < record.size(); ++k) {
    if (norm(record.states[k]) <= rho) return record.times[k];
  }
  return std::nullopt;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record) {
  const std::size_t n = record.states.empty() ? 0 : record.states[0].size();
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i + 1;
  os << ",J,G\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < record.size(); ++k) {
    put(record.times[k]);
    for (double v : record.states[k]) {
      os << ',';
      put(v);
    }
    os << ',';
    put(record.running_cost[k]);
    os << ',';
    put(record.discount[k]);
    os << '\n';
  }
}

}  // namespace zubov
