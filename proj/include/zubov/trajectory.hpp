#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zubov/grid.hpp"
#include "zubov/system.hpp"

namespace zubov {

struct ControlSegment {
  double duration = 0.0;
  Vec control;
};

/// Piecewise-constant perturbation signal.
struct ControlSchedule {
  std::vector<ControlSegment> segments;

  double total_duration() const;
  /// Throws ConfigError on nonpositive durations or controls outside the box.
  void validate(const ControlSpace& space) const;
  /// Appends, merging with the last segment when the control is identical.
  void append(double duration, const Vec& control);
  /// Control active at time t (the last one past the end).
  const Vec& control_at(double t) const;
};

struct RelaxedSegment {
  double duration = 0.0;
  Vec weights;  // probability vector over RelaxedSchedule::support
};

/// Finitely supported relaxed control: on each segment the dynamics and costs
/// are the weight-averaged values over `support`.
struct RelaxedSchedule {
  std::vector<Vec> support;
  std::vector<RelaxedSegment> segments;

  double total_duration() const;
  void validate() const;
};

/// Sampled trajectory with its accumulated costs.
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<double> running_cost;  // J[l,h](x, t) = int l e^{-int h}
  std::vector<double> g_integral;    // int g
  std::vector<double> h_integral;    // int h
  std::vector<double> discount;      // G = exp(-int g)
  bool exited = false;               // stopped because the next sample left the box

  std::size_t size() const noexcept { return times.size(); }
  double duration() const { return times.back(); }
  const Vec& final_state() const { return states.back(); }
};

/// Classical RK4 on the augmented state (x, J, int g, int h). The control is
/// frozen on every step; each segment is split into ceil(duration/dt) equal
/// steps so that steps never straddle a switch. With `box`, integration stops
/// at the last sample inside the box and sets `exited`.
TrajectoryRecord integrate(const SystemDef& system, std::span<const double> x0, const ControlSchedule& schedule,
                           double dt, const Grid* box = nullptr);

/// Same for a relaxed control (weight-averaged f, l, g, h).
TrajectoryRecord integrate_relaxed(const SystemDef& system, std::span<const double> x0,
                                   const RelaxedSchedule& schedule, double dt, const Grid* box = nullptr);

/// exp(-int_0^t g), linearly interpolating the g-integral between samples.
/// Throws ConfigError when t is outside the record.
double discount_factor(const TrajectoryRecord& record, double t);

/// State at time t by linear interpolation between samples.
Vec state_at(const TrajectoryRecord& record, double t);

/// Replaces each relaxed segment by a cycle through its support controls with
/// dwell times proportional to the weights, repeated once per period.
ControlSchedule chatter(const RelaxedSchedule& relaxed, double period);

/// First sample time with |x| <= rho.
std::optional<double> time_to_ball(const TrajectoryRecord& record, double rho);

/// CSV with columns t, x1..xN, J, G.
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record);

/// Fixed-size RK4 stepper on the augmented state, shared by the oracle and the
/// verifier. The state layout is [x1..xN, J, int g, int h].
class AugmentedStepper {
 public:
  explicit AugmentedStepper(const SystemDef& system);

  int width() const noexcept { return n_ + 3; }
  /// One RK4 step of size dt under control `a`, in place.
  void step(std::span<double> state, std::span<const double> a, double dt);
  /// Time derivative of the augmented state.
  void rates(std::span<const double> y, std::span<const double> a, std::span<double> out) const;

 private:
  const SystemDef& sys_;
  int n_;
  bool has_discount_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace zubov
