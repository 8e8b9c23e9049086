#include "zubov/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "zubov/error.hpp"
#include "zubov/parallel.hpp"

namespace zubov {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Depth-first walker for one first control. Levels hold the augmented state
// after that many segments.
class Walker {
 public:
  Walker(const SystemDef& sys, std::span<const double> x, int segments, double switch_dt, double step, double rho)
      : sys_(sys),
        stepper_(sys),
        n_(sys.state_dim),
        segments_(segments),
        rho_(rho),
        states_(segments + 1, std::vector<double>(sys.state_dim + 3, 0.0)),
        entry_(segments + 1, std::vector<double>(sys.state_dim + 3, 0.0)),
        entered_(segments + 1, 0),
        controls_(segments, 0) {
    substeps_ = std::max(1, static_cast<int>(std::ceil(switch_dt / step - 1e-9)));
    h_ = switch_dt / substeps_;
    std::copy(x.begin(), x.end(), states_[0].begin());
    entered_[0] = norm(x) <= rho;
    if (entered_[0]) entry_[0] = states_[0];
  }

  void run(int first, const LeafFn& leaf, const PruneFn& prune) {
    first_ = first;
    leaf_ = &leaf;
    prune_ = prune ? &prune : nullptr;
    advance(0, first);
  }

 private:
  void advance(int level, int c) {
    controls_[level] = c;
    auto& y = states_[level + 1];
    y = states_[level];
    entered_[level + 1] = entered_[level];
    entry_[level + 1] = entry_[level];
    const auto& a = sys_.controls.points()[c];
    for (int k = 0; k < substeps_; ++k) {
      stepper_.step(y, a, h_);
      if (!entered_[level + 1] && norm(std::span<const double>(y.data(), n_)) <= rho_) {
        entered_[level + 1] = 1;
        entry_[level + 1] = y;
      }
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw IntegrationError("non-finite state during schedule enumeration");
    }
    descend(level + 1);
  }

  void descend(int level) {
    if (level == segments_) {
      LeafInfo info{controls_, states_[level], entered_[level] != 0, entry_[level]};
      (*leaf_)(first_, info);
      return;
    }
    if (prune_ && (*prune_)(first_, level, states_[level], entered_[level] != 0)) return;
    const int m = static_cast<int>(sys_.controls.size());
    for (int c = 0; c < m; ++c) advance(level, c);
  }

  const SystemDef& sys_;
  AugmentedStepper stepper_;
  int n_, segments_;
  double rho_;
  int substeps_ = 1;
  double h_ = 0.0;
  std::vector<std::vector<double>> states_, entry_;
  std::vector<char> entered_;
  std::vector<int> controls_;
  int first_ = 0;
  const LeafFn* leaf_ = nullptr;
  const PruneFn* prune_ = nullptr;
};

void check_budget(const SystemDef& sys, const OracleSettings& st) {
  if (st.depth < 1) throw ConfigError("oracle depth must be at least 1");
  if (!(st.switch_dt > 0)) throw ConfigError("oracle switch_dt must be positive");
  if (!(st.rho > 0)) throw ConfigError("oracle rho must be positive");
  const double leaves = std::pow(static_cast<double>(sys.controls.size()), st.depth);
  const double work = st.depth * leaves;
  if (work > static_cast<double>(st.budget))
    throw BudgetExceeded("enumerating " + std::to_string(sys.controls.size()) + "^" + std::to_string(st.depth) +
                         " schedules exceeds the budget of " + std::to_string(st.budget));
}

ControlSchedule make_schedule(const SystemDef& sys, std::span<const int> controls, double switch_dt) {
  ControlSchedule s;
  for (int c : controls) s.append(switch_dt, sys.controls.points()[c]);
  return s;
}

// Result slot per first control, merged in index order.
struct Slot {
  double lower = -kInf;
  std::vector<int> lower_controls;
  double upper = -kInf;
  bool upper_open = false;
  bool any = false;
};

}  // namespace

void for_each_schedule(const SystemDef& system, std::span<const double> x, int segments, double switch_dt,
                       double step, double rho, int threads, const LeafFn& leaf, const PruneFn& prune) {
  if (static_cast<int>(x.size()) != system.state_dim) throw ConfigError("query point has the wrong dimension");
  if (segments < 1) throw ConfigError("need at least one segment");
  const std::size_t m = system.controls.size();
  parallel_chunks(m, resolve_threads(threads), [&](std::size_t, std::size_t b, std::size_t e) {
    Walker w(system, x, segments, switch_dt, step, rho);
    for (std::size_t c = b; c < e; ++c) w.run(static_cast<int>(c), leaf, prune);
  });
}

ValueBounds maximal_cost(const SystemDef& system, std::span<const double> x, const OracleSettings& st) {
  if (system.mode != Mode::maximize) throw ConfigError("maximal_cost needs a maximize-mode system");
  if (!system.ules || !system.growth) throw ConfigError("maximal_cost needs ULES and growth constants");
  check_budget(system, st);
  const auto& ules = *system.ules;
  const auto& growth = *system.growth;
  const int n = system.state_dim;

  std::vector<Slot> slots(system.controls.size());
  auto leaf = [&](int first, const LeafInfo& info) {
    Slot& s = slots[first];
    s.any = true;
    const double J = info.end[n];
    if (J > s.lower) {
      s.lower = J;
      s.lower_controls.assign(info.controls.begin(), info.controls.end());
    }
    double up;
    bool open = false;
    const double end_norm = norm(info.end.first(n));
    if (info.entered && st.rho <= ules.r) {
      up = info.at_entry[n] + ules_tail_bound(ules, growth, norm(info.at_entry.first(n)));
    } else if (end_norm <= ules.r) {
      up = J + ules_tail_bound(ules, growth, end_norm);
      open = !info.entered;
    } else {
      up = kInf;
      open = true;
    }
    if (up > s.upper || (up == s.upper && open && !s.upper_open)) {
      s.upper = up;
      s.upper_open = open;
    }
  };
  PruneFn prune;
  if (st.prune) {
    // A node inside the ULES ball can gain at most the tail bound from there
    // on. When that cannot beat the best cost seen so far, the subtree is
    // skipped and that optimistic bound stands in for its upper bounds.
    prune = [&](int first, int, std::span<const double> y, bool) {
      Slot& s = slots[first];
      const double r = norm(y.first(n));
      if (r > ules.r || !s.any) return false;
      const double optimistic = y[n] + ules_tail_bound(ules, growth, r);
      if (optimistic >= s.lower) return false;
      if (optimistic > s.upper) {
        s.upper = optimistic;
        s.upper_open = false;
      }
      return true;
    };
  }
  for_each_schedule(system, x, st.depth, st.switch_dt, st.rk4_step(), st.rho, st.threads, leaf, prune);

  ValueBounds out;
  out.horizon = st.horizon();
  out.depth = st.depth;
  out.lower = -kInf;
  out.upper = -kInf;
  std::vector<int> best;
  for (const auto& s : slots) {
    if (s.lower > out.lower) {
      out.lower = s.lower;
      best = s.lower_controls;
    }
    if (s.upper > out.upper || (s.upper == out.upper && s.upper_open)) {
      out.upper = s.upper;
      out.truncated = s.upper_open;
    }
  }
  // Guard against integration noise pushing the bound below the attained cost.
  out.upper = std::max(out.upper, out.lower);
  out.tail_bound = out.upper - out.lower;
  out.best = make_schedule(system, best, st.switch_dt);
  return out;
}

ValueBounds kruzhkov_bounds(const ValueBounds& m) {
  ValueBounds k = m;
  auto tr = [](double v) { return std::isinf(v) ? (v > 0 ? 1.0 : -kInf) : -std::expm1(-v); };
  k.lower = tr(m.lower);
  k.upper = tr(m.upper);
  k.tail_bound = k.upper - k.lower;
  return k;
}

ValueBounds kruzhkov_value(const SystemDef& system, std::span<const double> x, const OracleSettings& settings) {
  return kruzhkov_bounds(maximal_cost(system, x, settings));
}

ValueBounds min_value(const SystemDef& system, std::span<const double> x, const OracleSettings& st) {
  if (system.mode != Mode::minimize) throw ConfigError("min_value needs a minimize-mode system");
  const bool have_constants = system.ules && system.growth;
  if (system.guard == ConvergenceGuard::none && !have_constants)
    throw ConfigError("min_value needs a convergence guard or ULES and growth constants");
  check_budget(system, st);
  const int n = system.state_dim;

  // The origin is absorbing with zero cost when every control rests there;
  // a leaf ending exactly on it then has no tail at all.
  bool absorbing = true;
  {
    const Vec zero(n, 0.0);
    Vec f(n);
    for (const auto& a : system.controls.points()) {
      system.eval_dynamics(zero, a, f);
      if (norm(f) != 0.0 || system.running_cost()(zero, a) != 0.0) absorbing = false;
    }
  }

  struct MinSlot {
    double lower = kInf, upper = kInf;
    bool open = false;
    std::vector<int> controls;
  };
  std::vector<MinSlot> slots(system.controls.size());
  auto leaf = [&](int first, const LeafInfo& info) {
    MinSlot& s = slots[first];
    const double J = info.end[n];
    const double discount = std::exp(-info.end[n + 2]);
    const double end_norm = norm(info.end.first(n));
    double lo_tail = 0.0, up_tail = 0.0;
    bool open = false;
    if (absorbing && end_norm == 0.0) {
      // exact
    } else if (have_constants && end_norm <= system.ules->r) {
      lo_tail = up_tail = ules_tail_bound(*system.ules, *system.growth, end_norm) * discount;
    } else if (system.guard == ConvergenceGuard::dominated) {
      lo_tail = up_tail = discount;
    } else if (system.guard == ConvergenceGuard::bounded_rate) {
      lo_tail = up_tail = system.lagrangian_bound / system.discount_floor * discount;
    } else {
      // Sign information only: l >= 0 makes J a lower bound, l <= 0 an upper
      // bound; the other side stays open.
      open = true;
    }
    const double lo = J - lo_tail, up = J + up_tail;
    s.lower = std::min(s.lower, lo);
    if (up < s.upper) {
      s.upper = up;
      s.open = open;
      s.controls.assign(info.controls.begin(), info.controls.end());
    }
  };
  for_each_schedule(system, x, st.depth, st.switch_dt, st.rk4_step(), st.rho, st.threads, leaf);

  ValueBounds out;
  out.horizon = st.horizon();
  out.depth = st.depth;
  out.lower = kInf;
  out.upper = kInf;
  std::vector<int> best;
  for (const auto& s : slots) {
    out.lower = std::min(out.lower, s.lower);
    if (s.upper < out.upper) {
      out.upper = s.upper;
      out.truncated = s.open;
      best = s.controls;
    }
  }
  out.lower = std::min(out.lower, out.upper);
  out.tail_bound = out.upper - out.lower;
  out.best = make_schedule(system, best, st.switch_dt);
  return out;
}

double step_tolerance(double eps, int j, double t) { return eps * (std::exp(-(j - 1.0)) - std::exp(-(t + j - 1.0))); }

double step_tolerance_sum(double eps, int m) { return -eps * std::expm1(-static_cast<double>(m)); }

std::string to_string(WitnessKind k) { return k == WitnessKind::stationary ? "stationary" : "searched"; }

// ---------------------------------------------------------------------------
// Quasi-stability falsifier

std::optional<Counterexample> falsify_quasistability(const SystemDef& system, const Grid& region,
                                                     std::uint64_t budget, const FalsifierSettings& st) {
  const int n = system.state_dim;
  if (region.dims() != n) throw ConfigError("falsifier region has the wrong dimension");
  const auto& pts = system.controls.points();
  const int segments = std::max(1, static_cast<int>(std::lround(st.horizon / st.switch_dt)));

  auto replay = [&](const Vec& x0, ControlSchedule schedule, WitnessKind kind) {
    const auto rec = integrate(system, x0, schedule, st.step);
    Counterexample cx;
    cx.x0 = x0;
    cx.schedule = std::move(schedule);
    cx.total_cost = rec.g_integral.back();
    cx.final_norm = norm(rec.final_state());
    cx.kind = kind;
    return cx;
  };

  // Phase 1: rest points with zero cost, nearest the origin first and, on
  // ties, the node with the larger coordinates (so +1 precedes -1).
  std::vector<std::size_t> order(region.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> radius(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) radius[i] = norm(region.node(i));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (radius[a] != radius[b]) return radius[a] < radius[b];
    return region.node(a) > region.node(b);
  });
  Vec f(n);
  for (std::size_t i : order) {
    if (radius[i] < st.min_norm) continue;
    const Vec x = region.node(i);
    for (const auto& a : pts) {
      try {
        system.eval_dynamics(x, a, f);
        if (norm(f) > st.stationary_tol) continue;
        if (system.cost(x, a) > st.stationary_tol) continue;
      } catch (const DomainError&) {
        continue;
      }
      ControlSchedule s;
      s.append(st.horizon, a);
      return replay(x, std::move(s), WitnessKind::stationary);
    }
  }

  // Phase 2: random long-horizon schedules. Each trajectory has its own seed
  // so the outcome is the smallest witnessing index whatever the thread count.
  std::atomic<std::uint64_t> found{budget};
  auto make = [&](std::uint64_t idx, Vec& x0, ControlSchedule& sched) {
    std::mt19937_64 rng(st.seed + 0x9E3779B97F4A7C15ull * (idx + 1));
    x0.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
      std::uniform_real_distribution<double> u(region.coord(j, 0), region.coord(j, region.counts()[j] - 1));
      x0[j] = u(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    sched = {};
    for (int k = 0; k < segments; ++k) sched.append(st.horizon / segments, pts[pick(rng)]);
  };
  parallel_chunks(budget, resolve_threads(st.threads), [&](std::size_t, std::size_t b, std::size_t e) {
    Vec x0;
    ControlSchedule sched;
    for (std::size_t i = b; i < e && i < found.load(); ++i) {
      make(i, x0, sched);
      try {
        const auto rec = integrate(system, x0, sched, st.step);
        if (rec.g_integral.back() < st.cost_threshold && norm(rec.final_state()) >= st.norm_threshold) {
          std::uint64_t cur = found.load();
          while (i < cur && !found.compare_exchange_weak(cur, i)) {
          }
          return;
        }
      } catch (const Error&) {
        continue;
      }
    }
  });
  if (found.load() >= budget) return std::nullopt;
  Vec x0;
  ControlSchedule sched;
  make(found.load(), x0, sched);
  return replay(x0, std::move(sched), WitnessKind::searched);
}

// ---------------------------------------------------------------------------
// Epsilon-optimal synthesis

nlohmann::json SynthesisReport::to_json() const {
  nlohmann::json steps_json = nlohmann::json::array();
  for (const auto& s : steps) {
    steps_json.push_back({{"step", s.index},
                          {"start", s.start},
                          {"defect", s.defect},
                          {"allowance", s.allowance},
                          {"accepted", s.accepted}});
  }
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& seg : schedule.segments) sched.push_back({{"duration", seg.duration}, {"control", seg.control}});
  return {{"eps", eps},
          {"field_value", field_value},
          {"achieved", achieved},
          {"goal_residual", goal_residual},
          {"budget_ok", budget_ok},
          {"failed_step", failed_step},
          {"steps", steps_json},
          {"schedule", sched}};
}

SynthesisReport synthesize_epsilon_optimal(const SystemDef& system, const ValueField& field,
                                           std::span<const double> x0, double eps, int M,
                                           const SynthesisSettings& st) {
  const int n = system.state_dim;
  const Grid& grid = field.grid();
  if (grid.dims() != n) throw ConfigError("field dimension does not match the system");
  if (!(eps > 0)) throw ConfigError("eps must be positive");
  if (M < 1) throw ConfigError("M must be at least 1");
  if (field.metadata().tol > 0 && !field.metadata().converged)
    throw ConfigError("field did not converge; synthesis needs a converged field");
  for (int j = 0; j < n; ++j) {
    const double lo = grid.coord(j, 0), hi = grid.coord(j, grid.counts()[j] - 1);
    if (!(x0[j] > lo && x0[j] < hi)) throw ConfigError("x0 must be a grid-interior point");
  }
  const int pieces = std::max(1, static_cast<int>(std::lround(1.0 / st.switch_dt)));
  const double piece = 1.0 / pieces;
  const bool kruzhkov = field.transform() == Transform::kruzhkov;
  const bool maximize = kruzhkov || system.mode == Mode::maximize;

  SynthesisReport rep;
  rep.eps = eps;
  Vec y(x0.begin(), x0.end());
  rep.field_value = field.interpolate(y);
  double acc_cost = 0.0, acc_discount = 1.0;
  for (int i = 1; i <= M; ++i) {
    const double here = field.interpolate(y);
    std::vector<double> best_gain(system.controls.size(), maximize ? -kInf : kInf);
    std::vector<std::vector<int>> best_controls(system.controls.size());
    std::vector<std::vector<double>> best_end(system.controls.size());
    for_each_schedule(system, y, pieces, piece, st.step, 0.0, st.threads, [&](int first, const LeafInfo& info) {
      const auto xe = info.end.first(n);
      double J, disc;
      if (kruzhkov) {
        disc = std::exp(-info.end[n + 1]);
        J = -std::expm1(-info.end[n + 1]);
      } else {
        disc = std::exp(-info.end[n + 2]);
        J = info.end[n];
      }
      const double gain = J + disc * field.interpolate(xe);
      if (maximize ? gain > best_gain[first] : gain < best_gain[first]) {
        best_gain[first] = gain;
        best_controls[first].assign(info.controls.begin(), info.controls.end());
        best_end[first].assign(info.end.begin(), info.end.end());
      }
    });
    std::size_t pick = 0;
    for (std::size_t c = 1; c < best_gain.size(); ++c) {
      if (maximize ? best_gain[c] > best_gain[pick] : best_gain[c] < best_gain[pick]) pick = c;
    }
    SynthesisStep step;
    step.index = i;
    step.start = y;
    step.defect = maximize ? here - best_gain[pick] : best_gain[pick] - here;
    step.allowance = step_tolerance(eps, i);
    step.accepted = step.defect <= step.allowance;
    if (!step.accepted && rep.budget_ok) {
      rep.budget_ok = false;
      rep.failed_step = i;
    }
    rep.steps.push_back(step);

    const auto& end = best_end[pick];
    const double J = kruzhkov ? -std::expm1(-end[n + 1]) : end[n];
    const double disc = kruzhkov ? std::exp(-end[n + 1]) : std::exp(-end[n + 2]);
    acc_cost += acc_discount * J;
    acc_discount *= disc;
    for (int c : best_controls[pick]) rep.schedule.append(piece, system.controls.points()[c]);
    y.assign(end.begin(), end.begin() + n);
  }
  rep.achieved = acc_cost + acc_discount * field.interpolate(y);
  rep.goal_residual = maximize ? rep.achieved - rep.field_value : rep.field_value - rep.achieved;
  return rep;
}

}  // namespace zubov
