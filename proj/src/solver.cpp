#include "zubov/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "zubov/error.hpp"
#include "zubov/parallel.hpp"

namespace zubov {

namespace {

constexpr std::uint32_t kExterior = std::numeric_limits<std::uint32_t>::max();

// Per (node, control) data of the affine update c0 + c1 * I[v](foot). The
// foot's interpolation cell is `base` with per-axis weights in `weights`.
struct UpdateTable {
  int dims = 0;
  std::size_t controls = 0;
  std::vector<std::uint32_t> base;
  std::vector<double> weights;
  std::vector<double> c0, c1;
};

void locate_foot(const Grid& grid, std::span<const double> foot, std::uint32_t& base, double* w) {
  std::size_t flat = 0;
  for (int j = 0; j < grid.dims(); ++j) {
    const double s = foot[j] / grid.spacing()[j] + grid.origin_node()[j];
    const int last = grid.counts()[j] - 1;
    if (!(s >= -1e-9 && s <= last + 1e-9)) {
      base = kExterior;
      return;
    }
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, last - 1);
    w[j] = std::clamp(s - i, 0.0, 1.0);
    flat += static_cast<std::size_t>(i) * grid.strides()[j];
  }
  base = static_cast<std::uint32_t>(flat);
}

// Builds the update table. `affine(x, a, c0, c1)` supplies the coefficients.
template <class Affine>
UpdateTable build_table(const SystemDef& sys, const Grid& grid, const SolverSettings& st, Affine&& affine) {
  if (grid.size() >= kExterior) throw ConfigError("grid is too large");
  if (grid.dims() != sys.state_dim) throw ConfigError("grid dimension does not match the system");
  UpdateTable t;
  t.dims = grid.dims();
  t.controls = sys.controls.size();
  const std::size_t entries = grid.size() * t.controls;
  t.base.resize(entries);
  t.weights.resize(entries * t.dims);
  t.c0.resize(entries);
  t.c1.resize(entries);
  const auto& pts = sys.controls.points();
  const int n = t.dims;

  parallel_chunks(grid.size(), resolve_threads(st.threads), [&](std::size_t, std::size_t b, std::size_t e) {
    Vec x(n), f(n), foot(n), k1(n), k2(n), k3(n), k4(n), y(n);
    auto dyn = [&](std::span<const double> at, const Vec& a, Vec& out) { sys.eval_dynamics(at, a, out); };
    for (std::size_t i = b; i < e; ++i) {
      grid.node(i, x);
      for (std::size_t c = 0; c < t.controls; ++c) {
        const Vec& a = pts[c];
        const std::size_t k = i * t.controls + c;
        if (st.rk4_foot) {
          dyn(x, a, k1);
          for (int j = 0; j < n; ++j) y[j] = x[j] + 0.5 * st.dt * k1[j];
          dyn(y, a, k2);
          for (int j = 0; j < n; ++j) y[j] = x[j] + 0.5 * st.dt * k2[j];
          dyn(y, a, k3);
          for (int j = 0; j < n; ++j) y[j] = x[j] + st.dt * k3[j];
          dyn(y, a, k4);
          for (int j = 0; j < n; ++j) foot[j] = x[j] + st.dt / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        } else {
          dyn(x, a, f);
          for (int j = 0; j < n; ++j) foot[j] = x[j] + st.dt * f[j];
        }
        locate_foot(grid, foot, t.base[k], &t.weights[k * n]);
        affine(x, a, t.c0[k], t.c1[k]);
      }
    }
  });
  return t;
}

double interp(const Grid& grid, const UpdateTable& t, std::size_t k, const std::vector<double>& v) {
  const std::uint32_t base = t.base[k];
  const double* w = &t.weights[k * t.dims];
  const auto& st = grid.strides();
  switch (t.dims) {
    case 1:
      return (1 - w[0]) * v[base] + (w[0] != 0.0 ? w[0] * v[base + 1] : 0.0);
    case 2: {
      const std::size_t s1 = st[1];
      const double lo = (1 - w[0]) * v[base] + (w[0] != 0.0 ? w[0] * v[base + 1] : 0.0);
      if (w[1] == 0.0) return lo;
      const double hi = (1 - w[0]) * v[base + s1] + (w[0] != 0.0 ? w[0] * v[base + s1 + 1] : 0.0);
      return (1 - w[1]) * lo + w[1] * hi;
    }
    default: {
      double acc = 0.0;
      for (unsigned c = 0; c < (1u << t.dims); ++c) {
        double weight = 1.0;
        std::size_t off = base;
        for (int j = 0; j < t.dims; ++j) {
          if (c & (1u << j)) {
            weight *= w[j];
            off += st[j];
          } else {
            weight *= 1 - w[j];
          }
        }
        if (weight != 0.0) acc += weight * v[off];
      }
      return acc;
    }
  }
}

ValueField iterate(const Grid& grid, const SolverSettings& st, const UpdateTable& t, bool maximize, double exterior,
                   Transform transform, std::vector<double> cur) {
  const std::size_t nodes = grid.size();
  const std::size_t origin = grid.origin_index();
  const int threads = resolve_threads(st.threads);
  std::vector<double> next(nodes, 0.0);
  const bool clamp01 = transform == Transform::kruzhkov;

  FieldMetadata meta;
  meta.dt = st.dt;
  meta.tol = st.tol;
  meta.exterior_value = exterior;
  std::vector<double> chunk_change(threads, 0.0);
  for (int it = 1; it <= st.max_iters; ++it) {
    std::fill(chunk_change.begin(), chunk_change.end(), 0.0);
    parallel_chunks(nodes, threads, [&](std::size_t chunk, std::size_t b, std::size_t e) {
      double change = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        if (st.pin_origin && i == origin) {
          next[i] = 0.0;
          continue;
        }
        double best = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < t.controls; ++c) {
          const std::size_t k = i * t.controls + c;
          const double cont = t.base[k] == kExterior ? exterior : interp(grid, t, k, cur);
          const double val = t.c0[k] + t.c1[k] * cont;
          best = maximize ? std::max(best, val) : std::min(best, val);
        }
        if (clamp01) best = std::clamp(best, 0.0, 1.0);
        next[i] = best;
        change = std::max(change, std::abs(best - cur[i]));
      }
      chunk_change[chunk] = change;
    });
    const double change = *std::max_element(chunk_change.begin(), chunk_change.end());
    cur.swap(next);
    meta.iterations = it;
    meta.residual = change;
    if (st.observer) st.observer(it, change, cur);
    if (change < st.tol) {
      meta.converged = true;
      break;
    }
  }
  return ValueField(grid, std::move(cur), transform, meta);
}

UpdateTable zubov_table(const SystemDef& system, const Grid& grid, const SolverSettings& st) {
  if (system.mode != Mode::maximize) throw ConfigError("the Zubov solver needs a maximize-mode system");
  const double dt = st.dt;
  return build_table(system, grid, st, [&](std::span<const double> x, const Vec& a, double& c0, double& c1) {
    const double g = system.cost(x, a);
    if (g < 0) throw DomainError("cost g is negative at a grid node");
    c1 = std::exp(-dt * g);
    c0 = -std::expm1(-dt * g);
  });
}

UpdateTable hjbe_table(const SystemDef& system, const Grid& grid, const SolverSettings& st) {
  if (system.mode == Mode::minimize && system.guard == ConvergenceGuard::none)
    throw ConfigError("minimization needs a declared convergence guard");
  const double dt = st.dt;
  const ScalarTerm& l = system.running_cost();
  return build_table(system, grid, st, [&](std::span<const double> x, const Vec& a, double& c0, double& c1) {
    const double h = system.discount(x, a);
    c0 = dt * l(x, a) * std::exp(-0.5 * dt * h);
    c1 = std::exp(-dt * h);
  });
}

}  // namespace

void SolverSettings::validate(bool kruzhkov) const {
  std::vector<std::string> problems;
  if (!(dt > 0)) problems.push_back("dt must be positive");
  if (!(tol > 0)) problems.push_back("tol must be positive");
  if (max_iters < 1) problems.push_back("max_iters must be at least 1");
  if (kruzhkov && exterior_value && !(*exterior_value >= 0 && *exterior_value <= 1))
    problems.push_back("exterior_value must lie in [0,1] for Kruzhkov fields");
  if (!problems.empty()) throw ConfigError(problems);
}

ValueField solve_zubov(const SystemDef& system, const Grid& grid, const SolverSettings& settings) {
  settings.validate(true);
  const auto table = zubov_table(system, grid, settings);
  return iterate(grid, settings, table, true, settings.exterior_value.value_or(1.0), Transform::kruzhkov,
                 std::vector<double>(grid.size(), 0.0));
}

ValueField solve_hjbe(const SystemDef& system, const Grid& grid, const SolverSettings& settings) {
  settings.validate(false);
  const auto table = hjbe_table(system, grid, settings);
  return iterate(grid, settings, table, system.mode == Mode::maximize, settings.exterior_value.value_or(0.0),
                 Transform::raw, std::vector<double>(grid.size(), 0.0));
}

ValueField apply_sweep(const SystemDef& system, const ValueField& field, const SolverSettings& settings) {
  const bool kruzhkov = field.transform() == Transform::kruzhkov;
  settings.validate(kruzhkov);
  SolverSettings one = settings;
  one.max_iters = 1;
  one.observer = nullptr;
  const Grid& grid = field.grid();
  if (kruzhkov) {
    return iterate(grid, one, zubov_table(system, grid, one), true, settings.exterior_value.value_or(1.0),
                   Transform::kruzhkov, field.values());
  }
  return iterate(grid, one, hjbe_table(system, grid, one), system.mode == Mode::maximize,
                 settings.exterior_value.value_or(0.0), Transform::raw, field.values());
}

ValueField kruzhkov_transform(const ValueField& raw) {
  std::vector<double> v(raw.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = raw.at(i);
    v[i] = std::isinf(w) && w > 0 ? 1.0 : -std::expm1(-w);
  }
  FieldMetadata meta = raw.metadata();
  const double ext = meta.exterior_value;
  meta.exterior_value = std::isinf(ext) && ext > 0 ? 1.0 : -std::expm1(-ext);
  return ValueField(raw.grid(), std::move(v), Transform::kruzhkov, meta);
}

ValueField inverse_transform(const ValueField& kruzhkov, double cap) {
  auto inv = [cap](double v) { return v >= 1 - 1e-12 ? cap : std::min(cap, -std::log1p(-v)); };
  std::vector<double> w(kruzhkov.values().size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = inv(kruzhkov.at(i));
  FieldMetadata meta = kruzhkov.metadata();
  meta.exterior_value = inv(meta.exterior_value);
  return ValueField(kruzhkov.grid(), std::move(w), Transform::raw, meta);
}

}  // namespace zubov
