#include "zubov/doa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>

#include "zubov/error.hpp"

namespace zubov {

std::size_t DoaMask::count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)); }

DoaMask extract_doa(const ValueField& field, double epsilon) {
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must lie in (0,1)");
  if (field.transform() != Transform::kruzhkov) throw ConfigError("domain extraction needs a Kruzhkov field");
  const Grid& g = field.grid();
  const double threshold = 1 - epsilon;
  const std::size_t origin = g.origin_index();
  if (!(field.at(origin) < threshold))
    throw DomainError("degenerate field: origin value " + std::to_string(field.at(origin)) + " >= 1 - epsilon");

  DoaMask mask{g, std::vector<char>(g.size(), 0), epsilon, false};
  std::deque<std::size_t> frontier{origin};
  mask.inside[origin] = 1;
  const int n = g.dims();
  while (!frontier.empty()) {
    const std::size_t k = frontier.front();
    frontier.pop_front();
    if (g.on_boundary(k)) mask.touches_boundary = true;
    const auto idx = g.unravel(k);
    for (int j = 0; j < n; ++j) {
      for (int step : {-1, 1}) {
        const int i = idx[j] + step;
        if (i < 0 || i >= g.counts()[j]) continue;
        const std::size_t nb = step < 0 ? k - g.strides()[j] : k + g.strides()[j];
        if (mask.inside[nb] || !(field.at(nb) < threshold)) continue;
        mask.inside[nb] = 1;
        frontier.push_back(nb);
      }
    }
  }
  return mask;
}

DoaMask mask_from_predicate(const Grid& grid, const std::function<bool(std::span<const double>)>& predicate) {
  DoaMask mask{grid, std::vector<char>(grid.size(), 0), 0.0, false};
  Vec x(grid.dims());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid.node(k, x);
    mask.inside[k] = predicate(x) ? 1 : 0;
    if (mask.inside[k] && grid.on_boundary(k)) mask.touches_boundary = true;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Marching squares

std::vector<Polyline> contour2d(const ValueField& field, double level) {
  const Grid& g = field.grid();
  if (g.dims() != 2) throw ConfigError("contouring needs a 2-D field");
  const int nx = g.counts()[0], ny = g.counts()[1];
  const std::size_t h_edges = static_cast<std::size_t>(nx - 1) * ny;
  auto value = [&](int i, int j) { return field.at(static_cast<std::size_t>(j) * nx + i); };
  auto above = [&](int i, int j) { return value(i, j) >= level; };
  auto h_edge = [&](int i, int j) { return static_cast<std::size_t>(j) * (nx - 1) + i; };
  auto v_edge = [&](int i, int j) { return h_edges + static_cast<std::size_t>(j) * nx + i; };

  auto edge_point = [&](std::size_t e) {
    int i0, j0, i1, j1;
    if (e < h_edges) {
      i0 = static_cast<int>(e % (nx - 1));
      j0 = static_cast<int>(e / (nx - 1));
      i1 = i0 + 1;
      j1 = j0;
    } else {
      const std::size_t r = e - h_edges;
      i0 = static_cast<int>(r % nx);
      j0 = static_cast<int>(r / nx);
      i1 = i0;
      j1 = j0 + 1;
    }
    const double va = value(i0, j0), vb = value(i1, j1);
    const double t = std::clamp((level - va) / (vb - va), 0.0, 1.0);
    const double xa = g.coord(0, i0), ya = g.coord(1, j0), xb = g.coord(0, i1), yb = g.coord(1, j1);
    return std::array<double, 2>{xa + t * (xb - xa), ya + t * (yb - ya)};
  };

  struct Segment {
    std::size_t a, b;
  };
  std::vector<Segment> segs;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int c = (above(i, j) ? 1 : 0) | (above(i + 1, j) ? 2 : 0) | (above(i + 1, j + 1) ? 4 : 0) |
                    (above(i, j + 1) ? 8 : 0);
      if (c == 0 || c == 15) continue;
      const std::size_t bottom = h_edge(i, j), top = h_edge(i, j + 1), left = v_edge(i, j), right = v_edge(i + 1, j);
      const bool center_above =
          0.25 * (value(i, j) + value(i + 1, j) + value(i + 1, j + 1) + value(i, j + 1)) >= level;
      switch (c) {
        case 1:
        case 14:
          segs.push_back({left, bottom});
          break;
        case 2:
        case 13:
          segs.push_back({bottom, right});
          break;
        case 3:
        case 12:
          segs.push_back({left, right});
          break;
        case 4:
        case 11:
          segs.push_back({right, top});
          break;
        case 6:
        case 9:
          segs.push_back({bottom, top});
          break;
        case 7:
        case 8:
          segs.push_back({top, left});
          break;
        case 5:
          if (center_above) {
            segs.push_back({bottom, right});
            segs.push_back({top, left});
          } else {
            segs.push_back({left, bottom});
            segs.push_back({right, top});
          }
          break;
        case 10:
          if (center_above) {
            segs.push_back({left, bottom});
            segs.push_back({right, top});
          } else {
            segs.push_back({bottom, right});
            segs.push_back({top, left});
          }
          break;
        default:
          break;
      }
    }
  }

  // Each crossed edge is shared by at most two segments.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const std::size_t edges = h_edges + static_cast<std::size_t>(nx) * (ny - 1);
  std::vector<std::array<std::size_t, 2>> incident(edges, {kNone, kNone});
  for (std::size_t s = 0; s < segs.size(); ++s) {
    for (std::size_t e : {segs[s].a, segs[s].b}) {
      auto& slot = incident[e];
      (slot[0] == kNone ? slot[0] : slot[1]) = s;
    }
  }
  auto other_segment = [&](std::size_t e, std::size_t s) {
    const auto& slot = incident[e];
    return slot[0] == s ? slot[1] : slot[0];
  };
  auto other_end = [&](std::size_t s, std::size_t e) { return segs[s].a == e ? segs[s].b : segs[s].a; };

  std::vector<char> used(segs.size(), 0);
  std::vector<Polyline> out;
  for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
    if (used[s0]) continue;
    used[s0] = 1;
    std::deque<std::size_t> chain{segs[s0].a, segs[s0].b};
    bool closed = false;
    // Forward from b.
    std::size_t s = s0, e = segs[s0].b;
    while (true) {
      const std::size_t next = other_segment(e, s);
      if (next == kNone) break;
      if (next == s0) {
        closed = true;
        break;
      }
      if (used[next]) break;
      used[next] = 1;
      e = other_end(next, e);
      s = next;
      if (e == chain.front()) {
        closed = true;
        break;
      }
      chain.push_back(e);
    }
    if (!closed) {
      s = s0;
      e = segs[s0].a;
      while (true) {
        const std::size_t next = other_segment(e, s);
        if (next == kNone || used[next]) break;
        used[next] = 1;
        e = other_end(next, e);
        s = next;
        chain.push_front(e);
      }
    }
    Polyline line;
    line.closed = closed;
    for (std::size_t edge : chain) line.points.push_back(edge_point(edge));
    out.push_back(std::move(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Region comparison

namespace {

std::vector<std::size_t> border_nodes(const Grid& g, const std::vector<char>& set) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!set[k]) continue;
    bool border = g.on_boundary(k);
    const auto idx = g.unravel(k);
    for (int j = 0; j < g.dims() && !border; ++j) {
      if (idx[j] > 0 && !set[k - g.strides()[j]]) border = true;
      if (idx[j] + 1 < g.counts()[j] && !set[k + g.strides()[j]]) border = true;
    }
    if (border) out.push_back(k);
  }
  return out;
}

// Largest distance from a node of `from` outside `to` to the nearest node of
// `to`. The nearest node always lies on the border of `to`.
double directed(const Grid& g, const std::vector<char>& from, const std::vector<char>& to) {
  const auto border = border_nodes(g, to);
  std::vector<std::vector<int>> border_idx;
  for (std::size_t k : border) border_idx.push_back(g.unravel(k));
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!from[k] || to[k]) continue;
    if (border.empty()) return std::numeric_limits<double>::infinity();
    const auto idx = g.unravel(k);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : border_idx) {
      double d = 0.0;
      for (int j = 0; j < g.dims(); ++j) d += double(idx[j] - b[j]) * (idx[j] - b[j]);
      best = std::min(best, d);
    }
    worst = std::max(worst, std::sqrt(best));
  }
  return worst;
}

}  // namespace

RegionDistance region_distance(const DoaMask& a, const DoaMask& b) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("masks live on different grids");
  RegionDistance d;
  d.hausdorff_cells = std::max(directed(a.grid, a.inside, b.inside), directed(a.grid, b.inside, a.inside));
  std::size_t diff = 0, ref = 0;
  for (std::size_t k = 0; k < a.inside.size(); ++k) {
    diff += (a.inside[k] != 0) != (b.inside[k] != 0);
    ref += b.inside[k] != 0;
  }
  d.symmetric_difference_fraction = ref ? static_cast<double>(diff) / ref : (diff ? 1.0 : 0.0);
  return d;
}

RegionDistance region_distance(const DoaMask& mask, const std::function<bool(std::span<const double>)>& reference) {
  return region_distance(mask, mask_from_predicate(mask.grid, reference));
}

void write_mask_csv(std::ostream& os, const DoaMask& mask) {
  const Grid& g = mask.grid;
  for (int j = 0; j < g.dims(); ++j) os << 'i' << j + 1 << ',';
  os << "inside\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (int i : g.unravel(k)) os << i << ',';
    os << (mask.inside[k] ? 1 : 0) << '\n';
  }
}

void write_contours_csv(std::ostream& os, const std::vector<Polyline>& lines) {
  os << "polyline_id,vertex_index,x,y\n";
  char buf[96];
  for (std::size_t p = 0; p < lines.size(); ++p) {
    const auto& pts = lines[p].points;
    const std::size_t count = pts.size() + (lines[p].closed && !pts.empty() ? 1 : 0);
    for (std::size_t v = 0; v < count; ++v) {
      const auto& q = pts[v % pts.size()];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", p, v, q[0], q[1]);
      os << buf;
    }
  }
}

}  // namespace zubov
