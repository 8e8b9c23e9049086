#include "zubov/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zubov/error.hpp"

namespace zubov {

Grid::Grid(Vec lo, Vec hi, std::vector<int> counts) : lo_(std::move(lo)), hi_(std::move(hi)), counts_(std::move(counts)) {
  std::vector<std::string> problems;
  if (counts_.empty() || lo_.size() != counts_.size() || hi_.size() != counts_.size())
    throw ConfigError("grid needs matching, nonempty lo/hi/counts");
  if (counts_.size() > 8) throw ConfigError("grids are limited to 8 axes");
  const int n = dims();
  dx_.resize(n);
  origin_.resize(n);
  strides_.resize(n);
  size_ = 1;
  for (int j = 0; j < n; ++j) {
    const std::string axis = "axis " + std::to_string(j + 1);
    if (counts_[j] < 3) problems.push_back(axis + ": node count must be at least 3");
    if (!(lo_[j] < 0 && hi_[j] > 0)) problems.push_back(axis + ": box must contain the origin in its interior");
    if (!problems.empty()) continue;
    dx_[j] = (hi_[j] - lo_[j]) / (counts_[j] - 1);
    const double r = -lo_[j] / dx_[j];
    origin_[j] = static_cast<int>(std::lround(r));
    if (std::abs(r - origin_[j]) > 1e-9 * std::max(1.0, r))
      problems.push_back(axis + ": origin is not a grid node (lo=" + std::to_string(lo_[j]) +
                         ", hi=" + std::to_string(hi_[j]) + ", nodes=" + std::to_string(counts_[j]) + ")");
    strides_[j] = size_;
    size_ *= static_cast<std::size_t>(counts_[j]);
  }
  if (!problems.empty()) throw ConfigError(problems);
}

Grid Grid::cube(int dims, double lo, double hi, int count) {
  return Grid(Vec(dims, lo), Vec(dims, hi), std::vector<int>(dims, count));
}

std::vector<int> Grid::unravel(std::size_t flat) const {
  std::vector<int> idx(dims());
  for (int j = 0; j < dims(); ++j) {
    idx[j] = static_cast<int>(flat % counts_[j]);
    flat /= counts_[j];
  }
  return idx;
}

std::size_t Grid::ravel(std::span<const int> idx) const {
  std::size_t flat = 0;
  for (int j = 0; j < dims(); ++j) flat += static_cast<std::size_t>(idx[j]) * strides_[j];
  return flat;
}

Vec Grid::node(std::size_t flat) const {
  Vec x(dims());
  node(flat, x);
  return x;
}

void Grid::node(std::size_t flat, std::span<double> out) const {
  for (int j = 0; j < dims(); ++j) {
    out[j] = coord(j, static_cast<int>(flat % counts_[j]));
    flat /= counts_[j];
  }
}

bool Grid::on_boundary(std::size_t flat) const {
  for (int j = 0; j < dims(); ++j) {
    const int i = static_cast<int>(flat % counts_[j]);
    if (i == 0 || i == counts_[j] - 1) return true;
    flat /= counts_[j];
  }
  return false;
}

bool Grid::inside_box(std::span<const double> x) const {
  for (int j = 0; j < dims(); ++j) {
    if (!(x[j] >= coord(j, 0) && x[j] <= coord(j, counts_[j] - 1))) return false;
  }
  return true;
}

double Grid::max_cell_diameter() const {
  double s = 0.0;
  for (double d : dx_) s += d * d;
  return std::sqrt(s);
}

double Grid::min_spacing() const { return *std::min_element(dx_.begin(), dx_.end()); }

bool Grid::same_as(const Grid& other, double tol) const {
  if (counts_ != other.counts_) return false;
  for (int j = 0; j < dims(); ++j) {
    if (std::abs(lo_[j] - other.lo_[j]) > tol || std::abs(hi_[j] - other.hi_[j]) > tol) return false;
  }
  return true;
}

nlohmann::json Grid::to_json() const { return {{"lo", lo_}, {"hi", hi_}, {"nodes", counts_}}; }

std::string to_string(Transform t) { return t == Transform::kruzhkov ? "kruzhkov" : "raw"; }

// ---------------------------------------------------------------------------

ValueField::ValueField(Grid grid, std::vector<double> values, Transform transform, FieldMetadata meta)
    : grid_(std::move(grid)), values_(std::move(values)), transform_(transform), meta_(meta) {
  if (values_.size() != grid_.size())
    throw ConfigError("field has " + std::to_string(values_.size()) + " values for " + std::to_string(grid_.size()) +
                      " grid nodes");
  if (transform_ == Transform::kruzhkov) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] >= -1e-12 && values_[i] <= 1 + 1e-12))
        throw ConfigError("Kruzhkov field value " + std::to_string(values_[i]) + " outside [0,1] at node " +
                          std::to_string(i));
    }
  }
}

double ValueField::interpolate(std::span<const double> x) const {
  return zubov::interpolate(grid_, values_, x, meta_.exterior_value);
}

ValueField ValueField::with_values(std::vector<double> values) const {
  return ValueField(grid_, std::move(values), transform_, meta_);
}

double interpolate(const Grid& grid, std::span<const double> values, std::span<const double> x, double exterior) {
  const int n = grid.dims();
  double w[8];
  std::size_t flat = 0;
  for (int j = 0; j < n; ++j) {
    const double dx = grid.spacing()[j];
    const double s = x[j] / dx + grid.origin_node()[j];
    const int last = grid.counts()[j] - 1;
    if (!(s >= -1e-9 && s <= last + 1e-9)) return exterior;
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, last - 1);
    w[j] = std::clamp(s - i, 0.0, 1.0);
    flat += static_cast<std::size_t>(i) * grid.strides()[j];
  }
  double acc = 0.0;
  const unsigned corners = 1u << n;
  for (unsigned c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t off = flat;
    for (int j = 0; j < n; ++j) {
      if (c & (1u << j)) {
        weight *= w[j];
        off += grid.strides()[j];
      } else {
        weight *= 1.0 - w[j];
      }
    }
    if (weight != 0.0) acc += weight * values[off];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

void write_field_csv(std::ostream& os, const ValueField& field) {
  const Grid& g = field.grid();
  const int n = g.dims();
  os << n;
  for (int c : g.counts()) os << ',' << c;
  for (double v : g.lo()) os << ',' << fmt17(v);
  for (double v : g.hi()) os << ',' << fmt17(v);
  os << ',' << to_string(field.transform()) << '\n';
  Vec x(n);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto idx = g.unravel(k);
    g.node(k, x);
    for (int j = 0; j < n; ++j) os << idx[j] << ',';
    for (int j = 0; j < n; ++j) os << fmt17(x[j]) << ',';
    os << fmt17(field.at(k)) << '\n';
  }
}

void write_field_csv(const std::string& path, const ValueField& field) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write field file '" + path + "'");
  write_field_csv(os, field);
}

ValueField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("field file is empty");
  const auto head = split(line);
  int n = 0;
  try {
    n = std::stoi(head.at(0));
  } catch (const std::exception&) {
    throw ConfigError("field header is malformed");
  }
  if (n < 1 || head.size() != static_cast<std::size_t>(3 * n + 2)) throw ConfigError("field header is malformed");
  std::vector<int> counts(n);
  Vec lo(n), hi(n);
  for (int j = 0; j < n; ++j) {
    counts[j] = std::stoi(head[1 + j]);
    lo[j] = std::stod(head[1 + n + j]);
    hi[j] = std::stod(head[1 + 2 * n + j]);
  }
  const std::string& tag = head.back();
  Transform t;
  if (tag == "kruzhkov") t = Transform::kruzhkov;
  else if (tag == "raw") t = Transform::raw;
  else throw ConfigError("unknown field transform '" + tag + "'");

  Grid grid(lo, hi, counts);
  std::vector<double> values(grid.size(), 0.0);
  std::vector<char> seen(grid.size(), 0);
  std::vector<int> idx(n);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != static_cast<std::size_t>(2 * n + 1))
      throw ConfigError("field row " + std::to_string(rows + 1) + " has the wrong number of columns");
    for (int j = 0; j < n; ++j) {
      idx[j] = std::stoi(cells[j]);
      if (idx[j] < 0 || idx[j] >= counts[j]) throw ConfigError("field row index out of range");
    }
    const std::size_t k = grid.ravel(idx);
    values[k] = std::stod(cells.back());
    seen[k] = 1;
    ++rows;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ConfigError("field file does not cover every node");
  FieldMetadata meta;
  meta.exterior_value = t == Transform::kruzhkov ? 1.0 : 0.0;
  return ValueField(std::move(grid), std::move(values), t, meta);
}

ValueField read_field_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open field file '" + path + "'");
  return read_field_csv(is);
}

}  // namespace zubov
