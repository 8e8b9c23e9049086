#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace zubov {

using Vec = std::vector<double>;

/// Uniform tensor grid. Node coordinates are measured from the origin node,
/// x_j = (i_j - origin_j) * spacing_j, so the origin is an exact node and a box
/// symmetric about 0 yields exactly symmetric coordinates.
class Grid {
 public:
  /// Throws ConfigError when the origin is not a node or a count is below 3.
  Grid(Vec lo, Vec hi, std::vector<int> counts);

  /// Same box on every axis.
  static Grid cube(int dims, double lo, double hi, int count);

  int dims() const noexcept { return static_cast<int>(counts_.size()); }
  const Vec& lo() const noexcept { return lo_; }
  const Vec& hi() const noexcept { return hi_; }
  const std::vector<int>& counts() const noexcept { return counts_; }
  const Vec& spacing() const noexcept { return dx_; }
  std::size_t size() const noexcept { return size_; }
  const std::vector<std::size_t>& strides() const noexcept { return strides_; }

  double coord(int axis, int i) const noexcept { return (i - origin_[axis]) * dx_[axis]; }
  std::vector<int> unravel(std::size_t flat) const;
  std::size_t ravel(std::span<const int> idx) const;
  Vec node(std::size_t flat) const;
  void node(std::size_t flat, std::span<double> out) const;
  std::size_t origin_index() const { return ravel(origin_); }
  const std::vector<int>& origin_node() const noexcept { return origin_; }

  bool on_boundary(std::size_t flat) const;
  bool inside_box(std::span<const double> x) const;
  double max_cell_diameter() const;
  double min_spacing() const;

  bool same_as(const Grid& other, double tol = 1e-12) const;
  nlohmann::json to_json() const;

 private:
  Vec lo_, hi_, dx_;
  std::vector<int> counts_, origin_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

enum class Transform { kruzhkov, raw };

std::string to_string(Transform t);

/// Solver bookkeeping attached to a field.
struct FieldMetadata {
  double dt = 0.0;
  int iterations = 0;
  double residual = 0.0;  // sup-change of the last sweep
  double tol = 0.0;
  bool converged = false;
  double exterior_value = 1.0;
};

/// Nodal values of a candidate solution on a grid, row-major with axis 0
/// fastest.
class ValueField {
 public:
  /// Kruzhkov fields must lie in [0,1] (to 1e-12); throws ConfigError otherwise.
  ValueField(Grid grid, std::vector<double> values, Transform transform, FieldMetadata meta = {});

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  Transform transform() const noexcept { return transform_; }
  const FieldMetadata& metadata() const noexcept { return meta_; }
  double exterior_value() const noexcept { return meta_.exterior_value; }
  double at(std::size_t flat) const { return values_[flat]; }
  double origin_value() const { return values_[grid_.origin_index()]; }

  /// Multilinear interpolation; exterior_value outside the box.
  double interpolate(std::span<const double> x) const;

  /// Copy with replaced values (same grid, transform and metadata).
  ValueField with_values(std::vector<double> values) const;

 private:
  Grid grid_;
  std::vector<double> values_;
  Transform transform_;
  FieldMetadata meta_;
};

/// Multilinear interpolation of nodal `values` on `grid`; `exterior` outside.
double interpolate(const Grid& grid, std::span<const double> values, std::span<const double> x, double exterior);

/// Field CSV: a header row "n_axes,counts...,lo...,hi...,transform" followed by
/// one row per node "i1..iN,x1..xN,value" with 17 significant digits.
void write_field_csv(std::ostream& os, const ValueField& field);
void write_field_csv(const std::string& path, const ValueField& field);
ValueField read_field_csv(std::istream& is);
ValueField read_field_csv(const std::string& path);

}  // namespace zubov
