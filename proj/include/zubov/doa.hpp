#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "zubov/grid.hpp"

namespace zubov {

/// Nodes of the extracted robust domain of attraction: the face-connected
/// component of {v < 1 - epsilon} containing the origin.
struct DoaMask {
  Grid grid;
  std::vector<char> inside;
  double epsilon = 0.01;
  bool touches_boundary = false;

  bool at(std::size_t flat) const { return inside[flat] != 0; }
  std::size_t count() const;
};

/// Flood fill from the origin node. Throws DomainError when the origin itself
/// fails the threshold.
DoaMask extract_doa(const ValueField& field, double epsilon = 0.01);

/// Mask of the nodes where `predicate` holds (not flood filled).
DoaMask mask_from_predicate(const Grid& grid, const std::function<bool(std::span<const double>)>& predicate);

struct Polyline {
  std::vector<std::array<double, 2>> points;
  bool closed = false;
};

/// Marching squares on a 2-D field with linear edge interpolation. Saddle
/// cells are resolved by comparing the cell average with the level. Output
/// order follows the row-major order of each polyline's first cell.
std::vector<Polyline> contour2d(const ValueField& field, double level);

struct RegionDistance {
  double hausdorff_cells = 0.0;
  double symmetric_difference_fraction = 0.0;
};

/// Hausdorff distance (in index units) and symmetric difference (as a
/// fraction of the reference node count) between the mask and the nodes
/// satisfying `reference`.
RegionDistance region_distance(const DoaMask& mask, const std::function<bool(std::span<const double>)>& reference);
RegionDistance region_distance(const DoaMask& a, const DoaMask& b);

/// Rows "i1..iN,inside".
void write_mask_csv(std::ostream& os, const DoaMask& mask);
/// Rows "polyline_id,vertex_index,x,y".
void write_contours_csv(std::ostream& os, const std::vector<Polyline>& lines);

}  // namespace zubov
