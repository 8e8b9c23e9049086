#include <cmath>
#include <sstream>

#include "doctest.h"
#include "zubov/builtins.hpp"
#include "zubov/doa.hpp"
#include "zubov/error.hpp"

using namespace zubov;

namespace {

ValueField sample(const Grid& g, Transform t, const std::function<double(const Vec&)>& f) {
  std::vector<double> v(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) v[k] = f(g.node(k));
  return ValueField(g, v, t);
}

// 1 - e^{-V} of the lift2d closed form, 1 outside the open square.
double lift_kruzhkov(const Vec& x) {
  if (std::abs(x[0]) >= 1 || std::abs(x[1]) >= 1) return 1.0;
  return -std::expm1(-*closed_form_value("lift2d", x));
}

bool in_square(std::span<const double> x) { return std::abs(x[0]) < 1 && std::abs(x[1]) < 1; }

}  // namespace

TEST_CASE("a zero field is all inside and touches the box") {
  const Grid g = Grid::cube(2, -1, 1, 11);
  const auto m = extract_doa(sample(g, Transform::kruzhkov, [](const Vec&) { return 0.0; }), 0.01);
  CHECK(m.count() == g.size());
  CHECK(m.touches_boundary);
}

TEST_CASE("extraction preconditions") {
  const Grid g = Grid::cube(1, -1, 1, 5);
  const auto one = sample(g, Transform::kruzhkov, [](const Vec&) { return 1.0; });
  CHECK_THROWS_AS(extract_doa(one, 0.01), DomainError);
  const auto zero = sample(g, Transform::kruzhkov, [](const Vec&) { return 0.0; });
  CHECK_THROWS_AS(extract_doa(zero, 0.0), ConfigError);
  CHECK_THROWS_AS(extract_doa(zero, 1.0), ConfigError);
  CHECK_THROWS_AS(extract_doa(sample(g, Transform::raw, [](const Vec&) { return 0.0; }), 0.01), ConfigError);
}

TEST_CASE("flood fill does not leak through corners") {
  const Grid g = Grid::cube(2, -1, 1, 5);
  // Face neighbours of the origin are blocked, diagonal neighbours are open.
  const auto f = sample(g, Transform::kruzhkov, [](const Vec& x) {
    const double s = std::abs(x[0]) + std::abs(x[1]);
    return s == 0.5 ? 1.0 : 0.0;
  });
  const auto m = extract_doa(f, 0.01);
  CHECK(m.count() == 1);
  CHECK(m.at(g.origin_index()));
  CHECK_FALSE(m.touches_boundary);
}

TEST_CASE("closed-form lift2d mask") {
  const Grid g = Grid::cube(2, -1.2, 1.2, 121);
  const auto m = extract_doa(sample(g, Transform::kruzhkov, lift_kruzhkov), 0.01);
  CHECK_FALSE(m.touches_boundary);
  const auto d = region_distance(m, in_square);
  MESSAGE("closed-form mask hausdorff " << d.hausdorff_cells << " cells");
  CHECK(d.symmetric_difference_fraction < 0.1);
  // Every mask node is in the square.
  for (std::size_t k = 0; k < g.size(); ++k)
    if (m.at(k)) CHECK(in_square(g.node(k)));
}

TEST_CASE("extracted sets shrink as epsilon grows") {
  const Grid g = Grid::cube(2, -1.2, 1.2, 61);
  const auto f = sample(g, Transform::kruzhkov, lift_kruzhkov);
  const double eps[] = {0.001, 0.01, 0.05, 0.2, 0.5, 0.9};
  for (int i = 0; i + 1 < 6; ++i) {
    const auto big = extract_doa(f, eps[i]), small = extract_doa(f, eps[i + 1]);
    CHECK(small.count() <= big.count());
    for (std::size_t k = 0; k < g.size(); ++k)
      if (small.at(k)) CHECK(big.at(k));
  }
}

TEST_CASE("region distance of a mask to itself and to a shifted copy") {
  const Grid g = Grid::cube(2, -2, 2, 41);
  auto square = [](double shift) {
    return [shift](std::span<const double> x) { return std::abs(x[0] - shift) < 1.0 && std::abs(x[1]) < 1.0; };
  };
  const auto m = mask_from_predicate(g, square(0.0));
  const auto self = region_distance(m, m);
  CHECK(self.hausdorff_cells == 0.0);
  CHECK(self.symmetric_difference_fraction == 0.0);

  const auto shifted = region_distance(m, square(0.1));
  CHECK(shifted.hausdorff_cells == doctest::Approx(1.0));
  const double side = static_cast<double>(m.count() > 0 ? std::lround(std::sqrt(m.count())) : 0);
  CHECK(shifted.symmetric_difference_fraction == doctest::Approx(2 * side / (side * side)));
}

TEST_CASE("contour of a paraboloid is the unit circle") {
  const Grid g = Grid::cube(2, -2, 2, 81);
  const auto f = sample(g, Transform::raw, [](const Vec& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); });
  const auto lines = contour2d(f, 0.5);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].closed);
  const double dx = g.spacing()[0];
  for (const auto& p : lines[0].points) {
    CHECK(std::abs(std::hypot(p[0], p[1]) - 1.0) <= dx);
    // On a cell edge, where the interpolant equals the level.
    const double ix = (p[0] + 2) / dx, iy = (p[1] + 2) / dx;
    const bool on_edge = std::abs(ix - std::round(ix)) < 1e-9 || std::abs(iy - std::round(iy)) < 1e-9;
    CHECK(on_edge);
    CHECK(std::abs(f.interpolate(Vec{p[0], p[1]}) - 0.5) <= 1e-9);
  }
}

TEST_CASE("constant fields have no contour") {
  const Grid g = Grid::cube(2, -1, 1, 11);
  CHECK(contour2d(sample(g, Transform::raw, [](const Vec&) { return 0.3; }), 0.5).empty());
  CHECK_THROWS_AS(contour2d(sample(Grid::cube(1, -1, 1, 5), Transform::raw, [](const Vec&) { return 0.0; }), 0.5),
                  ConfigError);
}

TEST_CASE("contours that meet the box are open") {
  const Grid g = Grid::cube(2, -1, 1, 21);
  const auto lines = contour2d(sample(g, Transform::raw, [](const Vec& x) { return x[0]; }), 0.25);
  REQUIRE(lines.size() == 1);
  CHECK_FALSE(lines[0].closed);
  for (const auto& p : lines[0].points) CHECK(p[0] == doctest::Approx(0.25));
}

TEST_CASE("mask and contour CSV layouts") {
  const Grid g = Grid::cube(1, -1, 1, 3);
  std::ostringstream os;
  write_mask_csv(os, mask_from_predicate(g, [](std::span<const double> x) { return x[0] >= 0; }));
  CHECK(os.str() == "i1,inside\n0,0\n1,1\n2,1\n");
  std::ostringstream cs;
  write_contours_csv(cs, {Polyline{{{0.5, 0.25}}, false}});
  CHECK(cs.str().rfind("polyline_id,vertex_index,x,y\n0,0,", 0) == 0);
}
