#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "zubov/error.hpp"
#include "zubov/grid.hpp"

using namespace zubov;

TEST_CASE("node coordinates are measured from the origin node") {
  const Grid g({-1.0, -2.0}, {1.0, 2.0}, {5, 9});
  CHECK(g.size() == 45);
  CHECK(g.spacing() == Vec{0.5, 0.5});
  CHECK(g.node(g.origin_index()) == Vec{0.0, 0.0});
  for (int i = 0; i < 5; ++i) CHECK(g.coord(0, i) == -g.coord(0, 4 - i));
  CHECK(g.max_cell_diameter() == doctest::Approx(std::sqrt(0.5)));
  CHECK(g.min_spacing() == 0.5);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g.ravel(g.unravel(k)) == k);
  CHECK(g.on_boundary(0));
  CHECK_FALSE(g.on_boundary(g.origin_index()));
}

TEST_CASE("invalid grids are rejected") {
  CHECK_THROWS_AS(Grid({0.1}, {1.0}, {5}), ConfigError);   // origin outside
  CHECK_THROWS_AS(Grid({-1.0}, {2.0}, {5}), ConfigError);  // origin between nodes
  CHECK_THROWS_AS(Grid({-1.0}, {1.0}, {2}), ConfigError);
  CHECK_THROWS_AS(Grid::cube(9, -1, 1, 3), ConfigError);
}

TEST_CASE("interpolation reproduces multilinear functions") {
  const Grid g({-1.0, -1.0, -2.0}, {1.0, 3.0, 2.0}, {5, 9, 11});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-1, 1);
  const double c0 = c(rng), c1 = c(rng), c2 = c(rng), c3 = c(rng), c01 = c(rng), c012 = c(rng);
  auto f = [&](const Vec& x) { return c0 + c1 * x[0] + c2 * x[1] + c3 * x[2] + c01 * x[0] * x[1] + c012 * x[0] * x[1] * x[2]; };
  std::vector<double> values(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) values[k] = f(g.node(k));
  const ValueField field(g, values, Transform::raw, {.exterior_value = -7.0});
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec x{-1 + 2 * u(rng), -1 + 4 * u(rng), -2 + 4 * u(rng)};
    CHECK(field.interpolate(x) == doctest::Approx(f(x)).epsilon(1e-12));
  }
  for (std::size_t k = 0; k < g.size(); k += 7) CHECK(field.interpolate(g.node(k)) == doctest::Approx(values[k]).epsilon(1e-14));
  CHECK(field.interpolate(Vec{1.0, 3.0, 2.0}) == doctest::Approx(f({1.0, 3.0, 2.0})));
  CHECK(field.interpolate(Vec{1.01, 0.0, 0.0}) == -7.0);
}

TEST_CASE("kruzhkov fields must stay in the unit interval") {
  const Grid g = Grid::cube(1, -1, 1, 3);
  CHECK_THROWS_AS(ValueField(g, {0.5, 0.0, 1.5}, Transform::kruzhkov), ConfigError);
  CHECK_NOTHROW(ValueField(g, {0.5, 0.0, 1.5}, Transform::raw));
  CHECK_THROWS_AS(ValueField(g, {0.5, 0.0}, Transform::raw), ConfigError);
}

TEST_CASE("field CSV round-trips bit for bit") {
  const Grid g({-1.0, -0.5}, {1.0, 1.0}, {9, 7});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> values(g.size());
  for (auto& v : values) v = u(rng);
  const ValueField field(g, values, Transform::kruzhkov);
  std::stringstream ss;
  write_field_csv(ss, field);
  const ValueField back = read_field_csv(ss);
  CHECK(back.grid().same_as(g, 0.0));
  CHECK(back.transform() == Transform::kruzhkov);
  CHECK(back.values() == values);
}

TEST_CASE("malformed field CSV is rejected") {
  std::stringstream ss("2,3,3,-1,-1,1,1,kruzhkov\n0,0,-1,-1,0.5\n");
  CHECK_THROWS_AS(read_field_csv(ss), ConfigError);
}
