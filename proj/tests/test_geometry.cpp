#include <doctest.h>

#include <array>
#include <random>

#include "intman/errors.hpp"
#include "intman/geometry.hpp"

using namespace intman;

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

// Center line of a straight lane across the 2.8 m square, right-hand
// traffic, two lanes per travel direction 0.7 m wide.
Segment centerline(int lane) {
  const double h = 1.4;
  const double off = lane / 4 == 0 ? 0.35 : 1.05;
  switch (lane % 4) {
    case 0: return {off, -h, off, h};     // north
    case 1: return {-h, -off, h, -off};   // east
    case 2: return {-off, h, -off, -h};   // south
    default: return {h, off, -h, off};    // west
  }
}

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

bool segments_intersect(const Segment& a, const Segment& b) {
  const double d1 = cross(a.x1 - a.x0, a.y1 - a.y0, b.x0 - a.x0, b.y0 - a.y0);
  const double d2 = cross(a.x1 - a.x0, a.y1 - a.y0, b.x1 - a.x0, b.y1 - a.y0);
  const double d3 = cross(b.x1 - b.x0, b.y1 - b.y0, a.x0 - b.x0, a.y0 - b.y0);
  const double d4 = cross(b.x1 - b.x0, b.y1 - b.y0, a.x1 - b.x0, a.y1 - b.y0);
  return d1 * d2 < 0 && d3 * d4 < 0;
}

}  // namespace

TEST_CASE("default warehouse geometry dimensions") {
  const LaneGeometry g = default_warehouse_geometry();
  CHECK(g.num_lanes == 8);
  for (int l = 0; l < 8; ++l) {
    CHECK(g.approach_length[l] == 7.0);
    CHECK(g.intersection_span[l] == doctest::Approx(2.8));
    CHECK(g.lane_speed_limit[l] == 1.5);
  }
}

TEST_CASE("conflict table agrees with lane centre-line crossings") {
  const LaneGeometry g = default_warehouse_geometry();
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      const int expect = a == b ? 0 : (segments_intersect(centerline(a), centerline(b)) ? -1 : 1);
      CHECK(conflict_value(g, a, b) == expect);
    }
}

TEST_CASE("conflict examples") {
  const LaneGeometry g = default_warehouse_geometry();
  CHECK(conflict_value(g, 1, 1) == 0);
  CHECK(conflict_value(g, 0, 1) == -1);  // north vs east
  CHECK(conflict_value(g, 0, 4) == 1);   // both northbound
}

TEST_CASE("each default lane conflicts with exactly four others") {
  const LaneGeometry g = default_warehouse_geometry();
  for (int a = 0; a < 8; ++a) {
    int n = 0;
    for (int b = 0; b < 8; ++b) n += conflict_value(g, a, b) == -1;
    CHECK(n == 4);
  }
}

TEST_CASE("conflict symmetry on random geometries") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 10);
    const LaneGeometry g = make_geometry(m, {7.0}, {2.8}, {1.5});
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) CHECK(conflict_value(g, a, b) == conflict_value(g, b, a));
  }
}

TEST_CASE("heterogeneous speed pattern") {
  const auto v = speed_limits(SpeedPattern::Heterogeneous, 8);
  const std::array<double, 8> expect{1.5, 1.0, 1.0, 1.5, 1.5, 1.0, 1.0, 1.5};
  for (int l = 0; l < 8; ++l) CHECK(v[l] == expect[l]);
}

TEST_CASE("invalid geometry is rejected") {
  const LaneGeometry g = default_warehouse_geometry();
  CHECK_THROWS_AS(conflict_value(g, 8, 0), InputError);
  CHECK_THROWS_AS(conflict_value(g, -1, 0), InputError);
  LaneGeometry bad = g;
  bad.conflict[1] = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = g;
  bad.conflict[1] = -bad.conflict[8];
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = g;
  bad.approach_length[3] = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  CHECK_THROWS_AS(make_geometry(2, {7.0}, {2.8}, {1.5}, std::vector<int>{0, 1, -1, 0}), InputError);
}
