#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fieldrecon/core.hpp"
#include "test_util.hpp"

using namespace fieldrecon;

TEST_CASE("distance examples") {
  CHECK(distance(QueryPoint{0, 0}, QueryPoint{3, 4}, CoordinateSystem::Euclidean) ==
        doctest::Approx(5.0).epsilon(1e-15));
  CHECK(distance(QueryPoint{0, 0}, QueryPoint{0, 0}, CoordinateSystem::Geographic) == 0.0);

  // Antipodal along the equator: haversine term is sin^2(pi/2) = 1, so the
  // distance is 2 R asin(1) = pi R.
  const double d = distance(QueryPoint{0, 0}, QueryPoint{0, 180}, CoordinateSystem::Geographic);
  CHECK(d == doctest::Approx(20015.086796020572).epsilon(1e-12));
  CHECK(d == doctest::Approx(std::numbers::pi * kEarthRadiusKm).epsilon(1e-12));
}

TEST_CASE("distance is a metric on random triples") {
  Rng rng(7);
  for (const auto cs : {CoordinateSystem::Euclidean, CoordinateSystem::Geographic}) {
    for (int t = 0; t < 500; ++t) {
      const QueryPoint a{uniform(rng, -90, 90), uniform(rng, -180, 180)};
      const QueryPoint b{uniform(rng, -90, 90), uniform(rng, -180, 180)};
      const QueryPoint c{uniform(rng, -90, 90), uniform(rng, -180, 180)};
      const double ab = distance(a, b, cs);
      CHECK(ab == distance(b, a, cs));
      CHECK(ab > 0.0);
      CHECK(distance(a, a, cs) == 0.0);
      CHECK(ab <= distance(a, c, cs) + distance(c, b, cs) + 1e-9);
    }
  }
}

TEST_CASE("bounding box") {
  const ClimatePointCloud single({ClimatePoint{0, 0, 1}});
  const auto b1 = bounding_box(single);
  CHECK(b1.lat_min == 0);
  CHECK(b1.lat_max == 0);
  CHECK(b1.lon_min == 0);
  CHECK(b1.lon_max == 0);

  const ClimatePointCloud two({ClimatePoint{1, 2, 0}, ClimatePoint{3, -1, 0}});
  const auto b2 = bounding_box(two);
  CHECK(b2.lat_min == 1);
  CHECK(b2.lat_max == 3);
  CHECK(b2.lon_min == -1);
  CHECK(b2.lon_max == 2);

  Rng rng(3);
  const auto pc = testing::random_cloud(rng, 100);
  const auto box = bounding_box(pc);
  CHECK(box.lat_min >= -5);
  CHECK(box.lat_max <= 5);
  CHECK(box.lon_min >= -5);
  CHECK(box.lon_max <= 5);
  bool lat_lo_hit = false, lat_hi_hit = false, lon_lo_hit = false, lon_hi_hit = false;
  for (const auto& p : pc) {
    CHECK(box.contains(p.lat(), p.lon()));
    lat_lo_hit |= p.lat() == box.lat_min;
    lat_hi_hit |= p.lat() == box.lat_max;
    lon_lo_hit |= p.lon() == box.lon_min;
    lon_hi_hit |= p.lon() == box.lon_max;
  }
  CHECK((lat_lo_hit && lat_hi_hit && lon_lo_hit && lon_hi_hit));
}

TEST_CASE("cloud construction validates input") {
  CHECK_THROWS_AS(ClimatePointCloud({}), std::invalid_argument);
  CHECK_THROWS_AS(ClimatePoint(0, 0, std::nan("")), InvalidPointError);
  CHECK_THROWS_AS(ClimatePoint(0, 0, INFINITY), InvalidPointError);
  CHECK_THROWS_AS(ClimatePoint(91, 0, 1), InvalidPointError);
  CHECK_THROWS_AS(QueryPoint(0, -181), InvalidPointError);
  CHECK_THROWS_AS(ClimatePointCloud({ClimatePoint{1, 1, 0}, ClimatePoint{2, 2, 0},
                                     ClimatePoint{1, 1 + 5e-10, 3}}),
                  DuplicateCoordinateError);
  // Apart by more than the tolerance.
  CHECK_NOTHROW(ClimatePointCloud({ClimatePoint{1, 1, 0}, ClimatePoint{1, 1 + 1e-8, 0}}));

  try {
    ClimatePointCloud({ClimatePoint{5, 5, 0}, ClimatePoint{1, 1, 0}, ClimatePoint{5, 5, 2}});
    FAIL("expected duplicate error");
  } catch (const DuplicateCoordinateError& e) {
    CHECK(std::string(e.what()).find("points 0 and 2") != std::string::npos);
  }
}

TEST_CASE("coordinate system names round trip") {
  CHECK(coordinate_system_from_string("euclidean") == CoordinateSystem::Euclidean);
  CHECK(coordinate_system_from_string(to_string(CoordinateSystem::Geographic)) ==
        CoordinateSystem::Geographic);
  CHECK_THROWS(coordinate_system_from_string("utm"));
}
