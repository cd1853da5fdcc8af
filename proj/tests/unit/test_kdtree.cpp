#include <doctest.h>

#include "fieldrecon/kdtree.hpp"
#include "test_util.hpp"

using namespace fieldrecon;

TEST_CASE("singleton and cardinality") {
  const ClimatePointCloud single({ClimatePoint{1, 1, 0}});
  const KdIndex one(single);
  CHECK(one.depth() == 0);
  CHECK(one.size() == 1);

  Rng rng(11);
  const auto pc = testing::random_cloud(rng, 1000);
  const KdIndex idx(pc);
  CHECK(idx.size() == 1000);
  CHECK(idx.depth() > 0);
}

TEST_CASE("knn small cases") {
  Rng rng(5);
  const auto pc = testing::random_cloud(rng, 100);
  const KdIndex idx(pc);
  const auto hit = idx.knn(pc[42].location(), 1, CoordinateSystem::Euclidean);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].index == 42);
  CHECK(hit[0].distance == 0.0);

  const auto all = idx.knn(QueryPoint{0, 0}, pc.size(), CoordinateSystem::Euclidean);
  CHECK(all == knn_brute_force(pc, QueryPoint{0, 0}, pc.size(), CoordinateSystem::Euclidean));
  CHECK(idx.knn(QueryPoint{0, 0}, 500, CoordinateSystem::Euclidean).size() == 100);
  CHECK_THROWS(idx.knn(QueryPoint{0, 0}, 0, CoordinateSystem::Euclidean));
}

TEST_CASE("ties broken by lower index") {
  // Four nodes equidistant from the origin.
  const ClimatePointCloud pc({ClimatePoint{1, 0, 0}, ClimatePoint{0, 1, 0}, ClimatePoint{-1, 0, 0},
                              ClimatePoint{0, -1, 0}, ClimatePoint{3, 3, 0}});
  const KdIndex idx(pc, 1);
  const auto r = idx.knn(QueryPoint{0, 0}, 3, CoordinateSystem::Euclidean);
  REQUIRE(r.size() == 3);
  CHECK(r[0].index == 0);
  CHECK(r[1].index == 1);
  CHECK(r[2].index == 2);
}

TEST_CASE("knn matches brute force for random clouds") {
  Rng rng(123);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 300);
    const bool global = trial % 2 == 1;
    const auto pc = global ? testing::random_cloud(rng, n, -89, 89, -179, 179)
                           : testing::random_cloud(rng, n);
    const KdIndex idx(pc, 1 + uniform_index(rng, 20));
    for (int q = 0; q < 10; ++q) {
      const QueryPoint qp = global ? QueryPoint{uniform(rng, -90, 90), uniform(rng, -180, 180)}
                                   : testing::random_query(rng);
      for (const std::size_t k : {std::size_t{1}, std::size_t{5}, n}) {
        for (const auto cs : {CoordinateSystem::Euclidean, CoordinateSystem::Geographic}) {
          CHECK(idx.knn(qp, k, cs) == knn_brute_force(pc, qp, k, cs));
        }
      }
    }
  }
}

TEST_CASE("geographic knn near poles and antimeridian") {
  std::vector<ClimatePoint> pts;
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    pts.emplace_back(uniform(rng, 80, 90), uniform(rng, -180, 180), 0.0);
  }
  for (int i = 0; i < 100; ++i) {
    const double lon = uniform01(rng) < 0.5 ? uniform(rng, 175, 180) : uniform(rng, -180, -175);
    pts.emplace_back(uniform(rng, -10, 10), lon, 0.0);
  }
  const ClimatePointCloud pc(std::move(pts));
  const KdIndex idx(pc);
  for (const QueryPoint q : {QueryPoint{90, 0}, QueryPoint{89.5, 179.9}, QueryPoint{0, 180},
                             QueryPoint{0, -179.99}, QueryPoint{5, 177}}) {
    for (const std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{50}}) {
      CHECK(idx.knn(q, k, CoordinateSystem::Geographic) ==
            knn_brute_force(pc, q, k, CoordinateSystem::Geographic));
    }
  }
}
