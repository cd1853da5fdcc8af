#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fieldrecon/idw.hpp"
#include "test_util.hpp"

using namespace fieldrecon;

namespace {

std::vector<double> run(const ClimatePointCloud& pc, int k, double power,
                        std::vector<QueryPoint> targets,
                        CoordinateSystem cs = CoordinateSystem::Euclidean) {
  const KdIndex idx(pc);
  return idw_reconstruct(pc, idx, IdwParams(k, power), targets, cs);
}

}  // namespace

TEST_CASE("idw examples") {
  const ClimatePointCloud two({ClimatePoint{0, 0, 10}, ClimatePoint{1, 0, 20}});
  CHECK(run(two, 2, 2.0, {QueryPoint{0.5, 0}})[0] == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(run(two, 2, 2.0, {QueryPoint{0, 0}})[0] == 10.0);

  // Weights 1/0.5^2, 1/4.25, 1/2.5^2 evaluated independently (see oracle below).
  const ClimatePointCloud three(
      {ClimatePoint{0, 0, 0}, ClimatePoint{2, 0, 30}, ClimatePoint{0, 3, 12}});
  const double got = run(three, 3, 2.0, {QueryPoint{0, 0.5}})[0];
  CHECK(std::abs(got - 2.0428265524625266) < 1e-9);

  const double w[] = {1 / 0.25, 1 / 4.25, 1 / 6.25};
  const double oracle = (0 * w[0] + 30 * w[1] + 12 * w[2]) / (w[0] + w[1] + w[2]);
  CHECK(std::abs(got - oracle) < 1e-12);
}

TEST_CASE("idw parameter bounds") {
  CHECK_THROWS(IdwParams(0, 2.0));
  CHECK_THROWS(IdwParams(51, 2.0));
  CHECK_THROWS(IdwParams(5, 0.0));
  CHECK_THROWS(IdwParams(5, 5.0001));
  CHECK_NOTHROW(IdwParams(1, 1e-7));
  CHECK_NOTHROW(IdwParams(50, 5.0));
}

TEST_CASE("idw is a convex combination of the k neighbours") {
  Rng rng(21);
  const auto pc = testing::random_cloud(rng, 200);
  const KdIndex idx(pc);
  for (int t = 0; t < 200; ++t) {
    const auto q = testing::random_query(rng);
    const int k = 1 + static_cast<int>(uniform_index(rng, 50));
    const double p = uniform(rng, 1e-7, 5.0);
    const double v = idw_reconstruct(pc, idx, IdwParams(k, p), std::vector{q},
                                     CoordinateSystem::Euclidean)[0];
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& n : idx.knn(q, static_cast<std::size_t>(k), CoordinateSystem::Euclidean)) {
      lo = std::min(lo, pc[n.index].value());
      hi = std::max(hi, pc[n.index].value());
    }
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("idw tiny power approaches the neighbour mean") {
  Rng rng(4);
  const auto pc = testing::random_cloud(rng, 80);
  const KdIndex idx(pc);
  for (int t = 0; t < 50; ++t) {
    const auto q = testing::random_query(rng, -4.0, 4.0);
    const double v = idw_reconstruct(pc, idx, IdwParams(10, 1e-7), std::vector{q},
                                     CoordinateSystem::Euclidean)[0];
    double mean = 0.0;
    for (const auto& n : idx.knn(q, 10, CoordinateSystem::Euclidean)) mean += pc[n.index].value();
    mean /= 10.0;
    CHECK(std::abs(v - mean) < 1e-5);
  }
}

TEST_CASE("idw translation invariance and value affine equivariance") {
  Rng rng(8);
  const auto pc = testing::random_cloud(rng, 150);
  std::vector<QueryPoint> targets;
  for (int t = 0; t < 100; ++t) targets.push_back(testing::random_query(rng));

  const double dlat = 12.5, dlon = -33.25;
  std::vector<ClimatePoint> shifted, affine;
  for (const auto& p : pc) {
    shifted.emplace_back(p.lat() + dlat, p.lon() + dlon, p.value());
    affine.emplace_back(p.lat(), p.lon(), -2.5 * p.value() + 7.0);
  }
  std::vector<QueryPoint> shifted_targets;
  for (const auto& q : targets) shifted_targets.emplace_back(q.lat() + dlat, q.lon() + dlon);

  const auto base = run(pc, 12, 2.3, targets);
  const auto moved = run(ClimatePointCloud(shifted), 12, 2.3, shifted_targets);
  const auto scaled = run(ClimatePointCloud(affine), 12, 2.3, targets);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(std::abs(base[i] - moved[i]) < 1e-9);
    CHECK(std::abs(-2.5 * base[i] + 7.0 - scaled[i]) < 1e-9);
  }
}

TEST_CASE("idw reproduces nodes in both coordinate systems") {
  Rng rng(17);
  const auto pc = testing::random_cloud(rng, 50);
  const auto locs = pc.locations();
  for (const auto cs : {CoordinateSystem::Euclidean, CoordinateSystem::Geographic}) {
    const auto v = run(pc, 7, 1.5, locs, cs);
    for (std::size_t i = 0; i < pc.size(); ++i) CHECK(v[i] == pc[i].value());
  }
}
