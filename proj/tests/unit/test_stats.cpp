#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fieldrecon/random.hpp"
#include "fieldrecon/stats.hpp"

using namespace fieldrecon;

namespace {

MetricSamples samples(std::vector<std::vector<double>> groups) {
  MetricSamples ms;
  for (std::size_t i = 0; i < groups.size(); ++i) ms.labels.push_back("g" + std::to_string(i));
  ms.groups = std::move(groups);
  return ms;
}

}  // namespace

TEST_CASE("kruskal-wallis fixtures") {
  // Mean ranks 2, 5, 8 with N = 9: 12/90 * 3 * (4 + 25 + 64) - 30 = 7.2.
  const auto r = kruskal_wallis(samples({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}));
  CHECK(r.h() == doctest::Approx(7.2).epsilon(1e-12));
  CHECK(r.p() == doctest::Approx(std::exp(-3.6)).epsilon(1e-10));
  CHECK(r.eta_squared() == doctest::Approx((7.2 - 2.0) / 6.0));

  const auto same = kruskal_wallis(samples({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  CHECK(same.h() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.p() == doctest::Approx(1.0));

  // Ties: reference value from scipy.stats.kruskal.
  const auto tied = kruskal_wallis(samples({{1, 2, 2, 3}, {2, 5, 6}, {3, 3, 9, 9}}));
  CHECK(tied.h() == doctest::Approx(4.913112164297004).epsilon(1e-12));
  CHECK(std::abs(tied.p() - 0.08572968915584035) < 1e-10);
  CHECK_FALSE(tied.has_eta_squared());
  CHECK_THROWS_AS((void)tied.eta_squared(), UnequalGroupsError);
}

TEST_CASE("eta squared reproduces published effect sizes") {
  CHECK(std::round(eta_squared(70.67, 3, 100) * 100) / 100 == doctest::Approx(0.23));
  CHECK(std::round(eta_squared(169.66, 3, 100) * 100) / 100 == doctest::Approx(0.56));
  // As printed, the formula gives 0.966 and 0.088 for the last two rows.
  CHECK(eta_squared(288.95, 3, 100) == doctest::Approx(286.95 / 297.0));
  CHECK(eta_squared(28.24, 3, 100) == doctest::Approx(26.24 / 297.0));
}

TEST_CASE("holm adjustment") {
  const std::vector<double> p{0.01, 0.03, 0.04};
  const auto adj = holm_adjust(p);
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.06));
  CHECK(adj[2] == doctest::Approx(0.06));

  const std::vector<double> shuffled{0.04, 0.5, 0.01, 0.03};
  const auto a2 = holm_adjust(shuffled);
  CHECK(a2[2] == doctest::Approx(0.04));
  CHECK(a2[3] == doctest::Approx(0.09));
  CHECK(a2[0] == doctest::Approx(0.09));
  CHECK(a2[1] == doctest::Approx(0.5));

  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> ps(1 + uniform_index(rng, 10));
    for (auto& v : ps) v = uniform01(rng);
    const auto a = holm_adjust(ps);
    std::vector<std::size_t> order(ps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return ps[x] < ps[y]; });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(a[i] >= ps[i]);
      CHECK(a[i] <= 1.0);
      if (i > 0) CHECK(a[order[i]] >= a[order[i - 1]]);
    }
  }
}

TEST_CASE("dunn post-hoc") {
  const auto same = dunn_posthoc(samples({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  REQUIRE(same.pairs.size() == 3);
  for (const auto& pc : same.pairs) {
    CHECK(pc.z == 0.0);
    CHECK(pc.p_adjusted == doctest::Approx(1.0));
  }

  const auto two = dunn_posthoc(samples({{1, 2, 3}, {7, 8, 9}}));
  REQUIRE(two.pairs.size() == 1);
  // Mean ranks 2 and 5, N = 6, no ties.
  const double z = (2.0 - 5.0) / std::sqrt(6.0 * 7.0 / 12.0 * (1.0 / 3 + 1.0 / 3));
  CHECK(two.pairs[0].z == doctest::Approx(z).epsilon(1e-12));
  CHECK(two.pairs[0].z == doctest::Approx(-1.9639610121239317).epsilon(1e-12));
  CHECK(std::abs(two.pairs[0].p_raw - 0.04953461343562668) < 1e-10);
  CHECK(two.pairs[0].p_adjusted == two.pairs[0].p_raw);
  CHECK(two.pairs[0].rank_biserial == doctest::Approx(-1.0));
}

TEST_CASE("rank biserial fixtures") {
  const std::vector<double> a{1, 2}, b{3, 4};
  CHECK(rank_biserial(a, b) == doctest::Approx(-1.0));
  CHECK(rank_biserial(b, a) == doctest::Approx(1.0));
  const std::vector<double> c{1, 4}, d{2, 3};
  CHECK(rank_biserial(c, d) == doctest::Approx(0.0));

  std::vector<double> lo(100), hi(100);
  for (int i = 0; i < 100; ++i) {
    lo[i] = i;
    hi[i] = 1000 + i;
  }
  CHECK(rank_biserial(hi, lo) == doctest::Approx(1.0));
}

TEST_CASE("H is invariant under monotone transforms") {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> g(3), tg(3);
    for (auto i = 0; i < 3; ++i) {
      for (int j = 0; j < 15; ++j) {
        const double v = std::round(uniform(rng, 0, 20));  // with ties
        g[i].push_back(v);
        tg[i].push_back(std::exp(v / 5.0) + 3.0);
      }
    }
    CHECK(kruskal_wallis(samples(g)).h() ==
          doctest::Approx(kruskal_wallis(samples(tg)).h()).epsilon(1e-12));
  }
}

TEST_CASE("quantile uses linear interpolation") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + uniform_index(rng, 30));
    for (auto& x : v) x = uniform(rng, -5, 5);
    const double q = uniform01(rng);
    auto s = v;
    std::sort(s.begin(), s.end());
    // 1-based Hyndman-Fan type 7.
    const double h = (s.size() - 1) * q + 1;
    const auto fl = static_cast<std::size_t>(std::floor(h));
    const double expected =
        fl >= s.size() ? s.back() : s[fl - 1] + (h - fl) * (s[fl] - s[fl - 1]);
    CHECK(std::abs(quantile(v, q) - expected) < 1e-9);
  }
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("compare methods") {
  Rng rng(10);
  std::vector<MetricSet> a, b, shifted;
  for (int i = 0; i < 100; ++i) {
    const MetricSet m{uniform(rng, 1, 3), uniform(rng, 0.5, 1), uniform(rng, 0, 1), uniform(rng, 3, 8)};
    a.push_back(m);
    b.push_back(m);
    shifted.push_back({m.rmse + 10, m.mae + 10, m.r2 + 10, m.delta_max + 10});
  }
  const auto same = compare_methods({"x", "y"}, {a, b});
  for (const auto& mc : same.metrics) {
    CHECK(mc.omnibus.p() >= 0.05);
    CHECK_FALSE(mc.posthoc.has_value());
  }

  const auto diff = compare_methods({"x", "z"}, {a, shifted});
  for (const auto& mc : diff.metrics) {
    CHECK(mc.omnibus.p() < 0.05);
    REQUIRE(mc.posthoc.has_value());
    CHECK(mc.posthoc->pairs.front().rank_biserial == doctest::Approx(-1.0));
  }

  std::vector<double> rm;
  for (const auto& m : a) rm.push_back(m.rmse);
  std::sort(rm.begin(), rm.end());
  const double med = 0.5 * (rm[49] + rm[50]);
  const double q1 = rm[24] + 0.75 * (rm[25] - rm[24]);
  const double q3 = rm[74] + 0.25 * (rm[75] - rm[74]);
  CHECK(std::abs(same.metrics[0].medians[0] - med) < 1e-9);
  CHECK(std::abs(same.metrics[0].iqrs[0] - (q3 - q1)) < 1e-9);

  CHECK(format_report(diff).find("Dunn") != std::string::npos);
  CHECK_THROWS(compare_methods({"x"}, {a}));
}
