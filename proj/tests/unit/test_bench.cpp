#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fieldrecon/bench.hpp"
#include "fieldrecon/synthetic.hpp"

using namespace fieldrecon;

namespace {

ClimatePointCloud synthetic_cloud(std::size_t n, std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.n_dates = 1;
  spec.n_stations = n;
  std::vector<ClimatePoint> pts;
  for (const auto& r : synthetic_records(spec, seed)) pts.emplace_back(r.lat, r.lon, r.value());
  return ClimatePointCloud(std::move(pts));
}

struct Throwing final : Reconstructor {
  std::vector<double> reconstruct(std::span<const QueryPoint>) const override {
    throw std::runtime_error("nope");
  }
};

std::shared_ptr<const Reconstructor> fitted(Method m, const Assignment& a, const ClimatePointCloud& train) {
  const auto space = SearchSpace::for_method(m);
  return fit_reconstructor(space, a, train, train, 0, {});
}

// Type-7 percentile by sorting, written out independently.
double sorted_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("ladders and config") {
  CHECK(ladder_sizes(Ladder::Small) == std::vector<std::size_t>{10, 100, 500, 1000, 2000, 5000, 10000});
  CHECK(ladder_sizes(Ladder::Large).back() == 1000000);
  CHECK(ladder_from_string("large") == Ladder::Large);
  CHECK_THROWS_AS(ladder_from_string("huge"), std::invalid_argument);

  BenchConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.repetitions = 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.repetitions = 3;
  cfg.sizes = {10, 10};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.sizes = {};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("target sampling") {
  const auto pc = synthetic_cloud(200);
  const auto box = bounding_box(pc);
  const auto one = sample_targets(pc, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(box.contains(one[0].lat(), one[0].lon()));

  const auto many = sample_targets(pc, 10000, 4);
  double mlat = 0.0, mlon = 0.0;
  for (const auto& q : many) {
    CHECK(box.contains(q.lat(), q.lon()));
    mlat += q.lat();
    mlon += q.lon();
  }
  mlat /= 10000.0;
  mlon /= 10000.0;
  CHECK(std::abs(mlat - 0.5 * (box.lat_min + box.lat_max)) < 0.05 * (box.lat_max - box.lat_min));
  CHECK(std::abs(mlon - 0.5 * (box.lon_min + box.lon_max)) < 0.05 * (box.lon_max - box.lon_min));

  const auto again = sample_targets(pc, 10000, 4);
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK(again[i].lat() == many[i].lat());
    CHECK(again[i].lon() == many[i].lon());
  }
  CHECK_THROWS_AS(sample_targets(pc, 0, 1), std::invalid_argument);
}

TEST_CASE("rss sampler") {
  RssSampler s;
  CHECK(RssSampler::current_rss_bytes() > 0);
  s.start();
  std::vector<char> block(64 << 20, 1);
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const auto peak = s.stop();
  CHECK(block[12345] == 1);
  CHECK(peak >= (32u << 20));
  CHECK_THROWS_AS(s.stop(), std::logic_error);
}

TEST_CASE("bench runs, counts and records failures") {
  const auto pc = synthetic_cloud(300);
  BenchConfig cfg;
  cfg.sizes = {10, 100};
  cfg.repetitions = 3;
  BenchSubject idw{"idw", {fitted(Method::Idw, {8, 2.0}, pc)}, {pc}};
  BenchSubject bad{"bad", {std::make_shared<Throwing>()}, {pc}};
  std::size_t streamed = 0;
  const auto recs = run_bench(cfg, {idw, bad}, 1, [&](const BenchRecord&) { ++streamed; });
  CHECK(recs.size() == 2 * 2 * 3);
  CHECK(streamed == recs.size());
  for (const auto& r : recs) {
    if (r.method == "idw") {
      CHECK_FALSE(r.failed);
      CHECK(r.seconds > 0.0);
    } else {
      CHECK(r.failed);
    }
    CHECK(r.trial < 3);
  }
  const auto rows = summarize_bench(recs);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "idw");
  CHECK(rows[0].m == 10);
  CHECK(rows[2].failures == 3);
  CHECK(std::isnan(rows[2].time_median));
}

TEST_CASE("summary percentiles") {
  std::vector<BenchRecord> recs;
  const std::vector<double> times{0.5, 0.1, 0.9, 0.3, 0.7, 0.2, 0.4};
  for (std::size_t i = 0; i < times.size(); ++i) recs.push_back({"x", 50, i, times[i], 100 * i, false});
  for (std::size_t i = 0; i < 4; ++i) recs.push_back({"y", 50, i, 0.25, 7, false});
  const auto rows = summarize_bench(recs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].time_median == doctest::Approx(sorted_percentile(times, 0.5)));
  CHECK(rows[0].time_lo == doctest::Approx(sorted_percentile(times, 0.025)));
  CHECK(rows[0].time_hi == doctest::Approx(sorted_percentile(times, 0.975)));
  CHECK(rows[0].mem_hi == doctest::Approx(sorted_percentile({0, 100, 200, 300, 400, 500, 600}, 0.975)));
  CHECK(rows[1].time_hi - rows[1].time_lo == 0.0);
  CHECK(rows[1].mem_median == 7.0);

  recs.resize(2);
  CHECK_THROWS_AS(summarize_bench(recs), std::invalid_argument);
}

TEST_CASE("record csv and plot files") {
  const auto dir = std::filesystem::temp_directory_path() / "fieldrecon_test_bench";
  std::filesystem::create_directories(dir);
  std::vector<BenchRecord> recs;
  for (std::size_t m : {10, 100, 1000}) {
    for (std::size_t t = 0; t < 3; ++t) {
      recs.push_back({"idw", m, t, 1e-5 * static_cast<double>(m + t), 4096 * t, false});
      recs.push_back({"ok", m, t, 1e-3 * static_cast<double>(m + t), 8192 * t, false});
    }
  }
  {
    std::ofstream out(dir / "bench_records.csv");
    out << kBenchRecordHeader << '\n';
    for (const auto& r : recs) out << format_bench_record(r) << '\n';
  }
  const auto back = read_bench_records(dir / "bench_records.csv");
  REQUIRE(back.size() == recs.size());
  CHECK(back[4].seconds == doctest::Approx(recs[4].seconds).epsilon(1e-8));
  CHECK(back[5].peak_bytes == recs[5].peak_bytes);

  const auto rows = summarize_bench(back);
  write_bench_summary(dir / "bench_summary.csv", rows);
  write_bench_plot(dir / "time.svg", rows, BenchQuantity::Time, true);
  write_bench_plot(dir / "mem.svg", rows, BenchQuantity::Memory, false);
  std::ifstream svg(dir / "time.svg");
  const std::string text((std::istreambuf_iterator<char>(svg)), {});
  CHECK(text.size() > 500);
  CHECK(text.find("data-y-scale=\"log\"") != std::string::npos);
  CHECK(text.find(">ok</text>") != std::string::npos);
  std::ifstream mem(dir / "mem.svg");
  const std::string mtext((std::istreambuf_iterator<char>(mem)), {});
  CHECK(mtext.find("data-y-scale=\"linear\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("timing properties on a synthetic cloud") {
  const auto pc = synthetic_cloud(600);
  BenchConfig cfg;
  cfg.sizes = {10, 100, 1000, 10000};
  cfg.repetitions = 5;
  BenchSubject idw{"idw", {fitted(Method::Idw, {10, 2.0}, pc)}, {pc}};
  const auto rows = summarize_bench(run_bench(cfg, {idw}, 2));
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].time_median >= rows[i - 1].time_median);

  BenchConfig one;
  one.sizes = {1000};
  one.repetitions = 3;
  const auto okfit = fitted(Method::Ok, {12, 1.0, 0, 4}, pc);  // euclidean, exponential
  BenchSubject ok{"ok", {okfit}, {pc}};
  const auto cmp = summarize_bench(run_bench(one, {idw, ok}, 3));
  REQUIRE(cmp.size() == 2);
  CHECK(cmp[1].time_median > cmp[0].time_median);
}
