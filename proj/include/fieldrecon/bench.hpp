#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fieldrecon/core.hpp"
#include "fieldrecon/experiment.hpp"

namespace fieldrecon {

enum class Ladder { Small, Large };

Ladder ladder_from_string(const std::string& s);
std::vector<std::size_t> ladder_sizes(Ladder ladder);

struct BenchConfig {
  std::vector<std::size_t> sizes = ladder_sizes(Ladder::Small);
  std::size_t repetitions = 10;
  std::size_t warmup = 1;

  /// Sizes non-empty, positive and strictly increasing; at least 3 repetitions.
  void validate() const;
};

struct BenchRecord {
  std::string method;
  std::size_t m = 0;
  std::size_t trial = 0;
  double seconds = 0.0;
  std::size_t peak_bytes = 0;
  bool failed = false;
};

/// M points uniform over the bounding box of `pc`.
std::vector<QueryPoint> sample_targets(const ClimatePointCloud& pc, std::size_t m, std::uint64_t seed);

/// Fitted models of one method, one per date. Trial t uses model t mod size,
/// with targets drawn over the box of the matching node set.
struct BenchSubject {
  std::string method;
  std::vector<std::shared_ptr<const Reconstructor>> models;
  std::vector<ClimatePointCloud> nodes;
};

/// Resident-set high-watermark sampled every millisecond on a helper thread,
/// reported relative to the level at start().
class RssSampler {
 public:
  RssSampler();
  ~RssSampler();
  RssSampler(const RssSampler&) = delete;
  RssSampler& operator=(const RssSampler&) = delete;

  void start();
  std::size_t stop();

  static std::size_t current_rss_bytes();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

using RecordSink = std::function<void(const BenchRecord&)>;

/// Runs every (method, size, trial) cell in order. Only the reconstruct call
/// is timed; a throwing cell yields a failed record and the run goes on.
std::vector<BenchRecord> run_bench(const BenchConfig& cfg, const std::vector<BenchSubject>& subjects,
                                   std::uint64_t seed, const RecordSink& sink = {});

struct BenchSummaryRow {
  std::string method;
  std::size_t m = 0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double time_median = 0.0, time_lo = 0.0, time_hi = 0.0;
  double mem_median = 0.0, mem_lo = 0.0, mem_hi = 0.0;
};

/// Median and 2.5/97.5 percentiles of successful trials per (method, M).
std::vector<BenchSummaryRow> summarize_bench(const std::vector<BenchRecord>& records);

inline constexpr const char* kBenchRecordHeader = "method,M,trial,seconds,peak_bytes,failed";

std::string format_bench_record(const BenchRecord& r);
std::vector<BenchRecord> read_bench_records(const std::filesystem::path& path);
void write_bench_summary(const std::filesystem::path& path, const std::vector<BenchSummaryRow>& rows);

enum class BenchQuantity { Time, Memory };

/// Median curves with percentile bands per method as SVG.
void write_bench_plot(const std::filesystem::path& path, const std::vector<BenchSummaryRow>& rows,
                      BenchQuantity quantity, bool log_y);

}  // namespace fieldrecon
