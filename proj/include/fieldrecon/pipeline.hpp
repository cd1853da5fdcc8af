#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldrecon/bench.hpp"
#include "fieldrecon/core.hpp"
#include "fieldrecon/hpo.hpp"

namespace fieldrecon {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Bad configuration or a stage precondition the user can fix.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An input an earlier stage should have produced is absent.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::filesystem::path data;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::Idw, Method::Ok, Method::Inr};
  std::size_t n_dates = 100;
  std::size_t min_valid = 500;
  std::optional<std::size_t> n_initial;     // per-method default when unset
  std::optional<std::size_t> n_iterations;  // per-method default when unset
  CoordinateSystem idw_coord = CoordinateSystem::Geographic;
  int inr_epochs = kInrEpochs;
  std::vector<std::size_t> bench_sizes = ladder_sizes(Ladder::Small);
  std::size_t bench_reps = 10;
  std::size_t bench_warmup = 1;
  double alpha = 0.05;

  void validate() const;
  BoBudget budget(Method m) const;
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON form.
  std::uint64_t hash() const;
};

std::vector<Method> parse_methods(const std::string& csv);
std::vector<std::size_t> parse_sizes(const std::string& csv);

/// Output layout under cfg.out.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path splits_dir() const { return root / "splits"; }
  std::filesystem::path split_file(const std::string& date) const { return splits_dir() / (date + ".csv"); }
  std::filesystem::path dates_file() const { return splits_dir() / "dates.txt"; }
  std::filesystem::path summary_file() const { return splits_dir() / "summary.csv"; }
  std::filesystem::path tune_dir(Method m) const { return root / "tune" / to_string(m); }
  std::filesystem::path history_file(Method m, const std::string& date) const {
    return tune_dir(m) / (date + ".history.csv");
  }
  std::filesystem::path best_file(Method m, const std::string& date) const {
    return tune_dir(m) / (date + ".best.json");
  }
  std::filesystem::path metrics_file() const { return root / "evaluate" / "metrics.csv"; }
  std::filesystem::path compare_dir() const { return root / "compare"; }
  std::filesystem::path bench_dir() const { return root / "bench"; }
  std::filesystem::path report_file() const { return root / "report.md"; }
  std::filesystem::path manifest_file(const std::string& command) const {
    return root / "manifests" / (command + ".json");
  }
};

/// Seed of the tuning run for one (method, date); trial i of that run fits
/// with trial_seed(tune_seed(...), i).
std::uint64_t tune_seed(std::uint64_t master, Method m, const std::string& date);

std::vector<std::string> read_dates(const Layout& layout);

struct BestParams {
  Method method;
  std::string date;
  Assignment params;
  double objective;
  std::size_t trial_index;
};

BestParams read_best(const Layout& layout, Method m, const std::string& date);

/// Each stage returns the files it wrote, relative to cfg.out.
std::vector<std::string> cmd_ingest(const ExperimentConfig& cfg);
std::vector<std::string> cmd_tune(const ExperimentConfig& cfg);
std::vector<std::string> cmd_evaluate(const ExperimentConfig& cfg);
std::vector<std::string> cmd_compare(const ExperimentConfig& cfg);
std::vector<std::string> cmd_bench(const ExperimentConfig& cfg);
std::vector<std::string> cmd_report(const ExperimentConfig& cfg);

/// Records config, seed, version and output digests for one command.
/// Bench outputs are flagged as timing-dependent.
void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs);

std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace fieldrecon
