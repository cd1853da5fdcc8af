#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldrecon/core.hpp"

namespace fieldrecon {

/// Values beyond this magnitude (degrees Celsius) are treated as unit errors.
inline constexpr double kMaxPlausibleDegC = 70.0;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InsufficientDatesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooFewObservationsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class QualityFlag { Valid, Suspect, Missing };

std::string to_string(QualityFlag f);

struct StationRecord {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  std::string date;  // YYYY-MM-DD
  std::optional<int> value_tenths;
  QualityFlag flag = QualityFlag::Missing;
  std::size_t line = 0;

  double value() const { return value_tenths.value() / 10.0; }
  bool valid() const noexcept { return flag == QualityFlag::Valid; }
};

inline constexpr const char* kStationHeader = "station_id,lat,lon,date,value_tenths_degC,qflag";

/// Reads the consolidated station CSV. Rows with implausible values are kept
/// but flagged suspect.
std::vector<StationRecord> read_station_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<StationRecord> read_station_file(const std::filesystem::path& path);

/// Valid-record count per date, ordered by date.
std::map<std::string, std::size_t> valid_counts(const std::vector<StationRecord>& records);

/// Uniform sample without replacement of `n` dates whose valid count is
/// strictly greater than `min_valid`, returned in date order.
std::vector<std::string> select_dates(const std::vector<StationRecord>& records,
                                      std::size_t min_valid = 500, std::size_t n = 100,
                                      std::uint64_t seed = 0);

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitSizes {
  std::size_t train;
  std::size_t validation;
  std::size_t test;
};

/// train = round(0.6 n); the remainder is halved with validation taking any
/// odd point.
SplitSizes split_sizes(std::size_t n);

struct SplitSet {
  std::string date;
  std::uint64_t seed = 0;
  std::vector<StationRecord> records;  // valid records of the date, input order
  std::vector<Split> assignment;       // parallel to records

  std::size_t count(Split s) const;
  ClimatePointCloud cloud(Split s) const;
};

/// Valid records of `date` permuted with a seed derived from (master_seed, date).
SplitSet make_splits(const std::string& date, const std::vector<StationRecord>& records,
                     std::uint64_t master_seed);

/// Input columns plus a trailing `split` column.
void write_split_csv(const std::filesystem::path& path, const SplitSet& splits);

/// Loads a split file. Test rows are dropped unless `include_test` is set.
SplitSet read_split_csv(const std::filesystem::path& path, bool include_test);

/// Number of read_split_csv calls that materialized test rows.
std::size_t test_split_reads() noexcept;

struct SummaryStats {
  std::size_t count = 0;
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double max = 0.0;
};

struct SplitSummary {
  SummaryStats train;
  SummaryStats validation;
};

/// Pooled statistics over all dates. Test values are never touched.
SplitSummary split_summary(const std::vector<SplitSet>& splits);

}  // namespace fieldrecon
