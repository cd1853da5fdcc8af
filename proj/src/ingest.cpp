#include "fieldrecon/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "fieldrecon/random.hpp"

namespace fieldrecon {

namespace {

std::atomic<std::size_t> g_test_reads{0};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
std::optional<T> parse_number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return v;
}

bool valid_date(const std::string& d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (d[i] < '0' || d[i] > '9') return false;
  }
  const int y = std::stoi(d.substr(0, 4));
  const int m = std::stoi(d.substr(5, 2));
  const int day = std::stoi(d.substr(8, 2));
  if (m < 1 || m > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return day <= kDays[m - 1] + (m == 2 && leap ? 1 : 0);
}

QualityFlag parse_flag(const std::string& s) {
  if (s == "valid") return QualityFlag::Valid;
  if (s == "suspect") return QualityFlag::Suspect;
  if (s == "missing") return QualityFlag::Missing;
  throw std::invalid_argument("unknown quality flag '" + s + "'");
}

StationRecord parse_record(const std::vector<std::string>& f, std::size_t line) {
  StationRecord r;
  r.line = line;
  r.station_id = f[0];
  if (r.station_id.empty()) throw std::invalid_argument("empty station id");
  const auto lat = parse_number<double>(f[1]);
  const auto lon = parse_number<double>(f[2]);
  if (!lat || !lon) throw std::invalid_argument("bad coordinate");
  if (!(std::abs(*lat) <= 90.0) || !(std::abs(*lon) <= 180.0)) {
    throw std::invalid_argument("coordinate out of range");
  }
  r.lat = *lat;
  r.lon = *lon;
  r.date = f[3];
  if (!valid_date(r.date)) throw std::invalid_argument("bad date '" + r.date + "'");
  r.flag = parse_flag(f[5]);
  if (f[4].empty()) {
    if (r.flag != QualityFlag::Missing) throw std::invalid_argument("empty value on a non-missing row");
  } else {
    const auto v = parse_number<int>(f[4]);
    if (!v) throw std::invalid_argument("bad value '" + f[4] + "'");
    r.value_tenths = *v;
    if (std::abs(*v / 10.0) > kMaxPlausibleDegC && r.flag == QualityFlag::Valid) {
      r.flag = QualityFlag::Suspect;
    }
  }
  return r;
}

void update(SummaryStats& s, double v) {
  // Welford
  ++s.count;
  if (s.count == 1) {
    s.min = s.max = s.mean = v;
    s.std = 0.0;
    return;
  }
  const double delta = v - s.mean;
  s.mean += delta / static_cast<double>(s.count);
  s.std += delta * (v - s.mean);  // running M2 until finalized
  s.min = std::min(s.min, v);
  s.max = std::max(s.max, v);
}

void finalize(SummaryStats& s) {
  s.std = s.count > 1 ? std::sqrt(s.std / static_cast<double>(s.count - 1)) : 0.0;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, what)), line_(line) {}

std::string to_string(QualityFlag f) {
  switch (f) {
    case QualityFlag::Valid: return "valid";
    case QualityFlag::Suspect: return "suspect";
    case QualityFlag::Missing: return "missing";
  }
  return "?";
}

std::vector<StationRecord> read_station_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty input, expected a header");
  strip_cr(line);
  if (line != kStationHeader) {
    throw ParseError(source, 1, fmt::format("expected header '{}'", kStationHeader));
  }
  std::vector<StationRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw ParseError(source, n, fmt::format("expected 6 fields, got {}", fields.size()));
    }
    try {
      out.push_back(parse_record(fields, n));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, n, e.what());
    }
  }
  return out;
}

std::vector<StationRecord> read_station_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_station_csv(in, path.string());
}

std::map<std::string, std::size_t> valid_counts(const std::vector<StationRecord>& records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    if (r.valid()) ++counts[r.date];
  }
  return counts;
}

std::vector<std::string> select_dates(const std::vector<StationRecord>& records,
                                      std::size_t min_valid, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("select_dates: n must be >= 1");
  std::vector<std::string> candidates;
  for (const auto& [date, count] : valid_counts(records)) {
    if (count > min_valid) candidates.push_back(date);
  }
  if (candidates.size() < n) {
    throw InsufficientDatesError(fmt::format(
        "{} dates have more than {} valid observations, {} requested", candidates.size(), min_valid, n));
  }
  Rng rng(seed);
  shuffle(candidates, rng);
  candidates.resize(n);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Validation;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

SplitSizes split_sizes(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(n)));
  const std::size_t rest = n - train;
  return {train, (rest + 1) / 2, rest / 2};
}

std::size_t SplitSet::count(Split s) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), s));
}

ClimatePointCloud SplitSet::cloud(Split s) const {
  std::vector<ClimatePoint> pts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (assignment[i] == s) pts.emplace_back(records[i].lat, records[i].lon, records[i].value());
  }
  if (pts.empty()) {
    throw std::runtime_error(fmt::format("{}: {} split is empty or was not loaded", date, to_string(s)));
  }
  return ClimatePointCloud(std::move(pts));
}

SplitSet make_splits(const std::string& date, const std::vector<StationRecord>& records,
                     std::uint64_t master_seed) {
  SplitSet set;
  set.date = date;
  set.seed = derive_seed(master_seed, date);
  for (const auto& r : records) {
    if (r.valid() && r.date == date) set.records.push_back(r);
  }
  const std::size_t n = set.records.size();
  if (n < 5) {
    throw TooFewObservationsError(fmt::format("{}: {} valid observations, need at least 5", date, n));
  }
  // Rejects coordinate duplicates before anything is written.
  std::vector<ClimatePoint> all;
  for (const auto& r : set.records) all.emplace_back(r.lat, r.lon, r.value());
  (void)ClimatePointCloud(std::move(all));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(set.seed);
  shuffle(perm, rng);
  const auto sizes = split_sizes(n);
  set.assignment.assign(n, Split::Test);
  for (std::size_t i = 0; i < sizes.train; ++i) set.assignment[perm[i]] = Split::Train;
  for (std::size_t i = sizes.train; i < sizes.train + sizes.validation; ++i) {
    set.assignment[perm[i]] = Split::Validation;
  }
  return set;
}

void write_split_csv(const std::filesystem::path& path, const SplitSet& splits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kStationHeader << ",split\n";
  for (std::size_t i = 0; i < splits.records.size(); ++i) {
    const auto& r = splits.records[i];
    out << fmt::format("{},{},{},{},{},{},{}\n", r.station_id, r.lat, r.lon, r.date,
                       r.value_tenths.value(), to_string(r.flag), to_string(splits.assignment[i]));
  }
}

SplitSet read_split_csv(const std::filesystem::path& path, bool include_test) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  const std::string header = std::string(kStationHeader) + ",split";
  if (!std::getline(in, line) || (strip_cr(line), line != header)) {
    throw ParseError(path.string(), 1, "expected header '" + header + "'");
  }
  if (include_test) ++g_test_reads;
  SplitSet set;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 7) throw ParseError(path.string(), n, "expected 7 fields");
    try {
      const Split s = split_from_string(fields.back());
      if (s == Split::Test && !include_test) continue;
      fields.pop_back();
      auto r = parse_record(fields, n);
      if (!r.valid()) throw std::invalid_argument("split files hold valid records only");
      if (set.date.empty()) set.date = r.date;
      if (r.date != set.date) throw std::invalid_argument("mixed dates in one split file");
      set.records.push_back(std::move(r));
      set.assignment.push_back(s);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string(), n, e.what());
    }
  }
  if (set.records.empty()) throw ParseError(path.string(), n, "no records");
  return set;
}

std::size_t test_split_reads() noexcept { return g_test_reads.load(); }

SplitSummary split_summary(const std::vector<SplitSet>& splits) {
  if (splits.empty()) throw std::invalid_argument("split_summary: no splits");
  SplitSummary s;
  for (const auto& set : splits) {
    for (std::size_t i = 0; i < set.records.size(); ++i) {
      if (set.assignment[i] == Split::Train) update(s.train, set.records[i].value());
      if (set.assignment[i] == Split::Validation) update(s.validation, set.records[i].value());
    }
  }
  finalize(s.train);
  finalize(s.validation);
  return s;
}

}  // namespace fieldrecon
