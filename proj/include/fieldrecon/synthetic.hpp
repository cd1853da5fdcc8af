#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldrecon/ingest.hpp"

namespace fieldrecon {

struct GaussianBump {
  double lat;
  double lon;
  double amplitude;  // degrees Celsius
  double width;      // degrees
};

/// Smooth temperature field: a meridional gradient plus Gaussian bumps.
struct BumpField {
  double base = 12.0;
  double lat_gradient = -0.5;  // per degree north of lat_ref
  double lat_ref = 50.0;
  std::vector<GaussianBump> bumps;

  double operator()(double lat, double lon) const noexcept;
};

struct SyntheticSpec {
  std::size_t n_dates = 5;
  std::size_t n_stations = 600;
  std::size_t n_bumps = 5;
  double lat_min = 40.0, lat_max = 60.0;
  double lon_min = -10.0, lon_max = 30.0;
  std::string first_date = "2020-01-01";
};

BumpField random_bump_field(const SyntheticSpec& spec, std::uint64_t seed);

/// Fixed station network observed on consecutive days, each day with its own
/// field. Values are stored in tenths of a degree, all flagged valid.
std::vector<StationRecord> synthetic_records(const SyntheticSpec& spec, std::uint64_t seed);

void write_station_csv(std::ostream& out, const std::vector<StationRecord>& records);

/// ISO date `days` after `first` (YYYY-MM-DD).
std::string add_days(const std::string& first, int days);

}  // namespace fieldrecon
