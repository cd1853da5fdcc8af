#include "fieldrecon/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "fieldrecon/random.hpp"

namespace fieldrecon {

double BumpField::operator()(double lat, double lon) const noexcept {
  double v = base + lat_gradient * (lat - lat_ref);
  for (const auto& b : bumps) {
    const double d2 = (lat - b.lat) * (lat - b.lat) + (lon - b.lon) * (lon - b.lon);
    v += b.amplitude * std::exp(-0.5 * d2 / (b.width * b.width));
  }
  return v;
}

BumpField random_bump_field(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  BumpField f;
  f.base = uniform(rng, 5.0, 20.0);
  f.lat_ref = 0.5 * (spec.lat_min + spec.lat_max);
  for (std::size_t i = 0; i < spec.n_bumps; ++i) {
    GaussianBump b;
    b.lat = uniform(rng, spec.lat_min, spec.lat_max);
    b.lon = uniform(rng, spec.lon_min, spec.lon_max);
    b.amplitude = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 2.0, 8.0);
    b.width = uniform(rng, 3.0, 8.0);
    f.bumps.push_back(b);
  }
  return f;
}

std::string add_days(const std::string& first, int days) {
  using namespace std::chrono;
  if (first.size() != 10) throw std::invalid_argument("bad date " + first);
  const year_month_day ymd{year{std::stoi(first.substr(0, 4))},
                           month{static_cast<unsigned>(std::stoi(first.substr(5, 2)))},
                           day{static_cast<unsigned>(std::stoi(first.substr(8, 2)))}};
  if (!ymd.ok()) throw std::invalid_argument("bad date " + first);
  const year_month_day out{sys_days{ymd} + std::chrono::days{days}};
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(out.year()),
                     static_cast<unsigned>(out.month()), static_cast<unsigned>(out.day()));
}

std::vector<StationRecord> synthetic_records(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng net(derive_seed(seed, "stations"));
  std::vector<std::pair<double, double>> stations;
  for (std::size_t i = 0; i < spec.n_stations; ++i) {
    // 1e-4 degree grid keeps coordinates short and exact in text.
    const double lat = std::round(uniform(net, spec.lat_min, spec.lat_max) * 1e4) / 1e4;
    const double lon = std::round(uniform(net, spec.lon_min, spec.lon_max) * 1e4) / 1e4;
    stations.emplace_back(lat, lon);
  }
  std::vector<StationRecord> out;
  for (std::size_t d = 0; d < spec.n_dates; ++d) {
    const auto date = add_days(spec.first_date, static_cast<int>(d));
    const auto field = random_bump_field(spec, derive_seed(seed, date));
    for (std::size_t i = 0; i < stations.size(); ++i) {
      StationRecord r;
      r.station_id = fmt::format("SYN{:04}", i);
      r.lat = stations[i].first;
      r.lon = stations[i].second;
      r.date = date;
      r.value_tenths = static_cast<int>(std::lround(10.0 * field(r.lat, r.lon)));
      r.flag = QualityFlag::Valid;
      out.push_back(std::move(r));
    }
  }
  return out;
}

void write_station_csv(std::ostream& out, const std::vector<StationRecord>& records) {
  out << kStationHeader << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{},{},{}\n", r.station_id, r.lat, r.lon, r.date,
                       r.value_tenths ? std::to_string(*r.value_tenths) : std::string(),
                       to_string(r.flag));
  }
}

}  // namespace fieldrecon
