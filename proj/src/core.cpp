#include "fieldrecon/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace fieldrecon {

namespace {

void check_location(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0 ||
      lon < -180.0 || lon > 180.0) {
    throw InvalidPointError(fmt::format("coordinates out of bounds: lat={} lon={}", lat, lon));
  }
}

}  // namespace

std::string to_string(CoordinateSystem cs) {
  return cs == CoordinateSystem::Euclidean ? "euclidean" : "geographic";
}

CoordinateSystem coordinate_system_from_string(const std::string& s) {
  if (s == "euclidean") return CoordinateSystem::Euclidean;
  if (s == "geographic") return CoordinateSystem::Geographic;
  throw std::invalid_argument("unknown coordinate system: " + s);
}

QueryPoint::QueryPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  check_location(lat, lon);
}

ClimatePoint::ClimatePoint(double lat, double lon, double value)
    : lat_(lat), lon_(lon), value_(value) {
  check_location(lat, lon);
  if (!std::isfinite(value)) {
    throw InvalidPointError(fmt::format("non-finite value at lat={} lon={}", lat, lon));
  }
}

ClimatePointCloud::ClimatePointCloud(std::vector<ClimatePoint> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("point cloud must not be empty");

  // Sort a permutation by (lat, lon) and compare neighbours in a lat window.
  std::vector<std::size_t> order(points_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    if (points_[a].lat() != points_[b].lat()) return points_[a].lat() < points_[b].lat();
    if (points_[a].lon() != points_[b].lon()) return points_[a].lon() < points_[b].lon();
    return a < b;
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& p = points_[order[i]];
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto& q = points_[order[j]];
      if (q.lat() - p.lat() > kDuplicateTolDeg) break;
      if (std::abs(q.lon() - p.lon()) <= kDuplicateTolDeg) {
        const auto first = std::min(order[i], order[j]);
        const auto second = std::max(order[i], order[j]);
        throw DuplicateCoordinateError(fmt::format(
            "points {} and {} share coordinates ({}, {})", first, second, p.lat(), p.lon()));
      }
    }
  }
}

std::vector<double> ClimatePointCloud::values() const {
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.value());
  return out;
}

std::vector<QueryPoint> ClimatePointCloud::locations() const {
  std::vector<QueryPoint> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.location());
  return out;
}

double distance(double lat_a, double lon_a, double lat_b, double lon_b,
                CoordinateSystem cs) noexcept {
  if (cs == CoordinateSystem::Euclidean) {
    const double dlat = lat_a - lat_b;
    const double dlon = lon_a - lon_b;
    return std::sqrt(dlat * dlat + dlon * dlon);
  }
  constexpr double deg = std::numbers::pi / 180.0;
  const double phi1 = lat_a * deg;
  const double phi2 = lat_b * deg;
  const double s_lat = std::sin(0.5 * (phi2 - phi1));
  const double s_lon = std::sin(0.5 * (lon_b - lon_a) * deg);
  double h = s_lat * s_lat + std::cos(phi1) * std::cos(phi2) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double distance(const QueryPoint& a, const QueryPoint& b, CoordinateSystem cs) noexcept {
  return distance(a.lat(), a.lon(), b.lat(), b.lon(), cs);
}

BoundingBox bounding_box(const ClimatePointCloud& pc) noexcept {
  BoundingBox box{pc[0].lat(), pc[0].lat(), pc[0].lon(), pc[0].lon()};
  for (const auto& p : pc) {
    box.lat_min = std::min(box.lat_min, p.lat());
    box.lat_max = std::max(box.lat_max, p.lat());
    box.lon_min = std::min(box.lon_min, p.lon());
    box.lon_max = std::max(box.lon_max, p.lon());
  }
  return box;
}

}  // namespace fieldrecon
