#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldrecon {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kDuplicateTolDeg = 1e-9;

class InvalidPointError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DuplicateCoordinateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class CoordinateSystem { Euclidean, Geographic };

std::string to_string(CoordinateSystem cs);
CoordinateSystem coordinate_system_from_string(const std::string& s);

/// A location without a value. Latitude in [-90, 90], longitude in [-180, 180].
class QueryPoint {
 public:
  QueryPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

 private:
  double lat_;
  double lon_;
};

/// One observation: location plus a finite temperature in degrees Celsius.
class ClimatePoint {
 public:
  ClimatePoint(double lat, double lon, double value);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }
  double value() const noexcept { return value_; }
  QueryPoint location() const { return {lat_, lon_}; }

 private:
  double lat_;
  double lon_;
  double value_;
};

struct BoundingBox {
  double lat_min;
  double lat_max;
  double lon_min;
  double lon_max;

  bool contains(double lat, double lon) const noexcept {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
};

/// Non-empty, ordered set of observations with pairwise distinct coordinates.
/// Immutable after construction.
class ClimatePointCloud {
 public:
  explicit ClimatePointCloud(std::vector<ClimatePoint> points);

  std::size_t size() const noexcept { return points_.size(); }
  const ClimatePoint& operator[](std::size_t i) const { return points_[i]; }
  std::span<const ClimatePoint> points() const noexcept { return points_; }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  std::vector<double> values() const;
  std::vector<QueryPoint> locations() const;

 private:
  std::vector<ClimatePoint> points_;
};

/// Degrees for Euclidean (planar), kilometres for Geographic (haversine).
double distance(const QueryPoint& a, const QueryPoint& b, CoordinateSystem cs) noexcept;

/// Same as distance() but on raw coordinates; used by hot loops.
double distance(double lat_a, double lon_a, double lat_b, double lon_b,
                CoordinateSystem cs) noexcept;

BoundingBox bounding_box(const ClimatePointCloud& pc) noexcept;

}  // namespace fieldrecon
