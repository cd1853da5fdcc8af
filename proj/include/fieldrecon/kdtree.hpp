#pragma once

#include <cstddef>
#include <vector>

#include "fieldrecon/core.hpp"

namespace fieldrecon {

struct Neighbour {
  std::size_t index;
  double distance;

  friend bool operator==(const Neighbour&, const Neighbour&) = default;
};

/// Orders by distance, then by node index.
inline bool neighbour_less(const Neighbour& a, const Neighbour& b) noexcept {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

/// Balanced 2-d tree over (lat, lon) of a point cloud. Exact kNN for both
/// coordinate systems; geographic pruning uses the latitude gap only, which
/// is a lower bound on great-circle distance.
class KdIndex {
 public:
  static constexpr std::size_t kDefaultLeafSize = 16;

  explicit KdIndex(const ClimatePointCloud& pc, std::size_t leaf_size = kDefaultLeafSize);

  std::size_t size() const noexcept { return lat_.size(); }
  std::size_t depth() const noexcept { return depth_; }

  /// min(k, N) neighbours sorted by (distance, index). k must be >= 1.
  std::vector<Neighbour> knn(const QueryPoint& q, std::size_t k, CoordinateSystem cs) const;

 private:
  struct Node {
    double lat_lo, lat_hi, lon_lo, lon_hi;
    std::size_t begin, end;  // range into perm_
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, std::size_t level);
  double lower_bound(const Node& n, double qlat, double qlon, CoordinateSystem cs) const noexcept;

  std::vector<double> lat_;
  std::vector<double> lon_;
  std::vector<std::size_t> perm_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
  std::size_t depth_ = 0;
};

/// Linear scan reference with the same ordering contract as KdIndex::knn.
std::vector<Neighbour> knn_brute_force(const ClimatePointCloud& pc, const QueryPoint& q,
                                       std::size_t k, CoordinateSystem cs);

}  // namespace fieldrecon
