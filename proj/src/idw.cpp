#include "fieldrecon/idw.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fieldrecon {

IdwParams::IdwParams(int k_neighbours, double power) : k_(k_neighbours), power_(power) {
  if (k_ < kMinNeighbours || k_ > kMaxNeighbours) {
    throw std::invalid_argument(fmt::format("IDW neighbours {} outside [1, 50]", k_));
  }
  if (!(power_ >= kMinPower && power_ <= kMaxPower)) {
    throw std::invalid_argument(fmt::format("IDW power {} outside [1e-7, 5]", power_));
  }
}

std::vector<double> idw_reconstruct(const ClimatePointCloud& pc, const KdIndex& idx,
                                    const IdwParams& params, std::span<const QueryPoint> targets,
                                    CoordinateSystem cs) {
  if (targets.empty()) throw std::invalid_argument("idw_reconstruct: no targets");
  if (idx.size() != pc.size()) throw std::invalid_argument("idw_reconstruct: index/cloud mismatch");

  std::vector<double> out;
  out.reserve(targets.size());
  const auto k = static_cast<std::size_t>(params.k_neighbours());
  for (const auto& q : targets) {
    const auto nbrs = idx.knn(q, k, cs);
    // Sorted by (distance, index): the first entry is the lowest-index
    // coincident node when one exists.
    if (nbrs.front().distance < kIdwZeroDistance) {
      out.push_back(pc[nbrs.front().index].value());
      continue;
    }
    double num = 0.0;
    double den = 0.0;
    for (const auto& n : nbrs) {
      const double w = std::pow(n.distance, -params.power());
      num += w * pc[n.index].value();
      den += w;
    }
    out.push_back(num / den);
  }
  return out;
}

}  // namespace fieldrecon
