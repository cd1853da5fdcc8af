#pragma once

#include <span>
#include <vector>

#include "fieldrecon/core.hpp"
#include "fieldrecon/kdtree.hpp"

namespace fieldrecon {

inline constexpr double kIdwZeroDistance = 1e-12;

/// Number of neighbours in [1, 50] and distance power in [1e-7, 5].
class IdwParams {
 public:
  static constexpr int kMinNeighbours = 1;
  static constexpr int kMaxNeighbours = 50;
  static constexpr double kMinPower = 1e-7;
  static constexpr double kMaxPower = 5.0;

  IdwParams(int k_neighbours, double power);

  int k_neighbours() const noexcept { return k_; }
  double power() const noexcept { return power_; }

 private:
  int k_;
  double power_;
};

/// Weighted mean of the k nearest node values with weights d^-power. A target
/// within kIdwZeroDistance of a node takes that node's value.
std::vector<double> idw_reconstruct(const ClimatePointCloud& pc, const KdIndex& idx,
                                    const IdwParams& params, std::span<const QueryPoint> targets,
                                    CoordinateSystem cs);

}  // namespace fieldrecon
