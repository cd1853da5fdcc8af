#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "fieldrecon/core.hpp"
#include "fieldrecon/hpo.hpp"
#include "fieldrecon/idw.hpp"
#include "fieldrecon/inr.hpp"
#include "fieldrecon/kriging.hpp"

namespace fieldrecon {

/// Settings that are fixed per experiment rather than tuned.
struct MethodOptions {
  CoordinateSystem idw_coord = CoordinateSystem::Geographic;
  int inr_epochs = kInrEpochs;
};

/// A method fitted to its reconstruction nodes. `reconstruct` is the only
/// call a benchmark times.
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  virtual std::vector<double> reconstruct(std::span<const QueryPoint> targets) const = 0;
};

IdwParams idw_params(const SearchSpace& space, const Assignment& a);
KrigingParams kriging_params(const SearchSpace& space, const Assignment& a);
InrParams inr_params(const SearchSpace& space, const Assignment& a, int epochs = kInrEpochs);

/// Fits the method of `space` on `train`. The network also uses `validation`
/// to pick its best epoch.
std::unique_ptr<Reconstructor> fit_reconstructor(const SearchSpace& space, const Assignment& a,
                                                 const ClimatePointCloud& train,
                                                 const ClimatePointCloud& validation,
                                                 std::uint64_t seed, const MethodOptions& opts);

/// Validation MAE of the fitted method; the tuning objective.
Objective validation_objective(const SearchSpace& space, const ClimatePointCloud& train,
                               const ClimatePointCloud& validation, const MethodOptions& opts);

nlohmann::json assignment_to_json(const SearchSpace& space, const Assignment& a);
Assignment assignment_from_json(const SearchSpace& space, const nlohmann::json& j);

}  // namespace fieldrecon
