#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fieldrecon/core.hpp"

namespace fieldrecon {

class ConstantFieldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateVariogramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VariogramFamily { Linear, Power, Gaussian, Spherical, Exponential, HoleEffect };

inline constexpr VariogramFamily kAllVariogramFamilies[] = {
    VariogramFamily::Linear,      VariogramFamily::Power,       VariogramFamily::Gaussian,
    VariogramFamily::Spherical,   VariogramFamily::Exponential, VariogramFamily::HoleEffect};

std::string to_string(VariogramFamily f);
VariogramFamily variogram_family_from_string(const std::string& s);

/// Number of free parameters of a family (nugget included).
std::size_t parameter_count(VariogramFamily f) noexcept;

class KrigingParams {
 public:
  static constexpr int kMinBins = 2;
  static constexpr int kMaxBins = 50;
  static constexpr double kMinAnisotropy = 1e-5;
  static constexpr double kMaxAnisotropy = 5.0;

  KrigingParams(int n_bins, double anisotropy_scale, CoordinateSystem coord,
                VariogramFamily family);

  int n_bins() const noexcept { return n_bins_; }
  double anisotropy_scale() const noexcept { return anisotropy_; }
  CoordinateSystem coord() const noexcept { return coord_; }
  VariogramFamily family() const noexcept { return family_; }

 private:
  int n_bins_;
  double anisotropy_;
  CoordinateSystem coord_;
  VariogramFamily family_;
};

struct EmpiricalVariogram {
  std::vector<double> lags;          // bin centres, strictly increasing
  std::vector<double> semivariances; // >= 0
  std::vector<std::size_t> counts;   // pairs per retained bin, all > 0

  std::size_t size() const noexcept { return lags.size(); }
};

/// Parametric semivariogram. Unused fields stay zero: Linear uses slope,
/// Power uses scale and exponent, the rest use partial_sill and range_len.
struct FittedVariogram {
  VariogramFamily family = VariogramFamily::Spherical;
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range_len = 1.0;
  double slope = 0.0;
  double scale = 0.0;
  double exponent = 1.0;

  /// Model value; (*this)(0) == nugget.
  double operator()(double h) const noexcept;
};

/// Value standardization and per-axis min-max coordinate scaling to [-1, 1].
/// Default-constructed parameters are the identity map.
struct StandardizationParams {
  double value_mean = 0.0;
  double value_std = 1.0;
  double lat_min = -1.0;
  double lat_max = 1.0;
  double lon_min = -1.0;
  double lon_max = 1.0;

  double scale_lat(double lat) const noexcept;
  double scale_lon(double lon) const noexcept;
  double unscale_lat(double s) const noexcept;
  double unscale_lon(double s) const noexcept;
  double standardize(double v) const noexcept { return (v - value_mean) / value_std; }
  double destandardize(double z) const noexcept { return z * value_std + value_mean; }
};

/// Scales coordinates to [-1, 1] and standardizes values (population std).
/// Throws ConstantFieldError for a constant field.
std::pair<ClimatePointCloud, StandardizationParams> preprocess_ok(const ClimatePointCloud& pc);

/// Inverse of preprocess_ok.
ClimatePointCloud restore_ok(const ClimatePointCloud& scaled, const StandardizationParams& sp);

/// Lag between two locations: Euclidean distance with the longitude axis
/// multiplied by the anisotropy factor, or great-circle km (factor ignored).
double kriging_lag(double lat_a, double lon_a, double lat_b, double lon_b, CoordinateSystem cs,
                   double anisotropy_scale) noexcept;

EmpiricalVariogram empirical_variogram(const ClimatePointCloud& pc, int n_bins,
                                       double anisotropy_scale, CoordinateSystem cs);

/// Bin-count weighted least squares with nugget and sill constrained >= 0.
FittedVariogram fit_variogram(const EmpiricalVariogram& ev, VariogramFamily family);

/// Ordinary kriging over all nodes of a working cloud. The augmented system
/// is factorized once at construction.
class OrdinaryKriging {
 public:
  /// `working` carries the coordinates in which lags are measured and the
  /// standardized values; `sp` maps targets and predictions.
  OrdinaryKriging(ClimatePointCloud working, StandardizationParams sp, FittedVariogram fv,
                  CoordinateSystem cs, double anisotropy_scale);

  /// Full pipeline on a raw training cloud: preprocess, variogram, fit, factorize.
  static OrdinaryKriging fit(const ClimatePointCloud& train, const KrigingParams& params);

  std::size_t size() const noexcept { return working_.size(); }
  const FittedVariogram& variogram() const noexcept { return fv_; }
  const StandardizationParams& standardization() const noexcept { return sp_; }

  /// Kriging weights for one target (length N) and the Lagrange multiplier.
  std::pair<Eigen::VectorXd, double> weights(const QueryPoint& target) const;

  std::vector<double> predict(std::span<const QueryPoint> targets) const;

 private:
  Eigen::VectorXd rhs(double lat, double lon) const;
  double system_semivariance(double h) const noexcept;
  std::pair<double, double> working_location(const QueryPoint& q) const noexcept;

  ClimatePointCloud working_;
  StandardizationParams sp_;
  FittedVariogram fv_;
  CoordinateSystem cs_;
  double anisotropy_;
  Eigen::VectorXd values_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Predictions (destandardized) from a scaled cloud as produced by preprocess_ok.
std::vector<double> ok_reconstruct(const ClimatePointCloud& scaled, const StandardizationParams& sp,
                                   const FittedVariogram& fv, std::span<const QueryPoint> targets,
                                   CoordinateSystem cs, double anisotropy_scale);

}  // namespace fieldrecon
