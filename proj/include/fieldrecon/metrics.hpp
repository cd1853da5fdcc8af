#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace fieldrecon {

class ConstantObservationsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed and predicted values of equal, non-zero length, all finite.
class EvalPair {
 public:
  EvalPair(std::vector<double> observed, std::vector<double> predicted);

  std::span<const double> observed() const noexcept { return observed_; }
  std::span<const double> predicted() const noexcept { return predicted_; }
  std::size_t size() const noexcept { return observed_.size(); }

 private:
  std::vector<double> observed_;
  std::vector<double> predicted_;
};

struct MetricSet {
  double rmse;
  double mae;
  double r2;
  double delta_max;
};

double rmse(const EvalPair& e);
double mae(const EvalPair& e);
/// 1 - SS_res / SS_tot; may be negative. Throws ConstantObservationsError.
double r2(const EvalPair& e);
double delta_max(const EvalPair& e);

/// All four; r2 is NaN when the observations are constant.
MetricSet compute_metrics(const EvalPair& e);

}  // namespace fieldrecon
