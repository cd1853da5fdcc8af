#include "fieldrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldrecon {

EvalPair::EvalPair(std::vector<double> observed, std::vector<double> predicted)
    : observed_(std::move(observed)), predicted_(std::move(predicted)) {
  if (observed_.empty() || observed_.size() != predicted_.size()) {
    throw std::invalid_argument("EvalPair: lengths must match and be >= 1");
  }
  for (std::size_t i = 0; i < observed_.size(); ++i) {
    if (!std::isfinite(observed_[i]) || !std::isfinite(predicted_[i])) {
      throw std::invalid_argument("EvalPair: non-finite entry");
    }
  }
}

double rmse(const EvalPair& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double r = e.observed()[i] - e.predicted()[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(e.size()));
}

double mae(const EvalPair& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += std::abs(e.observed()[i] - e.predicted()[i]);
  return s / static_cast<double>(e.size());
}

double r2(const EvalPair& e) {
  const auto obs = e.observed();
  double mean = 0.0;
  for (const double v : obs) mean += v;
  mean /= static_cast<double>(obs.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ss_tot += (obs[i] - mean) * (obs[i] - mean);
    const double r = obs[i] - e.predicted()[i];
    ss_res += r * r;
  }
  if (!(ss_tot > 0.0)) throw ConstantObservationsError("r2: observations are constant");
  return 1.0 - ss_res / ss_tot;
}

double delta_max(const EvalPair& e) {
  double m = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    m = std::max(m, std::abs(e.observed()[i] - e.predicted()[i]));
  }
  return m;
}

MetricSet compute_metrics(const EvalPair& e) {
  MetricSet m{rmse(e), mae(e), std::numeric_limits<double>::quiet_NaN(), delta_max(e)};
  try {
    m.r2 = r2(e);
  } catch (const ConstantObservationsError&) {
  }
  return m;
}

}  // namespace fieldrecon
