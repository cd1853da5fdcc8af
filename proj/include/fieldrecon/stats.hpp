#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldrecon/metrics.hpp"

namespace fieldrecon {

class UnequalGroupsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One metric across samples, one group per method.
struct MetricSamples {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> groups;

  void validate() const;
  std::size_t total() const noexcept;
};

class OmnibusResult {
 public:
  OmnibusResult(double h, double p, std::optional<double> eta_squared);

  double h() const noexcept { return h_; }
  double p() const noexcept { return p_; }
  bool has_eta_squared() const noexcept { return eta_.has_value(); }
  /// Throws UnequalGroupsError when the groups differ in size.
  double eta_squared() const;

 private:
  double h_;
  double p_;
  std::optional<double> eta_;
};

struct PairComparison {
  std::size_t first;
  std::size_t second;
  double z;
  double p_raw;
  double p_adjusted;
  double rank_biserial;
};

struct PosthocResult {
  std::vector<PairComparison> pairs;  // (0,1), (0,2), ..., (k-2,k-1)
};

/// Average ranks (1-based) of the pooled values, ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// (H - k + 1) / (k*n - k) for k groups of n samples each.
double eta_squared(double h, std::size_t k, std::size_t n_per_group);

OmnibusResult kruskal_wallis(const MetricSamples& ms);

/// Step-down Holm-Bonferroni adjustment, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p);

PosthocResult dunn_posthoc(const MetricSamples& ms);

/// 2 (mean rank 1 - mean rank 2) / (n1 + n2) with the two groups ranked jointly.
double rank_biserial(std::span<const double> group1, std::span<const double> group2);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

/// Two-sided standard-normal p-value of z.
double normal_two_sided_p(double z);

struct MetricComparison {
  std::string metric;
  std::vector<double> medians;  // per method
  std::vector<double> iqrs;     // per method
  OmnibusResult omnibus;
  std::optional<PosthocResult> posthoc;  // only when omnibus p < alpha
};

struct ComparisonReport {
  std::vector<std::string> methods;
  double alpha;
  std::vector<MetricComparison> metrics;  // rmse, mae, r2, delta_max
};

/// Medians, IQRs, Kruskal-Wallis and (when significant) Dunn per metric.
ComparisonReport compare_methods(const std::vector<std::string>& methods,
                                 const std::vector<std::vector<MetricSet>>& per_method,
                                 double alpha = 0.05);

std::string format_report(const ComparisonReport& report);

}  // namespace fieldrecon
