#include "fieldrecon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

namespace fieldrecon {

void MetricSamples::validate() const {
  if (groups.size() < 2) throw std::invalid_argument("need at least 2 groups");
  if (!labels.empty() && labels.size() != groups.size()) {
    throw std::invalid_argument("labels and groups differ in length");
  }
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("empty group");
  }
}

std::size_t MetricSamples::total() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

OmnibusResult::OmnibusResult(double h, double p, std::optional<double> eta_squared)
    : h_(h), p_(p), eta_(eta_squared) {}

double OmnibusResult::eta_squared() const {
  if (!eta_) throw UnequalGroupsError("eta squared requires equal group sizes");
  return *eta_;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

namespace {

struct PooledRanks {
  std::vector<double> mean_rank;  // per group
  double tie_sum = 0.0;           // sum of t^3 - t over tie blocks
  std::size_t n = 0;
};

PooledRanks pooled_ranks(const MetricSamples& ms) {
  std::vector<double> pooled;
  for (const auto& g : ms.groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const auto ranks = average_ranks(pooled);

  PooledRanks pr;
  pr.n = pooled.size();
  std::size_t off = 0;
  for (const auto& g : ms.groups) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += ranks[off + i];
    pr.mean_rank.push_back(s / static_cast<double>(g.size()));
    off += g.size();
  }
  std::map<double, std::size_t> ties;
  for (const double v : pooled) ++ties[v];
  for (const auto& [v, t] : ties) {
    const auto td = static_cast<double>(t);
    pr.tie_sum += td * td * td - td;
  }
  return pr;
}

}  // namespace

double eta_squared(double h, std::size_t k, std::size_t n_per_group) {
  const auto kd = static_cast<double>(k);
  const auto nd = static_cast<double>(n_per_group);
  return (h - kd + 1.0) / (kd * nd - kd);
}

double chi_square_sf(double x, double dof) {
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

double normal_two_sided_p(double z) {
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

OmnibusResult kruskal_wallis(const MetricSamples& ms) {
  ms.validate();
  if (ms.total() < 3) throw std::invalid_argument("Kruskal-Wallis needs N >= 3");
  const auto pr = pooled_ranks(ms);
  const auto n = static_cast<double>(pr.n);

  double s = 0.0;
  for (std::size_t g = 0; g < ms.groups.size(); ++g) {
    s += static_cast<double>(ms.groups[g].size()) * pr.mean_rank[g] * pr.mean_rank[g];
  }
  double h = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
  const double correction = 1.0 - pr.tie_sum / (n * n * n - n);
  h = correction > 0.0 ? h / correction : 0.0;
  h = std::max(0.0, h);

  const std::size_t k = ms.groups.size();
  const double p = std::clamp(chi_square_sf(h, static_cast<double>(k - 1)), 0.0, 1.0);

  std::optional<double> eta;
  const auto n0 = ms.groups.front().size();
  if (std::all_of(ms.groups.begin(), ms.groups.end(),
                  [n0](const auto& g) { return g.size() == n0; })) {
    eta = eta_squared(h, k, n0);
  }
  return {h, p, eta};
}

std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::min(1.0, static_cast<double>(m - i) * p[order[i]]);
    running = std::max(running, v);
    adj[order[i]] = running;
  }
  return adj;
}

double rank_biserial(std::span<const double> group1, std::span<const double> group2) {
  if (group1.empty() || group2.empty()) throw std::invalid_argument("rank_biserial: empty group");
  std::vector<double> pooled(group1.begin(), group1.end());
  pooled.insert(pooled.end(), group2.begin(), group2.end());
  const auto ranks = average_ranks(pooled);
  const auto n1 = static_cast<double>(group1.size());
  const auto n2 = static_cast<double>(group2.size());
  double r1 = 0.0;
  double r2 = 0.0;
  for (std::size_t i = 0; i < group1.size(); ++i) r1 += ranks[i];
  for (std::size_t i = 0; i < group2.size(); ++i) r2 += ranks[group1.size() + i];
  return 2.0 * (r1 / n1 - r2 / n2) / (n1 + n2);
}

PosthocResult dunn_posthoc(const MetricSamples& ms) {
  ms.validate();
  const auto pr = pooled_ranks(ms);
  const auto n = static_cast<double>(pr.n);
  const double tie_term = pr.n > 1 ? pr.tie_sum / (12.0 * (n - 1.0)) : 0.0;
  const double base = n * (n + 1.0) / 12.0 - tie_term;

  PosthocResult out;
  std::vector<double> raw;
  const std::size_t k = ms.groups.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double se = std::sqrt(base * (1.0 / static_cast<double>(ms.groups[i].size()) +
                                          1.0 / static_cast<double>(ms.groups[j].size())));
      const double diff = pr.mean_rank[i] - pr.mean_rank[j];
      const double z = se > 0.0 ? diff / se : 0.0;
      const double p = normal_two_sided_p(z);
      out.pairs.push_back({i, j, z, p, p, rank_biserial(ms.groups[i], ms.groups[j])});
      raw.push_back(p);
    }
  }
  const auto adj = holm_adjust(raw);
  for (std::size_t i = 0; i < adj.size(); ++i) out.pairs[i].p_adjusted = adj[i];
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ComparisonReport compare_methods(const std::vector<std::string>& methods,
                                 const std::vector<std::vector<MetricSet>>& per_method,
                                 double alpha) {
  if (methods.size() < 2 || methods.size() != per_method.size()) {
    throw std::invalid_argument("compare_methods: need >= 2 methods with results");
  }
  for (const auto& m : per_method) {
    if (m.size() < 3) throw std::invalid_argument("compare_methods: need >= 3 samples per method");
  }

  using Getter = double (*)(const MetricSet&);
  const std::pair<const char*, Getter> metrics[] = {
      {"rmse", [](const MetricSet& m) { return m.rmse; }},
      {"mae", [](const MetricSet& m) { return m.mae; }},
      {"r2", [](const MetricSet& m) { return m.r2; }},
      {"delta_max", [](const MetricSet& m) { return m.delta_max; }},
  };

  ComparisonReport report{methods, alpha, {}};
  for (const auto& [name, get] : metrics) {
    MetricSamples ms;
    ms.labels = methods;
    for (const auto& results : per_method) {
      std::vector<double> g;
      for (const auto& r : results) {
        const double v = get(r);
        if (std::isfinite(v)) g.push_back(v);
      }
      ms.groups.push_back(std::move(g));
    }
    MetricComparison mc{name, {}, {}, kruskal_wallis(ms), std::nullopt};
    for (const auto& g : ms.groups) {
      mc.medians.push_back(quantile(g, 0.5));
      mc.iqrs.push_back(quantile(g, 0.75) - quantile(g, 0.25));
    }
    if (mc.omnibus.p() < alpha) mc.posthoc = dunn_posthoc(ms);
    report.metrics.push_back(std::move(mc));
  }
  return report;
}

std::string format_report(const ComparisonReport& report) {
  std::string out = "Quality measures (median +- IQR)\n";
  out += fmt::format("{:<10}", "metric");
  for (const auto& m : report.methods) out += fmt::format("{:>20}", m);
  out += "\n";
  for (const auto& mc : report.metrics) {
    out += fmt::format("{:<10}", mc.metric);
    for (std::size_t i = 0; i < mc.medians.size(); ++i) {
      out += fmt::format("{:>20}", fmt::format("{:.2f} +- {:.2f}", mc.medians[i], mc.iqrs[i]));
    }
    out += "\n";
  }

  out += "\nKruskal-Wallis\n";
  for (const auto& mc : report.metrics) {
    const auto eta = mc.omnibus.has_eta_squared() ? fmt::format("{:.2f}", mc.omnibus.eta_squared())
                                                  : std::string("n/a");
    out += fmt::format("{:<10} H={:.2f} p={:.3g} eta2={}\n", mc.metric, mc.omnibus.h(),
                       mc.omnibus.p(), eta);
  }

  out += fmt::format("\nDunn post-hoc (Holm), alpha={}\n", report.alpha);
  for (const auto& mc : report.metrics) {
    if (!mc.posthoc) {
      out += fmt::format("{:<10} not significant, skipped\n", mc.metric);
      continue;
    }
    for (const auto& pc : mc.posthoc->pairs) {
      out += fmt::format("{:<10} {} vs {}: z={:.3f} p={:.3g} p_holm={:.3g} r={:.2f}\n", mc.metric,
                         report.methods[pc.first], report.methods[pc.second], pc.z, pc.p_raw,
                         pc.p_adjusted, pc.rank_biserial);
    }
  }
  return out;
}

}  // namespace fieldrecon
