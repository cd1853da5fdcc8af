#include "fieldrecon/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>

#include <fmt/format.h>

#include "fieldrecon/nelder_mead.hpp"

namespace fieldrecon {

namespace {

constexpr double kRcondFloor = 1e-14;
constexpr double kJitter = 1e-10;

void warn_geographic_anisotropy() {
  static std::once_flag once;
  std::call_once(once, [] {
    std::fprintf(stderr,
                 "warning: anisotropy scaling is ignored for geographic coordinates\n");
  });
}

// Unit-sill shape of each bounded family; for Linear and Power the raw lag term.
double shape(VariogramFamily f, double h, double param) noexcept {
  switch (f) {
    case VariogramFamily::Linear:
      return h;
    case VariogramFamily::Power:
      return std::pow(h, param);
    case VariogramFamily::Gaussian:
      return 1.0 - std::exp(-3.0 * h * h / (param * param));
    case VariogramFamily::Spherical: {
      if (h >= param) return 1.0;
      const double t = h / param;
      return 1.5 * t - 0.5 * t * t * t;
    }
    case VariogramFamily::Exponential:
      return 1.0 - std::exp(-3.0 * h / param);
    case VariogramFamily::HoleEffect: {
      if (h == 0.0) return 0.0;
      const double t = std::numbers::pi * h / param;
      return 1.0 - std::sin(t) / t;
    }
  }
  return 0.0;
}

struct LinearFit {
  double nugget;
  double coef;
  double sse;
};

// Weighted least squares of gamma ~ nugget + coef * basis with both >= 0.
LinearFit nonneg_fit(const std::vector<double>& basis, const EmpiricalVariogram& ev) {
  double sw = 0, sf = 0, sff = 0, sg = 0, sfg = 0;
  for (std::size_t j = 0; j < ev.size(); ++j) {
    const double w = static_cast<double>(ev.counts[j]);
    sw += w;
    sf += w * basis[j];
    sff += w * basis[j] * basis[j];
    sg += w * ev.semivariances[j];
    sfg += w * basis[j] * ev.semivariances[j];
  }
  auto sse = [&](double n, double c) {
    double s = 0;
    for (std::size_t j = 0; j < ev.size(); ++j) {
      const double r = n + c * basis[j] - ev.semivariances[j];
      s += static_cast<double>(ev.counts[j]) * r * r;
    }
    return s;
  };

  LinearFit best{std::max(0.0, sg / sw), 0.0, 0.0};
  best.sse = sse(best.nugget, best.coef);

  if (sff > 0) {
    const double c = std::max(0.0, sfg / sff);
    const double e = sse(0.0, c);
    if (e < best.sse) best = {0.0, c, e};
  }
  const double det = sw * sff - sf * sf;
  if (det > 1e-14 * sw * sff) {
    const double n = (sff * sg - sf * sfg) / det;
    const double c = (sw * sfg - sf * sg) / det;
    if (n >= 0 && c >= 0) {
      const double e = sse(n, c);
      if (e <= best.sse) best = {n, c, e};
    }
  }
  return best;
}

FittedVariogram make_fitted(VariogramFamily family, const LinearFit& lf, double param) {
  FittedVariogram fv;
  fv.family = family;
  fv.nugget = lf.nugget;
  switch (family) {
    case VariogramFamily::Linear:
      fv.slope = lf.coef;
      break;
    case VariogramFamily::Power:
      fv.scale = lf.coef;
      fv.exponent = param;
      break;
    default:
      fv.partial_sill = lf.coef;
      fv.range_len = param;
      break;
  }
  return fv;
}

}  // namespace

std::string to_string(VariogramFamily f) {
  switch (f) {
    case VariogramFamily::Linear: return "linear";
    case VariogramFamily::Power: return "power";
    case VariogramFamily::Gaussian: return "gaussian";
    case VariogramFamily::Spherical: return "spherical";
    case VariogramFamily::Exponential: return "exponential";
    case VariogramFamily::HoleEffect: return "hole-effect";
  }
  return "?";
}

VariogramFamily variogram_family_from_string(const std::string& s) {
  for (const auto f : kAllVariogramFamilies) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown semivariogram model: " + s);
}

std::size_t parameter_count(VariogramFamily f) noexcept {
  return f == VariogramFamily::Linear ? 2 : 3;
}

KrigingParams::KrigingParams(int n_bins, double anisotropy_scale, CoordinateSystem coord,
                             VariogramFamily family)
    : n_bins_(n_bins), anisotropy_(anisotropy_scale), coord_(coord), family_(family) {
  if (n_bins_ < kMinBins || n_bins_ > kMaxBins) {
    throw std::invalid_argument(fmt::format("kriging bins {} outside [2, 50]", n_bins_));
  }
  if (!(anisotropy_ >= kMinAnisotropy && anisotropy_ <= kMaxAnisotropy)) {
    throw std::invalid_argument(fmt::format("anisotropy {} outside [1e-5, 5]", anisotropy_));
  }
}

double FittedVariogram::operator()(double h) const noexcept {
  switch (family) {
    case VariogramFamily::Linear:
      return nugget + slope * h;
    case VariogramFamily::Power:
      return nugget + scale * shape(family, h, exponent);
    default:
      return nugget + partial_sill * shape(family, h, range_len);
  }
}

namespace {

double to_unit(double v, double lo, double hi) noexcept {
  if (hi <= lo) return 0.0;
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

double from_unit(double s, double lo, double hi) noexcept {
  if (hi <= lo) return lo;
  return lo + 0.5 * (s + 1.0) * (hi - lo);
}

}  // namespace

double StandardizationParams::scale_lat(double lat) const noexcept {
  return to_unit(lat, lat_min, lat_max);
}
double StandardizationParams::scale_lon(double lon) const noexcept {
  return to_unit(lon, lon_min, lon_max);
}
double StandardizationParams::unscale_lat(double s) const noexcept {
  return from_unit(s, lat_min, lat_max);
}
double StandardizationParams::unscale_lon(double s) const noexcept {
  return from_unit(s, lon_min, lon_max);
}

std::pair<ClimatePointCloud, StandardizationParams> preprocess_ok(const ClimatePointCloud& pc) {
  if (pc.size() < 2) throw std::invalid_argument("preprocess_ok: need at least 2 points");
  StandardizationParams sp;
  const auto box = bounding_box(pc);
  sp.lat_min = box.lat_min;
  sp.lat_max = box.lat_max;
  sp.lon_min = box.lon_min;
  sp.lon_max = box.lon_max;

  const auto n = static_cast<double>(pc.size());
  double mean = 0.0;
  for (const auto& p : pc) mean += p.value();
  mean /= n;
  double var = 0.0;
  for (const auto& p : pc) var += (p.value() - mean) * (p.value() - mean);
  var /= n;
  if (!(var > 0.0)) throw ConstantFieldError("preprocess_ok: constant field, std = 0");
  sp.value_mean = mean;
  sp.value_std = std::sqrt(var);

  std::vector<ClimatePoint> scaled;
  scaled.reserve(pc.size());
  for (const auto& p : pc) {
    scaled.emplace_back(sp.scale_lat(p.lat()), sp.scale_lon(p.lon()), sp.standardize(p.value()));
  }
  return {ClimatePointCloud(std::move(scaled)), sp};
}

ClimatePointCloud restore_ok(const ClimatePointCloud& scaled, const StandardizationParams& sp) {
  std::vector<ClimatePoint> out;
  out.reserve(scaled.size());
  for (const auto& p : scaled) {
    out.emplace_back(std::clamp(sp.unscale_lat(p.lat()), -90.0, 90.0),
                     std::clamp(sp.unscale_lon(p.lon()), -180.0, 180.0),
                     sp.destandardize(p.value()));
  }
  return ClimatePointCloud(std::move(out));
}

double kriging_lag(double lat_a, double lon_a, double lat_b, double lon_b, CoordinateSystem cs,
                   double anisotropy_scale) noexcept {
  if (cs == CoordinateSystem::Geographic) return distance(lat_a, lon_a, lat_b, lon_b, cs);
  const double dlat = lat_a - lat_b;
  const double dlon = (lon_a - lon_b) * anisotropy_scale;
  return std::sqrt(dlat * dlat + dlon * dlon);
}

EmpiricalVariogram empirical_variogram(const ClimatePointCloud& pc, int n_bins,
                                       double anisotropy_scale, CoordinateSystem cs) {
  if (pc.size() < 2) throw std::invalid_argument("empirical_variogram: need at least 2 points");
  if (n_bins < 1) throw std::invalid_argument("empirical_variogram: n_bins must be >= 1");
  if (cs == CoordinateSystem::Geographic && anisotropy_scale != 1.0) {
    warn_geographic_anisotropy();
    anisotropy_scale = 1.0;
  }

  const std::size_t n = pc.size();
  std::vector<double> lags;
  std::vector<double> sq;
  lags.reserve(n * (n - 1) / 2);
  sq.reserve(n * (n - 1) / 2);
  double h_max = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double h = kriging_lag(pc[a].lat(), pc[a].lon(), pc[b].lat(), pc[b].lon(), cs,
                                   anisotropy_scale);
      const double d = pc[a].value() - pc[b].value();
      lags.push_back(h);
      sq.push_back(d * d);
      h_max = std::max(h_max, h);
    }
  }

  const auto nb = static_cast<std::size_t>(n_bins);
  std::vector<double> sums(nb, 0.0);
  std::vector<std::size_t> counts(nb, 0);
  const double width = h_max / static_cast<double>(n_bins);
  if (width > 0.0) {
    for (std::size_t i = 0; i < lags.size(); ++i) {
      if (!(lags[i] > 0.0)) continue;
      // Bin j covers (j*w, (j+1)*w]; h_max lands in the last bin.
      auto j = static_cast<std::size_t>(std::max(0.0, std::ceil(lags[i] / width) - 1.0));
      j = std::min(j, nb - 1);
      sums[j] += sq[i];
      ++counts[j];
    }
  }

  EmpiricalVariogram ev;
  for (std::size_t j = 0; j < nb; ++j) {
    if (counts[j] == 0) continue;
    ev.lags.push_back((static_cast<double>(j) + 0.5) * width);
    ev.semivariances.push_back(sums[j] / (2.0 * static_cast<double>(counts[j])));
    ev.counts.push_back(counts[j]);
  }
  return ev;
}

FittedVariogram fit_variogram(const EmpiricalVariogram& ev, VariogramFamily family) {
  if (ev.size() < parameter_count(family)) {
    throw DegenerateVariogramError(fmt::format("{} bins cannot determine {} {} parameters",
                                               ev.size(), parameter_count(family),
                                               to_string(family)));
  }

  std::vector<double> basis(ev.size());
  auto fill_basis = [&](double param) {
    for (std::size_t j = 0; j < ev.size(); ++j) basis[j] = shape(family, ev.lags[j], param);
  };

  if (family == VariogramFamily::Linear) {
    fill_basis(0.0);
    return make_fitted(family, nonneg_fit(basis, ev), 0.0);
  }

  // Linear coefficients are solved exactly for each trial value of the one
  // nonlinear parameter, which Nelder-Mead searches in an unbounded transform.
  const bool is_power = family == VariogramFamily::Power;
  const double h_ref = ev.lags.back();
  auto decode = [&](double t) {
    return is_power ? 2.0 / (1.0 + std::exp(-t)) : h_ref * std::exp(t);
  };
  // Ranges far beyond the largest lag make bounded families numerically
  // indistinguishable from a linear model with an enormous sill.
  constexpr double kMinLogRange = -6.9;  // ~1e-3 of the largest lag
  constexpr double kMaxLogRange = 2.3;   // ~10x the largest lag
  auto objective = [&](const std::vector<double>& x) {
    if (!is_power && (x[0] < kMinLogRange || x[0] > kMaxLogRange)) {
      return std::numeric_limits<double>::infinity();
    }
    const double param = decode(x[0]);
    if (!(param > 0.0) || !std::isfinite(param)) return std::numeric_limits<double>::infinity();
    if (is_power && !(param < 2.0)) return std::numeric_limits<double>::infinity();
    fill_basis(param);
    return nonneg_fit(basis, ev).sse;
  };

  static constexpr double kRangeStarts[] = {0.1, 0.25, 0.5, 1.0, 2.0};
  static constexpr double kExponentStarts[] = {0.2, 0.5, 1.0, 1.5, 1.8};
  double best_t = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 5; ++s) {
    const double t0 = is_power ? std::log(kExponentStarts[s] / (2.0 - kExponentStarts[s]))
                               : std::log(kRangeStarts[s]);
    const auto res = nelder_mead(objective, {t0}, 0.5, 1e-12, 4000);
    if (res.value < best_val) {
      best_val = res.value;
      best_t = res.x[0];
    }
  }
  const double param = decode(best_t);
  fill_basis(param);
  return make_fitted(family, nonneg_fit(basis, ev), param);
}

OrdinaryKriging::OrdinaryKriging(ClimatePointCloud working, StandardizationParams sp,
                                 FittedVariogram fv, CoordinateSystem cs, double anisotropy_scale)
    : working_(std::move(working)),
      sp_(sp),
      fv_(fv),
      cs_(cs),
      anisotropy_(cs == CoordinateSystem::Geographic ? 1.0 : anisotropy_scale) {
  if (working_.size() < 2) throw std::invalid_argument("ordinary kriging needs at least 2 nodes");
  if (cs == CoordinateSystem::Geographic && anisotropy_scale != 1.0) warn_geographic_anisotropy();

  const auto n = static_cast<Eigen::Index>(working_.size());
  values_.resize(n);
  Eigen::MatrixXd a(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pi = working_[static_cast<std::size_t>(i)];
    values_(i) = pi.value();
    a(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& pj = working_[static_cast<std::size_t>(j)];
      const double g = system_semivariance(
          kriging_lag(pi.lat(), pi.lon(), pj.lat(), pj.lon(), cs_, anisotropy_));
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, n) = 1.0;
    a(n, i) = 1.0;
  }
  a(n, n) = 0.0;

  lu_.compute(a);
  double rc = lu_.rcond();
  if (!(rc > kRcondFloor)) {
    a.topLeftCorner(n, n).diagonal().array() += kJitter;
    lu_.compute(a);
    rc = lu_.rcond();
    if (!(rc > kRcondFloor)) {
      throw SingularSystemError(fmt::format("kriging system singular (rcond {:.3g})", rc));
    }
  }
}

OrdinaryKriging OrdinaryKriging::fit(const ClimatePointCloud& train, const KrigingParams& params) {
  auto [scaled, sp] = preprocess_ok(train);
  const double aniso =
      params.coord() == CoordinateSystem::Geographic ? 1.0 : params.anisotropy_scale();
  ClimatePointCloud working = std::move(scaled);
  if (params.coord() == CoordinateSystem::Geographic) {
    // Lags in km need the original coordinates; values stay standardized.
    std::vector<ClimatePoint> pts;
    pts.reserve(train.size());
    for (const auto& p : train) pts.emplace_back(p.lat(), p.lon(), sp.standardize(p.value()));
    working = ClimatePointCloud(std::move(pts));
  }
  const auto ev = empirical_variogram(working, params.n_bins(), aniso, params.coord());
  const auto fv = fit_variogram(ev, params.family());
  return OrdinaryKriging(std::move(working), sp, fv, params.coord(), aniso);
}

double OrdinaryKriging::system_semivariance(double h) const noexcept {
  return h > 0.0 ? fv_(h) : 0.0;
}

std::pair<double, double> OrdinaryKriging::working_location(const QueryPoint& q) const noexcept {
  if (cs_ == CoordinateSystem::Geographic) return {q.lat(), q.lon()};
  return {sp_.scale_lat(q.lat()), sp_.scale_lon(q.lon())};
}

Eigen::VectorXd OrdinaryKriging::rhs(double lat, double lon) const {
  const auto n = static_cast<Eigen::Index>(working_.size());
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = working_[static_cast<std::size_t>(i)];
    b(i) = system_semivariance(kriging_lag(p.lat(), p.lon(), lat, lon, cs_, anisotropy_));
  }
  b(n) = 1.0;
  return b;
}

std::pair<Eigen::VectorXd, double> OrdinaryKriging::weights(const QueryPoint& target) const {
  const auto [lat, lon] = working_location(target);
  const Eigen::VectorXd x = lu_.solve(rhs(lat, lon));
  const auto n = static_cast<Eigen::Index>(working_.size());
  return {x.head(n), x(n)};
}

std::vector<double> OrdinaryKriging::predict(std::span<const QueryPoint> targets) const {
  std::vector<double> out;
  out.reserve(targets.size());
  const auto n = static_cast<Eigen::Index>(working_.size());
  for (const auto& q : targets) {
    const auto [lat, lon] = working_location(q);
    const Eigen::VectorXd x = lu_.solve(rhs(lat, lon));
    out.push_back(sp_.destandardize(x.head(n).dot(values_)));
  }
  return out;
}

std::vector<double> ok_reconstruct(const ClimatePointCloud& scaled, const StandardizationParams& sp,
                                   const FittedVariogram& fv, std::span<const QueryPoint> targets,
                                   CoordinateSystem cs, double anisotropy_scale) {
  if (cs == CoordinateSystem::Geographic) {
    auto coords_only = sp;
    coords_only.value_mean = 0.0;
    coords_only.value_std = 1.0;
    return OrdinaryKriging(restore_ok(scaled, coords_only), sp, fv, cs, anisotropy_scale)
        .predict(targets);
  }
  return OrdinaryKriging(scaled, sp, fv, cs, anisotropy_scale).predict(targets);
}

}  // namespace fieldrecon
