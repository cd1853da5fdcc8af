#include "fieldrecon/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace fieldrecon {

namespace {

constexpr std::size_t kCandidates = 1024;
constexpr std::size_t kLocalCandidates = 64;
constexpr double kLocalStep = 0.05;
constexpr double kNoise = 1e-6;

}  // namespace

ParamSpec ParamSpec::real(std::string name, double lower, double upper) {
  return {std::move(name), ParamKind::Real, lower, upper, {}};
}
ParamSpec ParamSpec::real_log(std::string name, double lower, double upper) {
  return {std::move(name), ParamKind::RealLog, lower, upper, {}};
}
ParamSpec ParamSpec::integer(std::string name, int lower, int upper) {
  return {std::move(name), ParamKind::Integer, static_cast<double>(lower),
          static_cast<double>(upper), {}};
}
ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> categories) {
  return {std::move(name), ParamKind::Categorical, 0.0,
          static_cast<double>(categories.size()) - 1.0, std::move(categories)};
}

void ParamSpec::validate() const {
  switch (kind) {
    case ParamKind::Real:
      if (!(lower < upper)) throw std::invalid_argument(name + ": lower must be < upper");
      break;
    case ParamKind::RealLog:
      if (!(lower > 0.0 && lower < upper)) {
        throw std::invalid_argument(name + ": log range needs 0 < lower < upper");
      }
      break;
    case ParamKind::Integer:
      if (!(lower <= upper) || lower != std::round(lower) || upper != std::round(upper)) {
        throw std::invalid_argument(name + ": integer bounds must be ordered integers");
      }
      break;
    case ParamKind::Categorical:
      if (categories.size() < 2) throw std::invalid_argument(name + ": need >= 2 categories");
      break;
  }
}

std::size_t ParamSpec::encoded_width() const noexcept {
  return kind == ParamKind::Categorical ? categories.size() : 1;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Idw: return "idw";
    case Method::Ok: return "ok";
    case Method::Inr: return "inr";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "idw") return Method::Idw;
  if (s == "ok") return Method::Ok;
  if (s == "inr") return Method::Inr;
  throw std::invalid_argument("unknown method: " + s);
}

SearchSpace::SearchSpace(Method method, std::vector<ParamSpec> params)
    : method_(method), params_(std::move(params)) {
  if (params_.empty()) throw std::invalid_argument("empty search space");
  for (const auto& p : params_) p.validate();
}

SearchSpace SearchSpace::for_method(Method method) {
  const std::vector<std::string> dims{"32", "64", "128", "256", "512", "1024"};
  switch (method) {
    case Method::Idw:
      return SearchSpace(method, {ParamSpec::integer("k_neighbours", 1, 50),
                                  ParamSpec::real("power", 1e-7, 5.0)});
    case Method::Ok:
      return SearchSpace(
          method, {ParamSpec::integer("n_bins", 2, 50),
                   ParamSpec::real_log("anisotropy_scale", 1e-5, 5.0),
                   ParamSpec::categorical("coordinates", {"euclidean", "geographic"}),
                   ParamSpec::categorical("variogram_model", {"linear", "power", "gaussian",
                                                              "spherical", "exponential",
                                                              "hole-effect"})});
    case Method::Inr:
      return SearchSpace(method, {ParamSpec::real_log("learning_rate", 1e-5, 1e-2),
                                  ParamSpec::real("l2", 0.0, 0.1),
                                  ParamSpec::integer("batch_size", 32, 1024),
                                  ParamSpec::categorical("hidden_dim", dims),
                                  ParamSpec::categorical("latent_dim", dims),
                                  ParamSpec::integer("n_layers", 1, 10),
                                  ParamSpec::real("input_scale", 2.0, 1024.0),
                                  ParamSpec::real("alpha", 0.0, 100.0)});
  }
  throw std::invalid_argument("unknown method");
}

std::size_t SearchSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named " + name);
}

double SearchSpace::real(const Assignment& a, const std::string& name) const {
  return a.at(index_of(name));
}

int SearchSpace::integer(const Assignment& a, const std::string& name) const {
  return static_cast<int>(std::lround(a.at(index_of(name))));
}

const std::string& SearchSpace::category(const Assignment& a, const std::string& name) const {
  const auto i = index_of(name);
  return params_[i].categories.at(static_cast<std::size_t>(std::lround(a.at(i))));
}

bool SearchSpace::contains(const Assignment& a) const noexcept {
  if (a.size() != params_.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = params_[i];
    const double v = a[i];
    if (!std::isfinite(v) || v < p.lower || v > p.upper) return false;
    if ((p.kind == ParamKind::Integer || p.kind == ParamKind::Categorical) && v != std::round(v)) {
      return false;
    }
  }
  return true;
}

std::size_t SearchSpace::encoded_size() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.encoded_width();
  return n;
}

std::vector<double> SearchSpace::encode(const Assignment& a) const {
  std::vector<double> out;
  out.reserve(encoded_size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    switch (p.kind) {
      case ParamKind::Real:
        out.push_back((a[i] - p.lower) / (p.upper - p.lower));
        break;
      case ParamKind::RealLog:
        out.push_back((std::log(a[i]) - std::log(p.lower)) / (std::log(p.upper) - std::log(p.lower)));
        break;
      case ParamKind::Integer:
        out.push_back(p.upper > p.lower ? (a[i] - p.lower) / (p.upper - p.lower) : 0.5);
        break;
      case ParamKind::Categorical:
        for (std::size_t c = 0; c < p.categories.size(); ++c) {
          out.push_back(static_cast<double>(c) == a[i] ? 1.0 : 0.0);
        }
        break;
    }
  }
  return out;
}

std::string SearchSpace::format_value(std::size_t dim, double v) const {
  const auto& p = params_.at(dim);
  switch (p.kind) {
    case ParamKind::Categorical:
      return p.categories.at(static_cast<std::size_t>(std::lround(v)));
    case ParamKind::Integer:
      return std::to_string(std::lround(v));
    default:
      return fmt::format("{:.17g}", v);
  }
}

double SearchSpace::parse_value(std::size_t dim, const std::string& text) const {
  const auto& p = params_.at(dim);
  if (p.kind == ParamKind::Categorical) {
    const auto it = std::find(p.categories.begin(), p.categories.end(), text);
    if (it == p.categories.end()) throw std::invalid_argument(p.name + ": unknown category " + text);
    return static_cast<double>(it - p.categories.begin());
  }
  return std::stod(text);
}

BoBudget BoBudget::for_method(Method method) {
  return {50, method == Method::Inr ? std::size_t{200} : std::size_t{100}};
}

namespace {

double sample_dim(const ParamSpec& p, Rng& rng) {
  switch (p.kind) {
    case ParamKind::Real:
      return std::clamp(uniform(rng, p.lower, p.upper), p.lower, p.upper);
    case ParamKind::RealLog:
      return std::clamp(std::exp(uniform(rng, std::log(p.lower), std::log(p.upper))), p.lower,
                        p.upper);
    case ParamKind::Integer:
      return p.lower + static_cast<double>(
                           uniform_index(rng, static_cast<std::uint64_t>(p.upper - p.lower) + 1));
    case ParamKind::Categorical:
      return static_cast<double>(uniform_index(rng, p.categories.size()));
  }
  return p.lower;
}

// Moves an assignment by a Gaussian step in the encoded unit cube.
Assignment perturb(const SearchSpace& space, const Assignment& a, Rng& rng) {
  Assignment out = a;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.params()[i];
    if (p.kind == ParamKind::Categorical) {
      if (uniform01(rng) < 0.2) out[i] = static_cast<double>(uniform_index(rng, p.categories.size()));
      continue;
    }
    const double step = kLocalStep * standard_normal(rng);
    if (p.kind == ParamKind::RealLog) {
      const double lo = std::log(p.lower), hi = std::log(p.upper);
      const double u = std::clamp((std::log(a[i]) - lo) / (hi - lo) + step, 0.0, 1.0);
      out[i] = std::clamp(std::exp(lo + u * (hi - lo)), p.lower, p.upper);
    } else {
      const double span = p.upper - p.lower;
      double v = std::clamp(a[i] + step * span, p.lower, p.upper);
      if (p.kind == ParamKind::Integer) v = std::clamp(std::round(v), p.lower, p.upper);
      out[i] = v;
    }
  }
  return out;
}

double matern52(double r, double lengthscale) noexcept {
  const double s = std::sqrt(5.0) * r / lengthscale;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct GpFit {
  Eigen::MatrixXd x;  // n x d encoded inputs
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
  double lengthscale = 0.0;
};

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ls) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      k(i, j) = matern52((a.row(i) - b.row(j)).norm(), ls);
    }
  }
  return k;
}

// Unit signal variance on standardized targets; lengthscale by maximum
// marginal likelihood over a log grid.
bool fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, GpFit& out) {
  static constexpr double kLengthscales[] = {0.05, 0.08, 0.12, 0.18, 0.27, 0.4,
                                             0.6,  0.9,  1.35, 2.0,  3.0};
  double best_lml = -std::numeric_limits<double>::infinity();
  bool ok = false;
  const auto n = static_cast<double>(x.rows());
  for (const double ls : kLengthscales) {
    Eigen::MatrixXd k = kernel_matrix(x, x, ls);
    k.diagonal().array() += kNoise;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd alpha = llt.solve(y);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double lml = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * n * std::log(2 * std::numbers::pi);
    if (!std::isfinite(lml)) continue;
    if (lml > best_lml) {
      best_lml = lml;
      out.x = x;
      out.llt = llt;
      out.alpha = alpha;
      out.lengthscale = ls;
      ok = true;
    }
  }
  return ok;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<Assignment> sample_initial(const SearchSpace& space, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Assignment> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Assignment a(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) a[i] = sample_dim(space.params()[i], rng);
    out.push_back(std::move(a));
  }
  return out;
}

Assignment propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                        std::uint64_t seed) {
  std::vector<const Trial*> finite;
  for (const auto& t : history) {
    if (t.status == TrialStatus::Ok && std::isfinite(t.objective)) finite.push_back(&t);
  }
  auto fallback = [&] { return sample_initial(space, 1, derive_seed(seed, "fallback")).front(); };
  if (finite.empty()) return fallback();

  const auto n = static_cast<Eigen::Index>(finite.size());
  const auto d = static_cast<Eigen::Index>(space.encoded_size());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  std::size_t incumbent = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto enc = space.encode(finite[static_cast<std::size_t>(i)]->params);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = enc[static_cast<std::size_t>(j)];
    y(i) = finite[static_cast<std::size_t>(i)]->objective;
    if (y(i) < finite[incumbent]->objective) incumbent = static_cast<std::size_t>(i);
  }
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  const Eigen::VectorXd ys = (y.array() - mean) / (sd > 0.0 ? sd : 1.0);
  const double best = ys.minCoeff();

  auto candidates = sample_initial(space, kCandidates, derive_seed(seed, "candidates"));
  Rng local(derive_seed(seed, "local"));
  for (std::size_t i = 0; i < kLocalCandidates; ++i) {
    candidates.push_back(perturb(space, finite[incumbent]->params, local));
  }

  GpFit gp;
  if (!fit_gp(x, ys, gp)) return fallback();

  Eigen::MatrixXd xc(static_cast<Eigen::Index>(candidates.size()), d);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto enc = space.encode(candidates[c]);
    for (Eigen::Index j = 0; j < d; ++j) xc(static_cast<Eigen::Index>(c), j) = enc[static_cast<std::size_t>(j)];
  }
  const Eigen::MatrixXd ks = kernel_matrix(xc, gp.x, gp.lengthscale);  // m x n
  const Eigen::VectorXd mu = ks * gp.alpha;
  const Eigen::MatrixXd v = gp.llt.matrixL().solve(ks.transpose());  // n x m

  std::size_t arg = 0;
  double best_ei = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    const double var = std::max(0.0, 1.0 - v.col(ci).squaredNorm());
    const double s = std::sqrt(var);
    const double imp = best - mu(ci);
    double ei;
    if (s > 1e-12) {
      const double z = imp / s;
      ei = imp * normal_cdf(z) + s * normal_pdf(z);
    } else {
      ei = std::max(imp, 0.0);
    }
    if (std::isfinite(ei) && ei > best_ei) {
      best_ei = ei;
      arg = c;
    }
  }
  return candidates[arg];
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, fmt::format("trial-{}", index));
}

TuneResult tune(const SearchSpace& space, const Objective& objective, const BoBudget& budget,
                std::uint64_t seed, std::vector<Trial> resume, const TrialCallback& on_trial) {
  if (budget.n_initial == 0) throw std::invalid_argument("tune: need at least one initial sample");
  const std::size_t total = budget.n_initial + budget.n_iterations;
  if (resume.size() > total) throw std::invalid_argument("tune: resumed history exceeds budget");
  for (std::size_t i = 0; i < resume.size(); ++i) {
    if (resume[i].index != i || !space.contains(resume[i].params)) {
      throw std::invalid_argument(fmt::format("tune: resumed trial {} does not fit this space", i));
    }
  }
  TuneResult result;
  result.history = std::move(resume);
  const auto initial = sample_initial(space, budget.n_initial, derive_seed(seed, "initial"));

  auto evaluate = [&](const Assignment& a) {
    Trial t;
    t.params = a;
    t.index = result.history.size();
    try {
      const double v = objective(a, trial_seed(seed, t.index));
      if (std::isfinite(v)) {
        t.objective = v;
        t.status = TrialStatus::Ok;
      }
    } catch (const std::exception&) {
      t.status = TrialStatus::Failed;
    }
    result.history.push_back(std::move(t));
    if (on_trial) on_trial(result.history);
  };

  for (std::size_t i = result.history.size(); i < budget.n_initial; ++i) evaluate(initial[i]);
  for (std::size_t it = result.history.size() - budget.n_initial; it < budget.n_iterations; ++it) {
    evaluate(propose_next(result.history, space, derive_seed(seed, fmt::format("propose-{}", it))));
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    if (result.history[i].objective < best) {
      best = result.history[i].objective;
      result.best = i;
    }
  }
  return result;
}

std::vector<double> best_so_far(const std::vector<Trial>& history) {
  std::vector<double> out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : history) {
    if (t.status == TrialStatus::Ok) best = std::min(best, t.objective);
    out.push_back(best);
  }
  return out;
}

void write_history_csv(const std::filesystem::path& path, const SearchSpace& space,
                       const std::vector<Trial>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : space.params()) out << p.name << ',';
  out << "objective,status,trial_index\n";
  for (const auto& t : history) {
    for (std::size_t i = 0; i < space.size(); ++i) out << space.format_value(i, t.params[i]) << ',';
    out << (t.status == TrialStatus::Ok ? fmt::format("{:.17g}", t.objective) : std::string("inf"))
        << ',' << (t.status == TrialStatus::Ok ? "ok" : "failed") << ',' << t.index << '\n';
  }
}

std::vector<Trial> read_history_csv(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<Trial> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != space.size() + 3) {
      throw std::runtime_error(fmt::format("{}: malformed history row", path.string()));
    }
    Trial t;
    for (std::size_t i = 0; i < space.size(); ++i) t.params.push_back(space.parse_value(i, cells[i]));
    t.status = cells[space.size() + 1] == "ok" ? TrialStatus::Ok : TrialStatus::Failed;
    t.objective = t.status == TrialStatus::Ok ? std::stod(cells[space.size()])
                                              : std::numeric_limits<double>::infinity();
    t.index = std::stoul(cells[space.size() + 2]);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double lower, double upper,
                                    std::size_t bins, bool log_scale) {
  if (bins == 0 || !(lower < upper)) throw std::invalid_argument("histogram: bad range");
  auto tr = [log_scale](double v) { return log_scale ? std::log(v) : v; };
  const double lo = tr(lower), hi = tr(upper);
  const double w = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out;
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + w * static_cast<double>(b);
    const double c = b + 1 == bins ? hi : a + w;
    out.push_back({log_scale ? std::exp(a) : a, log_scale ? std::exp(c) : c, 0});
  }
  for (const double v : values) {
    if (!(v >= lower && v <= upper)) continue;
    auto b = static_cast<std::size_t>((tr(v) - lo) / w);
    ++out[std::min(b, bins - 1)].count;
  }
  return out;
}

}  // namespace fieldrecon
