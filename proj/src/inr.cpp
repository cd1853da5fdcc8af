#include "fieldrecon/inr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

namespace fieldrecon {

namespace {

constexpr int kCategoricalDims[] = {32, 64, 128, 256, 512, 1024};

bool is_dim_choice(int d) {
  return std::find(std::begin(kCategoricalDims), std::end(kCategoricalDims), d) !=
         std::end(kCategoricalDims);
}

double to_unit(double v, double lo, double hi) noexcept {
  if (hi <= lo) return 0.0;
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

double from_unit(double s, double lo, double hi) noexcept {
  if (hi <= lo) return lo;
  return lo + 0.5 * (s + 1.0) * (hi - lo);
}

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, -bound, bound);
  }
  return m;
}

Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index n, double bound) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, -bound, bound);
  return v;
}

Eigen::MatrixXd design(const NormalizationState& norm, std::span<const QueryPoint> pts) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = norm.norm_lat(pts[i].lat());
    x(static_cast<Eigen::Index>(i), 1) = norm.norm_lon(pts[i].lon());
  }
  return x;
}

}  // namespace

void InrParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("InrParams: " + what); };
  if (!(learning_rate >= 1e-5 && learning_rate <= 1e-2)) fail("learning rate outside [1e-5, 1e-2]");
  if (!(l2 >= 0.0 && l2 <= 0.1)) fail("l2 outside [0, 0.1]");
  if (batch_size < 32 || batch_size > 1024) fail("batch size outside [32, 1024]");
  if (!is_dim_choice(hidden_dim)) fail("hidden dim not in {32, ..., 1024}");
  if (!is_dim_choice(latent_dim)) fail("latent dim not in {32, ..., 1024}");
  if (n_layers < 1 || n_layers > 10) fail("layers outside [1, 10]");
  if (!(input_scale >= 2.0 && input_scale <= 1024.0)) fail("input scale outside [2, 1024]");
  if (!(alpha >= 0.0 && alpha <= 100.0)) fail("alpha outside [0, 100]");
  if (epochs != kInrEpochs) fail("epochs are fixed at 500");
}

void InrParams::check_structure() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate) || !(l2 >= 0.0) || batch_size < 1 ||
      hidden_dim < 1 || latent_dim < 1 || n_layers < 1 || !(input_scale > 0.0) ||
      !(alpha >= 0.0) || epochs < 0) {
    throw std::invalid_argument("InrParams: invalid network structure");
  }
}

NormalizationState NormalizationState::from_cloud(const ClimatePointCloud& pc) {
  const auto box = bounding_box(pc);
  NormalizationState s{box.lat_min, box.lat_max, box.lon_min, box.lon_max,
                       pc[0].value(), pc[0].value()};
  for (const auto& p : pc) {
    s.value_min = std::min(s.value_min, p.value());
    s.value_max = std::max(s.value_max, p.value());
  }
  return s;
}

double NormalizationState::norm_lat(double v) const noexcept { return to_unit(v, lat_min, lat_max); }
double NormalizationState::norm_lon(double v) const noexcept { return to_unit(v, lon_min, lon_max); }
double NormalizationState::norm_value(double v) const noexcept {
  return to_unit(v, value_min, value_max);
}
double NormalizationState::denorm_value(double v) const noexcept {
  return from_unit(v, value_min, value_max);
}
double NormalizationState::denorm_lat(double v) const noexcept { return from_unit(v, lat_min, lat_max); }
double NormalizationState::denorm_lon(double v) const noexcept { return from_unit(v, lon_min, lon_max); }

Eigen::MatrixXd GaborLayer::forward(const Eigen::MatrixXd& x) const {
  const Eigen::Index b = x.rows();
  const Eigen::Index h = frequencies.rows();
  Eigen::MatrixXd out(b, h);
  const Eigen::MatrixXd arg = (x * frequencies.transpose()).rowwise() + phases.transpose();
  for (Eigen::Index j = 0; j < h; ++j) {
    for (Eigen::Index i = 0; i < b; ++i) {
      const double d0 = x(i, 0) - centers(j, 0);
      const double d1 = x(i, 1) - centers(j, 1);
      out(i, j) = std::exp(-0.5 * gammas(j) * (d0 * d0 + d1 * d1)) * std::sin(arg(i, j));
    }
  }
  return out;
}

std::size_t GaborNetwork::hidden_dim() const noexcept {
  return filters_.empty() ? 0 : static_cast<std::size_t>(filters_.front().phases.size());
}

GaborNetwork GaborNetwork::initialize(const InrParams& params, Rng& rng) {
  params.check_structure();
  const Eigen::Index h = params.hidden_dim;
  const Eigen::Index latent = params.latent_dim;
  GaborNetwork net;

  // Gamma(shape = alpha, rate = alpha) has mean 1; alpha = 0 pins gamma to 1.
  std::gamma_distribution<double> gamma_dist(params.alpha > 0 ? params.alpha : 1.0,
                                             params.alpha > 0 ? 1.0 / params.alpha : 1.0);
  for (int l = 0; l < params.n_layers; ++l) {
    GaborLayer g;
    const double scale = params.input_scale / static_cast<double>(l + 1);
    g.frequencies = uniform_matrix(rng, h, 2, scale);
    g.phases = uniform_vector(rng, h, std::numbers::pi);
    g.centers = uniform_matrix(rng, h, 2, 1.0);
    g.gammas.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) g.gammas(j) = params.alpha > 0 ? gamma_dist(rng) : 1.0;
    net.filters_.push_back(std::move(g));
  }
  const double lin_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (int l = 1; l < params.n_layers; ++l) {
    net.linear_w_.push_back(uniform_matrix(rng, h, h, lin_bound));
    net.linear_b_.push_back(uniform_vector(rng, h, lin_bound));
  }
  net.latent_w_ = uniform_matrix(rng, latent, h, lin_bound);
  net.latent_b_ = uniform_vector(rng, latent, lin_bound);
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(latent));
  net.readout_w_ = uniform_vector(rng, latent, out_bound);
  net.readout_b_ = uniform(rng, -out_bound, out_bound);
  return net;
}

Eigen::VectorXd GaborNetwork::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = filters_.front().forward(x);
  for (std::size_t l = 1; l < filters_.size(); ++l) {
    const Eigen::MatrixXd a = (z * linear_w_[l - 1].transpose()).rowwise() +
                              linear_b_[l - 1].transpose();
    z = a.cwiseProduct(filters_[l].forward(x));
  }
  const Eigen::MatrixXd u = (z * latent_w_.transpose()).rowwise() + latent_b_.transpose();
  return (u * readout_w_).array() + readout_b_;
}

GaborNetwork GaborNetwork::zeros_like() const {
  GaborNetwork g = *this;
  g.for_each_parameter([](double& v) { v = 0.0; });
  for (auto& f : g.filters_) f.gammas.setZero();
  return g;
}

double GaborNetwork::loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2,
                          GaborNetwork* grad) const {
  const std::size_t n_layers = filters_.size();
  const auto b = static_cast<double>(x.rows());

  // Forward pass keeping intermediates.
  std::vector<Eigen::MatrixXd> gabor(n_layers);  // g_l(x)
  std::vector<Eigen::MatrixXd> pre(n_layers);    // A_l (l >= 1)
  std::vector<Eigen::MatrixXd> z(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) gabor[l] = filters_[l].forward(x);
  z[0] = gabor[0];
  for (std::size_t l = 1; l < n_layers; ++l) {
    pre[l] = (z[l - 1] * linear_w_[l - 1].transpose()).rowwise() + linear_b_[l - 1].transpose();
    z[l] = pre[l].cwiseProduct(gabor[l]);
  }
  const Eigen::MatrixXd u = (z.back() * latent_w_.transpose()).rowwise() + latent_b_.transpose();
  const Eigen::VectorXd pred = (u * readout_w_).array() + readout_b_;
  const Eigen::VectorXd resid = pred - y;

  double reg = readout_w_.squaredNorm() + latent_w_.squaredNorm();
  for (const auto& w : linear_w_) reg += w.squaredNorm();
  const double value = resid.squaredNorm() / b + l2 * reg;
  if (grad == nullptr) return value;

  *grad = zeros_like();
  const Eigen::VectorXd dpred = (2.0 / b) * resid;
  grad->readout_w_ = u.transpose() * dpred + 2.0 * l2 * readout_w_;
  grad->readout_b_ = dpred.sum();
  const Eigen::MatrixXd du = dpred * readout_w_.transpose();
  grad->latent_w_ = du.transpose() * z.back() + 2.0 * l2 * latent_w_;
  grad->latent_b_ = du.colwise().sum().transpose();
  Eigen::MatrixXd dz = du * latent_w_;

  std::vector<Eigen::MatrixXd> dgabor(n_layers);
  for (std::size_t l = n_layers - 1; l >= 1; --l) {
    const Eigen::MatrixXd da = dz.cwiseProduct(gabor[l]);
    dgabor[l] = dz.cwiseProduct(pre[l]);
    grad->linear_w_[l - 1] = da.transpose() * z[l - 1] + 2.0 * l2 * linear_w_[l - 1];
    grad->linear_b_[l - 1] = da.colwise().sum().transpose();
    dz = da * linear_w_[l - 1];
  }
  dgabor[0] = dz;

  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& f = filters_[l];
    auto& gf = grad->filters_[l];
    const Eigen::MatrixXd arg = (x * f.frequencies.transpose()).rowwise() + f.phases.transpose();
    const Eigen::Index h = f.frequencies.rows();
    Eigen::MatrixXd darg(x.rows(), h);
    for (Eigen::Index j = 0; j < h; ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double d0 = x(i, 0) - f.centers(j, 0);
        const double d1 = x(i, 1) - f.centers(j, 1);
        const double env = std::exp(-0.5 * f.gammas(j) * (d0 * d0 + d1 * d1));
        const double g = dgabor[l](i, j);
        darg(i, j) = g * env * std::cos(arg(i, j));
        // d env / d mu = env * gamma * (x - mu)
        const double denv = g * std::sin(arg(i, j)) * env * f.gammas(j);
        gf.centers(j, 0) += denv * d0;
        gf.centers(j, 1) += denv * d1;
      }
    }
    gf.frequencies = darg.transpose() * x;
    gf.phases = darg.colwise().sum().transpose();
  }
  return value;
}

void GaborNetwork::descend(const GaborNetwork& grad, double step) {
  for (std::size_t l = 0; l < filters_.size(); ++l) {
    filters_[l].frequencies -= step * grad.filters_[l].frequencies;
    filters_[l].phases -= step * grad.filters_[l].phases;
    filters_[l].centers -= step * grad.filters_[l].centers;
  }
  for (std::size_t l = 0; l < linear_w_.size(); ++l) {
    linear_w_[l] -= step * grad.linear_w_[l];
    linear_b_[l] -= step * grad.linear_b_[l];
  }
  latent_w_ -= step * grad.latent_w_;
  latent_b_ -= step * grad.latent_b_;
  readout_w_ -= step * grad.readout_w_;
  readout_b_ -= step * grad.readout_b_;
}

InrModel::InrModel(InrParams params, NormalizationState norm, GaborNetwork net)
    : params_(params), norm_(norm), net_(std::move(net)) {}

std::vector<double> InrModel::predict(std::span<const QueryPoint> targets) const {
  if (targets.empty()) return {};
  const Eigen::VectorXd y = net_.forward(design(norm_, targets));
  std::vector<double> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = norm_.denorm_value(y(i));
  return out;
}

std::vector<double> inr_reconstruct(const InrModel& model, std::span<const QueryPoint> targets) {
  return model.predict(targets);
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::runtime_error("checkpoint: matrix size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(i * cols + j2)];
  }
  return m;
}

}  // namespace

void InrModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "fieldrecon-gabor-inr";
  j["version"] = 1;
  j["params"] = {{"learning_rate", params_.learning_rate}, {"l2", params_.l2},
                 {"batch_size", params_.batch_size},       {"hidden_dim", params_.hidden_dim},
                 {"latent_dim", params_.latent_dim},       {"n_layers", params_.n_layers},
                 {"input_scale", params_.input_scale},     {"alpha", params_.alpha},
                 {"epochs", params_.epochs}};
  j["normalization"] = {norm_.lat_min, norm_.lat_max, norm_.lon_min,
                        norm_.lon_max, norm_.value_min, norm_.value_max};
  auto& filters = j["filters"] = nlohmann::json::array();
  for (const auto& f : net_.filters_) {
    filters.push_back({{"frequencies", matrix_json(f.frequencies)},
                       {"phases", matrix_json(f.phases)},
                       {"centers", matrix_json(f.centers)},
                       {"gammas", matrix_json(f.gammas)}});
  }
  auto& linear = j["linear"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net_.linear_w_.size(); ++l) {
    linear.push_back({{"w", matrix_json(net_.linear_w_[l])}, {"b", matrix_json(net_.linear_b_[l])}});
  }
  j["latent"] = {{"w", matrix_json(net_.latent_w_)}, {"b", matrix_json(net_.latent_b_)}};
  j["readout"] = {{"w", matrix_json(net_.readout_w_)}, {"b", net_.readout_b_}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump();
}

InrModel InrModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.at("format") != "fieldrecon-gabor-inr") throw std::runtime_error("not an INR checkpoint");

  InrParams p;
  const auto& jp = j.at("params");
  p.learning_rate = jp.at("learning_rate");
  p.l2 = jp.at("l2");
  p.batch_size = jp.at("batch_size");
  p.hidden_dim = jp.at("hidden_dim");
  p.latent_dim = jp.at("latent_dim");
  p.n_layers = jp.at("n_layers");
  p.input_scale = jp.at("input_scale");
  p.alpha = jp.at("alpha");
  p.epochs = jp.at("epochs");

  const auto nv = j.at("normalization").get<std::vector<double>>();
  const NormalizationState norm{nv.at(0), nv.at(1), nv.at(2), nv.at(3), nv.at(4), nv.at(5)};

  GaborNetwork net;
  for (const auto& f : j.at("filters")) {
    GaborLayer g;
    g.frequencies = matrix_from_json(f.at("frequencies"));
    g.phases = matrix_from_json(f.at("phases"));
    g.centers = matrix_from_json(f.at("centers"));
    g.gammas = matrix_from_json(f.at("gammas"));
    net.filters_.push_back(std::move(g));
  }
  for (const auto& l : j.at("linear")) {
    net.linear_w_.push_back(matrix_from_json(l.at("w")));
    net.linear_b_.push_back(matrix_from_json(l.at("b")));
  }
  net.latent_w_ = matrix_from_json(j.at("latent").at("w"));
  net.latent_b_ = matrix_from_json(j.at("latent").at("b"));
  net.readout_w_ = matrix_from_json(j.at("readout").at("w"));
  net.readout_b_ = j.at("readout").at("b");
  return InrModel(p, norm, std::move(net));
}

InrTrainResult inr_train(const ClimatePointCloud& train, const ClimatePointCloud& validation,
                         const InrParams& params, std::uint64_t seed) {
  params.check_structure();
  const auto norm = NormalizationState::from_cloud(train);
  Rng rng(seed);
  GaborNetwork net = GaborNetwork::initialize(params, rng);

  const auto train_locs = train.locations();
  const Eigen::MatrixXd x_all = design(norm, train_locs);
  Eigen::VectorXd y_all(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    y_all(static_cast<Eigen::Index>(i)) = norm.norm_value(train[i].value());
  }
  const auto val_locs = validation.locations();
  const Eigen::MatrixXd x_val = design(norm, val_locs);

  auto val_mae = [&](const GaborNetwork& n) {
    const Eigen::VectorXd y = n.forward(x_val);
    double s = 0.0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      s += std::abs(norm.denorm_value(y(static_cast<Eigen::Index>(i))) - validation[i].value());
    }
    return s / static_cast<double>(validation.size());
  };

  InrTrainResult result{InrModel(params, norm, net), {}, {}, val_mae(net)};
  GaborNetwork best = net;

  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(params.batch_size);
  GaborNetwork grad;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const auto m = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(m, 2);
      Eigen::VectorXd yb(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto src = order[start + static_cast<std::size_t>(r)];
        xb.row(r) = x_all.row(src);
        yb(r) = y_all(src);
      }
      const double l = net.loss(xb, yb, params.l2, &grad);
      if (!std::isfinite(l)) {
        throw DivergenceError(fmt::format("training loss became non-finite at epoch {}", epoch));
      }
      net.descend(grad, params.learning_rate);
      loss_sum += l;
      ++n_batches;
    }
    const double mae = val_mae(net);
    if (!std::isfinite(mae)) {
      throw DivergenceError(fmt::format("validation error became non-finite at epoch {}", epoch));
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(n_batches));
    result.val_mae.push_back(mae);
    if (mae < result.best_val_mae) {
      result.best_val_mae = mae;
      best = net;
    }
  }
  result.model = InrModel(params, norm, std::move(best));
  return result;
}

}  // namespace fieldrecon
