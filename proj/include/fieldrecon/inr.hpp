#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fieldrecon/core.hpp"
#include "fieldrecon/random.hpp"

namespace fieldrecon {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kInrEpochs = 500;

struct InrParams {
  double learning_rate = 1e-3;
  double l2 = 0.0;
  int batch_size = 64;
  int hidden_dim = 64;
  int latent_dim = 64;
  int n_layers = 3;
  double input_scale = 16.0;
  double alpha = 6.0;
  /// Always 500 in tuning; smaller values are a test hook.
  int epochs = kInrEpochs;

  /// Throws std::invalid_argument outside the tuning bounds.
  void validate() const;
  /// Weaker check used by training: positive sizes and a finite step.
  void check_structure() const;
};

/// Per-axis min-max maps of coordinates and values onto [-1, 1]. A
/// degenerate axis maps to 0 and back to its single value.
struct NormalizationState {
  double lat_min = -1, lat_max = 1;
  double lon_min = -1, lon_max = 1;
  double value_min = -1, value_max = 1;

  static NormalizationState from_cloud(const ClimatePointCloud& pc);

  double norm_lat(double v) const noexcept;
  double norm_lon(double v) const noexcept;
  double norm_value(double v) const noexcept;
  double denorm_value(double v) const noexcept;
  double denorm_lat(double v) const noexcept;
  double denorm_lon(double v) const noexcept;
};

/// Bank of Gabor units: exp(-gamma/2 |x - mu|^2) * sin(<omega, x> + phi).
struct GaborLayer {
  Eigen::MatrixXd frequencies;  // hidden x 2
  Eigen::VectorXd phases;       // hidden
  Eigen::MatrixXd centers;      // hidden x 2
  Eigen::VectorXd gammas;       // hidden, fixed at initialization

  /// x: batch x 2, returns batch x hidden.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

/// Multiplicative filter network: z0 = g0(x), z_l = (W_l z_{l-1} + b_l) * g_l(x),
/// then a latent linear map and a scalar readout.
class GaborNetwork {
 public:
  GaborNetwork() = default;

  static GaborNetwork initialize(const InrParams& params, Rng& rng);

  std::size_t n_layers() const noexcept { return filters_.size(); }
  std::size_t hidden_dim() const noexcept;
  std::size_t latent_dim() const noexcept { return static_cast<std::size_t>(latent_b_.size()); }

  Eigen::VectorXd forward(const Eigen::MatrixXd& x) const;

  /// Mean squared error plus l2 * (sum of squared linear weights). Fills
  /// `grad` (same shape as *this, gammas zeroed) when non-null.
  double loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2,
              GaborNetwork* grad) const;

  /// Visits every trainable scalar (gammas excluded) in a fixed order.
  template <typename F>
  void for_each_parameter(F&& f) {
    visit_parameters(*this, f);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    visit_parameters(*this, f);
  }

  /// this -= step * grad over the trainable parameters.
  void descend(const GaborNetwork& grad, double step);

  std::vector<GaborLayer>& filters() noexcept { return filters_; }
  const std::vector<GaborLayer>& filters() const noexcept { return filters_; }

 private:
  friend class InrModel;
  GaborNetwork zeros_like() const;

  template <typename Self, typename F>
  static void visit_parameters(Self& self, F& f) {
    auto visit = [&f](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) f(m.data()[i]);
    };
    for (auto& g : self.filters_) {
      visit(g.frequencies);
      visit(g.phases);
      visit(g.centers);
    }
    for (auto& w : self.linear_w_) visit(w);
    for (auto& b : self.linear_b_) visit(b);
    visit(self.latent_w_);
    visit(self.latent_b_);
    visit(self.readout_w_);
    f(self.readout_b_);
  }

  std::vector<GaborLayer> filters_;
  std::vector<Eigen::MatrixXd> linear_w_;  // (n_layers - 1) x [hidden x hidden]
  std::vector<Eigen::VectorXd> linear_b_;
  Eigen::MatrixXd latent_w_;               // latent x hidden
  Eigen::VectorXd latent_b_;
  Eigen::VectorXd readout_w_;              // latent
  double readout_b_ = 0.0;
};

/// Trained network with its normalization; predictions are in degrees Celsius.
class InrModel {
 public:
  InrModel(InrParams params, NormalizationState norm, GaborNetwork net);

  const InrParams& params() const noexcept { return params_; }
  const NormalizationState& normalization() const noexcept { return norm_; }
  const GaborNetwork& network() const noexcept { return net_; }

  std::vector<double> predict(std::span<const QueryPoint> targets) const;

  void save(const std::filesystem::path& path) const;
  static InrModel load(const std::filesystem::path& path);

 private:
  InrParams params_;
  NormalizationState norm_;
  GaborNetwork net_;
};

struct InrTrainResult {
  InrModel model;                  // snapshot with the best validation MAE
  std::vector<double> val_mae;     // per epoch, degrees Celsius
  std::vector<double> train_loss;  // per epoch, mean batch loss
  double best_val_mae;
};

/// Mini-batch gradient descent for params.epochs epochs. Deterministic given
/// the seed. Throws DivergenceError when the loss becomes non-finite.
InrTrainResult inr_train(const ClimatePointCloud& train, const ClimatePointCloud& validation,
                         const InrParams& params, std::uint64_t seed);

std::vector<double> inr_reconstruct(const InrModel& model, std::span<const QueryPoint> targets);

}  // namespace fieldrecon
