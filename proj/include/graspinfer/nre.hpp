#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "graspinfer/density.hpp"
#include "graspinfer/manifold.hpp"
#include "graspinfer/mlp.hpp"
#include "graspinfer/rng.hpp"

namespace graspinfer {

/// Input layout of a ratio classifier: the parameter slice comes first,
/// the observation slice after it.
struct PairLayout {
  int theta_dim = 0;
  int obs_dim = 0;
  int total() const { return theta_dim + obs_dim; }
  bool operator==(const PairLayout& o) const {
    return theta_dim == o.theta_dim && obs_dim == o.obs_dim;
  }
};

struct TrainConfig {
  std::int64_t sample_count = 1'000'000;
  int batch_size = 8000;
  int epochs = 50;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> hidden = {64, 64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Joint draws (theta_i, x_i); row i of each matrix is pair i.
struct Dataset {
  Eigen::MatrixXd theta;
  Eigen::MatrixXd obs;
  std::int64_t size() const { return theta.rows(); }
};

using PriorSampler = std::function<Eigen::VectorXd(Rng&)>;
using Simulator = std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, Rng&)>;

Dataset simulate_dataset(const PriorSampler& prior, const Simulator& simulate, std::int64_t count,
                         Rng& rng);

/// Binary classifier whose logit approximates log r(x | theta), the
/// likelihood-to-evidence ratio.  Inputs pass through a per-coordinate
/// affine standardization (fit on the training marginals) before the net,
/// so position coordinates with small spread train at the same scale as
/// raw sphere coordinates.
class RatioModel {
 public:
  RatioModel() = default;
  RatioModel(Mlp net, PairLayout layout, bool trained = false, double final_loss = 0.0);
  RatioModel(Mlp net, PairLayout layout, Eigen::VectorXd input_shift, Eigen::VectorXd input_scale,
             bool trained, double final_loss);

  const PairLayout& layout() const { return layout_; }
  const Mlp& net() const { return net_; }
  bool trained() const { return trained_; }
  double final_loss() const { return final_loss_; }
  const Eigen::VectorXd& input_shift() const { return shift_; }
  const Eigen::VectorXd& input_scale() const { return scale_; }

  double logit(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs) const;

  /// Logit and its gradient with respect to the parameter slice.
  double logit_with_theta_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs,
                               Eigen::VectorXd* theta_grad) const;

  bool operator==(const RatioModel& o) const {
    return layout_ == o.layout_ && trained_ == o.trained_ && final_loss_ == o.final_loss_ &&
           shift_ == o.shift_ && scale_ == o.scale_ && net_ == o.net_;
  }

 private:
  Mlp net_;
  PairLayout layout_;
  Eigen::VectorXd shift_;
  Eigen::VectorXd scale_;
  bool trained_ = false;
  double final_loss_ = 0.0;
};

/// Ensemble log-ratio: arithmetic mean of member logits (geometric mean of
/// ratios); gradients average likewise.
class RatioEnsemble {
 public:
  RatioEnsemble() = default;
  explicit RatioEnsemble(std::vector<RatioModel> members);

  const std::vector<RatioModel>& members() const { return members_; }
  int size() const { return static_cast<int>(members_.size()); }
  const PairLayout& layout() const;

  double logit(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs,
               Eigen::VectorXd* theta_grad = nullptr) const;

 private:
  std::vector<RatioModel> members_;
};

/// Trains one classifier on the dataset: positives are joint pairs, negatives
/// pair theta_i with the next observation of the shuffled batch.  Adam on
/// mean binary cross-entropy over logits.  Deterministic given the seed.
/// Throws TrainingDiverged (naming epoch and batch) on a non-finite loss.
RatioModel train_ratio(const Dataset& data, PairLayout layout, const TrainConfig& config, Rng& rng);

/// Simulates sample_count pairs and trains on them.
RatioModel train_ratio(const PriorSampler& prior, const Simulator& simulate, PairLayout layout,
                       const TrainConfig& config, Rng& rng);

/// Trains `count` members on a shared dataset with independent init/shuffle
/// streams; members may train concurrently (`threads`).
RatioEnsemble train_ensemble(const Dataset& data, PairLayout layout, const TrainConfig& config,
                             int count, Rng& rng, int threads = 1);

/// LogDensity view of an ensemble with the observation bound: theta -> mean
/// logit(theta, obs).  The domain spec supplies manifold structure for theta.
class EnsembleLogRatio final : public LogDensity {
 public:
  EnsembleLogRatio(RatioEnsemble ensemble, Eigen::VectorXd observation, ManifoldSpec theta_spec);

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;
  const RatioEnsemble& ensemble() const { return ensemble_; }

 private:
  RatioEnsemble ensemble_;
  Eigen::VectorXd obs_;
  ManifoldSpec spec_;
};

/// Composite posterior log r + log prior for a bound observation.
LogDensityPtr compose_posterior(const RatioEnsemble& ensemble, const Eigen::VectorXd& observation,
                                LogDensityPtr prior);

/// Versioned binary container for one or more ratio models; round-trips
/// bit-exactly.
void save_ensemble(const std::string& path, const RatioEnsemble& ensemble);
RatioEnsemble load_ensemble(const std::string& path);
void save_ratio_model(const std::string& path, const RatioModel& model);
RatioModel load_ratio_model(const std::string& path);

}  // namespace graspinfer
