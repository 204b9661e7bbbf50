#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "graspinfer/manifold.hpp"
#include "graspinfer/rng.hpp"

namespace graspinfer {

/// Unnormalized log density over points of a product manifold.
///
/// eval returns the log value (-inf outside the support) and, when grad is
/// non-null, the ambient gradient (zeroed wherever the value is -inf).
/// Tangent projection of the gradient is deliberately left to consumers.
/// Implementations are immutable after construction and safe to evaluate
/// from many chains concurrently.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual const ManifoldSpec& domain() const = 0;
  virtual double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const = 0;
};

using LogDensityPtr = std::shared_ptr<const LogDensity>;

/// Flat density: zero everywhere on the manifold, except outside the optional
/// per-Euclidean-block boxes where it is -inf.  Serves as the uniform
/// orientation prior (rotation invariant by construction) and as the uniform
/// workspace prior.
class UniformDensity final : public LogDensity {
 public:
  explicit UniformDensity(ManifoldSpec spec, std::vector<Box> boxes = {});

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;

 private:
  ManifoldSpec spec_;
  std::vector<Box> boxes_;  // one per Euclidean block, in block order; may be empty
};

/// von Mises-Fisher distribution on S^d embedded in R^{d+1}; unnormalized
/// log density kappa * nu^T x.
class VonMisesFisher {
 public:
  VonMisesFisher(Eigen::VectorXd mean_direction, double concentration);

  const Eigen::VectorXd& mean_direction() const { return nu_; }
  double concentration() const { return kappa_; }
  int intrinsic_dim() const { return static_cast<int>(nu_.size()) - 1; }

  /// Unnormalized log density and its ambient gradient kappa * nu.
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

  /// i.i.d. draws; angular inversion-free Best-Fisher scheme on S^1, Wood's
  /// rejection scheme on S^d for d >= 2.
  std::vector<Eigen::VectorXd> sample(int n, Rng& rng) const;
  Eigen::VectorXd sample_one(Rng& rng) const;

 private:
  Eigen::VectorXd nu_;
  double kappa_;
};

/// LogDensity view of a VonMisesFisher over ManifoldSpec::sphere(d).
class VmfDensity final : public LogDensity {
 public:
  explicit VmfDensity(VonMisesFisher dist);

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;
  const VonMisesFisher& dist() const { return dist_; }

 private:
  VonMisesFisher dist_;
  ManifoldSpec spec_;
};

/// log r + log prior with gradients summed; wherever the prior is -inf the
/// composite is -inf with a zero gradient.  Both terms must share a spec.
class ComposedLogDensity final : public LogDensity {
 public:
  ComposedLogDensity(LogDensityPtr log_ratio, LogDensityPtr prior);

  const ManifoldSpec& domain() const override { return log_ratio_->domain(); }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;

  const LogDensity& log_ratio() const { return *log_ratio_; }
  const LogDensity& prior() const { return *prior_; }

 private:
  LogDensityPtr log_ratio_;
  LogDensityPtr prior_;
};

LogDensityPtr compose_posterior(LogDensityPtr log_ratio, LogDensityPtr prior);

}  // namespace graspinfer
