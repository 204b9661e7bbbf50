#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "graspinfer/density.hpp"
#include "graspinfer/manifold.hpp"
#include "graspinfer/mcmc.hpp"

namespace graspinfer {

/// Geometric primitive with a signed distance field.  The principal axis
/// angle rotates the shape in the xy-plane; in 3-D workspaces the rotation
/// axis is z.
struct Primitive {
  enum class Shape { disk, box, capsule };
  Shape shape;
  Eigen::VectorXd center;
  Eigen::VectorXd size;  // disk: {radius}; box: half extents; capsule: {half_length, radius}
  double angle = 0.0;

  /// Signed distance and (where defined) its gradient; subgradient
  /// conventions at the medial axis.
  double sdf(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

  /// Conservative axis-aligned bounds of the shape.
  Box bounds() const;

  void validate(int dim) const;
};

std::string shape_name(Primitive::Shape shape);

/// Workspace box, primitive list and the smoothing temperature of the
/// occupancy field p(o=1|x) = logistic(-sdf(x)/tau_sdf).  Immutable once
/// loaded; evaluators are pure.
struct Scene {
  Box workspace;
  std::vector<Primitive> primitives;
  double tau_sdf = 0.01;

  int dim() const { return static_cast<int>(workspace.lo.size()); }

  /// Smooth minimum (log-sum-exp with temperature tau_sdf) over primitive
  /// SDFs; equals the single primitive's sdf exactly when there is one.
  /// Scenes without primitives evaluate to the constant 1.
  double sdf(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

  /// log p(o=1|x) = -softplus(sdf(x)/tau_sdf), with analytic gradient.
  double occupancy_log_prob(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const;

  double occupancy(const Eigen::VectorXd& x) const;

  /// Union of the primitive bounds, clipped to the workspace; the workspace
  /// itself when there are no primitives.
  Box primitive_bounding_box() const;

  void validate() const;
};

/// Scene-dependent position prior log p(o=1|x) + log p(x), with p(x) uniform
/// on the workspace box: -inf outside the box, differentiable inside.
class PositionPrior final : public LogDensity {
 public:
  explicit PositionPrior(std::shared_ptr<const Scene> scene);

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;
  const Scene& scene() const { return *scene_; }

 private:
  std::shared_ptr<const Scene> scene_;
  ManifoldSpec spec_;
};

/// Hand-configuration prior on R^n x S^1: position prior plus a uniform
/// orientation (zero gradient on the orientation slice).
class HandPrior final : public LogDensity {
 public:
  explicit HandPrior(std::shared_ptr<const Scene> scene);

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override;
  const Scene& scene() const { return *scene_; }

 private:
  std::shared_ptr<const Scene> scene_;
  ManifoldSpec spec_;
};

LogDensityPtr hand_prior(std::shared_ptr<const Scene> scene);

/// Euclidean HMC draws from the position prior; chains start uniformly in
/// the bounding box of the primitives.
SampleBatch sample_position_prior(const Scene& scene, const SamplerConfig& config);

/// Plain-text scene document: versioned header, workspace/tau lines and one
/// `primitive` record per shape.  Parse errors carry line numbers; unknown
/// shape tags are rejected by name.
Scene parse_scene(std::istream& in, const std::string& source_name = "<scene>");
Scene load_scene(const std::string& path);
void write_scene(std::ostream& out, const Scene& scene);

}  // namespace graspinfer
