#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graspinfer/rng.hpp"

namespace graspinfer {

/// One factor of a product manifold, mapped onto a contiguous slice of the
/// ambient coordinate vector.  Sphere blocks of intrinsic dimension d occupy
/// d+1 ambient coordinates (unit-norm embedding).
struct Block {
  enum class Kind { euclidean, sphere };
  Kind kind;
  int dim;     // Euclidean dimension, or intrinsic sphere dimension d
  int offset;  // first ambient coordinate of this block

  int ambient_dim() const { return kind == Kind::sphere ? dim + 1 : dim; }
};

/// Axis-aligned box bounds for one Euclidean block.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

/// Immutable description of a finite product of Euclidean spaces and embedded
/// spheres.  Block order fixes the coordinate layout of every point and
/// tangent vector; the spec is safely shareable across threads.
class ManifoldSpec {
 public:
  ManifoldSpec() = default;

  static ManifoldSpec euclidean(int n);
  static ManifoldSpec sphere(int d);

  /// Parses a compact product notation such as "R2xS1" or "S3".
  static ManifoldSpec parse(std::string_view text);

  /// Product of this spec with another (block lists concatenated).
  ManifoldSpec times(const ManifoldSpec& other) const;

  int ambient_dim() const { return ambient_dim_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::string to_string() const;

  bool operator==(const ManifoldSpec& other) const;
  bool operator!=(const ManifoldSpec& other) const { return !(*this == other); }

  /// True when every sphere slice has unit norm within tol.
  bool on_manifold(const Eigen::VectorXd& point, double tol = 1e-6) const;

  /// Throws ContractViolation on a length mismatch, InvalidPoint when a
  /// sphere slice is off the manifold beyond tol.
  void require_point(const Eigen::VectorXd& point, double tol = 1e-6) const;

  /// Throws ContractViolation when the vector length is wrong.
  void require_dim(const Eigen::VectorXd& v, const char* what) const;

  /// Rescales every sphere slice to unit norm (drift suppression).
  void renormalize(Eigen::VectorXd& point) const;

 private:
  explicit ManifoldSpec(std::vector<Block> blocks);

  std::vector<Block> blocks_;
  int ambient_dim_ = 0;
};

/// Orthogonal projection of an ambient vector onto the tangent space at base.
/// Euclidean slices pass through unchanged; each sphere slice g becomes
/// g - q (q^T g) for base slice q.
Eigen::VectorXd project_to_tangent(const ManifoldSpec& spec, const Eigen::VectorXd& base,
                                   const Eigen::VectorXd& ambient);

struct GeodesicState {
  Eigen::VectorXd point;
  Eigen::VectorXd velocity;
};

/// Follows the geodesic from (point, velocity) for time t.  Euclidean blocks
/// translate, sphere blocks rotate along the great circle at constant speed;
/// sphere slices are renormalized afterwards.
GeodesicState geodesic_step(const ManifoldSpec& spec, const Eigen::VectorXd& point,
                            const Eigen::VectorXd& velocity, double t);

/// Product metric distance: sqrt of the sum of squared per-block distances
/// (Euclidean norm / great-circle arc).
double geodesic_distance(const ManifoldSpec& spec, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b);

/// Uniform draw: Euclidean slices uniform in their boxes (one box per
/// Euclidean block, in block order), sphere slices uniform on the sphere.
/// Throws ConfigError when boxes are missing or malformed.
Eigen::VectorXd sample_uniform(const ManifoldSpec& spec, const std::vector<Box>& boxes, Rng& rng);

/// Convenience overload for specs without Euclidean blocks.
Eigen::VectorXd sample_uniform(const ManifoldSpec& spec, Rng& rng);

}  // namespace graspinfer
