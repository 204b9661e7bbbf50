#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "graspinfer/density.hpp"
#include "graspinfer/manifold.hpp"
#include "graspinfer/rng.hpp"

namespace graspinfer {

struct AscentConfig {
  double initial_step = 0.05;
  double decay = 1.0;       // multiplicative step decay
  int decay_interval = 50;  // iterations between decays
  int max_iterations = 500;
  double tolerance = 1e-6;  // geodesic step-length threshold
  int restarts = 8;
  int max_halvings = 40;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct AscentResult {
  Eigen::VectorXd point;
  std::vector<double> trace;  // accepted-iterate log densities, non-decreasing
  int iterations = 0;
  bool converged = false;
  double log_density() const { return trace.empty() ? 0.0 : trace.back(); }
};

/// Riemannian gradient ascent: h <- exp_h(alpha * pi_h(grad log p)) with
/// accept-if-improved step halving.  Stops when the accepted geodesic step
/// length falls below the tolerance or no halved step improves.
AscentResult riemannian_ascent(const LogDensity& target, const ManifoldSpec& spec,
                               const Eigen::VectorXd& start, const AscentConfig& config);

struct MultistartResult {
  Eigen::VectorXd point;
  double log_density;
  int best_run = 0;
  std::vector<AscentResult> runs;
};

/// Runs `restarts` ascents from the highest-density rows of the candidate
/// pool (or, when pool is empty, uniform draws using the supplied boxes) and
/// returns the argmax; ties break on the first-found run.
MultistartResult map_multistart(const LogDensity& target, const ManifoldSpec& spec,
                                const AscentConfig& config, const Eigen::MatrixXd& pool,
                                const std::vector<Box>& boxes, Rng& rng);

}  // namespace graspinfer
