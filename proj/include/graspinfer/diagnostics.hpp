#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "graspinfer/mcmc.hpp"

namespace graspinfer {

struct MmdReport {
  double mmd_squared = 0.0;
  double mmd = 0.0;
  Eigen::Index n_a = 0;
  Eigen::Index n_b = 0;
  std::string kernel = "linear";
};

/// Biased (V-statistic) two-sample MMD with the linear kernel k(x,y) = x^T y;
/// reduces to the squared distance between the sample means.
MmdReport mmd_linear(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Fréchet (geodesic) mean on S^d: minimizes the sum of squared arc
/// distances by iterating mean-of-logs steps.  Rows of `samples` are unit
/// vectors.  Throws ConvergenceError when the update norm does not fall
/// below tol within max_iterations.
Eigen::VectorXd frechet_mean(const Eigen::MatrixXd& samples, int max_iterations = 1000,
                             double tol = 1e-10);

struct EssResult {
  double ess = 0.0;
  double tau = 1.0;  // integrated autocorrelation time
  bool degenerate = false;
};

/// Initial-positive-sequence autocorrelation ESS for one scalar trace.
/// Constant traces are flagged degenerate with ESS 1.
EssResult ess(const Eigen::VectorXd& trace);

struct EssSummary {
  Eigen::MatrixXd per_chain;  // chains x dim
  Eigen::VectorXd pooled;     // sum over chains, per coordinate
};

EssSummary ess_summary(const SampleBatch& batch);

}  // namespace graspinfer
