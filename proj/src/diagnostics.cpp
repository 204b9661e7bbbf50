#include "graspinfer/diagnostics.hpp"

#include <cmath>

#include "graspinfer/errors.hpp"

namespace graspinfer {

MmdReport mmd_linear(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractViolation("mmd_linear: empty sample set");
  if (a.cols() != b.cols()) throw ContractViolation("mmd_linear: dimension mismatch");
  const Eigen::VectorXd mean_a = a.colwise().mean();
  const Eigen::VectorXd mean_b = b.colwise().mean();
  MmdReport report;
  report.mmd_squared = (mean_a - mean_b).squaredNorm();
  report.mmd = std::sqrt(report.mmd_squared);
  report.n_a = a.rows();
  report.n_b = b.rows();
  return report;
}

Eigen::VectorXd frechet_mean(const Eigen::MatrixXd& samples, int max_iterations, double tol) {
  if (samples.rows() == 0) throw ContractViolation("frechet_mean: empty sample set");
  const Eigen::Index dim = samples.cols();
  if (dim < 2) throw ContractViolation("frechet_mean: samples must be sphere points in R^{d+1}");

  // Extrinsic mean as the starting point.
  Eigen::VectorXd m = samples.colwise().mean();
  const double norm0 = m.norm();
  if (norm0 < 1e-12)
    throw ConvergenceError("frechet_mean: extrinsic mean is numerically zero (antipodal mass)");
  m /= norm0;

  double residual = 0.0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Mean of the tangent logs log_m(x_i).
    Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const auto x = samples.row(i).transpose();
      const double c = std::clamp(m.dot(x), -1.0, 1.0);
      const double theta = std::acos(c);
      if (theta < 1e-14) continue;
      const Eigen::VectorXd tangent = x - c * m;
      const double tn = tangent.norm();
      if (tn < 1e-14) continue;  // antipodal sample: log undefined, skip
      step += (theta / tn) * tangent;
    }
    step /= static_cast<double>(samples.rows());
    residual = step.norm();
    if (residual < tol) return m;
    const double s = residual;
    m = std::cos(s) * m + std::sin(s) * (step / s);
    m /= m.norm();
  }
  throw ConvergenceError("frechet_mean: no convergence after " + std::to_string(max_iterations) +
                         " iterations, residual " + std::to_string(residual));
}

EssResult ess(const Eigen::VectorXd& trace) {
  const Eigen::Index n = trace.size();
  if (n < 10) throw ContractViolation("ess: trace length must be >= 10");
  const double mean = trace.mean();
  const Eigen::VectorXd centered = trace.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(n);
  EssResult result;
  if (var <= 1e-300 || var <= 1e-14 * mean * mean) {
    result.ess = 1.0;
    result.tau = static_cast<double>(n);
    result.degenerate = true;
    return result;
  }
  // Geyer initial positive sequence on pair sums of autocorrelations.
  // Lags are capped; the sequence of a reasonably mixing chain turns
  // non-positive long before that.
  const Eigen::Index max_lag = std::min<Eigen::Index>(n - 1, 2000);
  double tau = -1.0;
  for (Eigen::Index m = 0; 2 * m + 1 < max_lag; ++m) {
    double pair = 0.0;
    for (int half = 0; half < 2; ++half) {
      const Eigen::Index k = 2 * m + half;
      if (k >= n) break;
      const double cov =
          centered.head(n - k).dot(centered.tail(n - k)) / static_cast<double>(n);
      pair += cov / var;
    }
    if (m > 0 && pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1e-12);
  result.tau = tau;
  result.ess = static_cast<double>(n) / tau;
  return result;
}

EssSummary ess_summary(const SampleBatch& batch) {
  const int chains = batch.config.chains;
  const Eigen::Index dim = batch.draws.cols();
  EssSummary summary;
  summary.per_chain.resize(chains, dim);
  summary.pooled = Eigen::VectorXd::Zero(dim);
  for (int c = 0; c < chains; ++c) {
    const auto block = batch.chain_draws(c);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const EssResult r = ess(block.col(j));
      summary.per_chain(c, j) = r.ess;
      summary.pooled[j] += r.ess;
    }
  }
  return summary;
}

}  // namespace graspinfer
