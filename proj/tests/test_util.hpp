#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "graspinfer/density.hpp"
#include "graspinfer/rng.hpp"

namespace graspinfer::testing {

/// Central finite differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

/// max(rel_tol * |grad|, abs_tol) gradient agreement.
inline bool gradient_close(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd,
                           double rel_tol = 1e-4, double abs_tol = 1e-6) {
  const double err = (analytic - fd).norm();
  return err <= std::max(rel_tol * analytic.norm(), abs_tol);
}

inline bool density_gradient_matches_fd(const LogDensity& density, const Eigen::VectorXd& x,
                                        double h = 1e-5, double rel_tol = 1e-4,
                                        double abs_tol = 1e-6) {
  Eigen::VectorXd analytic;
  density.eval(x, &analytic);
  const Eigen::VectorXd fd =
      fd_gradient([&](const Eigen::VectorXd& p) { return density.eval(p); }, x, h);
  return gradient_close(analytic, fd, rel_tol, abs_tol);
}

/// Test-only vMF oracle, independent of the production samplers: uniform
/// proposals on the sphere accepted with probability exp(kappa (nu^T u - 1)).
inline Eigen::VectorXd vmf_rejection_sample(const Eigen::VectorXd& nu, double kappa, Rng& rng) {
  const Eigen::Index dim = nu.size();
  Eigen::VectorXd u(dim);
  for (;;) {
    double norm = 0.0;
    do {
      for (Eigen::Index i = 0; i < dim; ++i) u[i] = rng.normal();
      norm = u.norm();
    } while (norm == 0.0);
    u /= norm;
    const double log_accept = kappa * (nu.dot(u) - 1.0);
    if (std::log(rng.uniform() + 1e-300) < log_accept) return u;
  }
}

inline Eigen::MatrixXd vmf_rejection_matrix(const Eigen::VectorXd& nu, double kappa, int n,
                                            Rng& rng) {
  Eigen::MatrixXd out(n, nu.size());
  for (int i = 0; i < n; ++i) out.row(i) = vmf_rejection_sample(nu, kappa, rng);
  return out;
}

/// Haar-ish random rotation (QR of a Gaussian matrix, det fixed to +1).
inline Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

/// Length of the mean resultant vector of S^1 samples (rows).
inline double resultant_length(const Eigen::MatrixXd& points) {
  return points.colwise().mean().norm();
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

struct CircularClusters {
  double center_a = 0.0;
  double center_b = 0.0;
  double silhouette = 0.0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  /// absolute angular separation of the two centers
  double separation() const { return std::abs(wrap_angle(center_a - center_b)); }
};

/// Two-component circular k-means with a silhouette score (circular metric).
/// Deterministic: initialized from the first point and the point farthest
/// from it.
inline CircularClusters circular_two_means(const std::vector<double>& angles) {
  CircularClusters result;
  if (angles.size() < 4) return result;
  double c0 = angles[0];
  double c1 = c0, far_d = -1.0;
  for (double a : angles) {
    const double d = std::abs(wrap_angle(a - c0));
    if (d > far_d) {
      far_d = d;
      c1 = a;
    }
  }
  std::vector<int> assign(angles.size(), 0);
  for (int iter = 0; iter < 200; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const int best =
          std::abs(wrap_angle(angles[i] - c0)) <= std::abs(wrap_angle(angles[i] - c1)) ? 0 : 1;
      if (best != assign[i]) {
        assign[i] = best;
        changed = true;
      }
    }
    double sx0 = 0, sy0 = 0, sx1 = 0, sy1 = 0;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (assign[i] == 0) {
        sx0 += std::cos(angles[i]);
        sy0 += std::sin(angles[i]);
      } else {
        sx1 += std::cos(angles[i]);
        sy1 += std::sin(angles[i]);
      }
    }
    if (sx0 != 0.0 || sy0 != 0.0) c0 = std::atan2(sy0, sx0);
    if (sx1 != 0.0 || sy1 != 0.0) c1 = std::atan2(sy1, sx1);
    if (!changed && iter > 0) break;
  }
  result.center_a = c0;
  result.center_b = c1;
  for (std::size_t i = 0; i < angles.size(); ++i)
    (assign[i] == 0 ? result.size_a : result.size_b)++;

  // silhouette on a subsample (O(n^2) otherwise)
  const std::size_t stride = std::max<std::size_t>(1, angles.size() / 1500);
  std::vector<double> sub;
  std::vector<int> sub_assign;
  for (std::size_t i = 0; i < angles.size(); i += stride) {
    sub.push_back(angles[i]);
    sub_assign.push_back(assign[i]);
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    double own = 0, other = 0;
    std::size_t own_n = 0, other_n = 0;
    for (std::size_t j = 0; j < sub.size(); ++j) {
      if (i == j) continue;
      const double d = std::abs(wrap_angle(sub[i] - sub[j]));
      if (sub_assign[j] == sub_assign[i]) {
        own += d;
        ++own_n;
      } else {
        other += d;
        ++other_n;
      }
    }
    if (own_n == 0 || other_n == 0) continue;
    const double a = own / own_n;
    const double b = other / other_n;
    total += (b - a) / std::max(a, b);
    ++counted;
  }
  result.silhouette = counted > 0 ? total / counted : 0.0;
  return result;
}

/// Test-side adapter: a LogDensity from a (value, gradient) callable.
class FnDensity final : public LogDensity {
 public:
  using Fn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;
  FnDensity(ManifoldSpec spec, Fn fn) : spec_(std::move(spec)), fn_(std::move(fn)) {}

  const ManifoldSpec& domain() const override { return spec_; }
  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override {
    return fn_(point, grad);
  }

 private:
  ManifoldSpec spec_;
  Fn fn_;
};

}  // namespace graspinfer::testing
