#include "graspinfer/density.hpp"

#include <cmath>
#include <limits>

#include "graspinfer/errors.hpp"

namespace graspinfer {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

UniformDensity::UniformDensity(ManifoldSpec spec, std::vector<Box> boxes)
    : spec_(std::move(spec)), boxes_(std::move(boxes)) {
  if (!boxes_.empty()) {
    std::size_t euclidean_blocks = 0;
    for (const auto& b : spec_.blocks())
      if (b.kind == Block::Kind::euclidean) ++euclidean_blocks;
    if (boxes_.size() != euclidean_blocks)
      throw ConfigError("UniformDensity: expected one box per Euclidean block");
  }
}

double UniformDensity::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  spec_.require_dim(point, "point");
  if (grad) grad->setZero(spec_.ambient_dim());
  if (boxes_.empty()) return 0.0;
  std::size_t box_index = 0;
  for (const auto& b : spec_.blocks()) {
    if (b.kind != Block::Kind::euclidean) continue;
    const Box& box = boxes_[box_index++];
    const auto x = point.segment(b.offset, b.dim);
    if (!box.contains(x)) return kNegInf;
  }
  return 0.0;
}

VonMisesFisher::VonMisesFisher(Eigen::VectorXd mean_direction, double concentration)
    : nu_(std::move(mean_direction)), kappa_(concentration) {
  if (nu_.size() < 2) throw ContractViolation("vMF mean direction must live in R^{d+1}, d >= 1");
  if (kappa_ <= 0.0) throw ContractViolation("vMF concentration must be > 0");
  const double norm = nu_.norm();
  if (std::abs(norm - 1.0) > 1e-9)
    throw InvalidPoint("vMF mean direction must be unit norm, got " + std::to_string(norm));
}

double VonMisesFisher::log_density(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  if (x.size() != nu_.size())
    throw ContractViolation("vMF log_density: dimension mismatch");
  if (grad) *grad = kappa_ * nu_;
  return kappa_ * nu_.dot(x);
}

namespace {

// Best & Fisher (1979) wrapped-Cauchy rejection for the circular case.
double sample_vm_angle(double kappa, Rng& rng) {
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = rng.uniform();
    const double z = std::cos(M_PI * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = rng.uniform();
    if (c * (2.0 - c) - u2 > 0.0 || (u2 > 0.0 && std::log(c / u2) + 1.0 - c >= 0.0)) {
      const double u3 = rng.uniform();
      return (u3 < 0.5 ? -1.0 : 1.0) * std::acos(std::clamp(f, -1.0, 1.0));
    }
  }
}

// Wood (1994) rejection scheme for the cosine w = nu^T x on S^d, d >= 2.
double sample_wood_cosine(double kappa, int ambient_dim, Rng& rng) {
  const double p = static_cast<double>(ambient_dim);
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + (p - 1.0) * (p - 1.0))) / (p - 1.0);
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + (p - 1.0) * std::log(1.0 - x0 * x0);
  for (;;) {
    const double z = rng.beta(0.5 * (p - 1.0), 0.5 * (p - 1.0));
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    double u;
    do {
      u = rng.uniform();
    } while (u == 0.0);
    if (kappa * w + (p - 1.0) * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

}  // namespace

Eigen::VectorXd VonMisesFisher::sample_one(Rng& rng) const {
  const int ambient = static_cast<int>(nu_.size());
  if (ambient == 2) {
    const double theta = sample_vm_angle(kappa_, rng);
    const Eigen::VectorXd perp = (Eigen::VectorXd(2) << -nu_[1], nu_[0]).finished();
    return std::cos(theta) * nu_ + std::sin(theta) * perp;
  }
  const double w = sample_wood_cosine(kappa_, ambient, rng);
  // Uniform direction in the tangent hyperplane at nu.
  Eigen::VectorXd v(ambient);
  double norm = 0.0;
  do {
    for (int i = 0; i < ambient; ++i) v[i] = rng.normal();
    v -= nu_ * nu_.dot(v);
    norm = v.norm();
  } while (norm == 0.0);
  v /= norm;
  Eigen::VectorXd x = w * nu_ + std::sqrt(std::max(0.0, 1.0 - w * w)) * v;
  return x / x.norm();
}

std::vector<Eigen::VectorXd> VonMisesFisher::sample(int n, Rng& rng) const {
  if (n < 1) throw ContractViolation("vMF sample: n must be >= 1");
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_one(rng));
  return out;
}

VmfDensity::VmfDensity(VonMisesFisher dist)
    : dist_(std::move(dist)), spec_(ManifoldSpec::sphere(dist_.intrinsic_dim())) {}

double VmfDensity::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  spec_.require_dim(point, "point");
  return dist_.log_density(point, grad);
}

ComposedLogDensity::ComposedLogDensity(LogDensityPtr log_ratio, LogDensityPtr prior)
    : log_ratio_(std::move(log_ratio)), prior_(std::move(prior)) {
  if (!log_ratio_ || !prior_) throw ContractViolation("compose_posterior: null density");
  if (log_ratio_->domain() != prior_->domain())
    throw ContractViolation("compose_posterior: ratio and prior specs differ");
}

double ComposedLogDensity::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  Eigen::VectorXd prior_grad;
  const double prior_value = prior_->eval(point, grad ? &prior_grad : nullptr);
  if (prior_value == kNegInf) {
    if (grad) grad->setZero(domain().ambient_dim());
    return kNegInf;
  }
  const double ratio_value = log_ratio_->eval(point, grad);
  if (grad) *grad += prior_grad;
  return ratio_value + prior_value;
}

LogDensityPtr compose_posterior(LogDensityPtr log_ratio, LogDensityPtr prior) {
  return std::make_shared<ComposedLogDensity>(std::move(log_ratio), std::move(prior));
}

}  // namespace graspinfer
