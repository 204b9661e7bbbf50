#include "graspinfer/mcmc.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "graspinfer/errors.hpp"

namespace graspinfer {

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("sampler: chains must be >= 1");
  if (transitions < 1) throw ConfigError("sampler: transitions must be >= 1");
  if (burn_in < 0 || burn_in >= transitions)
    throw ConfigError("sampler: burn_in must satisfy 0 <= burn_in < transitions");
  if (step_size <= 0.0) throw ConfigError("sampler: step size must be > 0");
  if (leapfrog_steps < 1) throw ConfigError("sampler: leapfrog steps must be >= 1");
}

double SampleBatch::acceptance_rate(int chain) const {
  if (proposed[chain] == 0) return 0.0;
  return static_cast<double>(accepted[chain]) / static_cast<double>(proposed[chain]);
}

double SampleBatch::mean_acceptance() const {
  double sum = 0.0;
  for (int c = 0; c < config.chains; ++c) sum += acceptance_rate(c);
  return sum / static_cast<double>(config.chains);
}

Eigen::Block<const Eigen::MatrixXd> SampleBatch::chain_draws(int chain) const {
  const int r = retained_per_chain();
  return draws.block(static_cast<Eigen::Index>(chain) * r, 0, r, draws.cols());
}

namespace {

void run_chains(int chains, int threads, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min(threads, chains));
  if (workers == 1) {
    for (int c = 0; c < chains; ++c) body(c);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const int c = next.fetch_add(1);
          if (c >= chains) break;
          body(c);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SampleBatch geodesic_hmc(const LogDensity& log_ratio, const LogDensity& log_prior,
                         const ManifoldSpec& spec, const std::vector<Eigen::VectorXd>& init,
                         const SamplerConfig& config) {
  config.validate();
  if (log_ratio.domain() != spec || log_prior.domain() != spec)
    throw ContractViolation("geodesic_hmc: density specs do not match the sampler spec");
  if (static_cast<int>(init.size()) != config.chains)
    throw ContractViolation("geodesic_hmc: need one initial point per chain");
  for (const auto& p : init) spec.require_point(p);

  const int dim = spec.ambient_dim();
  const int retained = config.retained();
  SampleBatch batch;
  batch.spec = spec;
  batch.config = config;
  batch.draws.resize(static_cast<Eigen::Index>(config.chains) * retained, dim);
  batch.accepted.assign(config.chains, 0);
  batch.proposed.assign(config.chains, 0);
  batch.nan_rejects.assign(config.chains, 0);

  const double eps = config.step_size;
  const double half_eps = 0.5 * eps;
  const Rng root(config.seed);

  run_chains(config.chains, config.threads, [&](int c) {
    Rng rng = root.stream("chain", static_cast<std::uint64_t>(c));
    Eigen::VectorXd h = init[c];
    Eigen::VectorXd grad(dim);
    double log_r = log_ratio.eval(h);
    double log_p = log_prior.eval(h);
    if (!std::isfinite(log_r) || !std::isfinite(log_p))
      throw InitializationError("geodesic_hmc: non-finite log density at the initial state of chain " +
                                std::to_string(c));

    Eigen::VectorXd v_raw(dim);
    for (int t = 0; t < config.transitions; ++t) {
      for (int i = 0; i < dim; ++i) v_raw[i] = rng.normal();
      Eigen::VectorXd v = project_to_tangent(spec, h, v_raw);
      const double lambda_t = log_r + log_p - 0.5 * v.squaredNorm();

      Eigen::VectorXd hk = h;
      Eigen::VectorXd vk = v;
      bool finite = true;
      for (int k = 0; k < config.leapfrog_steps; ++k) {
        log_ratio.eval(hk, &grad);
        vk += half_eps * grad;
        vk = project_to_tangent(spec, hk, vk);
        GeodesicState next = geodesic_step(spec, hk, vk, eps);
        hk = std::move(next.point);
        vk = std::move(next.velocity);
        log_ratio.eval(hk, &grad);
        vk += half_eps * grad;
        vk = project_to_tangent(spec, hk, vk);
        if (!hk.allFinite() || !vk.allFinite()) {
          finite = false;
          break;
        }
      }

      const double u = rng.uniform();
      bool accept = false;
      if (finite) {
        const double new_log_r = log_ratio.eval(hk);
        const double new_log_p = log_prior.eval(hk);
        const double lambda_k = new_log_r + new_log_p - 0.5 * vk.squaredNorm();
        const double log_rho = lambda_k - lambda_t;
        if (std::isnan(log_rho)) {
          ++batch.nan_rejects[c];
        } else if (std::log(u) < log_rho) {
          accept = true;
          h = hk;
          log_r = new_log_r;
          log_p = new_log_p;
        }
      } else {
        ++batch.nan_rejects[c];
      }
      ++batch.proposed[c];
      if (accept) ++batch.accepted[c];
      if (t >= config.burn_in)
        batch.draws.row(static_cast<Eigen::Index>(c) * retained + (t - config.burn_in)) = h;
    }
  });
  return batch;
}

SampleBatch euclidean_hmc(const LogDensity& target, const ManifoldSpec& spec,
                          const std::vector<Eigen::VectorXd>& init, const SamplerConfig& config) {
  config.validate();
  for (const auto& b : spec.blocks())
    if (b.kind == Block::Kind::sphere)
      throw ContractViolation("euclidean_hmc: spec must contain only Euclidean blocks");
  if (target.domain() != spec)
    throw ContractViolation("euclidean_hmc: target spec does not match the sampler spec");
  if (static_cast<int>(init.size()) != config.chains)
    throw ContractViolation("euclidean_hmc: need one initial point per chain");

  const int dim = spec.ambient_dim();
  const int retained = config.retained();
  SampleBatch batch;
  batch.spec = spec;
  batch.config = config;
  batch.draws.resize(static_cast<Eigen::Index>(config.chains) * retained, dim);
  batch.accepted.assign(config.chains, 0);
  batch.proposed.assign(config.chains, 0);
  batch.nan_rejects.assign(config.chains, 0);

  const double eps = config.step_size;
  const double half_eps = 0.5 * eps;
  const Rng root(config.seed);

  run_chains(config.chains, config.threads, [&](int c) {
    Rng rng = root.stream("chain", static_cast<std::uint64_t>(c));
    Eigen::VectorXd x = init[c];
    Eigen::VectorXd grad(dim);
    double log_f = target.eval(x);
    if (!std::isfinite(log_f))
      throw InitializationError("euclidean_hmc: non-finite log density at the initial state of chain " +
                                std::to_string(c));

    Eigen::VectorXd v(dim);
    for (int t = 0; t < config.transitions; ++t) {
      for (int i = 0; i < dim; ++i) v[i] = rng.normal();
      const double lambda_t = log_f + 0.0 - 0.5 * v.squaredNorm();

      Eigen::VectorXd xk = x;
      Eigen::VectorXd vk = v;
      bool finite = true;
      for (int k = 0; k < config.leapfrog_steps; ++k) {
        target.eval(xk, &grad);
        vk += half_eps * grad;
        xk += eps * vk;
        target.eval(xk, &grad);
        vk += half_eps * grad;
        if (!xk.allFinite() || !vk.allFinite()) {
          finite = false;
          break;
        }
      }

      const double u = rng.uniform();
      bool accept = false;
      if (finite) {
        const double new_log_f = target.eval(xk);
        const double lambda_k = new_log_f + 0.0 - 0.5 * vk.squaredNorm();
        const double log_rho = lambda_k - lambda_t;
        if (std::isnan(log_rho)) {
          ++batch.nan_rejects[c];
        } else if (std::log(u) < log_rho) {
          accept = true;
          x = xk;
          log_f = new_log_f;
        }
      } else {
        ++batch.nan_rejects[c];
      }
      ++batch.proposed[c];
      if (accept) ++batch.accepted[c];
      if (t >= config.burn_in)
        batch.draws.row(static_cast<Eigen::Index>(c) * retained + (t - config.burn_in)) = x;
    }
  });
  return batch;
}

std::vector<Eigen::VectorXd> uniform_inits(const ManifoldSpec& spec, const std::vector<Box>& boxes,
                                           int chains, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains);
  for (int c = 0; c < chains; ++c) out.push_back(sample_uniform(spec, boxes, rng));
  return out;
}

namespace {

// One leapfrog trajectory of Algorithm 1 (kicks with grad log r only).
void integrate(const LogDensity& log_ratio, const ManifoldSpec& spec, Eigen::VectorXd& h,
               Eigen::VectorXd& v, double eps, int steps) {
  const double half_eps = 0.5 * eps;
  Eigen::VectorXd grad(h.size());
  for (int k = 0; k < steps; ++k) {
    log_ratio.eval(h, &grad);
    v += half_eps * grad;
    v = project_to_tangent(spec, h, v);
    GeodesicState next = geodesic_step(spec, h, v, eps);
    h = std::move(next.point);
    v = std::move(next.velocity);
    log_ratio.eval(h, &grad);
    v += half_eps * grad;
    v = project_to_tangent(spec, h, v);
  }
}

}  // namespace

ReversibilityReport reversibility_check(const LogDensity& log_ratio, const ManifoldSpec& spec,
                                        const Eigen::VectorXd& point, double step_size,
                                        int leapfrog_steps, Rng& rng) {
  spec.require_point(point);
  Eigen::VectorXd v_raw(spec.ambient_dim());
  for (int i = 0; i < v_raw.size(); ++i) v_raw[i] = rng.normal();
  const Eigen::VectorXd v0 = project_to_tangent(spec, point, v_raw);

  Eigen::VectorXd h = point;
  Eigen::VectorXd v = v0;
  integrate(log_ratio, spec, h, v, step_size, leapfrog_steps);
  v = -v;
  integrate(log_ratio, spec, h, v, step_size, leapfrog_steps);
  v = -v;

  return ReversibilityReport{geodesic_distance(spec, point, h), (v - v0).norm()};
}

double trajectory_energy_error(const LogDensity& log_ratio, const LogDensity& log_prior,
                               const ManifoldSpec& spec, const Eigen::VectorXd& point,
                               double step_size, int leapfrog_steps, Rng& rng) {
  spec.require_point(point);
  Eigen::VectorXd v_raw(spec.ambient_dim());
  for (int i = 0; i < v_raw.size(); ++i) v_raw[i] = rng.normal();
  Eigen::VectorXd v = project_to_tangent(spec, point, v_raw);
  const double lambda_t = log_ratio.eval(point) + log_prior.eval(point) - 0.5 * v.squaredNorm();
  Eigen::VectorXd h = point;
  integrate(log_ratio, spec, h, v, step_size, leapfrog_steps);
  const double lambda_k = log_ratio.eval(h) + log_prior.eval(h) - 0.5 * v.squaredNorm();
  return std::abs(lambda_k - lambda_t);
}

}  // namespace graspinfer
