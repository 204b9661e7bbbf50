#include "graspinfer/map_opt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "graspinfer/errors.hpp"

namespace graspinfer {

void AscentConfig::validate() const {
  if (initial_step <= 0.0) throw ConfigError("ascent: initial step must be > 0");
  if (decay <= 0.0 || decay > 1.0) throw ConfigError("ascent: decay must be in (0, 1]");
  if (decay_interval < 1) throw ConfigError("ascent: decay interval must be >= 1");
  if (max_iterations < 1) throw ConfigError("ascent: max iterations must be >= 1");
  if (tolerance <= 0.0) throw ConfigError("ascent: tolerance must be > 0");
  if (restarts < 1) throw ConfigError("ascent: restarts must be >= 1");
}

AscentResult riemannian_ascent(const LogDensity& target, const ManifoldSpec& spec,
                               const Eigen::VectorXd& start, const AscentConfig& config) {
  config.validate();
  if (target.domain() != spec) throw ContractViolation("riemannian_ascent: spec mismatch");
  spec.require_point(start);

  AscentResult result;
  result.point = start;
  Eigen::VectorXd grad(spec.ambient_dim());
  double value = target.eval(result.point, &grad);
  if (!std::isfinite(value) || !grad.allFinite())
    throw InitializationError("riemannian_ascent: non-finite target or gradient at the start point");
  result.trace.push_back(value);

  double base_step = config.initial_step;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (iter > 0 && iter % config.decay_interval == 0) base_step *= config.decay;
    const Eigen::VectorXd direction = project_to_tangent(spec, result.point, grad);
    const double direction_norm = direction.norm();
    if (direction_norm * base_step < config.tolerance) {
      result.converged = true;
      break;
    }

    double step = base_step;
    bool improved = false;
    for (int halving = 0; halving <= config.max_halvings; ++halving) {
      const GeodesicState candidate = geodesic_step(spec, result.point, direction, step);
      Eigen::VectorXd cand_grad(spec.ambient_dim());
      const double cand_value = target.eval(candidate.point, &cand_grad);
      if (std::isfinite(cand_value) && cand_value >= value) {
        result.point = candidate.point;
        value = cand_value;
        grad = cand_grad;
        result.trace.push_back(value);
        improved = true;
        break;
      }
      step *= 0.5;
    }
    ++result.iterations;
    if (!improved) {
      result.converged = true;
      break;
    }
    if (direction_norm * step < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

MultistartResult map_multistart(const LogDensity& target, const ManifoldSpec& spec,
                                const AscentConfig& config, const Eigen::MatrixXd& pool,
                                const std::vector<Box>& boxes, Rng& rng) {
  config.validate();
  std::vector<Eigen::VectorXd> starts;
  if (pool.rows() > 0) {
    if (pool.cols() != spec.ambient_dim())
      throw ContractViolation("map_multistart: pool column count != ambient dim");
    // Highest-density pool rows, stable order for ties.
    std::vector<double> values(pool.rows());
    for (Eigen::Index i = 0; i < pool.rows(); ++i) values[i] = target.eval(pool.row(i));
    std::vector<Eigen::Index> order(pool.rows());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
    const int take = std::min<int>(config.restarts, static_cast<int>(pool.rows()));
    for (int i = 0; i < take; ++i) starts.push_back(pool.row(order[i]));
  } else {
    for (int i = 0; i < config.restarts; ++i) starts.push_back(sample_uniform(spec, boxes, rng));
  }

  MultistartResult result;
  result.runs.resize(starts.size());
  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(starts.size())));
  std::atomic<int> next{0};
  std::vector<std::thread> pool_threads;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool_threads.emplace_back([&, w] {
      try {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= static_cast<int>(starts.size())) break;
          result.runs[i] = riemannian_ascent(target, spec, starts[i], config);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool_threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  result.best_run = 0;
  for (std::size_t i = 1; i < result.runs.size(); ++i)
    if (result.runs[i].log_density() > result.runs[result.best_run].log_density())
      result.best_run = static_cast<int>(i);
  result.point = result.runs[result.best_run].point;
  result.log_density = result.runs[result.best_run].log_density();
  return result;
}

}  // namespace graspinfer
