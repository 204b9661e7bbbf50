#include "graspinfer/graspsim.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "graspinfer/errors.hpp"
#include "graspinfer/io.hpp"

namespace graspinfer {

void GraspOutcomeModel::validate() const {
  if (sigma_d <= 0.0) throw ConfigError("grasp model: sigma_d must be > 0");
  if (beta < 0.0) throw ConfigError("grasp model: beta must be >= 0");
  if (p_slip < 0.0 || p_slip >= 1.0) throw ConfigError("grasp model: p_slip must be in [0, 1)");
  if (m_col < 0.0) throw ConfigError("grasp model: m_col must be >= 0");
}

double success_probability(const GraspOutcomeModel& model, const Scene& scene,
                           const Eigen::VectorXd& h) {
  model.validate();
  const int n = scene.dim();
  if (h.size() != n + 2) throw ContractViolation("success_probability: h must live on R^n x S^1");
  if (scene.primitives.empty()) return 0.0;

  const Eigen::VectorXd x = h.head(n);
  const double theta = std::atan2(h[n + 1], h[n]);

  std::size_t nearest = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const double di = (x - scene.primitives[i].center).norm();
    if (di < d) {
      d = di;
      nearest = i;
    }
  }

  // Hard collision term against every other primitive.
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    if (i == nearest) continue;
    if (scene.primitives[i].sdf(x) < model.m_col) return 0.0;
  }

  const double theta_near = scene.primitives[nearest].angle;
  const double align = 0.5 * (1.0 + std::cos(2.0 * (theta - theta_near)));
  const double align_term = model.beta == 0.0 ? 1.0 : std::pow(align, model.beta);
  const double reach = std::exp(-d * d / (2.0 * model.sigma_d * model.sigma_d));
  return (1.0 - model.p_slip) * reach * align_term;
}

int simulate_grasp(const GraspOutcomeModel& model, const Scene& scene, const Eigen::VectorXd& h,
                   Rng& rng) {
  const double p = success_probability(model, scene, h);
  return rng.uniform() < p ? 1 : 0;
}

GraspDataset generate_grasp_dataset(const Scene& scene, const GraspOutcomeModel& model,
                                    std::int64_t count, const SamplerConfig& prior_config,
                                    Rng& rng, const std::string& scene_id) {
  if (count < 1) throw ContractViolation("generate_grasp_dataset: count must be >= 1");
  scene.validate();
  model.validate();

  // Positions from the scene prior; the HMC run must retain enough draws.
  SamplerConfig cfg = prior_config;
  const std::int64_t available = static_cast<std::int64_t>(cfg.chains) * cfg.retained();
  if (available < count)
    throw ConfigError("generate_grasp_dataset: prior sampler retains " + std::to_string(available) +
                      " draws which is fewer than the requested " + std::to_string(count));
  cfg.seed = rng.stream("prior").seed();
  const SampleBatch positions = sample_position_prior(scene, cfg);

  const int n = scene.dim();
  GraspDataset data;
  data.scene_id = scene_id;
  data.h.resize(count, n + 2);
  data.label.resize(count);

  // Deterministic thinning of the retained draws down to `count` rows.
  const double stride = static_cast<double>(positions.draws.rows()) / static_cast<double>(count);
  Rng sim_rng = rng.stream("sim");
  Rng ori_rng = rng.stream("orientation");
  for (std::int64_t i = 0; i < count; ++i) {
    const auto row = static_cast<Eigen::Index>(static_cast<double>(i) * stride);
    Eigen::VectorXd h(n + 2);
    h.head(n) = positions.draws.row(row).transpose();
    const double phi = ori_rng.uniform(0.0, 2.0 * M_PI);
    h[n] = std::cos(phi);
    h[n + 1] = std::sin(phi);
    data.h.row(i) = h;
    data.label[i] = static_cast<double>(simulate_grasp(model, scene, h, sim_rng));
  }
  return data;
}

Dataset to_nre_dataset(const GraspDataset& data) {
  Dataset out;
  out.theta = data.h;
  out.obs = data.label;
  return out;
}

void save_grasp_dataset(const std::string& path, const GraspDataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (Eigen::Index j = 0; j < data.h.cols(); ++j) out << 'c' << j << ',';
  out << "label,scene_id\n";
  for (Eigen::Index r = 0; r < data.h.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.h.cols(); ++j) out << format_double(data.h(r, j)) << ',';
    out << static_cast<int>(data.label[r]) << ',' << data.scene_id << '\n';
  }
  if (!out) throw ConfigError("failed writing: " + path);
}

GraspDataset load_grasp_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty dataset");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "scene_id")
    throw ParseError(path + ":1: expected columns c0..., label, scene_id");
  const auto coord_count = static_cast<Eigen::Index>(header.size() - 2);

  std::vector<std::vector<double>> coords;
  std::vector<double> labels;
  std::string scene_id;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<Eigen::Index>(cells.size()) != coord_count + 2)
      throw ParseError(path + ":" + std::to_string(line_no) + ": wrong cell count");
    std::vector<double> row(coord_count);
    try {
      for (Eigen::Index j = 0; j < coord_count; ++j) row[j] = std::stod(cells[j]);
      labels.push_back(std::stod(cells[coord_count]));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected a number");
    }
    if (scene_id.empty())
      scene_id = cells.back();
    else if (scene_id != cells.back())
      throw ParseError(path + ":" + std::to_string(line_no) + ": mixed scene ids in one dataset");
    coords.push_back(std::move(row));
  }
  if (coords.empty()) throw ParseError(path + ": dataset has no rows");

  GraspDataset data;
  data.scene_id = scene_id;
  data.h.resize(static_cast<Eigen::Index>(coords.size()), coord_count);
  data.label.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t r = 0; r < coords.size(); ++r) {
    for (Eigen::Index j = 0; j < coord_count; ++j)
      data.h(static_cast<Eigen::Index>(r), j) = coords[r][j];
    data.label[static_cast<Eigen::Index>(r)] = labels[r];
  }
  return data;
}

PipelineConfig::PipelineConfig() {
  train.sample_count = sample_count;
  train.epochs = 20;
  train.batch_size = 2000;
  prior_sampler.chains = 64;
  prior_sampler.transitions = 2000;
  prior_sampler.burn_in = 400;
  posterior_sampler.chains = 48;
  posterior_sampler.transitions = 1200;
  posterior_sampler.burn_in = 400;
  ascent.restarts = 8;
}

PipelineReport end_to_end_pipeline(const Scene& scene, const PipelineConfig& config, Rng& rng) {
  scene.validate();
  config.prior_sampler.validate();
  config.posterior_sampler.validate();
  config.ascent.validate();
  if (config.ensemble_size < 1) throw ConfigError("pipeline: ensemble_size must be >= 1");

  const int n = scene.dim();
  auto scene_ptr = std::make_shared<const Scene>(scene);
  const ManifoldSpec hand_spec = ManifoldSpec::euclidean(n).times(ManifoldSpec::sphere(1));

  PipelineReport report;

  // 1. training pairs from the hand prior and the stochastic simulator
  SamplerConfig prior_cfg = config.prior_sampler;
  prior_cfg.threads = config.threads;
  TrainConfig train_cfg = config.train;
  train_cfg.sample_count = config.sample_count;
  train_cfg.validate();
  Rng data_rng = rng.stream("data");
  report.dataset = generate_grasp_dataset(scene, config.model, config.sample_count, prior_cfg,
                                          data_rng, "pipeline");

  // 2. ratio ensemble on (h, S) pairs
  const PairLayout layout{n + 2, 1};
  Rng train_rng = rng.stream("train");
  report.ensemble = train_ensemble(to_nre_dataset(report.dataset), layout, train_cfg,
                                   config.ensemble_size, train_rng, config.threads);

  // 3. composed posterior for S = 1
  Eigen::VectorXd success_obs(1);
  success_obs[0] = 1.0;
  LogDensityPtr prior = hand_prior(scene_ptr);
  auto log_ratio = std::make_shared<EnsembleLogRatio>(report.ensemble, success_obs, hand_spec);

  // 4. geodesic HMC over hand configurations
  SamplerConfig post_cfg = config.posterior_sampler;
  post_cfg.threads = config.threads;
  post_cfg.seed = rng.stream("chains").seed();
  Rng init_rng = rng.stream("chain-init");
  const Box bbox = scene.primitive_bounding_box();
  const auto init = uniform_inits(hand_spec, {bbox}, post_cfg.chains, init_rng);
  report.posterior = geodesic_hmc(*log_ratio, *prior, hand_spec, init, post_cfg);
  report.mean_acceptance = report.posterior.mean_acceptance();
  report.low_acceptance = report.mean_acceptance < 0.1;

  // 5. multistart MAP on the composed posterior
  LogDensityPtr posterior_density = compose_posterior(log_ratio, prior);
  AscentConfig ascent_cfg = config.ascent;
  ascent_cfg.threads = config.threads;
  Rng map_rng = rng.stream("map");
  const MultistartResult map =
      map_multistart(*posterior_density, hand_spec, ascent_cfg, report.posterior.draws, {}, map_rng);
  report.map_point = map.point;
  report.map_log_density = map.log_density;

  // 6. ground-truth score of the returned point
  report.success_at_map = success_probability(config.model, scene, report.map_point);
  return report;
}

}  // namespace graspinfer
