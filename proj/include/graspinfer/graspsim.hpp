#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>

#include "graspinfer/map_opt.hpp"
#include "graspinfer/mcmc.hpp"
#include "graspinfer/nre.hpp"
#include "graspinfer/scene.hpp"

namespace graspinfer {

/// Synthetic grasp-outcome model.  Success probability factors into slip,
/// distance to the nearest primitive's grasp point (its center), gripper
/// alignment with that primitive's axis (180-degree symmetric) and a hard
/// collision term against the remaining primitives.
struct GraspOutcomeModel {
  double sigma_d = 0.05;  // distance scale, workspace units
  double beta = 4.0;      // alignment sharpness
  double p_slip = 0.05;   // slip noise rate
  double m_col = 0.08;    // collision margin

  void validate() const;
};

/// p = (1 - p_slip) * exp(-d^2 / 2 sigma_d^2) * ((1 + cos 2(theta - theta_near)) / 2)^beta
///     * collide(x), where collide zeroes grasps whose clearance to any
/// second primitive falls below m_col.  h lives on R^n x S^1.
double success_probability(const GraspOutcomeModel& model, const Scene& scene,
                           const Eigen::VectorXd& h);

/// Bernoulli draw with success_probability; deterministic given the stream.
int simulate_grasp(const GraspOutcomeModel& model, const Scene& scene, const Eigen::VectorXd& h,
                   Rng& rng);

/// Training pairs (h_i, S_i) with h from the hand prior (HMC positions,
/// uniform orientations).
struct GraspDataset {
  Eigen::MatrixXd h;      // count x (n + 2)
  Eigen::VectorXd label;  // S in {0, 1}
  std::string scene_id;
};

GraspDataset generate_grasp_dataset(const Scene& scene, const GraspOutcomeModel& model,
                                    std::int64_t count, const SamplerConfig& prior_config,
                                    Rng& rng, const std::string& scene_id = "scene");

Dataset to_nre_dataset(const GraspDataset& data);

/// Training-set CSV: h coordinates, S label and the scene id per row.
void save_grasp_dataset(const std::string& path, const GraspDataset& data);
GraspDataset load_grasp_dataset(const std::string& path);

struct PipelineConfig {
  GraspOutcomeModel model;
  std::int64_t sample_count = 100'000;
  TrainConfig train;
  SamplerConfig prior_sampler;      // position-prior HMC used for data generation
  SamplerConfig posterior_sampler;  // geodesic HMC on the composed posterior
  AscentConfig ascent;
  int ensemble_size = 6;
  int threads = 1;

  PipelineConfig();
};

struct PipelineReport {
  Eigen::VectorXd map_point;
  double map_log_density = 0.0;
  double success_at_map = 0.0;
  double mean_acceptance = 0.0;
  bool low_acceptance = false;  // mean acceptance below 0.1: badly trained ratio
  SampleBatch posterior;
  RatioEnsemble ensemble;
  GraspDataset dataset;
};

/// Full chain: simulate training pairs, train the ratio ensemble, compose
/// the posterior, run geodesic HMC, run multistart MAP ascent and score the
/// returned point against the ground-truth model.
PipelineReport end_to_end_pipeline(const Scene& scene, const PipelineConfig& config, Rng& rng);

}  // namespace graspinfer
