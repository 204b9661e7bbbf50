#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "graspinfer/errors.hpp"
#include "graspinfer/graspsim.hpp"
#include "test_util.hpp"

using namespace graspinfer;
using namespace graspinfer::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

const char* kFixtureDir = GRASPINFER_SCENE_DIR;

Eigen::VectorXd hand(double x, double y, double theta) {
  return vec({x, y, std::cos(theta), std::sin(theta)});
}

// Unit-test-scale pipeline configuration (the acceptance suite runs the
// full-size defaults).
PipelineConfig desk_pipeline(std::uint64_t /*seed*/) {
  PipelineConfig cfg;
  cfg.sample_count = 100000;
  cfg.train.batch_size = 1000;
  cfg.train.epochs = 15;
  cfg.ensemble_size = 4;
  cfg.prior_sampler.chains = 64;
  cfg.prior_sampler.transitions = 1800;
  cfg.prior_sampler.burn_in = 200;
  cfg.posterior_sampler.chains = 24;
  cfg.posterior_sampler.transitions = 800;
  cfg.posterior_sampler.burn_in = 300;
  cfg.ascent.restarts = 6;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("success probability factor structure") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  GraspOutcomeModel model;

  // at the grasp point, aligned: every factor is 1 except slip
  CHECK(success_probability(model, scene, hand(0.5, 0.5, 0.0)) ==
        doctest::Approx(1.0 - model.p_slip));
  // orthogonal gripper: alignment factor vanishes
  CHECK(success_probability(model, scene, hand(0.5, 0.5, M_PI / 2.0)) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // 180-degree symmetry of the gripper
  CHECK(success_probability(model, scene, hand(0.52, 0.46, 1.1)) ==
        doctest::Approx(success_probability(model, scene, hand(0.52, 0.46, 1.1 + M_PI))));

  // distance falloff
  const double near = success_probability(model, scene, hand(0.5, 0.5, 0.0));
  const double far = success_probability(model, scene, hand(0.62, 0.5, 0.0));
  CHECK(far < near);
  CHECK(far == doctest::Approx(near * std::exp(-0.12 * 0.12 / (2.0 * 0.05 * 0.05))));

  GraspOutcomeModel symmetric = model;
  symmetric.beta = 0.0;  // axially symmetric gripper model
  CHECK(success_probability(symmetric, scene, hand(0.5, 0.5, 1.234)) ==
        doctest::Approx(1.0 - model.p_slip));
}

TEST_CASE("collision margin zeroes grasps near a second primitive") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/two_close.scene");
  GraspOutcomeModel model;
  // the gap between the disks is 0.06 < m_col = 0.08: grasping the facing
  // side of the large disk collides with the blocker
  CHECK(success_probability(model, scene, hand(0.50, 0.5, 0.0)) == 0.0);
  // the far side of the large disk is collision free
  CHECK(success_probability(model, scene, hand(0.40, 0.5, 0.0)) > 0.5);
}

TEST_CASE("simulate_grasp frequencies match the analytic probability") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  GraspOutcomeModel model;

  Rng rng(7);
  // p = 0 exactly
  for (int i = 0; i < 1000; ++i)
    CHECK(simulate_grasp(model, scene, hand(0.5, 0.5, M_PI / 2.0), rng) == 0);

  // p = 1 when slip is disabled
  GraspOutcomeModel sure = model;
  sure.p_slip = 0.0;
  for (int i = 0; i < 1000; ++i) CHECK(simulate_grasp(sure, scene, hand(0.5, 0.5, 0.0), rng) == 1);

  // intermediate point: empirical rate within 0.01 of the analytic value
  const Eigen::VectorXd h = hand(0.53, 0.48, 0.2);
  const double p = success_probability(model, scene, h);
  CHECK(p > 0.05);
  CHECK(p < 0.95);
  long hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += simulate_grasp(model, scene, h, rng);
  CHECK(std::abs(static_cast<double>(hits) / n - p) < 0.01);
}

TEST_CASE("dataset generation is deterministic and labelled by the simulator") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  GraspOutcomeModel model;
  SamplerConfig prior_cfg;
  prior_cfg.chains = 8;
  prior_cfg.transitions = 500;
  prior_cfg.burn_in = 100;
  prior_cfg.threads = 2;

  Rng a(99), b(99);
  const GraspDataset first = generate_grasp_dataset(scene, model, 2000, prior_cfg, a);
  const GraspDataset second = generate_grasp_dataset(scene, model, 2000, prior_cfg, b);
  CHECK(first.h == second.h);
  CHECK(first.label == second.label);

  // labels are Bernoulli draws of the analytic probability: the mean label
  // must sit near the mean success probability over the same hands
  double mean_p = 0.0;
  for (Eigen::Index i = 0; i < first.h.rows(); ++i)
    mean_p += success_probability(model, scene, first.h.row(i).transpose());
  mean_p /= static_cast<double>(first.h.rows());
  CHECK(std::abs(first.label.mean() - mean_p) < 0.03);

  SamplerConfig tiny = prior_cfg;
  tiny.chains = 1;
  tiny.transitions = 10;
  tiny.burn_in = 1;
  Rng c(1);
  CHECK_THROWS_AS(generate_grasp_dataset(scene, model, 2000, tiny, c), ConfigError);
}

TEST_CASE("learned log-ratio tracks the analytic success log-likelihood") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  const PipelineConfig cfg = desk_pipeline(0);
  Rng rng(2025);

  Rng data_rng = rng.stream("data");
  const GraspDataset data =
      generate_grasp_dataset(scene, cfg.model, cfg.sample_count, cfg.prior_sampler, data_rng);
  Rng train_rng = rng.stream("train");
  const RatioEnsemble ensemble =
      train_ensemble(to_nre_dataset(data), {4, 1}, cfg.train, cfg.ensemble_size, train_rng, 2);

  // Fresh prior draws; compare mean-centered log-ratio against the
  // mean-centered analytic log p(S=1 | h).  Restricted to the 8 nats below
  // the best draw: beyond that the joint carries no samples, cross-entropy
  // saturates and the classifier logit is unconstrained.
  Rng eval_rng = rng.stream("eval");
  const GraspDataset fresh =
      generate_grasp_dataset(scene, cfg.model, 1000, cfg.prior_sampler, eval_rng);
  Eigen::VectorXd obs(1);
  obs << 1.0;
  double max_log_p = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < fresh.h.rows(); ++i) {
    const double p = success_probability(cfg.model, scene, fresh.h.row(i).transpose());
    if (p > 0.0) max_log_p = std::max(max_log_p, std::log(p));
  }
  std::vector<double> learned, analytic;
  for (Eigen::Index i = 0; i < fresh.h.rows(); ++i) {
    const double p = success_probability(cfg.model, scene, fresh.h.row(i).transpose());
    if (p <= 0.0 || std::log(p) < max_log_p - 8.0) continue;
    learned.push_back(ensemble.logit(fresh.h.row(i).transpose(), obs));
    analytic.push_back(std::log(p));
  }
  REQUIRE(learned.size() > 500);
  const auto n = static_cast<Eigen::Index>(learned.size());
  Eigen::Map<Eigen::VectorXd> lv(learned.data(), n), av(analytic.data(), n);
  const Eigen::VectorXd lc = lv.array() - lv.mean();
  const Eigen::VectorXd ac = av.array() - av.mean();
  const double corr = lc.dot(ac) / (lc.norm() * ac.norm());
  CHECK(corr > 0.9);
}

TEST_CASE("end-to-end pipeline on the single-disk scene finds a near-optimal grasp") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  const PipelineConfig cfg = desk_pipeline(0);
  Rng rng(31337);
  const PipelineReport report = end_to_end_pipeline(scene, cfg, rng);

  CHECK_FALSE(report.low_acceptance);
  CHECK(report.success_at_map >= 0.9 * (1.0 - cfg.model.p_slip));

  // the optimum attains exactly 1 - p_slip at the disk center
  CHECK(success_probability(cfg.model, scene, hand(0.5, 0.5, 0.0)) ==
        doctest::Approx(1.0 - cfg.model.p_slip));
}

TEST_CASE("blocked side receives almost no posterior mass") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/two_close.scene");
  const PipelineConfig cfg = desk_pipeline(0);
  Rng rng(555);
  const PipelineReport report = end_to_end_pipeline(scene, cfg, rng);

  // blocked region: within the collision margin of a second primitive
  long blocked = 0;
  const auto& draws = report.posterior.draws;
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    const Eigen::VectorXd x = draws.row(r).head(2).transpose();
    std::size_t nearest = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
      const double d = (x - scene.primitives[i].center).norm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
      if (i == nearest) continue;
      if (scene.primitives[i].sdf(x) < cfg.model.m_col) {
        ++blocked;
        break;
      }
    }
  }
  CHECK(static_cast<double>(blocked) / draws.rows() <= 0.10);
}

TEST_CASE("axially symmetric model leaves the orientation marginal uniform") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/single_disk.scene");
  PipelineConfig cfg = desk_pipeline(0);
  cfg.model.beta = 0.0;  // no orientation information
  Rng rng(777);
  const PipelineReport report = end_to_end_pipeline(scene, cfg, rng);

  const Eigen::MatrixXd q = report.posterior.draws.rightCols(2);
  CHECK(resultant_length(q) <= 0.05);
}

TEST_CASE("elongated object: orientation marginal is bimodal antipodal") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/elongated.scene");
  const PipelineConfig cfg = desk_pipeline(0);
  Rng rng(888);
  const PipelineReport report = end_to_end_pipeline(scene, cfg, rng);

  std::vector<double> angles;
  const auto& draws = report.posterior.draws;
  angles.reserve(draws.rows());
  for (Eigen::Index r = 0; r < draws.rows(); ++r)
    angles.push_back(std::atan2(draws(r, 3), draws(r, 2)));
  const CircularClusters clusters = circular_two_means(angles);
  CHECK(clusters.silhouette > 0.5);
  CHECK(std::abs(clusters.separation() - M_PI) < 0.35);

  // both modes align with the capsule axis modulo the gripper symmetry
  const double axis = scene.primitives[0].angle;
  const double mode_err_a =
      std::min(std::abs(wrap_angle(clusters.center_a - axis)),
               std::abs(wrap_angle(clusters.center_a - axis - M_PI)));
  CHECK(mode_err_a < 0.3);
}
