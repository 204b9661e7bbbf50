#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "graspinfer/errors.hpp"
#include "graspinfer/scene.hpp"
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

Scene disk_scene(double radius = 0.1) {
  Scene scene;
  scene.workspace = Box{vec({0, 0}), vec({1, 1})};
  scene.tau_sdf = 0.01;
  Primitive prim;
  prim.shape = Primitive::Shape::disk;
  prim.center = vec({0.5, 0.5});
  prim.size = vec({radius});
  scene.primitives.push_back(prim);
  return scene;
}

const char* kFixtureDir = GRASPINFER_SCENE_DIR;

}  // namespace

TEST_CASE("primitive sdf hand values") {
  Primitive box;
  box.shape = Primitive::Shape::box;
  box.center = vec({0, 0});
  box.size = vec({0.2, 0.1});
  box.angle = 0.0;
  CHECK(box.sdf(vec({0.5, 0.0})) == doctest::Approx(0.3));
  CHECK(box.sdf(vec({0.0, 0.0})) == doctest::Approx(-0.1));
  CHECK(box.sdf(vec({0.3, 0.2})) == doctest::Approx(std::sqrt(0.02)));

  // rotating the box and the query by the same angle leaves the sdf unchanged
  Primitive rotated = box;
  rotated.angle = 0.6;
  const double c = std::cos(0.6), s = std::sin(0.6);
  const Eigen::VectorXd q = vec({0.5 * c, 0.5 * s});
  CHECK(rotated.sdf(q) == doctest::Approx(0.3));

  Primitive capsule;
  capsule.shape = Primitive::Shape::capsule;
  capsule.center = vec({0, 0});
  capsule.size = vec({0.15, 0.04});
  capsule.angle = 0.0;
  CHECK(capsule.sdf(vec({0.0, 0.1})) == doctest::Approx(0.06));
  CHECK(capsule.sdf(vec({0.25, 0.0})) == doctest::Approx(0.06));
  CHECK(capsule.sdf(vec({0.1, 0.0})) == doctest::Approx(-0.04));
}

TEST_CASE("occupancy log prob examples") {
  const Scene scene = disk_scene();
  // deep inside: sdf = -radius, occupancy ~ 1
  CHECK(scene.occupancy_log_prob(vec({0.5, 0.5})) == doctest::Approx(0.0).epsilon(1e-4));
  // boundary: logistic(0) = 1/2
  CHECK(scene.occupancy_log_prob(vec({0.6, 0.5})) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("occupancy gradient matches finite differences") {
  Scene scene = disk_scene();
  Primitive box;
  box.shape = Primitive::Shape::box;
  box.center = vec({0.25, 0.7});
  box.size = vec({0.1, 0.06});
  box.angle = 0.5;
  scene.primitives.push_back(box);
  Primitive capsule;
  capsule.shape = Primitive::Shape::capsule;
  capsule.center = vec({0.75, 0.25});
  capsule.size = vec({0.1, 0.03});
  capsule.angle = -0.9;
  scene.primitives.push_back(capsule);
  scene.tau_sdf = 0.02;

  Rng rng(71);
  int checked = 0;
  while (checked < 200) {
    const Eigen::VectorXd x = vec({rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98)});
    Eigen::VectorXd grad;
    scene.occupancy_log_prob(x, &grad);
    const Eigen::VectorXd fd = fd_gradient(
        [&](const Eigen::VectorXd& p) { return scene.occupancy_log_prob(p); }, x);
    CHECK(gradient_close(grad, fd, 1e-4, 1e-6));
    ++checked;
  }
}

TEST_CASE("occupancy bounds and monotonicity in the sdf") {
  const Scene scene = disk_scene();
  Rng rng(72);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd x = vec({rng.uniform(0, 1), rng.uniform(0, 1)});
    const double occ = scene.occupancy(x);
    CHECK(occ > 0.0);
    CHECK(occ < 1.0);
    pairs.emplace_back(scene.sdf(x), occ);
  }
  std::sort(pairs.begin(), pairs.end());
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].first > pairs[i - 1].first) CHECK(pairs[i].second <= pairs[i - 1].second);
  }
}

TEST_CASE("smooth-min equals the single primitive sdf exactly") {
  const Scene scene = disk_scene();
  Rng rng(73);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = vec({rng.uniform(0, 1), rng.uniform(0, 1)});
    CHECK(scene.sdf(x) == scene.primitives[0].sdf(x));
  }
}

TEST_CASE("position prior sampling stays inside objects for a single disk") {
  // occupancy >= 1/2 means sdf <= 0; the boundary layer holds ~2 tau ln2 / r
  // of the prior mass, so the wall must be sharp relative to the disk
  Scene scene = disk_scene(0.25);
  scene.tau_sdf = 0.001;
  SamplerConfig cfg;
  cfg.chains = 20;
  cfg.transitions = 800;
  cfg.burn_in = 200;
  cfg.step_size = 0.004;
  cfg.leapfrog_steps = 20;
  cfg.seed = 74;
  cfg.threads = 2;
  const SampleBatch batch = sample_position_prior(scene, cfg);

  long inside = 0;
  for (Eigen::Index r = 0; r < batch.draws.rows(); ++r) {
    const Eigen::VectorXd x = batch.draws.row(r).transpose();
    CHECK(scene.workspace.contains(x));  // prior support invariant
    if (scene.occupancy(x) >= 0.5) ++inside;
  }
  CHECK(static_cast<double>(inside) / batch.draws.rows() >= 0.99);
}

TEST_CASE("five-object fixture: draws cover at least four primitives") {
  const Scene scene = load_scene(std::string(kFixtureDir) + "/five_objects.scene");
  REQUIRE(scene.primitives.size() == 5);
  SamplerConfig cfg;
  cfg.chains = 100;
  cfg.transitions = 600;
  cfg.burn_in = 200;
  cfg.step_size = 0.01;
  cfg.leapfrog_steps = 20;
  cfg.seed = 75;
  cfg.threads = 2;
  const SampleBatch batch = sample_position_prior(scene, cfg);

  std::vector<long> hits(scene.primitives.size(), 0);
  for (Eigen::Index r = 0; r < batch.draws.rows(); ++r) {
    const Eigen::VectorXd x = batch.draws.row(r).transpose();
    double best = 1e300;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
      const double s = scene.primitives[i].sdf(x);
      if (s < best) {
        best = s;
        arg = i;
      }
    }
    ++hits[arg];
  }
  int covered = 0;
  for (long h : hits)
    if (static_cast<double>(h) / batch.draws.rows() >= 0.02) ++covered;
  CHECK(covered >= 4);
}

TEST_CASE("empty scene samples uniformly over the workspace") {
  Scene scene;
  scene.workspace = Box{vec({0, 0}), vec({1, 1})};
  scene.tau_sdf = 0.01;
  SamplerConfig cfg;
  cfg.chains = 40;
  cfg.transitions = 1000;
  cfg.burn_in = 200;
  cfg.step_size = 0.08;
  cfg.leapfrog_steps = 10;
  cfg.seed = 76;
  cfg.threads = 2;
  const SampleBatch batch = sample_position_prior(scene, cfg);
  const Eigen::VectorXd mean = batch.draws.colwise().mean();
  CHECK(std::abs(mean[0] - 0.5) < 0.02);
  CHECK(std::abs(mean[1] - 0.5) < 0.02);
}

TEST_CASE("hand prior is uniform and rotation invariant in orientation") {
  auto scene = std::make_shared<const Scene>(disk_scene());
  const HandPrior prior(scene);
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = vec({rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)});
    const double a1 = rng.uniform(0, 2 * M_PI), a2 = rng.uniform(0, 2 * M_PI);
    Eigen::VectorXd h1(4), h2(4);
    h1 << x[0], x[1], std::cos(a1), std::sin(a1);
    h2 << x[0], x[1], std::cos(a2), std::sin(a2);
    CHECK(prior.eval(h1) == prior.eval(h2));  // exact: orientation is uniform

    // gradient has a zero orientation slice and matches finite differences
    Eigen::VectorXd grad;
    prior.eval(h1, &grad);
    CHECK(grad[2] == 0.0);
    CHECK(grad[3] == 0.0);
    CHECK(density_gradient_matches_fd(prior, h1));
  }
}

TEST_CASE("scene parser round-trip and errors") {
  const std::string good =
      "scene v1\n"
      "workspace 0 1 0 1\n"
      "tau 0.02\n"
      "primitive disk 0.5 0.5 0.1 0\n"
      "primitive box 0.3 0.3 0.05 0.04 0.2\n"
      "primitive capsule 0.7 0.7 0.1 0.03 -0.4\n";
  std::istringstream in(good);
  const Scene scene = parse_scene(in, "good");
  CHECK(scene.primitives.size() == 3);
  CHECK(scene.tau_sdf == doctest::Approx(0.02));

  std::ostringstream out;
  write_scene(out, scene);
  std::istringstream again(out.str());
  const Scene reparsed = parse_scene(again, "reparsed");
  CHECK(reparsed.primitives.size() == 3);
  CHECK(reparsed.primitives[1].size == scene.primitives[1].size);

  auto expect_error = [](const std::string& text, const std::string& needle) {
    std::istringstream bad(text);
    try {
      parse_scene(bad, "bad");
      FAIL_CHECK("expected ParseError for: " << text);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_error("scene v2\nworkspace 0 1 0 1\n", "scene v1");
  expect_error("scene v1\nworkspace 0 1 0 1\nprimitive wedge 0.5 0.5 0.1 0\n",
               "unknown shape tag 'wedge'");
  expect_error("scene v1\nworkspace 0 1 0 1\nprimitive disk 0.5 0.5 0.1\n", "disk expects");
  expect_error("scene v1\nworkspace 0 1 0 1\nprimitive disk 0.5 oops 0.1 0\n", "bad:3");
  expect_error("scene v1\nprimitive disk 0.5 0.5 0.1 0\n", "workspace");
}

TEST_CASE("scene validation rejects out-of-workspace primitives") {
  Scene scene = disk_scene();
  scene.primitives[0].center = vec({1.5, 0.5});
  CHECK_THROWS_AS(scene.validate(), ConfigError);
}
