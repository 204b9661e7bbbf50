"""End-to-end smoke coverage of the python bindings."""

import math
import os

import numpy as np
import pytest

import graspinfer as gi

SCENE_DIR = os.environ.get("GRASPINFER_SCENE_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "scenes"))


def test_manifold_roundtrip():
    spec = gi.ManifoldSpec.parse("R2xS1")
    assert spec.ambient_dim == 4
    assert str(spec) == "R2xS1"

    base = np.array([0.1, 0.2, 1.0, 0.0])
    ambient = np.array([1.0, 2.0, 3.0, 4.0])
    tangent = gi.project_to_tangent(spec, base, ambient)
    assert tangent[:2] == pytest.approx([1.0, 2.0])
    assert abs(np.dot(tangent[2:], base[2:])) < 1e-12

    point, velocity = gi.geodesic_step(spec, base, tangent, 0.25)
    assert abs(np.linalg.norm(point[2:]) - 1.0) < 1e-12
    assert gi.geodesic_distance(spec, base, base) == 0.0


def test_manifold_errors_surface_as_python_exceptions():
    spec = gi.ManifoldSpec.parse("S1")
    with pytest.raises(ValueError):
        gi.project_to_tangent(spec, np.array([2.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        gi.ManifoldSpec.parse("Q5")


def test_vmf_sampling_concentrates():
    rng = gi.Rng(7)
    nu = np.array([0.0, 1.0])
    vmf = gi.VonMisesFisher(nu, 20.0)
    draws = vmf.sample(4000, rng)
    mean = draws.mean(axis=0)
    mean /= np.linalg.norm(mean)
    assert math.acos(np.clip(mean @ nu, -1, 1)) < 0.05
    value, grad = vmf.log_density(nu)
    assert value == pytest.approx(20.0)
    assert grad == pytest.approx(20.0 * nu)


def test_geodesic_hmc_on_analytic_target():
    spec = gi.ManifoldSpec.sphere(1)
    q_x = np.array([math.cos(0.8), math.sin(0.8)])
    log_ratio = gi.VmfDensity(gi.VonMisesFisher(q_x, 20.0))
    prior = gi.UniformDensity(spec)

    cfg = gi.SamplerConfig()
    cfg.chains = 8
    cfg.transitions = 400
    cfg.burn_in = 100
    cfg.seed = 3
    cfg.threads = 2
    init = gi.uniform_inits(spec, [], cfg.chains, gi.Rng(5))
    batch = gi.geodesic_hmc(log_ratio, prior, spec, init, cfg)
    assert batch.draws.shape == (8 * 300, 2)
    assert batch.mean_acceptance > 0.6

    oracle = gi.VonMisesFisher(q_x, 20.0).sample(5000, gi.Rng(9))
    mmd, _ = gi.mmd_linear(batch.draws, oracle)
    assert mmd < 0.05

    fm = gi.frechet_mean(batch.draws)
    assert math.acos(np.clip(fm @ q_x, -1, 1)) < 0.1


def test_callable_density_drives_euclidean_hmc():
    spec = gi.ManifoldSpec.euclidean(2)

    def log_normal(x):
        return -0.5 * float(x @ x), -x

    target = gi.CallableDensity(spec, log_normal)
    cfg = gi.SamplerConfig()
    cfg.chains = 4
    cfg.transitions = 300
    cfg.burn_in = 100
    cfg.step_size = 0.2
    cfg.leapfrog_steps = 10
    cfg.seed = 11
    cfg.threads = 1  # python targets hold the GIL
    box = gi.Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    init = gi.uniform_inits(spec, [box], cfg.chains, gi.Rng(12))
    batch = gi.euclidean_hmc(target, spec, init, cfg)
    assert abs(batch.draws.mean(axis=0)).max() < 0.2


def test_ratio_training_and_serialization(tmp_path):
    rng = gi.Rng(21)
    n = 4000
    theta = gi.VonMisesFisher(np.array([1.0, 0.0]), 1e-9 + 1.0).sample(n, rng)  # spread-out draws
    # uniform prior draws on S^1 and vMF observations around them
    theta = np.stack([gi.sample_uniform(gi.ManifoldSpec.sphere(1), [], rng) for _ in range(n)])
    obs = np.stack(
        [gi.VonMisesFisher(theta[i], 20.0).sample(1, rng)[0] for i in range(n)]
    )
    data = gi.Dataset(theta, obs)
    cfg = gi.TrainConfig()
    cfg.sample_count = n
    cfg.batch_size = 500
    cfg.epochs = 2
    model = gi.train_ratio(data, gi.PairLayout(2, 2), cfg, gi.Rng(22))
    assert model.trained
    ensemble = gi.RatioEnsemble([model])

    path = str(tmp_path / "toy.nre")
    gi.save_ensemble(path, ensemble)
    loaded = gi.load_ensemble(path)
    assert loaded.size == 1
    probe_theta = np.array([0.0, 1.0])
    probe_obs = np.array([0.0, 1.0])
    assert loaded.logit(probe_theta, probe_obs)[0] == ensemble.logit(probe_theta, probe_obs)[0]


def test_scene_and_grasp_model():
    scene = gi.load_scene(os.path.join(SCENE_DIR, "single_disk.scene"))
    assert scene.dim == 2
    assert scene.sdf(np.array([0.5, 0.5])) == pytest.approx(-0.1)
    value, grad = scene.occupancy_log_prob(np.array([0.62, 0.5]))
    assert value < math.log(0.5)
    assert grad.shape == (2,)

    model = gi.GraspOutcomeModel()
    h_star = np.array([0.5, 0.5, 1.0, 0.0])
    assert gi.success_probability(model, scene, h_star) == pytest.approx(1.0 - model.p_slip)

    prior = gi.hand_prior(scene)
    v1 = prior.value(np.array([0.5, 0.5, 1.0, 0.0]))
    v2 = prior.value(np.array([0.5, 0.5, 0.0, 1.0]))
    assert v1 == v2  # uniform orientation

    parsed = gi.parse_scene("scene v1\nworkspace 0 1 0 1\nprimitive disk 0.4 0.4 0.05 0\n")
    assert len(parsed.primitives) == 1
    with pytest.raises(ValueError):
        gi.parse_scene("scene v1\nworkspace 0 1 0 1\nprimitive wedge 0.4 0.4 0.05 0\n")


def test_map_multistart_on_vmf():
    spec = gi.ManifoldSpec.sphere(1)
    q_x = np.array([0.0, 1.0])
    target = gi.VmfDensity(gi.VonMisesFisher(q_x, 20.0))
    cfg = gi.AscentConfig()
    cfg.restarts = 4
    point, log_density = gi.map_multistart(target, spec, cfg, rng=gi.Rng(31))
    assert gi.geodesic_distance(spec, point, q_x) < 1e-3
    assert log_density == pytest.approx(20.0, abs=1e-4)


def test_ess_and_diagnostics():
    rng = np.random.default_rng(0)
    white = rng.standard_normal(2000)
    ess, degenerate = gi.ess(white)
    assert not degenerate
    assert ess > 1200
