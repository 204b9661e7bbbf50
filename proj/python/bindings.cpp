#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graspinfer/density.hpp"
#include "graspinfer/diagnostics.hpp"
#include "graspinfer/errors.hpp"
#include "graspinfer/graspsim.hpp"
#include "graspinfer/manifold.hpp"
#include "graspinfer/map_opt.hpp"
#include "graspinfer/mcmc.hpp"
#include "graspinfer/nre.hpp"
#include "graspinfer/scene.hpp"

namespace py = pybind11;
using namespace graspinfer;

namespace {

/// LogDensity backed by a python callable point -> (value, grad or None).
class PyLogDensity final : public LogDensity {
 public:
  PyLogDensity(ManifoldSpec spec, py::object fn) : spec_(std::move(spec)), fn_(std::move(fn)) {}

  const ManifoldSpec& domain() const override { return spec_; }

  double eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad = nullptr) const override {
    py::gil_scoped_acquire gil;
    const py::object result = fn_(point);
    const auto tuple = result.cast<py::tuple>();
    const double value = tuple[0].cast<double>();
    if (grad) {
      if (tuple.size() > 1 && !tuple[1].is_none())
        *grad = tuple[1].cast<Eigen::VectorXd>();
      else
        grad->setZero(spec_.ambient_dim());
    }
    return value;
  }

 private:
  ManifoldSpec spec_;
  py::object fn_;
};

Eigen::MatrixXd stack_samples(const std::vector<Eigen::VectorXd>& samples) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), samples.empty() ? 0 : samples[0].size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = samples[i];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "geodesic HMC, neural ratio estimation and MAP search on R^n x S^d products";

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<InvalidPoint>(m, "InvalidPoint", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InitializationError>(m, "InitializationError", PyExc_RuntimeError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("stream", py::overload_cast<std::string_view>(&Rng::stream, py::const_))
      .def("stream",
           py::overload_cast<std::string_view, std::uint64_t>(&Rng::stream, py::const_))
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", &Rng::normal)
      .def_property_readonly("seed", &Rng::seed);

  py::class_<Box>(m, "Box")
      .def(py::init<Eigen::VectorXd, Eigen::VectorXd>(), py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &Box::lo)
      .def_readwrite("hi", &Box::hi)
      .def("contains", &Box::contains);

  py::class_<ManifoldSpec>(m, "ManifoldSpec")
      .def_static("parse", &ManifoldSpec::parse, py::arg("text"))
      .def_static("euclidean", &ManifoldSpec::euclidean)
      .def_static("sphere", &ManifoldSpec::sphere)
      .def("times", &ManifoldSpec::times)
      .def_property_readonly("ambient_dim", &ManifoldSpec::ambient_dim)
      .def("on_manifold", &ManifoldSpec::on_manifold, py::arg("point"), py::arg("tol") = 1e-6)
      .def("__eq__", [](const ManifoldSpec& a, const ManifoldSpec& b) { return a == b; })
      .def("__repr__",
           [](const ManifoldSpec& s) { return "ManifoldSpec('" + s.to_string() + "')"; })
      .def("__str__", &ManifoldSpec::to_string);

  m.def("project_to_tangent", &project_to_tangent, py::arg("spec"), py::arg("base"),
        py::arg("ambient"));
  m.def(
      "geodesic_step",
      [](const ManifoldSpec& spec, const Eigen::VectorXd& point, const Eigen::VectorXd& velocity,
         double t) {
        const GeodesicState s = geodesic_step(spec, point, velocity, t);
        return py::make_tuple(s.point, s.velocity);
      },
      py::arg("spec"), py::arg("point"), py::arg("velocity"), py::arg("t"));
  m.def("geodesic_distance", &geodesic_distance, py::arg("spec"), py::arg("a"), py::arg("b"));
  m.def(
      "sample_uniform",
      [](const ManifoldSpec& spec, const std::vector<Box>& boxes, Rng& rng) {
        return sample_uniform(spec, boxes, rng);
      },
      py::arg("spec"), py::arg("boxes"), py::arg("rng"));

  py::class_<LogDensity, std::shared_ptr<LogDensity>>(m, "LogDensity")
      .def_property_readonly("domain", &LogDensity::domain)
      .def(
          "eval",
          [](const LogDensity& d, const Eigen::VectorXd& point) {
            Eigen::VectorXd grad;
            const double value = d.eval(point, &grad);
            return py::make_tuple(value, grad);
          },
          py::arg("point"))
      .def("value", [](const LogDensity& d, const Eigen::VectorXd& point) { return d.eval(point); });

  py::class_<UniformDensity, LogDensity, std::shared_ptr<UniformDensity>>(m, "UniformDensity")
      .def(py::init<ManifoldSpec, std::vector<Box>>(), py::arg("spec"),
           py::arg("boxes") = std::vector<Box>{});

  py::class_<VonMisesFisher>(m, "VonMisesFisher")
      .def(py::init<Eigen::VectorXd, double>(), py::arg("mean_direction"),
           py::arg("concentration"))
      .def_property_readonly("mean_direction", &VonMisesFisher::mean_direction)
      .def_property_readonly("concentration", &VonMisesFisher::concentration)
      .def(
          "log_density",
          [](const VonMisesFisher& d, const Eigen::VectorXd& x) {
            Eigen::VectorXd grad;
            const double value = d.log_density(x, &grad);
            return py::make_tuple(value, grad);
          },
          py::arg("x"))
      .def(
          "sample",
          [](const VonMisesFisher& d, int n, Rng& rng) { return stack_samples(d.sample(n, rng)); },
          py::arg("n"), py::arg("rng"));

  py::class_<VmfDensity, LogDensity, std::shared_ptr<VmfDensity>>(m, "VmfDensity")
      .def(py::init<VonMisesFisher>(), py::arg("dist"));

  py::class_<PyLogDensity, LogDensity, std::shared_ptr<PyLogDensity>>(m, "CallableDensity")
      .def(py::init<ManifoldSpec, py::object>(), py::arg("spec"), py::arg("fn"),
           "fn(point) must return (log_value, ambient_gradient or None); evaluation holds the "
           "GIL, so run samplers with threads=1");

  m.def(
      "compose_posterior",
      [](LogDensityPtr ratio, LogDensityPtr prior) { return compose_posterior(ratio, prior); },
      py::arg("log_ratio"), py::arg("prior"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("sample_count", &TrainConfig::sample_count)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<PairLayout>(m, "PairLayout")
      .def(py::init([](int theta_dim, int obs_dim) {
             return PairLayout{theta_dim, obs_dim};
           }),
           py::arg("theta_dim"), py::arg("obs_dim"))
      .def_readwrite("theta_dim", &PairLayout::theta_dim)
      .def_readwrite("obs_dim", &PairLayout::obs_dim);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Eigen::MatrixXd theta, Eigen::MatrixXd obs) {
             Dataset d;
             d.theta = std::move(theta);
             d.obs = std::move(obs);
             return d;
           }),
           py::arg("theta"), py::arg("obs"))
      .def_readwrite("theta", &Dataset::theta)
      .def_readwrite("obs", &Dataset::obs);

  py::class_<RatioModel>(m, "RatioModel")
      .def_property_readonly("trained", &RatioModel::trained)
      .def_property_readonly("final_loss", &RatioModel::final_loss)
      .def("logit", &RatioModel::logit, py::arg("theta"), py::arg("obs"));

  py::class_<RatioEnsemble>(m, "RatioEnsemble")
      .def(py::init<std::vector<RatioModel>>(), py::arg("members"))
      .def_property_readonly("size", &RatioEnsemble::size)
      .def_property_readonly("members", &RatioEnsemble::members)
      .def(
          "logit",
          [](const RatioEnsemble& e, const Eigen::VectorXd& theta, const Eigen::VectorXd& obs) {
            Eigen::VectorXd grad;
            const double value = e.logit(theta, obs, &grad);
            return py::make_tuple(value, grad);
          },
          py::arg("theta"), py::arg("obs"));

  m.def(
      "train_ratio",
      [](const Dataset& data, const PairLayout& layout, const TrainConfig& config, Rng& rng) {
        py::gil_scoped_release release;
        Rng local = rng;
        return train_ratio(data, layout, config, local);
      },
      py::arg("data"), py::arg("layout"), py::arg("config"), py::arg("rng"));
  m.def(
      "train_ensemble",
      [](const Dataset& data, const PairLayout& layout, const TrainConfig& config, int count,
         Rng& rng, int threads) {
        py::gil_scoped_release release;
        Rng local = rng;
        return train_ensemble(data, layout, config, count, local, threads);
      },
      py::arg("data"), py::arg("layout"), py::arg("config"), py::arg("count"), py::arg("rng"),
      py::arg("threads") = 1);
  m.def("save_ensemble", &save_ensemble, py::arg("path"), py::arg("ensemble"));
  m.def("load_ensemble", &load_ensemble, py::arg("path"));

  py::class_<EnsembleLogRatio, LogDensity, std::shared_ptr<EnsembleLogRatio>>(m,
                                                                              "EnsembleLogRatio")
      .def(py::init<RatioEnsemble, Eigen::VectorXd, ManifoldSpec>(), py::arg("ensemble"),
           py::arg("observation"), py::arg("theta_spec"));

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("chains", &SamplerConfig::chains)
      .def_readwrite("transitions", &SamplerConfig::transitions)
      .def_readwrite("burn_in", &SamplerConfig::burn_in)
      .def_readwrite("step_size", &SamplerConfig::step_size)
      .def_readwrite("leapfrog_steps", &SamplerConfig::leapfrog_steps)
      .def_readwrite("seed", &SamplerConfig::seed)
      .def_readwrite("threads", &SamplerConfig::threads);

  py::class_<SampleBatch>(m, "SampleBatch")
      .def_readonly("draws", &SampleBatch::draws)
      .def_property_readonly("mean_acceptance", &SampleBatch::mean_acceptance)
      .def("acceptance_rate", &SampleBatch::acceptance_rate, py::arg("chain"))
      .def_property_readonly("retained_per_chain", &SampleBatch::retained_per_chain);

  m.def(
      "geodesic_hmc",
      [](LogDensityPtr log_ratio, LogDensityPtr log_prior, const ManifoldSpec& spec,
         const std::vector<Eigen::VectorXd>& init, const SamplerConfig& config) {
        // python-backed densities re-acquire the GIL per evaluation
        py::gil_scoped_release release;
        return geodesic_hmc(*log_ratio, *log_prior, spec, init, config);
      },
      py::arg("log_ratio"), py::arg("log_prior"), py::arg("spec"), py::arg("init"),
      py::arg("config"));
  m.def(
      "euclidean_hmc",
      [](LogDensityPtr target, const ManifoldSpec& spec, const std::vector<Eigen::VectorXd>& init,
         const SamplerConfig& config) {
        py::gil_scoped_release release;
        return euclidean_hmc(*target, spec, init, config);
      },
      py::arg("target"), py::arg("spec"), py::arg("init"), py::arg("config"));
  m.def(
      "uniform_inits",
      [](const ManifoldSpec& spec, const std::vector<Box>& boxes, int chains, Rng& rng) {
        Rng local = rng;
        return uniform_inits(spec, boxes, chains, local);
      },
      py::arg("spec"), py::arg("boxes"), py::arg("chains"), py::arg("rng"));

  py::class_<AscentConfig>(m, "AscentConfig")
      .def(py::init<>())
      .def_readwrite("initial_step", &AscentConfig::initial_step)
      .def_readwrite("decay", &AscentConfig::decay)
      .def_readwrite("decay_interval", &AscentConfig::decay_interval)
      .def_readwrite("max_iterations", &AscentConfig::max_iterations)
      .def_readwrite("tolerance", &AscentConfig::tolerance)
      .def_readwrite("restarts", &AscentConfig::restarts)
      .def_readwrite("threads", &AscentConfig::threads);

  m.def(
      "riemannian_ascent",
      [](LogDensityPtr target, const ManifoldSpec& spec, const Eigen::VectorXd& start,
         const AscentConfig& config) {
        const AscentResult r = riemannian_ascent(*target, spec, start, config);
        return py::make_tuple(r.point, r.trace, r.converged);
      },
      py::arg("target"), py::arg("spec"), py::arg("start"), py::arg("config"));
  m.def(
      "map_multistart",
      [](LogDensityPtr target, const ManifoldSpec& spec, const AscentConfig& config,
         const Eigen::MatrixXd& pool, const std::vector<Box>& boxes, Rng& rng) {
        Rng local = rng;
        const MultistartResult r = map_multistart(*target, spec, config, pool, boxes, local);
        return py::make_tuple(r.point, r.log_density);
      },
      py::arg("target"), py::arg("spec"), py::arg("config"),
      py::arg("pool") = Eigen::MatrixXd(), py::arg("boxes") = std::vector<Box>{}, py::arg("rng"));

  m.def(
      "mmd_linear",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        const MmdReport r = mmd_linear(a, b);
        return py::make_tuple(r.mmd, r.mmd_squared);
      },
      py::arg("a"), py::arg("b"));
  m.def("frechet_mean", &frechet_mean, py::arg("samples"), py::arg("max_iterations") = 1000,
        py::arg("tol") = 1e-10);
  m.def(
      "ess",
      [](const Eigen::VectorXd& trace) {
        const EssResult r = ess(trace);
        return py::make_tuple(r.ess, r.degenerate);
      },
      py::arg("trace"));

  py::class_<Primitive>(m, "Primitive")
      .def_readonly("center", &Primitive::center)
      .def_readonly("size", &Primitive::size)
      .def_readonly("angle", &Primitive::angle)
      .def("sdf", [](const Primitive& p, const Eigen::VectorXd& x) { return p.sdf(x); });

  py::class_<Scene, std::shared_ptr<Scene>>(m, "Scene")
      .def_readonly("workspace", &Scene::workspace)
      .def_readonly("primitives", &Scene::primitives)
      .def_readonly("tau_sdf", &Scene::tau_sdf)
      .def_property_readonly("dim", &Scene::dim)
      .def("sdf", [](const Scene& s, const Eigen::VectorXd& x) { return s.sdf(x); })
      .def("occupancy", &Scene::occupancy)
      .def(
          "occupancy_log_prob",
          [](const Scene& s, const Eigen::VectorXd& x) {
            Eigen::VectorXd grad;
            const double value = s.occupancy_log_prob(x, &grad);
            return py::make_tuple(value, grad);
          },
          py::arg("x"));

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def(
      "parse_scene",
      [](const std::string& text) {
        std::istringstream in(text);
        return parse_scene(in, "<string>");
      },
      py::arg("text"));

  m.def(
      "position_prior",
      [](std::shared_ptr<Scene> scene) -> LogDensityPtr {
        return std::make_shared<PositionPrior>(std::move(scene));
      },
      py::arg("scene"));
  m.def(
      "hand_prior",
      [](std::shared_ptr<Scene> scene) -> LogDensityPtr { return hand_prior(std::move(scene)); },
      py::arg("scene"));
  m.def(
      "sample_position_prior",
      [](const Scene& scene, const SamplerConfig& config) {
        py::gil_scoped_release release;
        return sample_position_prior(scene, config);
      },
      py::arg("scene"), py::arg("config"));

  py::class_<GraspOutcomeModel>(m, "GraspOutcomeModel")
      .def(py::init<>())
      .def_readwrite("sigma_d", &GraspOutcomeModel::sigma_d)
      .def_readwrite("beta", &GraspOutcomeModel::beta)
      .def_readwrite("p_slip", &GraspOutcomeModel::p_slip)
      .def_readwrite("m_col", &GraspOutcomeModel::m_col);

  m.def("success_probability", &success_probability, py::arg("model"), py::arg("scene"),
        py::arg("h"));
  m.def(
      "simulate_grasp",
      [](const GraspOutcomeModel& model, const Scene& scene, const Eigen::VectorXd& h, Rng& rng) {
        return simulate_grasp(model, scene, h, rng);
      },
      py::arg("model"), py::arg("scene"), py::arg("h"), py::arg("rng"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("model", &PipelineConfig::model)
      .def_readwrite("sample_count", &PipelineConfig::sample_count)
      .def_readwrite("train", &PipelineConfig::train)
      .def_readwrite("prior_sampler", &PipelineConfig::prior_sampler)
      .def_readwrite("posterior_sampler", &PipelineConfig::posterior_sampler)
      .def_readwrite("ascent", &PipelineConfig::ascent)
      .def_readwrite("ensemble_size", &PipelineConfig::ensemble_size)
      .def_readwrite("threads", &PipelineConfig::threads);

  py::class_<PipelineReport>(m, "PipelineReport")
      .def_readonly("map_point", &PipelineReport::map_point)
      .def_readonly("map_log_density", &PipelineReport::map_log_density)
      .def_readonly("success_at_map", &PipelineReport::success_at_map)
      .def_readonly("mean_acceptance", &PipelineReport::mean_acceptance)
      .def_readonly("low_acceptance", &PipelineReport::low_acceptance)
      .def_readonly("posterior", &PipelineReport::posterior)
      .def_readonly("ensemble", &PipelineReport::ensemble);

  m.def(
      "end_to_end_pipeline",
      [](const Scene& scene, const PipelineConfig& config, std::uint64_t seed) {
        py::gil_scoped_release release;
        Rng rng(seed);
        return end_to_end_pipeline(scene, config, rng);
      },
      py::arg("scene"), py::arg("config"), py::arg("seed") = 0);
}
