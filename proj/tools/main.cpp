#include <CLI11.hpp>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "graspinfer/diagnostics.hpp"
#include "graspinfer/errors.hpp"
#include "graspinfer/graspsim.hpp"
#include "graspinfer/io.hpp"
#include "graspinfer/map_opt.hpp"
#include "graspinfer/mcmc.hpp"
#include "graspinfer/nre.hpp"
#include "graspinfer/scene.hpp"

using namespace graspinfer;

namespace {

namespace fs = std::filesystem;

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Final value for a key: explicit flag > config file > built-in default.
class ConfigResolver {
 public:
  explicit ConfigResolver(CLI::App* cmd) {
    cmd->add_option("--config", config_file_,
                    "config file with key = value lines; explicit flags override file values");
  }

  void load() {
    if (!config_file_.empty()) file_ = KeyValueDoc::load(config_file_);
  }

  std::string str(const std::string& key, const CLI::Option* opt, const std::string& flag_value,
                  const std::string& fallback) const {
    if (opt->count() > 0) return flag_value;
    if (file_.contains(key)) return file_.get(key);
    return fallback;
  }
  double num(const std::string& key, const CLI::Option* opt, double flag_value,
             double fallback) const {
    if (opt->count() > 0) return flag_value;
    if (file_.contains(key)) return file_.get_double(key);
    return fallback;
  }
  std::int64_t integer(const std::string& key, const CLI::Option* opt, std::int64_t flag_value,
                       std::int64_t fallback) const {
    if (opt->count() > 0) return flag_value;
    if (file_.contains(key)) return file_.get_int(key);
    return fallback;
  }

 private:
  std::string config_file_;
  KeyValueDoc file_;
};

struct CommonArgs {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "out";

  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* out_opt = nullptr;

  void attach(CLI::App* cmd) {
    seed_opt = cmd->add_option("--seed", seed, "global seed; all randomness derives from it");
    threads_opt = cmd->add_option("--threads", threads,
                                  "worker threads; outputs are identical for every value");
    out_opt = cmd->add_option("--out", out, "output directory (created if missing)");
  }

  void resolve(const ConfigResolver& r) {
    seed =
        static_cast<std::uint64_t>(r.integer("seed", seed_opt, static_cast<std::int64_t>(seed), 0));
    threads = static_cast<int>(r.integer("threads", threads_opt, threads, 1));
    out = r.str("out", out_opt, out, "out");
  }

  void echo(KeyValueDoc& doc) const {
    doc.set("seed", static_cast<std::uint64_t>(seed));
    doc.set("threads", threads);
    doc.set("out", out);
  }
};

struct SamplerArgs {
  std::int64_t chains = 100;
  std::int64_t transitions = 2000;
  std::int64_t burn_in = 1000;
  double step = 0.01;
  std::int64_t leapfrog = 20;

  CLI::Option* chains_opt = nullptr;
  CLI::Option* transitions_opt = nullptr;
  CLI::Option* burn_in_opt = nullptr;
  CLI::Option* step_opt = nullptr;
  CLI::Option* leapfrog_opt = nullptr;

  void attach(CLI::App* cmd, const std::string& prefix = "") {
    const std::string dash = prefix.empty() ? "--" : "--" + prefix + "-";
    chains_opt = cmd->add_option(dash + "chains", chains, "number of parallel chains");
    transitions_opt = cmd->add_option(dash + "transitions", transitions, "transitions per chain");
    burn_in_opt = cmd->add_option(dash + "burn-in", burn_in, "discarded leading transitions");
    step_opt = cmd->add_option(dash + "step", step, "leapfrog step size");
    leapfrog_opt = cmd->add_option(dash + "leapfrog", leapfrog, "leapfrog steps per transition");
  }

  SamplerConfig resolve(const ConfigResolver& r, const std::string& key_prefix,
                        const SamplerConfig& defaults) const {
    SamplerConfig cfg = defaults;
    cfg.chains =
        static_cast<int>(r.integer(key_prefix + ".chains", chains_opt, chains, defaults.chains));
    cfg.transitions = static_cast<int>(
        r.integer(key_prefix + ".transitions", transitions_opt, transitions, defaults.transitions));
    cfg.burn_in = static_cast<int>(
        r.integer(key_prefix + ".burn_in", burn_in_opt, burn_in, defaults.burn_in));
    cfg.step_size = r.num(key_prefix + ".step", step_opt, step, defaults.step_size);
    cfg.leapfrog_steps = static_cast<int>(
        r.integer(key_prefix + ".leapfrog", leapfrog_opt, leapfrog, defaults.leapfrog_steps));
    return cfg;
  }

  static void echo(KeyValueDoc& doc, const std::string& key_prefix, const SamplerConfig& cfg) {
    doc.set(key_prefix + ".chains", cfg.chains);
    doc.set(key_prefix + ".transitions", cfg.transitions);
    doc.set(key_prefix + ".burn_in", cfg.burn_in);
    doc.set(key_prefix + ".step", cfg.step_size);
    doc.set(key_prefix + ".leapfrog", cfg.leapfrog_steps);
  }
};

struct TrainArgs {
  std::int64_t samples = 1000000;
  std::int64_t batch = 8000;
  std::int64_t epochs = 50;
  double lr = 1e-3;
  std::string hidden = "64,64,64";

  CLI::Option* samples_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* hidden_opt = nullptr;

  void attach(CLI::App* cmd) {
    samples_opt = cmd->add_option("--samples", samples, "simulated training pairs");
    batch_opt = cmd->add_option("--batch", batch, "training batch size");
    epochs_opt = cmd->add_option("--epochs", epochs, "training epochs (0 = untrained)");
    lr_opt = cmd->add_option("--lr", lr, "Adam learning rate");
    hidden_opt = cmd->add_option("--hidden", hidden, "hidden layer widths, comma separated");
  }

  TrainConfig resolve(const ConfigResolver& r, const TrainConfig& defaults) const {
    TrainConfig cfg = defaults;
    cfg.sample_count = r.integer("train.samples", samples_opt, samples, defaults.sample_count);
    cfg.batch_size =
        static_cast<int>(r.integer("train.batch", batch_opt, batch, defaults.batch_size));
    cfg.epochs = static_cast<int>(r.integer("train.epochs", epochs_opt, epochs, defaults.epochs));
    cfg.learning_rate = r.num("train.lr", lr_opt, lr, defaults.learning_rate);
    std::string default_widths;
    for (std::size_t i = 0; i < defaults.hidden.size(); ++i)
      default_widths += (i ? "," : "") + std::to_string(defaults.hidden[i]);
    const std::string widths = r.str("train.hidden", hidden_opt, hidden, default_widths);
    cfg.hidden.clear();
    std::stringstream ss(widths);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        cfg.hidden.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("train.hidden: expected comma-separated integers, got '" + widths + "'");
      }
    }
    return cfg;
  }

  static void echo(KeyValueDoc& doc, const TrainConfig& cfg) {
    doc.set("train.samples", cfg.sample_count);
    doc.set("train.batch", cfg.batch_size);
    doc.set("train.epochs", cfg.epochs);
    doc.set("train.lr", cfg.learning_rate);
    std::string widths;
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
      widths += (i ? "," : "") + std::to_string(cfg.hidden[i]);
    doc.set("train.hidden", widths);
  }
};

struct ModelArgs {
  double sigma_d = 0.05;
  double beta = 4.0;
  double p_slip = 0.05;
  double m_col = 0.08;

  CLI::Option* sigma_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* slip_opt = nullptr;
  CLI::Option* col_opt = nullptr;

  void attach(CLI::App* cmd) {
    sigma_opt = cmd->add_option("--sigma-d", sigma_d, "grasp distance scale");
    beta_opt = cmd->add_option("--beta", beta, "alignment sharpness (0 = symmetric gripper)");
    slip_opt = cmd->add_option("--p-slip", p_slip, "slip noise rate");
    col_opt = cmd->add_option("--m-col", m_col, "collision margin");
  }

  GraspOutcomeModel resolve(const ConfigResolver& r) const {
    GraspOutcomeModel m;
    m.sigma_d = r.num("sim.sigma_d", sigma_opt, sigma_d, 0.05);
    m.beta = r.num("sim.beta", beta_opt, beta, 4.0);
    m.p_slip = r.num("sim.p_slip", slip_opt, p_slip, 0.05);
    m.m_col = r.num("sim.m_col", col_opt, m_col, 0.08);
    return m;
  }

  static void echo(KeyValueDoc& doc, const GraspOutcomeModel& m) {
    doc.set("sim.sigma_d", m.sigma_d);
    doc.set("sim.beta", m.beta);
    doc.set("sim.p_slip", m.p_slip);
    doc.set("sim.m_col", m.m_col);
  }
};

struct AscentArgs {
  double step = 0.05;
  double decay = 1.0;
  std::int64_t decay_interval = 50;
  std::int64_t max_iters = 500;
  double tol = 1e-6;
  std::int64_t restarts = 8;

  CLI::Option* step_opt = nullptr;
  CLI::Option* decay_opt = nullptr;
  CLI::Option* interval_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* restarts_opt = nullptr;

  void attach(CLI::App* cmd) {
    step_opt = cmd->add_option("--ascent-step", step, "initial ascent step size");
    decay_opt = cmd->add_option("--ascent-decay", decay, "step decay factor");
    interval_opt =
        cmd->add_option("--ascent-interval", decay_interval, "iterations between decays");
    iters_opt = cmd->add_option("--ascent-iters", max_iters, "maximum ascent iterations");
    tol_opt = cmd->add_option("--ascent-tol", tol, "geodesic step-length stop threshold");
    restarts_opt = cmd->add_option("--restarts", restarts, "multistart restarts");
  }

  AscentConfig resolve(const ConfigResolver& r) const {
    AscentConfig cfg;
    cfg.initial_step = r.num("ascent.step", step_opt, step, 0.05);
    cfg.decay = r.num("ascent.decay", decay_opt, decay, 1.0);
    cfg.decay_interval =
        static_cast<int>(r.integer("ascent.interval", interval_opt, decay_interval, 50));
    cfg.max_iterations = static_cast<int>(r.integer("ascent.iters", iters_opt, max_iters, 500));
    cfg.tolerance = r.num("ascent.tol", tol_opt, tol, 1e-6);
    cfg.restarts = static_cast<int>(r.integer("ascent.restarts", restarts_opt, restarts, 8));
    return cfg;
  }

  static void echo(KeyValueDoc& doc, const AscentConfig& cfg) {
    doc.set("ascent.step", cfg.initial_step);
    doc.set("ascent.decay", cfg.decay);
    doc.set("ascent.interval", cfg.decay_interval);
    doc.set("ascent.iters", cfg.max_iterations);
    doc.set("ascent.tol", cfg.tolerance);
    doc.set("ascent.restarts", cfg.restarts);
  }
};

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory: " + out);
}

void write_histogram(const std::string& path, const Eigen::VectorXd& values, double lo, double hi,
                     int bins) {
  Eigen::MatrixXd rows(bins, 5);
  const double width = (hi - lo) / bins;
  std::vector<long> counts(bins, 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = static_cast<int>((values[i] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  for (int b = 0; b < bins; ++b) {
    rows(b, 0) = lo + b * width;
    rows(b, 1) = lo + (b + 0.5) * width;
    rows(b, 2) = lo + (b + 1) * width;
    rows(b, 3) = static_cast<double>(counts[b]);
    rows(b, 4) = values.size() > 0 ? static_cast<double>(counts[b]) / values.size() : 0.0;
  }
  write_csv(path, {"bin_lo", "bin_center", "bin_hi", "count", "frequency"}, rows);
}

void write_orientation_histogram(const std::string& path, const Eigen::MatrixXd& draws, int dim) {
  Eigen::VectorXd angles(draws.rows());
  for (Eigen::Index r = 0; r < draws.rows(); ++r)
    angles[r] = std::atan2(draws(r, dim + 1), draws(r, dim));
  write_histogram(path, angles, -M_PI, M_PI, 64);
}

void write_diagnostics_report(const std::string& dir, const SampleBatch& batch) {
  const EssSummary summary = ess_summary(batch);
  Eigen::MatrixXd rows(batch.draws.cols(), 4);
  for (Eigen::Index j = 0; j < batch.draws.cols(); ++j) {
    rows(j, 0) = static_cast<double>(j);
    rows(j, 1) = summary.pooled[j];
    rows(j, 2) = summary.per_chain.col(j).minCoeff();
    rows(j, 3) = summary.per_chain.col(j).maxCoeff();
  }
  write_csv(dir + "/ess.csv", {"coordinate", "pooled_ess", "min_chain_ess", "max_chain_ess"},
            rows);

  KeyValueDoc report;
  report.set("chains", batch.config.chains);
  report.set("retained_per_chain", batch.retained_per_chain());
  report.set("mean_acceptance", batch.mean_acceptance());
  std::int64_t nan_total = 0;
  for (auto v : batch.nan_rejects) nan_total += v;
  report.set("nan_rejects", nan_total);
  const Eigen::VectorXd mean = batch.draws.colwise().mean();
  for (Eigen::Index j = 0; j < mean.size(); ++j) report.set("mean.c" + std::to_string(j), mean[j]);
  report.save(dir + "/diagnostics.txt");
}

Eigen::VectorXd orthonormal_partner(const Eigen::VectorXd& v) {
  int k = 0;
  v.cwiseAbs().minCoeff(&k);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(v.size());
  e[k] = 1.0;
  e -= v * v.dot(e);
  return e / e.norm();
}

// ---------------------------------------------------------------- toy-vmf

int cmd_toy_vmf(ConfigResolver& resolver, CommonArgs& common, const TrainArgs& train_args,
                const SamplerArgs& sampler_args, CLI::Option* d_opt, std::int64_t d_flag,
                CLI::Option* kappa_opt, double kappa_flag, CLI::Option* obs_opt,
                std::int64_t obs_flag, CLI::Option* oracle_opt, std::int64_t oracle_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);

  const int d = static_cast<int>(resolver.integer("d", d_opt, d_flag, 1));
  if (d != 1 && d != 3) throw ConfigError("toy-vmf: --d must be 1 or 3");
  const double kappa = resolver.num("kappa", kappa_opt, kappa_flag, 20.0);
  const int observations =
      static_cast<int>(resolver.integer("observations", obs_opt, obs_flag, 10));
  const int oracle_draws =
      static_cast<int>(resolver.integer("oracle_draws", oracle_opt, oracle_flag, 100000));
  TrainConfig train_cfg = train_args.resolve(resolver, TrainConfig{});
  train_cfg.validate();
  const SamplerConfig sampler_defaults;  // toy benchmark configuration
  SamplerConfig sampler_cfg = sampler_args.resolve(resolver, "sampler", sampler_defaults);
  sampler_cfg.threads = common.threads;
  sampler_cfg.validate();

  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("toy-vmf"));
  common.echo(echo);
  echo.set("d", d);
  echo.set("kappa", kappa);
  echo.set("observations", observations);
  echo.set("oracle_draws", oracle_draws);
  TrainArgs::echo(echo, train_cfg);
  SamplerArgs::echo(echo, "sampler", sampler_cfg);
  echo.save(common.out + "/config.txt");

  const ManifoldSpec spec = ManifoldSpec::sphere(d);
  const int ambient = spec.ambient_dim();
  Rng root(common.seed);

  // ratio trained on the forward process theta -> vMF(theta, kappa)
  const PriorSampler prior_sampler = [&spec](Rng& r) { return sample_uniform(spec, r); };
  const Simulator simulator = [kappa](const Eigen::VectorXd& theta, Rng& r) {
    return VonMisesFisher(theta, kappa).sample_one(r);
  };
  Rng train_rng = root.stream("train");
  const RatioModel model =
      train_ratio(prior_sampler, simulator, PairLayout{ambient, ambient}, train_cfg, train_rng);
  const RatioEnsemble ensemble({model});
  const UniformDensity prior(spec);

  Eigen::MatrixXd mmd_rows(observations, 4);
  Eigen::VectorXd first_x;
  for (int k = 0; k < observations; ++k) {
    Rng obs_rng = root.stream("observation", k);
    const Eigen::VectorXd theta_star = sample_uniform(spec, obs_rng);
    const Eigen::VectorXd q_x = VonMisesFisher(theta_star, kappa).sample_one(obs_rng);

    const EnsembleLogRatio log_ratio(ensemble, q_x, spec);
    SamplerConfig cfg = sampler_cfg;
    cfg.seed = root.stream("chains", k).seed();
    Rng init_rng = root.stream("chain-init", k);
    const auto init = uniform_inits(spec, {}, cfg.chains, init_rng);
    const SampleBatch batch = geodesic_hmc(log_ratio, prior, spec, init, cfg);

    Rng oracle_rng = root.stream("oracle", k);
    const VonMisesFisher posterior(q_x, kappa);
    Eigen::MatrixXd oracle(oracle_draws, ambient);
    for (int i = 0; i < oracle_draws; ++i) oracle.row(i) = posterior.sample_one(oracle_rng);

    const MmdReport mmd = mmd_linear(batch.draws, oracle);
    const double frechet_gap =
        geodesic_distance(spec, frechet_mean(batch.draws), frechet_mean(oracle));
    mmd_rows(k, 0) = k;
    mmd_rows(k, 1) = mmd.mmd;
    mmd_rows(k, 2) = mmd.mmd_squared;
    mmd_rows(k, 3) = frechet_gap;

    write_sample_batch_csv(common.out + "/draws_obs" + std::to_string(k) + ".csv", batch);
    if (k == 0) first_x = q_x;
  }
  write_csv(common.out + "/mmd.csv",
            {"observation", "mmd", "mmd_squared", "frechet_mean_distance"}, mmd_rows);

  const double mean = mmd_rows.col(1).mean();
  const double sq = (mmd_rows.col(1).array() - mean).square().sum();
  const double stderr_mmd =
      observations > 1 ? std::sqrt(sq / (observations - 1) / observations) : 0.0;

  // ground-truth vs learned log density along a great circle through the
  // first observation; both columns mean centered (identifiable only up to
  // an additive constant)
  {
    const Eigen::VectorXd partner = orthonormal_partner(first_x);
    Eigen::MatrixXd grid(64, 3 + ambient);
    for (int g = 0; g < 64; ++g) {
      const double t = -M_PI + 2.0 * M_PI * g / 64.0;
      const Eigen::VectorXd q = std::cos(t) * first_x + std::sin(t) * partner;
      grid(g, 0) = t;
      grid(g, 1) = kappa * first_x.dot(q);
      grid(g, 2) = ensemble.logit(q, first_x);
      grid.row(g).tail(ambient) = q;
    }
    grid.col(1).array() -= grid.col(1).mean();
    grid.col(2).array() -= grid.col(2).mean();
    std::vector<std::string> header = {"arc", "analytic_centered", "learned_centered"};
    for (int j = 0; j < ambient; ++j) header.push_back("q" + std::to_string(j));
    write_csv(common.out + "/density_grid.csv", header, grid);
  }

  KeyValueDoc summary;
  summary.set("mmd_mean", mean);
  summary.set("mmd_stderr", stderr_mmd);
  summary.set("untrained", model.trained() ? std::string("false") : std::string("true"));
  summary.set("final_loss", model.final_loss());
  summary.set("wall_seconds", watch.seconds());
  summary.save(common.out + "/mmd_summary.txt");

  std::cout << "toy-vmf d=" << d << ": mmd mean " << format_double(mean) << " +- "
            << format_double(stderr_mmd) << (model.trained() ? "" : " (untrained)") << "\n";
  return 0;
}

// ------------------------------------------------------------- scene-prior

int cmd_scene_prior(ConfigResolver& resolver, CommonArgs& common, const SamplerArgs& sampler_args,
                    CLI::Option* scene_opt, const std::string& scene_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string scene_path = resolver.str("scene", scene_opt, scene_flag, "");
  if (scene_path.empty()) throw ConfigError("scene-prior: --scene is required");

  SamplerConfig defaults;
  defaults.chains = 100;
  defaults.transitions = 5000;
  defaults.burn_in = 1000;
  SamplerConfig cfg = sampler_args.resolve(resolver, "sampler", defaults);
  cfg.threads = common.threads;
  cfg.seed = Rng(common.seed).stream("scene-prior").seed();
  cfg.validate();

  const Scene scene = load_scene(scene_path);
  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("scene-prior"));
  common.echo(echo);
  echo.set("scene", scene_path);
  SamplerArgs::echo(echo, "sampler", cfg);
  echo.save(common.out + "/config.txt");

  const SampleBatch batch = sample_position_prior(scene, cfg);
  write_sample_batch_csv(common.out + "/draws.csv", batch);
  for (int j = 0; j < scene.dim(); ++j)
    write_histogram(common.out + "/hist_c" + std::to_string(j) + ".csv", batch.draws.col(j),
                    scene.workspace.lo[j], scene.workspace.hi[j], 50);
  write_diagnostics_report(common.out, batch);

  KeyValueDoc meta;
  meta.set("wall_seconds", watch.seconds());
  meta.set("mean_acceptance", batch.mean_acceptance());
  meta.save(common.out + "/run_meta.txt");
  std::cout << "scene-prior: " << batch.draws.rows() << " draws, acceptance "
            << format_double(batch.mean_acceptance()) << "\n";
  return 0;
}

// ------------------------------------------------------------- train-ratio

int cmd_train_ratio(ConfigResolver& resolver, CommonArgs& common, const TrainArgs& train_args,
                    const SamplerArgs& prior_args, const ModelArgs& model_args,
                    CLI::Option* scene_opt, const std::string& scene_flag,
                    CLI::Option* model_out_opt, const std::string& model_out_flag,
                    CLI::Option* ensemble_opt, std::int64_t ensemble_flag, CLI::Option* data_opt,
                    const std::string& data_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string scene_path = resolver.str("scene", scene_opt, scene_flag, "");
  if (scene_path.empty()) throw ConfigError("train-ratio: --scene is required");
  const std::string data_in = resolver.str("data", data_opt, data_flag, "");
  const int ensemble_size =
      static_cast<int>(resolver.integer("ensemble.size", ensemble_opt, ensemble_flag, 6));

  TrainConfig defaults;
  defaults.sample_count = 100000;
  defaults.batch_size = 1000;
  defaults.epochs = 15;
  TrainConfig train_cfg = train_args.resolve(resolver, defaults);
  train_cfg.validate();

  SamplerConfig prior_defaults;
  prior_defaults.chains = 64;
  prior_defaults.transitions = 1800;
  prior_defaults.burn_in = 200;
  SamplerConfig prior_cfg = prior_args.resolve(resolver, "prior_sampler", prior_defaults);
  prior_cfg.threads = common.threads;
  prior_cfg.validate();

  const GraspOutcomeModel model = model_args.resolve(resolver);
  const Scene scene = load_scene(scene_path);
  const std::string model_out =
      resolver.str("model_out", model_out_opt, model_out_flag, common.out + "/ensemble.nre");

  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("train-ratio"));
  common.echo(echo);
  echo.set("scene", scene_path);
  echo.set("model_out", model_out);
  echo.set("ensemble.size", ensemble_size);
  if (!data_in.empty()) echo.set("data", data_in);
  TrainArgs::echo(echo, train_cfg);
  SamplerArgs::echo(echo, "prior_sampler", prior_cfg);
  ModelArgs::echo(echo, model);
  echo.save(common.out + "/config.txt");

  Rng root(common.seed);
  GraspDataset dataset;
  if (data_in.empty()) {
    Rng data_rng = root.stream("data");
    dataset = generate_grasp_dataset(scene, model, train_cfg.sample_count, prior_cfg, data_rng,
                                     fs::path(scene_path).stem().string());
  } else {
    dataset = load_grasp_dataset(data_in);
  }
  save_grasp_dataset(common.out + "/train_data.csv", dataset);

  Rng train_rng = root.stream("train");
  const PairLayout layout{scene.dim() + 2, 1};
  const RatioEnsemble ensemble = train_ensemble(to_nre_dataset(dataset), layout, train_cfg,
                                                ensemble_size, train_rng, common.threads);
  save_ensemble(model_out, ensemble);

  KeyValueDoc report;
  report.set("members", ensemble.size());
  report.set("positive_rate", dataset.label.mean());
  for (int i = 0; i < ensemble.size(); ++i)
    report.set("final_loss." + std::to_string(i), ensemble.members()[i].final_loss());
  report.set("wall_seconds", watch.seconds());
  report.save(common.out + "/train_report.txt");

  std::cout << "train-ratio: " << ensemble.size() << " members on " << dataset.h.rows()
            << " pairs -> " << model_out << "\n";
  return 0;
}

// --------------------------------------------------------- sample-posterior

int cmd_sample_posterior(ConfigResolver& resolver, CommonArgs& common,
                         const SamplerArgs& sampler_args, CLI::Option* scene_opt,
                         const std::string& scene_flag, CLI::Option* model_opt,
                         const std::string& model_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string scene_path = resolver.str("scene", scene_opt, scene_flag, "");
  const std::string model_path = resolver.str("model", model_opt, model_flag, "");
  if (scene_path.empty() || model_path.empty())
    throw ConfigError("sample-posterior: --scene and --model are required");

  SamplerConfig defaults;
  defaults.chains = 48;
  defaults.transitions = 1200;
  defaults.burn_in = 400;
  SamplerConfig cfg = sampler_args.resolve(resolver, "sampler", defaults);
  cfg.threads = common.threads;
  cfg.validate();

  const Scene scene = load_scene(scene_path);
  const RatioEnsemble ensemble = load_ensemble(model_path);
  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("sample-posterior"));
  common.echo(echo);
  echo.set("scene", scene_path);
  echo.set("model", model_path);
  SamplerArgs::echo(echo, "sampler", cfg);
  echo.save(common.out + "/config.txt");

  auto scene_ptr = std::make_shared<const Scene>(scene);
  const ManifoldSpec spec = ManifoldSpec::euclidean(scene.dim()).times(ManifoldSpec::sphere(1));
  Eigen::VectorXd obs(1);
  obs << 1.0;
  const EnsembleLogRatio log_ratio(ensemble, obs, spec);
  const HandPrior prior(scene_ptr);

  Rng root(common.seed);
  cfg.seed = root.stream("chains").seed();
  Rng init_rng = root.stream("chain-init");
  const Box bbox = scene.primitive_bounding_box();
  const auto init = uniform_inits(spec, {bbox}, cfg.chains, init_rng);
  const SampleBatch batch = geodesic_hmc(log_ratio, prior, spec, init, cfg);

  write_sample_batch_csv(common.out + "/draws.csv", batch);
  write_orientation_histogram(common.out + "/orientation_hist.csv", batch.draws, scene.dim());
  write_diagnostics_report(common.out, batch);

  KeyValueDoc meta;
  meta.set("wall_seconds", watch.seconds());
  meta.set("mean_acceptance", batch.mean_acceptance());
  meta.set("low_acceptance", batch.mean_acceptance() < 0.1 ? "true" : "false");
  meta.save(common.out + "/run_meta.txt");
  std::cout << "sample-posterior: " << batch.draws.rows() << " draws, acceptance "
            << format_double(batch.mean_acceptance()) << "\n";
  return 0;
}

// -------------------------------------------------------------------- map

int cmd_map(ConfigResolver& resolver, CommonArgs& common, const AscentArgs& ascent_args,
            const ModelArgs& model_args, CLI::Option* scene_opt, const std::string& scene_flag,
            CLI::Option* model_opt, const std::string& model_flag, CLI::Option* draws_opt,
            const std::string& draws_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string scene_path = resolver.str("scene", scene_opt, scene_flag, "");
  const std::string model_path = resolver.str("model", model_opt, model_flag, "");
  const std::string draws_path = resolver.str("draws", draws_opt, draws_flag, "");
  if (scene_path.empty() || model_path.empty())
    throw ConfigError("map: --scene and --model are required");

  AscentConfig cfg = ascent_args.resolve(resolver);
  cfg.threads = common.threads;
  cfg.validate();
  const GraspOutcomeModel grasp_model = model_args.resolve(resolver);

  const Scene scene = load_scene(scene_path);
  const RatioEnsemble ensemble = load_ensemble(model_path);
  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("map"));
  common.echo(echo);
  echo.set("scene", scene_path);
  echo.set("model", model_path);
  if (!draws_path.empty()) echo.set("draws", draws_path);
  AscentArgs::echo(echo, cfg);
  ModelArgs::echo(echo, grasp_model);
  echo.save(common.out + "/config.txt");

  auto scene_ptr = std::make_shared<const Scene>(scene);
  const ManifoldSpec spec = ManifoldSpec::euclidean(scene.dim()).times(ManifoldSpec::sphere(1));
  Eigen::VectorXd obs(1);
  obs << 1.0;
  const LogDensityPtr posterior = compose_posterior(ensemble, obs, hand_prior(scene_ptr));

  Eigen::MatrixXd pool;
  if (!draws_path.empty()) {
    const LoadedDraws loaded = read_sample_batch_csv(draws_path);
    pool = loaded.coords;
  }
  Rng root(common.seed);
  Rng map_rng = root.stream("map");
  const MultistartResult result =
      map_multistart(*posterior, spec, cfg, pool, {scene.workspace}, map_rng);

  Eigen::MatrixXd row(1, spec.ambient_dim() + 2);
  row.row(0).head(spec.ambient_dim()) = result.point;
  row(0, spec.ambient_dim()) = result.log_density;
  row(0, spec.ambient_dim() + 1) = success_probability(grasp_model, scene, result.point);
  std::vector<std::string> header;
  for (int j = 0; j < spec.ambient_dim(); ++j) header.push_back("c" + std::to_string(j));
  header.push_back("log_density");
  header.push_back("success_probability");
  write_csv(common.out + "/map.csv", header, row);

  const auto& trace = result.runs[result.best_run].trace;
  Eigen::MatrixXd trace_rows(static_cast<Eigen::Index>(trace.size()), 2);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    trace_rows(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    trace_rows(static_cast<Eigen::Index>(i), 1) = trace[i];
  }
  write_csv(common.out + "/trace.csv", {"iteration", "log_density"}, trace_rows);

  KeyValueDoc meta;
  meta.set("wall_seconds", watch.seconds());
  meta.save(common.out + "/run_meta.txt");
  std::cout << "map: log density " << format_double(result.log_density)
            << ", ground-truth success " << format_double(row(0, spec.ambient_dim() + 1)) << "\n";
  return 0;
}

// --------------------------------------------------------- grasp-pipeline

int cmd_grasp_pipeline(ConfigResolver& resolver, CommonArgs& common, const TrainArgs& train_args,
                       const SamplerArgs& prior_args, const SamplerArgs& posterior_args,
                       const AscentArgs& ascent_args, const ModelArgs& model_args,
                       CLI::Option* scene_opt, const std::string& scene_flag,
                       CLI::Option* ensemble_opt, std::int64_t ensemble_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string scene_path = resolver.str("scene", scene_opt, scene_flag, "");
  if (scene_path.empty()) throw ConfigError("grasp-pipeline: --scene is required");

  PipelineConfig cfg;
  cfg.model = model_args.resolve(resolver);
  cfg.train = train_args.resolve(resolver, cfg.train);
  cfg.sample_count = cfg.train.sample_count;
  cfg.prior_sampler = prior_args.resolve(resolver, "prior_sampler", cfg.prior_sampler);
  cfg.posterior_sampler =
      posterior_args.resolve(resolver, "posterior_sampler", cfg.posterior_sampler);
  cfg.ascent = ascent_args.resolve(resolver);
  cfg.ensemble_size =
      static_cast<int>(resolver.integer("ensemble.size", ensemble_opt, ensemble_flag, 6));
  cfg.threads = common.threads;

  const Scene scene = load_scene(scene_path);
  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("grasp-pipeline"));
  common.echo(echo);
  echo.set("scene", scene_path);
  echo.set("ensemble.size", cfg.ensemble_size);
  TrainArgs::echo(echo, cfg.train);
  SamplerArgs::echo(echo, "prior_sampler", cfg.prior_sampler);
  SamplerArgs::echo(echo, "posterior_sampler", cfg.posterior_sampler);
  AscentArgs::echo(echo, cfg.ascent);
  ModelArgs::echo(echo, cfg.model);
  echo.save(common.out + "/config.txt");

  Rng root(common.seed);
  const PipelineReport report = end_to_end_pipeline(scene, cfg, root);

  save_ensemble(common.out + "/ensemble.nre", report.ensemble);
  save_grasp_dataset(common.out + "/train_data.csv", report.dataset);
  write_sample_batch_csv(common.out + "/draws.csv", report.posterior);
  write_orientation_histogram(common.out + "/orientation_hist.csv", report.posterior.draws,
                              scene.dim());
  write_diagnostics_report(common.out, report.posterior);

  const int ambient = scene.dim() + 2;
  Eigen::MatrixXd row(1, ambient + 2);
  row.row(0).head(ambient) = report.map_point;
  row(0, ambient) = report.map_log_density;
  row(0, ambient + 1) = report.success_at_map;
  std::vector<std::string> header;
  for (int j = 0; j < ambient; ++j) header.push_back("c" + std::to_string(j));
  header.push_back("log_density");
  header.push_back("success_probability");
  write_csv(common.out + "/map.csv", header, row);

  KeyValueDoc summary;
  summary.set("success_at_map", report.success_at_map);
  summary.set("map_log_density", report.map_log_density);
  summary.set("mean_acceptance", report.mean_acceptance);
  summary.set("low_acceptance", report.low_acceptance ? "true" : "false");
  summary.set("positive_rate", report.dataset.label.mean());
  summary.set("wall_seconds", watch.seconds());
  summary.save(common.out + "/report.txt");

  std::cout << "grasp-pipeline: ground-truth success at MAP "
            << format_double(report.success_at_map) << ", acceptance "
            << format_double(report.mean_acceptance) << (report.low_acceptance ? " (LOW)" : "")
            << "\n";
  return 0;
}

// ------------------------------------------------------------- diagnostics

int cmd_diagnostics(ConfigResolver& resolver, CommonArgs& common, CLI::Option* draws_opt,
                    const std::string& draws_flag, CLI::Option* spec_opt,
                    const std::string& spec_flag) {
  Stopwatch watch;
  resolver.load();
  common.resolve(resolver);
  const std::string draws_path = resolver.str("draws", draws_opt, draws_flag, "");
  if (draws_path.empty()) throw ConfigError("diagnostics: --draws is required");
  const std::string spec_text = resolver.str("spec", spec_opt, spec_flag, "");

  const LoadedDraws loaded = read_sample_batch_csv(draws_path);
  ensure_out_dir(common.out);
  KeyValueDoc echo;
  echo.set("command", std::string("diagnostics"));
  common.echo(echo);
  echo.set("draws", draws_path);
  if (!spec_text.empty()) echo.set("spec", spec_text);
  echo.save(common.out + "/config.txt");

  const int retained = loaded.retained;
  Eigen::MatrixXd rows(loaded.coords.cols(), 4);
  for (Eigen::Index j = 0; j < loaded.coords.cols(); ++j) {
    double pooled = 0.0, lo = 1e300, hi = 0.0;
    for (int c = 0; c < loaded.chains; ++c) {
      const EssResult r =
          ess(loaded.coords.col(j).segment(static_cast<Eigen::Index>(c) * retained, retained));
      pooled += r.ess;
      lo = std::min(lo, r.ess);
      hi = std::max(hi, r.ess);
    }
    rows(j, 0) = static_cast<double>(j);
    rows(j, 1) = pooled;
    rows(j, 2) = lo;
    rows(j, 3) = hi;
  }
  write_csv(common.out + "/ess.csv", {"coordinate", "pooled_ess", "min_chain_ess", "max_chain_ess"},
            rows);

  KeyValueDoc report;
  report.set("chains", loaded.chains);
  report.set("retained_per_chain", retained);
  const Eigen::VectorXd mean = loaded.coords.colwise().mean();
  for (Eigen::Index j = 0; j < mean.size(); ++j) report.set("mean.c" + std::to_string(j), mean[j]);

  if (!spec_text.empty()) {
    const ManifoldSpec spec = ManifoldSpec::parse(spec_text);
    if (spec.ambient_dim() != loaded.coords.cols())
      throw ConfigError("diagnostics: spec dimension does not match the draws file");
    for (const auto& block : spec.blocks()) {
      if (block.kind != Block::Kind::sphere) continue;
      const Eigen::MatrixXd slice = loaded.coords.middleCols(block.offset, block.ambient_dim());
      const Eigen::VectorXd fm = frechet_mean(slice);
      const std::string tag = "sphere_at_" + std::to_string(block.offset);
      for (Eigen::Index j = 0; j < fm.size(); ++j)
        report.set("frechet." + tag + ".q" + std::to_string(j), fm[j]);
      report.set("resultant." + tag, slice.colwise().mean().norm());
    }
  }
  report.set("wall_seconds", watch.seconds());
  report.save(common.out + "/summary.txt");
  std::cout << "diagnostics: " << loaded.chains << " chains x " << retained << " draws\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "graspinfer: likelihood-free Bayesian inference of grasp poses on product manifolds"};
  app.require_subcommand(1);

  auto* toy = app.add_subcommand("toy-vmf",
                                 "circular/spherical toy benchmark with a known posterior");
  CommonArgs toy_common;
  toy_common.attach(toy);
  ConfigResolver toy_resolver(toy);
  TrainArgs toy_train;
  toy_train.attach(toy);
  SamplerArgs toy_sampler;
  toy_sampler.attach(toy);
  std::int64_t toy_d = 1;
  auto* toy_d_opt = toy->add_option("--d", toy_d, "sphere dimension (1 or 3)");
  double toy_kappa = 20.0;
  auto* toy_kappa_opt = toy->add_option("--kappa", toy_kappa, "forward-model concentration");
  std::int64_t toy_obs = 10;
  auto* toy_obs_opt = toy->add_option("--observations", toy_obs, "observations to evaluate");
  std::int64_t toy_oracle = 100000;
  auto* toy_oracle_opt =
      toy->add_option("--oracle-draws", toy_oracle, "i.i.d. oracle draws per observation");

  auto* sp = app.add_subcommand("scene-prior", "sample the occupancy-weighted position prior");
  CommonArgs sp_common;
  sp_common.attach(sp);
  ConfigResolver sp_resolver(sp);
  SamplerArgs sp_sampler;
  sp_sampler.attach(sp);
  std::string sp_scene;
  auto* sp_scene_opt = sp->add_option("--scene", sp_scene, "scene file");

  auto* tr = app.add_subcommand("train-ratio", "train the grasp success ratio ensemble");
  CommonArgs tr_common;
  tr_common.attach(tr);
  ConfigResolver tr_resolver(tr);
  TrainArgs tr_train;
  tr_train.attach(tr);
  SamplerArgs tr_prior;
  tr_prior.attach(tr, "prior");
  ModelArgs tr_model;
  tr_model.attach(tr);
  std::string tr_scene;
  auto* tr_scene_opt = tr->add_option("--scene", tr_scene, "scene file");
  std::string tr_model_out;
  auto* tr_model_out_opt = tr->add_option("--model-out", tr_model_out, "ensemble output path");
  std::int64_t tr_ensemble = 6;
  auto* tr_ensemble_opt = tr->add_option("--ensemble", tr_ensemble, "ensemble members");
  std::string tr_data;
  auto* tr_data_opt =
      tr->add_option("--data", tr_data, "existing training-set CSV (skips simulation)");

  auto* post = app.add_subcommand("sample-posterior", "geodesic HMC over hand configurations");
  CommonArgs post_common;
  post_common.attach(post);
  ConfigResolver post_resolver(post);
  SamplerArgs post_sampler;
  post_sampler.attach(post);
  std::string post_scene, post_model;
  auto* post_scene_opt = post->add_option("--scene", post_scene, "scene file");
  auto* post_model_opt = post->add_option("--model", post_model, "trained ensemble file");

  auto* map_cmd =
      app.add_subcommand("map", "Riemannian gradient ascent to the MAP configuration");
  CommonArgs map_common;
  map_common.attach(map_cmd);
  ConfigResolver map_resolver(map_cmd);
  AscentArgs map_ascent;
  map_ascent.attach(map_cmd);
  ModelArgs map_model_args;
  map_model_args.attach(map_cmd);
  std::string map_scene, map_model, map_draws;
  auto* map_scene_opt = map_cmd->add_option("--scene", map_scene, "scene file");
  auto* map_model_opt = map_cmd->add_option("--model", map_model, "trained ensemble file");
  auto* map_draws_opt =
      map_cmd->add_option("--draws", map_draws, "posterior draws CSV for multistart seeding");

  auto* pipe =
      app.add_subcommand("grasp-pipeline", "full chain: simulate, train, sample, optimize");
  CommonArgs pipe_common;
  pipe_common.attach(pipe);
  ConfigResolver pipe_resolver(pipe);
  TrainArgs pipe_train;
  pipe_train.samples = 100000;
  pipe_train.batch = 1000;
  pipe_train.epochs = 15;
  pipe_train.attach(pipe);
  SamplerArgs pipe_prior;
  pipe_prior.attach(pipe, "prior");
  SamplerArgs pipe_post;
  pipe_post.attach(pipe, "posterior");
  AscentArgs pipe_ascent;
  pipe_ascent.attach(pipe);
  ModelArgs pipe_model;
  pipe_model.attach(pipe);
  std::string pipe_scene;
  auto* pipe_scene_opt = pipe->add_option("--scene", pipe_scene, "scene file");
  std::int64_t pipe_ensemble = 6;
  auto* pipe_ensemble_opt = pipe->add_option("--ensemble", pipe_ensemble, "ensemble members");

  auto* diag = app.add_subcommand("diagnostics", "ESS / mean / Fréchet summaries of a draws CSV");
  CommonArgs diag_common;
  diag_common.attach(diag);
  ConfigResolver diag_resolver(diag);
  std::string diag_draws, diag_spec;
  auto* diag_draws_opt =
      diag->add_option("--draws", diag_draws, "draws CSV (chain, transition, coords)");
  auto* diag_spec_opt = diag->add_option("--spec", diag_spec, "manifold spec, e.g. R2xS1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  try {
    if (toy->parsed())
      return cmd_toy_vmf(toy_resolver, toy_common, toy_train, toy_sampler, toy_d_opt, toy_d,
                         toy_kappa_opt, toy_kappa, toy_obs_opt, toy_obs, toy_oracle_opt,
                         toy_oracle);
    if (sp->parsed())
      return cmd_scene_prior(sp_resolver, sp_common, sp_sampler, sp_scene_opt, sp_scene);
    if (tr->parsed())
      return cmd_train_ratio(tr_resolver, tr_common, tr_train, tr_prior, tr_model, tr_scene_opt,
                             tr_scene, tr_model_out_opt, tr_model_out, tr_ensemble_opt,
                             tr_ensemble, tr_data_opt, tr_data);
    if (post->parsed())
      return cmd_sample_posterior(post_resolver, post_common, post_sampler, post_scene_opt,
                                  post_scene, post_model_opt, post_model);
    if (map_cmd->parsed())
      return cmd_map(map_resolver, map_common, map_ascent, map_model_args, map_scene_opt,
                     map_scene, map_model_opt, map_model, map_draws_opt, map_draws);
    if (pipe->parsed())
      return cmd_grasp_pipeline(pipe_resolver, pipe_common, pipe_train, pipe_prior, pipe_post,
                                pipe_ascent, pipe_model, pipe_scene_opt, pipe_scene,
                                pipe_ensemble_opt, pipe_ensemble);
    if (diag->parsed())
      return cmd_diagnostics(diag_resolver, diag_common, diag_draws_opt, diag_draws,
                             diag_spec_opt, diag_spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;  // runtime / numerical error
  }
  return 0;
}
