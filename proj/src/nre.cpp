#include "graspinfer/nre.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "graspinfer/errors.hpp"

namespace graspinfer {

void TrainConfig::validate() const {
  if (sample_count < 1) throw ConfigError("train: sample_count must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (batch_size > sample_count) throw ConfigError("train: batch_size must be <= sample_count");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
  if (hidden.empty()) throw ConfigError("train: at least one hidden layer");
}

Dataset simulate_dataset(const PriorSampler& prior, const Simulator& simulate, std::int64_t count,
                         Rng& rng) {
  if (count < 1) throw ContractViolation("simulate_dataset: count must be >= 1");
  Eigen::VectorXd theta0 = prior(rng);
  Eigen::VectorXd obs0 = simulate(theta0, rng);
  Dataset data;
  data.theta.resize(count, theta0.size());
  data.obs.resize(count, obs0.size());
  data.theta.row(0) = theta0;
  data.obs.row(0) = obs0;
  for (std::int64_t i = 1; i < count; ++i) {
    const Eigen::VectorXd theta = prior(rng);
    data.theta.row(i) = theta;
    data.obs.row(i) = simulate(theta, rng);
  }
  return data;
}

RatioModel::RatioModel(Mlp net, PairLayout layout, bool trained, double final_loss)
    : RatioModel(std::move(net), layout, Eigen::VectorXd::Zero(layout.total()),
                 Eigen::VectorXd::Ones(layout.total()), trained, final_loss) {}

RatioModel::RatioModel(Mlp net, PairLayout layout, Eigen::VectorXd input_shift,
                       Eigen::VectorXd input_scale, bool trained, double final_loss)
    : net_(std::move(net)),
      layout_(layout),
      shift_(std::move(input_shift)),
      scale_(std::move(input_scale)),
      trained_(trained),
      final_loss_(final_loss) {
  if (net_.input_dim() != layout_.total())
    throw ContractViolation("RatioModel: net input size does not match layout");
  if (shift_.size() != layout_.total() || scale_.size() != layout_.total())
    throw ContractViolation("RatioModel: standardization size does not match layout");
  if ((scale_.array() <= 0.0).any())
    throw ContractViolation("RatioModel: standardization scales must be positive");
}

double RatioModel::logit(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs) const {
  if (theta.size() != layout_.theta_dim || obs.size() != layout_.obs_dim)
    throw ContractViolation("RatioModel logit: slice dimension mismatch");
  Eigen::VectorXd input(layout_.total());
  input << theta, obs;
  input = (input - shift_).cwiseQuotient(scale_);
  return net_.forward(input);
}

double RatioModel::logit_with_theta_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs,
                                         Eigen::VectorXd* theta_grad) const {
  if (theta.size() != layout_.theta_dim || obs.size() != layout_.obs_dim)
    throw ContractViolation("RatioModel logit: slice dimension mismatch");
  Eigen::VectorXd input(layout_.total());
  input << theta, obs;
  input = (input - shift_).cwiseQuotient(scale_);
  Eigen::VectorXd input_grad;
  const double value = net_.forward_backward(input, &input_grad);
  if (theta_grad)
    *theta_grad = input_grad.head(layout_.theta_dim)
                      .cwiseQuotient(scale_.head(layout_.theta_dim));
  return value;
}

RatioEnsemble::RatioEnsemble(std::vector<RatioModel> members) : members_(std::move(members)) {
  if (members_.empty()) throw ContractViolation("RatioEnsemble: no members");
  for (const auto& m : members_)
    if (!(m.layout() == members_.front().layout()))
      throw ContractViolation("RatioEnsemble: members disagree on input layout");
}

const PairLayout& RatioEnsemble::layout() const {
  if (members_.empty()) throw ContractViolation("RatioEnsemble: empty ensemble");
  return members_.front().layout();
}

double RatioEnsemble::logit(const Eigen::VectorXd& theta, const Eigen::VectorXd& obs,
                            Eigen::VectorXd* theta_grad) const {
  if (members_.empty()) throw ContractViolation("RatioEnsemble logit: empty ensemble");
  double sum = 0.0;
  Eigen::VectorXd grad_sum;
  if (theta_grad) grad_sum = Eigen::VectorXd::Zero(layout().theta_dim);
  for (const auto& m : members_) {
    if (theta_grad) {
      Eigen::VectorXd g;
      sum += m.logit_with_theta_grad(theta, obs, &g);
      grad_sum += g;
    } else {
      sum += m.logit(theta, obs);
    }
  }
  const double inv = 1.0 / static_cast<double>(members_.size());
  if (theta_grad) *theta_grad = grad_sum * inv;
  return sum * inv;
}

namespace {

void shuffle_indices(std::vector<std::int64_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

RatioModel train_ratio(const Dataset& data, PairLayout layout, const TrainConfig& config,
                       Rng& rng) {
  config.validate();
  if (data.theta.cols() != layout.theta_dim || data.obs.cols() != layout.obs_dim)
    throw ContractViolation("train_ratio: dataset does not match layout");
  if (data.size() < config.batch_size)
    throw ConfigError("train_ratio: dataset smaller than one batch");

  // per-coordinate standardization from the training marginals
  Eigen::VectorXd shift(layout.total()), scale(layout.total());
  shift << data.theta.colwise().mean().transpose(), data.obs.colwise().mean().transpose();
  for (int j = 0; j < layout.total(); ++j) {
    const auto col = j < layout.theta_dim ? data.theta.col(j) : data.obs.col(j - layout.theta_dim);
    const double var = (col.array() - shift[j]).square().mean();
    scale[j] = var > 1e-16 ? std::sqrt(var) : 1.0;
  }

  std::vector<int> sizes;
  sizes.push_back(layout.total());
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(1);
  Rng init_rng = rng.stream("init");
  Rng shuffle_rng = rng.stream("shuffle");
  Mlp net(sizes, init_rng);
  AdamState adam(net);

  const std::int64_t n = data.size();
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), std::int64_t{0});

  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::int64_t start = 0; start + config.batch_size <= n; start += config.batch_size) {
      const int b = config.batch_size;
      // 2b rows: joint pairs first, then theta_i with the next observation
      // in the batch (a cyclic within-batch derangement).
      Eigen::MatrixXd inputs(2 * b, layout.total());
      Eigen::VectorXd labels(2 * b);
      for (int i = 0; i < b; ++i) {
        const std::int64_t row = order[start + i];
        const std::int64_t mismatched = order[start + (i + 1) % b];
        inputs.row(i) << data.theta.row(row), data.obs.row(row);
        inputs.row(b + i) << data.theta.row(row), data.obs.row(mismatched);
        labels[i] = 1.0;
        labels[b + i] = 0.0;
      }
      inputs = (inputs.rowwise() - shift.transpose()).array().rowwise() /
               scale.transpose().array();
      Mlp::Gradients grads;
      const double loss = bce_forward_backward(net, inputs, labels, &grads);
      if (!std::isfinite(loss))
        throw TrainingDiverged("train_ratio: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batches));
      adam.apply(net, grads, config.learning_rate, config.adam_beta1, config.adam_beta2,
                 config.adam_eps);
      loss_sum += loss;
      ++batches;
    }
    epoch_loss = batches > 0 ? loss_sum / batches : 0.0;
  }
  return RatioModel(std::move(net), layout, std::move(shift), std::move(scale), config.epochs > 0,
                    epoch_loss);
}

RatioModel train_ratio(const PriorSampler& prior, const Simulator& simulate, PairLayout layout,
                       const TrainConfig& config, Rng& rng) {
  Rng data_rng = rng.stream("data");
  const Dataset data = simulate_dataset(prior, simulate, config.sample_count, data_rng);
  Rng train_rng = rng.stream("train");
  return train_ratio(data, layout, config, train_rng);
}

RatioEnsemble train_ensemble(const Dataset& data, PairLayout layout, const TrainConfig& config,
                             int count, Rng& rng, int threads) {
  if (count < 1) throw ContractViolation("train_ensemble: count must be >= 1");
  std::vector<RatioModel> members(count);
  const int workers = std::max(1, std::min(threads, count));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= count) break;
          Rng member_rng = rng.stream("member", static_cast<std::uint64_t>(i));
          members[i] = train_ratio(data, layout, config, member_rng);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return RatioEnsemble(std::move(members));
}

EnsembleLogRatio::EnsembleLogRatio(RatioEnsemble ensemble, Eigen::VectorXd observation,
                                   ManifoldSpec theta_spec)
    : ensemble_(std::move(ensemble)), obs_(std::move(observation)), spec_(std::move(theta_spec)) {
  if (spec_.ambient_dim() != ensemble_.layout().theta_dim)
    throw ContractViolation("EnsembleLogRatio: spec dimension != layout theta_dim");
  if (obs_.size() != ensemble_.layout().obs_dim)
    throw ContractViolation("EnsembleLogRatio: observation dimension != layout obs_dim");
}

double EnsembleLogRatio::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  spec_.require_dim(point, "point");
  return ensemble_.logit(point, obs_, grad);
}

LogDensityPtr compose_posterior(const RatioEnsemble& ensemble, const Eigen::VectorXd& observation,
                                LogDensityPtr prior) {
  auto ratio = std::make_shared<EnsembleLogRatio>(ensemble, observation, prior->domain());
  return compose_posterior(std::move(ratio), std::move(prior));
}

namespace {

constexpr char kMagic[8] = {'G', 'I', 'N', 'R', 'E', 'B', 'I', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("model file: unexpected end of data");
  return value;
}

void write_member(std::ostream& out, const RatioModel& model) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.layout().theta_dim));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.layout().obs_dim));
  write_pod<std::uint8_t>(out, model.trained() ? 1 : 0);
  write_pod<double>(out, model.final_loss());
  for (Eigen::Index i = 0; i < model.input_shift().size(); ++i)
    write_pod<double>(out, model.input_shift()[i]);
  for (Eigen::Index i = 0; i < model.input_scale().size(); ++i)
    write_pod<double>(out, model.input_scale()[i]);
  write_mlp(out, model.net());
}

RatioModel read_member(std::istream& in) {
  PairLayout layout;
  layout.theta_dim = static_cast<int>(read_pod<std::uint32_t>(in));
  layout.obs_dim = static_cast<int>(read_pod<std::uint32_t>(in));
  const bool trained = read_pod<std::uint8_t>(in) != 0;
  const double final_loss = read_pod<double>(in);
  Eigen::VectorXd shift(layout.total()), scale(layout.total());
  for (int i = 0; i < layout.total(); ++i) shift[i] = read_pod<double>(in);
  for (int i = 0; i < layout.total(); ++i) scale[i] = read_pod<double>(in);
  Mlp net = read_mlp(in);
  return RatioModel(std::move(net), layout, std::move(shift), std::move(scale), trained,
                    final_loss);
}

}  // namespace

void save_ensemble(const std::string& path, const RatioEnsemble& ensemble) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open model file for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ensemble.size()));
  for (const auto& m : ensemble.members()) write_member(out, m);
  if (!out) throw ConfigError("failed writing model file: " + path);
}

RatioEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("model file '" + path + "': bad magic header");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw ParseError("model file '" + path + "': unsupported format version " +
                     std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in);
  if (count < 1 || count > 4096) throw ParseError("model file '" + path + "': implausible member count");
  std::vector<RatioModel> members;
  members.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) members.push_back(read_member(in));
  return RatioEnsemble(std::move(members));
}

void save_ratio_model(const std::string& path, const RatioModel& model) {
  save_ensemble(path, RatioEnsemble({model}));
}

RatioModel load_ratio_model(const std::string& path) {
  RatioEnsemble ens = load_ensemble(path);
  if (ens.size() != 1)
    throw ParseError("model file '" + path + "': expected a single model, found " +
                     std::to_string(ens.size()));
  return ens.members().front();
}

}  // namespace graspinfer
