#include "graspinfer/mlp.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "graspinfer/errors.hpp"

namespace graspinfer {

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ContractViolation("Mlp: need at least input and output sizes");
  if (sizes.back() != 1) throw ContractViolation("Mlp: output size must be 1");
  for (int s : sizes)
    if (s < 1) throw ContractViolation("Mlp: layer sizes must be >= 1");
  layers_.reserve(sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    const int in = sizes[l], out = sizes[l + 1];
    layer.relu = (l + 2 < sizes.size());  // last layer linear
    layer.weight.resize(out, in);
    if (layer.relu) {
      // Kaiming uniform with ReLU gain: bound = sqrt(6 / fan_in).
      const double bound = std::sqrt(6.0 / static_cast<double>(in));
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    } else {
      // zero output head: the untrained network is the constant 0
      layer.weight.setZero();
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
  }
}

int Mlp::input_dim() const {
  if (layers_.empty()) return 0;
  return static_cast<int>(layers_.front().weight.cols());
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> out;
  out.push_back(input_dim());
  for (const auto& l : layers_) out.push_back(static_cast<int>(l.weight.rows()));
  return out;
}

double Mlp::forward(const Eigen::VectorXd& input) const {
  if (input.size() != input_dim()) throw ContractViolation("Mlp forward: input dimension mismatch");
  Eigen::VectorXd a = input;
  for (const auto& l : layers_) {
    a = (l.weight * a + l.bias).eval();
    if (l.relu) a = a.cwiseMax(0.0);
  }
  return a[0];
}

Eigen::VectorXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.cols() != input_dim())
    throw ContractViolation("Mlp forward_batch: input dimension mismatch");
  Eigen::MatrixXd a = inputs;
  for (const auto& l : layers_) {
    a = ((a * l.weight.transpose()).rowwise() + l.bias.transpose()).eval();
    if (l.relu) a = a.cwiseMax(0.0);
  }
  return a.col(0);
}

double Mlp::forward_backward(const Eigen::VectorXd& input, Eigen::VectorXd* input_grad,
                             Gradients* weight_grads) const {
  if (input.size() != input_dim())
    throw ContractViolation("Mlp forward_backward: input dimension mismatch");
  const int L = layer_count();
  std::vector<Eigen::VectorXd> activations(L + 1);  // activations[l] feeds layer l
  std::vector<Eigen::VectorXd> pre(L);              // pre-activation of layer l
  activations[0] = input;
  for (int l = 0; l < L; ++l) {
    pre[l] = layers_[l].weight * activations[l] + layers_[l].bias;
    activations[l + 1] = layers_[l].relu ? pre[l].cwiseMax(0.0).eval() : pre[l];
  }
  const double output = activations[L][0];

  if (weight_grads) {
    weight_grads->weight.assign(L, Eigen::MatrixXd());
    weight_grads->bias.assign(L, Eigen::VectorXd());
  }
  // Backpropagate d(output); derivative of ReLU at exactly 0 is 0.
  Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
  for (int l = L - 1; l >= 0; --l) {
    if (layers_[l].relu) delta.array() *= (pre[l].array() > 0.0).cast<double>();
    if (weight_grads) {
      weight_grads->weight[l] = delta * activations[l].transpose();
      weight_grads->bias[l] = delta;
    }
    delta = (layers_[l].weight.transpose() * delta).eval();
  }
  if (input_grad) *input_grad = delta;
  return output;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].relu != other.layers_[l].relu) return false;
    if (layers_[l].weight.rows() != other.layers_[l].weight.rows() ||
        layers_[l].weight.cols() != other.layers_[l].weight.cols())
      return false;
    if (layers_[l].weight != other.layers_[l].weight) return false;
    if (layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

AdamState::AdamState(const Mlp& net) {
  for (const auto& l : net.layers()) {
    m_w_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    v_w_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    m_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    v_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
}

void AdamState::apply(Mlp& net, const Mlp::Gradients& grads, double lr, double beta1, double beta2,
                      double eps) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    m_w_[l] = beta1 * m_w_[l] + (1.0 - beta1) * grads.weight[l];
    v_w_[l] = beta2 * v_w_[l] + (1.0 - beta2) * grads.weight[l].array().square().matrix();
    layer.weight.array() -=
        lr * (m_w_[l].array() / bc1) / ((v_w_[l].array() / bc2).sqrt() + eps);
    m_b_[l] = beta1 * m_b_[l] + (1.0 - beta1) * grads.bias[l];
    v_b_[l] = beta2 * v_b_[l] + (1.0 - beta2) * grads.bias[l].array().square().matrix();
    layer.bias.array() -= lr * (m_b_[l].array() / bc1) / ((v_b_[l].array() / bc2).sqrt() + eps);
  }
}

double bce_forward_backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                            const Eigen::VectorXd& labels, Mlp::Gradients* grads) {
  const int L = net.layer_count();
  const auto n = inputs.rows();
  std::vector<Eigen::MatrixXd> activations(L + 1);
  std::vector<Eigen::MatrixXd> pre(L);
  activations[0] = inputs;
  for (int l = 0; l < L; ++l) {
    const auto& layer = net.layers()[l];
    pre[l] = (activations[l] * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    activations[l + 1] = layer.relu ? pre[l].cwiseMax(0.0).eval() : pre[l];
  }
  const Eigen::ArrayXd z = activations[L].col(0).array();
  // softplus(z) - y z, evaluated stably
  const Eigen::ArrayXd softplus = z.max(0.0) + (-z.abs()).exp().log1p();
  const double loss = (softplus - labels.array() * z).mean();

  if (grads) {
    grads->weight.assign(L, Eigen::MatrixXd());
    grads->bias.assign(L, Eigen::VectorXd());
    const Eigen::ArrayXd sigma = 1.0 / (1.0 + (-z).exp());
    Eigen::MatrixXd delta = ((sigma - labels.array()) / static_cast<double>(n)).matrix();
    for (int l = L - 1; l >= 0; --l) {
      const auto& layer = net.layers()[l];
      if (layer.relu) delta.array() *= (pre[l].array() > 0.0).cast<double>();
      grads->weight[l] = delta.transpose() * activations[l];
      grads->bias[l] = delta.colwise().sum();
      if (l > 0) delta = (delta * layer.weight).eval();
    }
  }
  return loss;
}

namespace {

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

}  // namespace

void write_mlp(std::ostream& out, const Mlp& net) {
  const auto sizes = net.sizes();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (const auto& layer : net.layers()) {
    write_pod<std::uint8_t>(out, layer.relu ? 1 : 0);
    // row-major weights
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) write_pod<double>(out, layer.weight(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) write_pod<double>(out, layer.bias[i]);
  }
}

Mlp read_mlp(std::istream& in) {
  const auto n_sizes = read_pod<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw ParseError("model file: implausible layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(read_pod<std::uint32_t>(in));
  Rng scratch(0);
  Mlp net(sizes, scratch);
  for (auto& layer : net.layers()) {
    const auto relu = read_pod<std::uint8_t>(in);
    layer.relu = relu != 0;
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = read_pod<double>(in);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = read_pod<double>(in);
  }
  return net;
}

}  // namespace graspinfer
