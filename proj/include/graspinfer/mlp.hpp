#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <vector>

#include "graspinfer/rng.hpp"

namespace graspinfer {

/// Fully connected scalar-output network.  Hidden activations are ReLU, the
/// output layer is linear.  Hidden weights are Kaiming-uniform (fan-in)
/// initialized; the output head starts at zero so an untrained network is
/// the constant 0.  Forward passes are deterministic given the weights.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // (out x in)
    Eigen::VectorXd bias;
    bool relu;  // activation after this layer
  };

  /// Per-layer d(output)/d(weights) for a single input.
  struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
  };

  Mlp() = default;

  /// sizes = {input, hidden..., 1}; the final size must be 1.
  Mlp(const std::vector<int>& sizes, Rng& rng);

  int input_dim() const;
  int layer_count() const { return static_cast<int>(layers_.size()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::vector<int> sizes() const;

  /// Scalar output for a single input.
  double forward(const Eigen::VectorXd& input) const;

  /// Scalar outputs for a batch (rows are samples).
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& inputs) const;

  /// Forward value plus d(output)/d(input) and optionally d(output)/d(weights).
  /// ReLU subgradient convention: derivative 0 at exactly 0.
  double forward_backward(const Eigen::VectorXd& input, Eigen::VectorXd* input_grad,
                          Gradients* weight_grads = nullptr) const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<Layer> layers_;
};

/// Adam optimizer state for one Mlp.
class AdamState {
 public:
  explicit AdamState(const Mlp& net);

  /// One update from per-layer loss gradients.
  void apply(Mlp& net, const Mlp::Gradients& grads, double lr, double beta1, double beta2,
             double eps);

 private:
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  long step_ = 0;
};

/// Mean binary cross-entropy on logits and its gradients for a weight update.
/// Returns the batch loss; fills grads with d(loss)/d(weights).
double bce_forward_backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                            const Eigen::VectorXd& labels, Mlp::Gradients* grads);

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

}  // namespace graspinfer
