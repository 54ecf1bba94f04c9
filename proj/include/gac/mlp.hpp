#ifndef GAC_MLP_HPP
#define GAC_MLP_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gac/rng.hpp"
#include "gac/serialize.hpp"

namespace gac {

// Feed-forward network with rectified-linear hidden layers and either a
// linear output or a tanh output rescaled to a box. Batches are stored one
// sample per column. Reverse-mode gradients are exact; the rectifier uses
// subgradient 0 at exactly 0.
class Mlp {
 public:
  enum class Output { kLinear, kTanhBox };

  struct Cache {
    std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[l+1] = layer output
  };

  Mlp() = default;
  // Glorot-uniform hidden weights, output layer uniform in [-3e-3, 3e-3].
  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Output output, Rng& rng);

  void set_output_box(const Eigen::VectorXd& low, const Eigen::VectorXd& high);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  Output output_kind() const { return output_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, Cache& cache) const;

  // Backpropagates output cotangents (out_dim x n). Parameter gradients are
  // summed over columns and written to param_grad when non-null; input
  // gradients per column are written to input_grad when non-null.
  void backward_batch(const Cache& cache, const Eigen::MatrixXd& cotangent,
                      Eigen::VectorXd* param_grad, Eigen::MatrixXd* input_grad) const;

  std::size_t param_count() const;
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& p);

  std::vector<NamedTensor> to_tensors(const std::string& prefix) const;
  static Mlp from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix);

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  const Eigen::VectorXd& out_scale() const { return out_scale_; }
  const Eigen::VectorXd& out_center() const { return out_center_; }

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  Output output_ = Output::kLinear;
  std::vector<Eigen::MatrixXd> weights_;  // weights_[l]: rows = layer out, cols = layer in
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd out_scale_;   // used by kTanhBox
  Eigen::VectorXd out_center_;  // used by kTanhBox
};

// Adaptive moment estimation on a flat parameter vector.
struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
};

}  // namespace gac

#endif
