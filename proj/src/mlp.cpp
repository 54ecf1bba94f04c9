#include "gac/mlp.hpp"

#include <cmath>

#include "gac/errors.hpp"

namespace gac {

Mlp::Mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Output output, Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim), output_(output) {
  std::vector<int> sizes;
  sizes.push_back(in_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out_dim);
  const int layers = static_cast<int>(sizes.size()) - 1;
  weights_.resize(layers);
  biases_.resize(layers);
  for (int l = 0; l < layers; ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    weights_[l].resize(fan_out, fan_in);
    biases_[l] = Eigen::VectorXd::Zero(fan_out);
    if (l == layers - 1) {
      for (int i = 0; i < fan_out; ++i) {
        for (int j = 0; j < fan_in; ++j) weights_[l](i, j) = rng.uniform(-3e-3, 3e-3);
        biases_[l][i] = rng.uniform(-3e-3, 3e-3);
      }
    } else {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (int i = 0; i < fan_out; ++i)
        for (int j = 0; j < fan_in; ++j) weights_[l](i, j) = rng.uniform(-limit, limit);
    }
  }
  out_scale_ = Eigen::VectorXd::Ones(out_dim);
  out_center_ = Eigen::VectorXd::Zero(out_dim);
}

void Mlp::set_output_box(const Eigen::VectorXd& low, const Eigen::VectorXd& high) {
  if (low.size() != out_dim_ || high.size() != out_dim_)
    throw DimensionMismatch("output box does not match output dimension");
  out_scale_ = 0.5 * (high - low);
  out_center_ = 0.5 * (high + low);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.rows() != in_dim_) throw DimensionMismatch("input dimension does not match network");
  Eigen::MatrixXd h = x;
  const int layers = layer_count();
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l + 1 < layers) {
      h = z.cwiseMax(0.0);
    } else if (output_ == Output::kLinear) {
      h = std::move(z);
    } else {
      h = z.array().tanh();
      h = out_scale_.asDiagonal() * h;
      h.colwise() += out_center_;
    }
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != in_dim_) throw DimensionMismatch("input dimension does not match network");
  const int layers = layer_count();
  cache.pre.resize(layers);
  cache.act.resize(layers + 1);
  cache.act[0] = x;
  for (int l = 0; l < layers; ++l) {
    cache.pre[l] = weights_[l] * cache.act[l];
    cache.pre[l].colwise() += biases_[l];
    if (l + 1 < layers) {
      cache.act[l + 1] = cache.pre[l].cwiseMax(0.0);
    } else if (output_ == Output::kLinear) {
      cache.act[l + 1] = cache.pre[l];
    } else {
      cache.act[l + 1] = cache.pre[l].array().tanh();
    }
  }
  if (output_ == Output::kLinear) return cache.act[layers];
  Eigen::MatrixXd y = out_scale_.asDiagonal() * cache.act[layers];
  y.colwise() += out_center_;
  return y;
}

void Mlp::backward_batch(const Cache& cache, const Eigen::MatrixXd& cotangent,
                         Eigen::VectorXd* param_grad, Eigen::MatrixXd* input_grad) const {
  const int layers = layer_count();
  if (cotangent.rows() != out_dim_ || cotangent.cols() != cache.act[0].cols())
    throw DimensionMismatch("cotangent shape does not match cached batch");
  Eigen::MatrixXd delta = cotangent;
  if (output_ == Output::kTanhBox) {
    delta = out_scale_.asDiagonal() * delta;
    delta.array() *= 1.0 - cache.act[layers].array().square();
  }
  if (param_grad) param_grad->resize(param_count());
  // Gradients are laid out front to back, matching flat_params().
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index off = 0;
  for (int l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += weights_[l].size() + biases_[l].size();
  }
  for (int l = layers - 1; l >= 0; --l) {
    if (param_grad) {
      Eigen::Map<Eigen::MatrixXd> gw(param_grad->data() + offsets[l], weights_[l].rows(),
                                     weights_[l].cols());
      gw.noalias() = delta * cache.act[l].transpose();
      Eigen::Map<Eigen::VectorXd> gb(param_grad->data() + offsets[l] + weights_[l].size(),
                                     biases_[l].size());
      gb = delta.rowwise().sum();
    }
    if (l > 0) {
      Eigen::MatrixXd next = weights_[l].transpose() * delta;
      next.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>();
      delta = std::move(next);
    } else if (input_grad) {
      input_grad->noalias() = weights_[0].transpose() * delta;
    }
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Mlp::flat_params() const {
  Eigen::VectorXd p(param_count());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Eigen::MatrixXd>(p.data() + off, weights_[l].rows(), weights_[l].cols()) =
        weights_[l];
    off += weights_[l].size();
    p.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  return p;
}

void Mlp::set_flat_params(const Eigen::VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(param_count()))
    throw ShapeMismatch("flat parameter size does not match network");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, weights_[l].rows(),
                                                    weights_[l].cols());
    off += weights_[l].size();
    biases_[l] = p.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
}

std::vector<NamedTensor> Mlp::to_tensors(const std::string& prefix) const {
  std::vector<NamedTensor> tensors;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    tensors.push_back(NamedTensor::from_matrix(prefix + "W" + std::to_string(l), weights_[l]));
    tensors.push_back(NamedTensor::from_vector(prefix + "b" + std::to_string(l), biases_[l]));
  }
  tensors.push_back(
      NamedTensor::from_scalar(prefix + "output_kind", output_ == Output::kLinear ? 0.0 : 1.0));
  tensors.push_back(NamedTensor::from_vector(prefix + "out_scale", out_scale_));
  tensors.push_back(NamedTensor::from_vector(prefix + "out_center", out_center_));
  return tensors;
}

Mlp Mlp::from_tensors(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  Mlp net;
  for (int l = 0;; ++l) {
    const std::string wname = prefix + "W" + std::to_string(l);
    bool found = false;
    for (const auto& t : tensors) found = found || t.name == wname;
    if (!found) break;
    net.weights_.push_back(find_tensor(tensors, wname).as_matrix());
    net.biases_.push_back(find_tensor(tensors, prefix + "b" + std::to_string(l)).as_vector());
  }
  if (net.weights_.empty()) throw ConfigError("no layers found for prefix '" + prefix + "'");
  net.in_dim_ = static_cast<int>(net.weights_.front().cols());
  net.out_dim_ = static_cast<int>(net.weights_.back().rows());
  net.output_ = find_tensor(tensors, prefix + "output_kind").values[0] == 0.0 ? Output::kLinear
                                                                              : Output::kTanhBox;
  net.out_scale_ = find_tensor(tensors, prefix + "out_scale").as_vector();
  net.out_center_ = find_tensor(tensors, prefix + "out_center").as_vector();
  return net;
}

void AdamState::apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (first_moment.size() != grad.size()) {
    first_moment = Eigen::VectorXd::Zero(grad.size());
    second_moment = Eigen::VectorXd::Zero(grad.size());
    step = 0;
  }
  if (params.size() != grad.size()) throw ShapeMismatch("gradient size does not match parameters");
  ++step;
  first_moment = beta1 * first_moment + (1.0 - beta1) * grad;
  second_moment = beta2 * second_moment.array() + (1.0 - beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params.array() -=
      lr * (first_moment.array() / bc1) / ((second_moment.array() / bc2).sqrt() + epsilon);
}

}  // namespace gac
