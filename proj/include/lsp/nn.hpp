#pragma once

// Feed-forward network pieces with explicit forward/backward passes:
// affine layers, batch normalization, ReLU, dropout, softmax + KL loss.
// Templated on the scalar so the same code trains in float and is
// gradient-checked in double.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsp/random.hpp"

namespace lsp::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// A named parameter tensor and its gradient, viewed as flat spans.
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

/// y = x W + b, with W stored fan_in x fan_out.
template <typename T>
struct Dense {
  Mat<T> weight;
  RowVec<T> bias;
  Mat<T> grad_weight;
  RowVec<T> grad_bias;
  Mat<T> input;  // cached for backward

  Dense() = default;
  Dense(Eigen::Index fan_in, Eigen::Index fan_out)
      : weight(Mat<T>::Zero(fan_in, fan_out)),
        bias(RowVec<T>::Zero(fan_out)),
        grad_weight(Mat<T>::Zero(fan_in, fan_out)),
        grad_bias(RowVec<T>::Zero(fan_out)) {}

  Eigen::Index fan_in() const { return weight.rows(); }
  Eigen::Index fan_out() const { return weight.cols(); }

  /// Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  void glorot(Rng& rng) {
    const double a = std::sqrt(6.0 / double(fan_in() + fan_out()));
    for (Eigen::Index i = 0; i < weight.size(); ++i) {
      weight.data()[i] = static_cast<T>(rng.uniform(-a, a));
    }
    bias.setZero();
  }

  Mat<T> forward(const Mat<T>& x, bool keep) {
    if (keep) input = x;
    Mat<T> y = x * weight;
    y.rowwise() += bias;
    return y;
  }

  Mat<T> infer(const Mat<T>& x) const {
    Mat<T> y = x * weight;
    y.rowwise() += bias;
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) {
    grad_weight.noalias() = input.transpose() * dy;
    grad_bias = dy.colwise().sum();
    return dy * weight.transpose();
  }
};

/// Per-feature batch normalization with learned scale/shift and
/// exponential-moving-average running statistics.
template <typename T>
struct BatchNorm {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  RowVec<T> gamma, beta, running_mean, running_var;
  RowVec<T> grad_gamma, grad_beta;
  Mat<T> xhat;
  RowVec<T> inv_std;

  BatchNorm() = default;
  explicit BatchNorm(Eigen::Index width)
      : gamma(RowVec<T>::Ones(width)),
        beta(RowVec<T>::Zero(width)),
        running_mean(RowVec<T>::Zero(width)),
        running_var(RowVec<T>::Ones(width)),
        grad_gamma(RowVec<T>::Zero(width)),
        grad_beta(RowVec<T>::Zero(width)) {}

  Eigen::Index width() const { return gamma.size(); }

  Mat<T> forward(const Mat<T>& x, bool update_running) {
    const auto rows = x.rows();
    const RowVec<T> mean = x.colwise().mean();
    Mat<T> centered = x.rowwise() - mean;
    const RowVec<T> var = centered.array().square().colwise().sum() / T(rows);
    inv_std = (var.array() + T(kEps)).rsqrt().matrix();
    xhat = centered.array().rowwise() * inv_std.array();
    if (update_running) {
      const T unbias = rows > 1 ? T(rows) / T(rows - 1) : T(1);
      running_mean = (T(1 - kMomentum) * running_mean) + (T(kMomentum) * mean);
      running_var = (T(1 - kMomentum) * running_var) + (T(kMomentum) * unbias * var);
    }
    Mat<T> y = xhat.array().rowwise() * gamma.array();
    y.rowwise() += beta;
    return y;
  }

  Mat<T> infer(const Mat<T>& x) const {
    const RowVec<T> scale =
        (gamma.array() * (running_var.array() + T(kEps)).rsqrt()).matrix();
    const RowVec<T> shift = beta.array() - running_mean.array() * scale.array();
    Mat<T> y = x.array().rowwise() * scale.array();
    y.rowwise() += shift;
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) {
    const T rows = T(dy.rows());
    grad_beta = dy.colwise().sum();
    grad_gamma = (dy.array() * xhat.array()).colwise().sum().matrix();
    // dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
    const Mat<T> dxhat = dy.array().rowwise() * gamma.array();
    const RowVec<T> sum_dxhat = dxhat.colwise().sum();
    const RowVec<T> sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum().matrix();
    Mat<T> dx = (rows * dxhat.array()).matrix();
    dx.rowwise() -= sum_dxhat;
    dx.array() -= xhat.array().rowwise() * sum_dxhat_xhat.array();
    dx.array().rowwise() *= (inv_std.array() / rows);
    return dx;
  }
};

template <typename T>
struct Relu {
  Mat<T> mask;

  Mat<T> forward(const Mat<T>& x, bool keep) {
    if (keep) mask = (x.array() > T(0)).template cast<T>().matrix();
    return x.cwiseMax(T(0));
  }
  Mat<T> backward(const Mat<T>& dy) const { return dy.cwiseProduct(mask); }
};

/// Inverted dropout; identity at inference or when rate is 0.
template <typename T>
struct Dropout {
  double rate = 0.0;
  Mat<T> mask;
  bool active = false;

  Mat<T> forward(const Mat<T>& x, Rng& rng) {
    active = rate > 0.0;
    if (!active) return x;
    mask.resize(x.rows(), x.cols());
    const T keep = T(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = rng.uniform() < rate ? T(0) : keep;
    }
    return x.cwiseProduct(mask);
  }
  Mat<T> backward(const Mat<T>& dy) const { return active ? dy.cwiseProduct(mask) : dy; }
};

/// Row-wise softmax, max-shifted.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& z) {
  Mat<T> out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const T mx = z.row(r).maxCoeff();
    out.row(r) = (z.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over rows of sum_i p_i log(p_i / q_i), with q floored.
template <typename T>
double mean_kl(const Mat<T>& target, const Mat<T>& predicted) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const double p = double(target(r, c));
      if (p <= 0.0) continue;
      const double q = std::max(double(predicted(r, c)), kProbabilityFloor);
      total += p * std::log(p / q);
    }
  }
  return total / double(std::max<Eigen::Index>(1, target.rows()));
}

/// [Dense -> BatchNorm -> ReLU -> Dropout] x blocks, then Dense -> softmax.
/// Zero blocks gives multiclass logistic regression.
template <typename T>
class Network {
 public:
  struct Block {
    Dense<T> dense;
    BatchNorm<T> norm;
    Relu<T> relu;
    Dropout<T> dropout;
  };

  Network() = default;
  Network(int input_dim, int output_dim, int blocks, int hidden, double dropout_rate)
      : input_dim_(input_dim), output_dim_(output_dim), hidden_(blocks > 0 ? hidden : 0) {
    int width = input_dim;
    for (int b = 0; b < blocks; ++b) {
      Block blk;
      blk.dense = Dense<T>(width, hidden);
      blk.norm = BatchNorm<T>(hidden);
      blk.dropout.rate = dropout_rate;
      blocks_.push_back(std::move(blk));
      width = hidden;
    }
    head_ = Dense<T>(width, output_dim);
  }

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int hidden() const { return hidden_; }
  std::size_t block_count() const { return blocks_.size(); }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Dense<T>& head() { return head_; }
  const Dense<T>& head() const { return head_; }

  void set_dropout(double rate) {
    for (auto& b : blocks_) b.dropout.rate = rate;
  }

  void glorot(Rng& rng) {
    for (auto& b : blocks_) b.dense.glorot(rng);
    head_.glorot(rng);
  }

  /// Layer sequence, e.g. "dense(8,16)", "batchnorm(16)", "relu", ...
  std::vector<std::string> describe() const {
    std::vector<std::string> out;
    for (const auto& b : blocks_) {
      out.push_back("dense(" + std::to_string(b.dense.fan_in()) + "," +
                    std::to_string(b.dense.fan_out()) + ")");
      out.push_back("batchnorm(" + std::to_string(b.norm.width()) + ")");
      out.push_back("relu");
      out.push_back("dropout");
    }
    out.push_back("dense(" + std::to_string(head_.fan_in()) + "," +
                  std::to_string(head_.fan_out()) + ")");
    out.push_back("softmax");
    return out;
  }

  /// Training-mode logits: batch statistics, dropout active.
  Mat<T> forward_train(const Mat<T>& x, Rng& rng, bool update_running = true) {
    Mat<T> h = x;
    for (auto& b : blocks_) {
      h = b.dense.forward(h, true);
      h = b.norm.forward(h, update_running);
      h = b.relu.forward(h, true);
      h = b.dropout.forward(h, rng);
    }
    return head_.forward(h, true);
  }

  /// Inference logits: running statistics, no dropout. Const and reentrant.
  Mat<T> logits(const Mat<T>& x) const {
    Mat<T> h = x;
    for (const auto& b : blocks_) {
      h = b.dense.infer(h);
      h = b.norm.infer(h);
      h = h.cwiseMax(T(0));
    }
    return head_.infer(h);
  }

  Mat<T> predict(const Mat<T>& x) const { return softmax_rows(logits(x)); }

  /// Backpropagates d(loss)/d(logits) through every layer.
  void backward(const Mat<T>& dlogits) {
    Mat<T> g = head_.backward(dlogits);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      g = it->dropout.backward(g);
      g = it->relu.backward(g);
      g = it->norm.backward(g);
      g = it->dense.backward(g);
    }
  }

  /// Training step loss: logits -> softmax -> mean KL against `target`;
  /// leaves parameter gradients of that loss in place.
  double loss_and_gradients(const Mat<T>& x, const Mat<T>& target, Rng& rng,
                            bool update_running = true) {
    const Mat<T> q = softmax_rows(forward_train(x, rng, update_running));
    const double loss = mean_kl(target, q);
    // d/dz of sum_i p_i log(p_i/q_i) is q * sum(p) - p per row.
    Mat<T> dz(q.rows(), q.cols());
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      dz.row(r) = q.row(r) * target.row(r).sum() - target.row(r);
    }
    dz /= T(q.rows());
    backward(dz);
    return loss;
  }

  /// Trainable tensors in persistence order (running stats excluded).
  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    auto add = [&](const std::string& name, auto& value, auto& grad) {
      out.push_back({name, std::span<T>(value.data(), std::size_t(value.size())),
                     std::span<T>(grad.data(), std::size_t(grad.size()))});
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& b = blocks_[i];
      const std::string p = "block" + std::to_string(i) + ".";
      add(p + "dense.weight", b.dense.weight, b.dense.grad_weight);
      add(p + "dense.bias", b.dense.bias, b.dense.grad_bias);
      add(p + "norm.gamma", b.norm.gamma, b.norm.grad_gamma);
      add(p + "norm.beta", b.norm.beta, b.norm.grad_beta);
    }
    add("head.weight", head_.weight, head_.grad_weight);
    add("head.bias", head_.bias, head_.grad_bias);
    return out;
  }

 private:
  int input_dim_ = 0;
  int output_dim_ = 0;
  int hidden_ = 0;
  std::vector<Block> blocks_;
  Dense<T> head_;
};

/// Adam over a fixed set of parameter tensors.
template <typename T>
class Adam {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit Adam(const std::vector<ParamRef<T>>& params) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }

  void step(const std::vector<ParamRef<T>>& params, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, double(t_));
    const double c2 = 1.0 - std::pow(beta2, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& p = params[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = double(p.grad[j]);
        m[j] = beta1 * m[j] + (1.0 - beta1) * g;
        v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
        const double mhat = m[j] / c1, vhat = v[j] / c2;
        p.value[j] = static_cast<T>(double(p.value[j]) - lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }

 private:
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace lsp::nn
