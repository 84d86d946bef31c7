#pragma once

#include <cmath>

#include "lithoseg/nnet/mlp.hpp"

namespace lithoseg::nn {

enum class OptimizerKind { Sgd, AdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdamW;
  double momentum = 0.0;  // sgd
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// SGD with heavy-ball momentum, or AdamW with decoupled weight decay.
template <typename T>
class Optimizer {
 public:
  Optimizer(const BasicMlp<T>& p, OptimizerConfig cfg, double learning_rate) : cfg_(cfg), lr_(learning_rate) {
    for (int l = 0; l < p.layers(); ++l) {
      m_w_.push_back(Matrix<T>::Zero(p.weights[l].rows(), p.weights[l].cols()));
      v_w_.push_back(Matrix<T>::Zero(p.weights[l].rows(), p.weights[l].cols()));
      m_b_.push_back(Vector<T>::Zero(p.biases[l].size()));
      v_b_.push_back(Vector<T>::Zero(p.biases[l].size()));
    }
  }

  void step(BasicMlp<T>& p, const Gradients<T>& g) {
    ++t_;
    for (int l = 0; l < p.layers(); ++l) {
      update(p.weights[l], g.weights[l], m_w_[l], v_w_[l]);
      update(p.biases[l], g.biases[l], m_b_[l], v_b_[l]);
    }
  }

  long steps() const { return t_; }

 private:
  template <typename Param, typename Grad, typename State>
  void update(Param& theta, const Grad& grad, State& m, State& v) {
    const T lr = static_cast<T>(lr_);
    if (cfg_.kind == OptimizerKind::Sgd) {
      m = static_cast<T>(cfg_.momentum) * m + grad;
      theta -= lr * m;
      return;
    }
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    theta -= (lr * static_cast<T>(cfg_.weight_decay)) * theta;
    m = b1 * m + (T(1) - b1) * grad;
    v = b2 * v + (T(1) - b2) * grad.cwiseProduct(grad);
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<T>(cfg_.eps));
  }

  OptimizerConfig cfg_;
  double lr_;
  long t_ = 0;
  std::vector<Matrix<T>> m_w_, v_w_;
  std::vector<Vector<T>> m_b_, v_b_;
};

}  // namespace lithoseg::nn
