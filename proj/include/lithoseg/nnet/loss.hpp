#pragma once

#include <algorithm>
#include <cmath>

#include "lithoseg/nnet/mlp.hpp"

namespace lithoseg::nn {

template <typename T>
struct LossResult {
  double value = 0.0;
  Matrix<T> grad;  // dLoss / d(prediction), same shape as the prediction
};

// Mean squared error over every element.
template <typename T>
LossResult<T> mse_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse_loss: shape mismatch");
  const auto n = static_cast<double>(pred.size());
  const Matrix<T> diff = pred - target;
  return {diff.template cast<double>().squaredNorm() / n, (T(2) / static_cast<T>(n)) * diff};
}

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kProbClamp = 1e-7;

// lambda * (1 - 2 sum(pt) / (sum(p) + sum(t) + eps)) + (1 - lambda) * mean BCE.
// `pred` holds probabilities; logs are taken on values clamped to
// [1e-7, 1 - 1e-7].
template <typename T>
LossResult<T> dice_ce_loss(const Matrix<T>& pred, const Matrix<T>& target, double lambda_mix) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("dice_ce_loss: shape mismatch");
  if (lambda_mix < 0.0 || lambda_mix > 1.0) throw DomainError("dice_ce_loss: lambda_mix must be in [0, 1]");
  const auto n = static_cast<double>(pred.size());
  double s_pt = 0.0, s_p = 0.0, s_t = 0.0, ce = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = pred(i);
    const double t = target(i);
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("dice_ce_loss: prediction outside [0, 1]");
    s_pt += p * t;
    s_p += p;
    s_t += t;
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    ce -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
  }
  const double denom = s_p + s_t + kDiceEps;
  const double dice = 1.0 - 2.0 * s_pt / denom;
  LossResult<T> out;
  out.value = lambda_mix * dice + (1.0 - lambda_mix) * ce / n;
  out.grad.resize(pred.rows(), pred.cols());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = pred(i);
    const double t = target(i);
    const double d_dice = -2.0 * (t * denom - s_pt) / (denom * denom);
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    const double d_ce = -(t / pc - (1.0 - t) / (1.0 - pc)) / n;
    out.grad(i) = static_cast<T>(lambda_mix * d_dice + (1.0 - lambda_mix) * d_ce);
  }
  return out;
}

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& z) {
  return (T(1) / (T(1) + (-z.array()).exp())).matrix();
}

// dice_ce_loss on sigmoid(logits), with the gradient taken w.r.t. logits.
template <typename T>
LossResult<T> dice_ce_from_logits(const Matrix<T>& logits, const Matrix<T>& target, double lambda_mix) {
  const Matrix<T> p = sigmoid(logits);
  auto r = dice_ce_loss(p, target, lambda_mix);
  r.grad = r.grad.cwiseProduct((p.array() * (T(1) - p.array())).matrix());
  return r;
}

}  // namespace lithoseg::nn
