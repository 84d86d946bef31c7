#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <algorithm>
#include <string>
#include <vector>

#include "lithoseg/nnet/loss.hpp"
#include "lithoseg/nnet/mlp.hpp"
#include "lithoseg/nnet/optim.hpp"

namespace lithoseg::nn {

enum class LossKind { Mse, DiceCe };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer{};
  LossKind loss = LossKind::Mse;
  double lambda_mix = 0.5;
  // Early stopping on the validation loss; only active when a validation
  // set is supplied and patience > 0.
  int patience = 5;

  // Checks the values a user may configure.
  void validate() const {
    if (!(learning_rate > 0.0)) throw DomainError("train config: learning_rate must be > 0");
    if (epochs < 1) throw DomainError("train config: epochs must be >= 1");
    check_common();
  }

  void check_common() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw DomainError("train config: learning_rate must be finite and >= 0");
    if (epochs < 0) throw DomainError("train config: epochs must be >= 0");
    if (batch_size < 1) throw DomainError("train config: batch_size must be >= 1");
    if (lambda_mix < 0.0 || lambda_mix > 1.0) throw DomainError("train config: lambda_mix must be in [0, 1]");
    if (patience < 0) throw DomainError("train config: patience must be >= 0");
  }
};

// Samples are columns.
struct Dataset {
  Matrix<float> x;
  Matrix<float> y;

  Eigen::Index size() const { return x.cols(); }
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_history;  // mean training loss per epoch
  std::vector<double> val_history;
  int best_epoch = -1;
  bool stopped_early = false;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

template <typename T>
double evaluate_loss(const BasicMlp<T>& p, const Matrix<T>& x, const Matrix<T>& y, const TrainConfig& cfg) {
  const auto cache = forward_batch(p, x);
  if (cfg.loss == LossKind::Mse) return mse_loss(cache.output(), y).value;
  return dice_ce_from_logits(cache.output(), y, cfg.lambda_mix).value;
}

// Mini-batch training. Compute selects the arithmetic used internally;
// stored parameters stay 32-bit. The dice_ce loss is applied to
// sigmoid(output).
template <typename Compute = float>
TrainResult train(const MlpParams& init, const Dataset& data, const TrainConfig& cfg,
                  const Dataset* validation = nullptr) {
  cfg.check_common();
  if (data.size() == 0) throw DomainError("train: empty dataset");
  if (data.x.rows() != init.input_dim() || data.y.rows() != init.output_dim() || data.y.cols() != data.x.cols())
    throw ShapeError("train: dataset shape does not match network");

  BasicMlp<Compute> p = init.template cast<Compute>();
  Optimizer<Compute> opt(p, cfg.optimizer, cfg.learning_rate);
  Rng rng(cfg.seed);
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  const bool early = validation != nullptr && validation->size() > 0 && cfg.patience > 0;
  Matrix<Compute> vx, vy;
  if (early) {
    vx = validation->x.template cast<Compute>();
    vy = validation->y.template cast<Compute>();
  }

  TrainResult result;
  BasicMlp<Compute> best = p;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  Matrix<Compute> xb, yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      xb.resize(data.x.rows(), b);
      yb.resize(data.y.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto src = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = data.x.col(src).template cast<Compute>();
        yb.col(j) = data.y.col(src).template cast<Compute>();
      }
      const auto cache = forward_batch(p, xb);
      const LossResult<Compute> loss = cfg.loss == LossKind::Mse ? mse_loss(cache.output(), yb)
                                                                 : dice_ce_from_logits(cache.output(), yb, cfg.lambda_mix);
      if (!std::isfinite(loss.value))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at sample " +
                            std::to_string(start));
      total += loss.value * static_cast<double>(b);
      opt.step(p, backward(p, cache, loss.grad));
    }
    result.loss_history.push_back(total / static_cast<double>(n));

    if (early) {
      const double v = evaluate_loss(p, vx, vy, cfg);
      if (!std::isfinite(v)) throw TrainingError("train: non-finite validation loss at epoch " + std::to_string(epoch));
      result.val_history.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = p;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (!p.all_finite()) throw TrainingError("train: parameters became non-finite");
  result.params = (early && result.best_epoch >= 0 ? best : p).template cast<float>();
  if (!early) result.best_epoch = cfg.epochs - 1;
  return result;
}

}  // namespace lithoseg::nn
