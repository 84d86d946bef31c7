#include <gtest/gtest.h>

#include <cmath>

#include "lithoseg/nnet/gradcheck.hpp"
#include "lithoseg/nnet/loss.hpp"
#include "lithoseg/nnet/serialize.hpp"
#include "lithoseg/nnet/train.hpp"
#include "support.hpp"

using namespace lithoseg;
using namespace lithoseg::nn;

namespace {

Matrix<double> random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-scale, scale);
  return m;
}

BasicMlp<double> random_net(Rng& rng, Activation act) {
  std::vector<int> dims{1 + static_cast<int>(rng.below(5))};
  const int hidden = 1 + static_cast<int>(rng.below(3));
  for (int h = 0; h < hidden; ++h) dims.push_back(1 + static_cast<int>(rng.below(6)));
  dims.push_back(1 + static_cast<int>(rng.below(3)));
  auto p = init_mlp<double>(dims, act, rng.next());
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.5, 0.5);
  return p;
}

// Plain loops over rows and columns, written without Eigen products.
std::vector<double> oracle_forward(const BasicMlp<double>& p, std::vector<double> x) {
  for (int l = 0; l < p.layers(); ++l) {
    std::vector<double> y(p.dims[l + 1]);
    for (int r = 0; r < p.dims[l + 1]; ++r) {
      double s = p.biases[l](r);
      for (int c = 0; c < p.dims[l]; ++c) s += p.weights[l](r, c) * x[c];
      if (l + 1 < p.layers()) {
        if (p.hidden == Activation::Relu) s = s > 0 ? s : 0;
        if (p.hidden == Activation::Tanh) s = std::tanh(s);
      }
      y[r] = s;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  auto p = init_mlp<float>({4, 8, 3}, Activation::Relu, 1);
  p.set_zero();
  Vector<float> x(4);
  x << 1, -2, 3, 0.5;
  EXPECT_EQ(forward(p, x), Vector<float>::Zero(3));
}

TEST(Mlp, IdentityLayer) {
  auto p = init_mlp<double>({1, 1}, Activation::Identity, 1);
  p.weights[0](0, 0) = 1.0;
  p.biases[0](0) = 0.0;
  Vector<double> x(1);
  x << 0.73;
  EXPECT_DOUBLE_EQ(forward(p, x)(0), 0.73);
}

TEST(Mlp, MatchesLoopOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    for (auto act : {Activation::Relu, Activation::Tanh}) {
      auto p = init_mlp<double>({5, 7, 6, 2}, act, rng.next());
      for (auto& b : p.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-1, 1);
      std::vector<double> x(5);
      for (auto& v : x) v = rng.uniform(-2, 2);
      const auto expect = oracle_forward(p, x);
      const auto got = forward(p, Vector<double>(Eigen::Map<Vector<double>>(x.data(), 5)));
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(got(i), expect[i], 1e-6);
    }
  }
}

TEST(Mlp, ForwardRejectsWrongInputSize) {
  const auto p = init_mlp<float>({3, 2}, Activation::Relu, 1);
  EXPECT_THROW(forward_batch(p, Matrix<float>(Matrix<float>::Zero(4, 1))), ShapeError);
}

TEST(Backward, GradcheckOnRandomNets) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    // Smooth activations only: tanh, and identity for the linear case.
    const auto act = trial % 4 == 3 ? Activation::Identity : Activation::Tanh;
    const auto p = random_net(rng, act);
    const int batch = 1 + static_cast<int>(rng.below(4));
    const auto x = random_matrix(rng, p.input_dim(), batch);
    const auto up = random_matrix(rng, p.output_dim(), batch);
    const auto r = gradient_check(p, x, up);
    EXPECT_LT(r.max_rel_error, 1e-4) << "trial " << trial;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  const auto p = random_net(rng, Activation::Relu);
  const auto x = random_matrix(rng, p.input_dim(), 3);
  const auto g = backward(p, forward_batch(p, x), Matrix<double>(Matrix<double>::Zero(p.output_dim(), 3)));
  for (const auto& w : g.weights) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& b : g.biases) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, LinearLeastSquaresClosedForm) {
  Rng rng(4);
  auto p = init_mlp<double>({3, 2}, Activation::Identity, 3);
  p.biases[0].setZero();
  const auto x = random_matrix(rng, 3, 1);
  const auto y = random_matrix(rng, 2, 1);
  const Matrix<double> r = p.weights[0] * x - y;
  const auto g = backward(p, forward_batch(p, x), r);
  const Matrix<double> expect = r * x.transpose();
  EXPECT_LT((g.weights[0] - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Loss, PerfectPredictionNearZero) {
  const Matrix<double> ones = Matrix<double>::Ones(4, 3);
  EXPECT_NEAR(dice_ce_loss(ones, ones, 0.5).value, 0.0, 1e-5);
  EXPECT_NEAR(dice_ce_loss(ones, ones, 1.0).value, 0.0, 1e-5);
}

TEST(Loss, InvertedPredictionMaximal) {
  Matrix<double> t(1, 6);
  t << 1, 0, 1, 0, 1, 1;
  const Matrix<double> p = Matrix<double>::Ones(1, 6) - t;
  EXPECT_NEAR(dice_ce_loss(p, t, 1.0).value, 1.0, 1e-6);
  EXPECT_GT(dice_ce_loss(p, t, 0.5).value, 5.0);
}

TEST(Loss, EightElementHandValue) {
  Matrix<double> p(1, 8), t(1, 8);
  p << 0.9, 0.2, 0.6, 0.05, 0.7, 0.4, 0.99, 0.3;
  t << 1, 0, 1, 0, 0, 1, 1, 0;
  // sum(pt) = 0.9 + 0.6 + 0.4 + 0.99 = 2.89, sum(p) = 4.14, sum(t) = 4.
  const double dice = 1.0 - 2.0 * 2.89 / (4.14 + 4.0 + 1e-6);
  double ce = 0.0;
  const double pv[] = {0.9, 0.2, 0.6, 0.05, 0.7, 0.4, 0.99, 0.3};
  const int tv[] = {1, 0, 1, 0, 0, 1, 1, 0};
  for (int i = 0; i < 8; ++i) ce -= tv[i] ? std::log(pv[i]) : std::log(1 - pv[i]);
  ce /= 8.0;
  EXPECT_NEAR(dice_ce_loss(p, t, 0.3).value, 0.3 * dice + 0.7 * ce, 1e-6);
}

TEST(Loss, LogitGradientMatchesFiniteDifference) {
  Rng rng(17);
  Matrix<double> z(2, 5), t(2, 5);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = rng.uniform(-3, 3);
    t(i) = rng.uniform() < 0.5;
  }
  const auto r = dice_ce_from_logits(z, t, 0.5);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Matrix<double> a = z, b = z;
    a(i) += 1e-6;
    b(i) -= 1e-6;
    const double fd = (dice_ce_from_logits(a, t, 0.5).value - dice_ce_from_logits(b, t, 0.5).value) / 2e-6;
    EXPECT_NEAR(r.grad(i), fd, 1e-6);
  }
}

TEST(Train, RecoversSlopeTwo) {
  Dataset d;
  d.x.resize(1, 64);
  d.y.resize(1, 64);
  for (int i = 0; i < 64; ++i) {
    d.x(0, i) = -1.0f + 2.0f * i / 63.0f;
    d.y(0, i) = 2.0f * d.x(0, i);
  }
  auto init = init_mlp<float>({1, 1}, Activation::Identity, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.epochs = 300;
  cfg.optimizer.weight_decay = 0.0;
  const auto r = train(init, d, cfg);
  EXPECT_NEAR(r.params.weights[0](0, 0), 2.0, 1e-2);
  EXPECT_NEAR(r.params.biases[0](0), 0.0, 1e-2);
}

TEST(Train, ZeroEpochsKeepsParams) {
  Dataset d{Matrix<float>::Ones(2, 5), Matrix<float>::Zero(1, 5)};
  const auto init = init_mlp<float>({2, 3, 1}, Activation::Relu, 9);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_EQ(train(init, d, cfg).params, init);
}

TEST(Train, SameSeedSameHistory) {
  Rng rng(1);
  Dataset d{Matrix<float>(3, 100), Matrix<float>(1, 100)};
  for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x(i) = static_cast<float>(rng.uniform(-1, 1));
  for (int i = 0; i < 100; ++i) d.y(0, i) = d.x(0, i) * d.x(1, i) - d.x(2, i);
  const auto init = init_mlp<float>({3, 16, 1}, Activation::Relu, 9);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 10;
  cfg.seed = 42;
  const auto a = train(init, d, cfg);
  const auto b = train(init, d, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.params, b.params);
}

TEST(Serialize, RoundTripIsBitIdentical) {
  const auto dir = testing_support::scratch_dir("params");
  const auto p = init_mlp<float>({7, 5, 4, 1}, Activation::Tanh, 77);
  save_params(dir / "p.lsnn", p);
  EXPECT_EQ(load_params(dir / "p.lsnn"), p);
  EXPECT_EQ(encode_params(decode_params(encode_params(p))), encode_params(p));
}

TEST(Serialize, TruncatedFileFailsChecksum) {
  auto bytes = encode_params(init_mlp<float>({4, 3, 1}, Activation::Relu, 1));
  bytes.resize(bytes.size() - 9);
  try {
    decode_params(bytes);
    FAIL();
  } catch (const ParamFileError& e) {
    EXPECT_EQ(e.kind(), ParamFileError::Kind::Checksum);
  }
}

TEST(Serialize, DeclaredDimMismatchNamesLayer) {
  auto bytes = encode_params(init_mlp<float>({4, 3, 1}, Activation::Relu, 1));
  // dims[1] sits after the magic, the layer count and dims[0].
  bytes[5 + 4 + 4] = 2;
  bytes.resize(bytes.size() - 4);
  detail::put_u32(bytes, detail::crc32_of(bytes.data() + 5, bytes.size() - 5));
  try {
    decode_params(bytes);
    FAIL();
  } catch (const ParamFileError& e) {
    EXPECT_EQ(e.kind(), ParamFileError::Kind::DimMismatch);
    EXPECT_EQ(e.layer(), 0);
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}
