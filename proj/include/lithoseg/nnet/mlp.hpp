#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lithoseg/error.hpp"
#include "lithoseg/rng.hpp"

namespace lithoseg::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1, Identity = 2 };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw DomainError("unknown activation '" + s + "'");
}

// Fully-connected network. weights[l] maps layer l (dims[l]) to layer l+1
// (dims[l+1]); hidden layers use `hidden`, the output layer is identity.
template <typename T>
struct BasicMlp {
  std::vector<int> dims;
  Activation hidden = Activation::Relu;
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;

  int layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layers(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }
  // Stored as 32-bit floats.
  std::size_t parameter_bytes() const { return parameter_count() * sizeof(float); }

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out;
    out.dims = dims;
    out.hidden = hidden;
    for (int l = 0; l < layers(); ++l) {
      out.weights.push_back(weights[l].template cast<U>());
      out.biases.push_back(biases[l].template cast<U>());
    }
    return out;
  }

  bool all_finite() const {
    for (int l = 0; l < layers(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  friend bool operator==(const BasicMlp& a, const BasicMlp& b) {
    if (a.dims != b.dims || a.hidden != b.hidden || a.layers() != b.layers()) return false;
    for (int l = 0; l < a.layers(); ++l)
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    return true;
  }
};

using MlpParams = BasicMlp<float>;

inline void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw DomainError("mlp: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw DomainError("mlp: every layer dim must be >= 1");
}

// Scaled-uniform init, +-sqrt(6 / (fan_in + fan_out)); biases zero.
template <typename T = float>
BasicMlp<T> init_mlp(const std::vector<int>& dims, Activation hidden, std::uint64_t seed) {
  check_dims(dims);
  BasicMlp<T> p;
  p.dims = dims;
  p.hidden = hidden;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
    Matrix<T> w(dims[l + 1], dims[l]);
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = static_cast<T>(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector<T>::Zero(dims[l + 1]));
  }
  return p;
}

// Per-layer inputs (post-activation) and pre-activations for one batch;
// columns are samples.
template <typename T>
struct ForwardCache {
  std::vector<Matrix<T>> inputs;  // inputs[l] feeds layer l; inputs.back() is the output
  std::vector<Matrix<T>> pre;     // pre[l] = W_l * inputs[l] + b_l

  const Matrix<T>& output() const { return inputs.back(); }
};

template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;
  Matrix<T> input;
};

namespace detail {

template <typename T>
void apply_activation(Matrix<T>& z, Activation a) {
  switch (a) {
    case Activation::Relu:
      z = z.cwiseMax(T(0));
      break;
    case Activation::Tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::Identity:
      break;
  }
}

// Derivative expressed through pre-activation z and output y.
template <typename T>
Matrix<T> activation_grad(const Matrix<T>& z, const Matrix<T>& y, Activation a) {
  switch (a) {
    case Activation::Relu:
      return (z.array() > T(0)).template cast<T>().matrix();
    case Activation::Tanh:
      return (T(1) - y.array().square()).matrix();
    case Activation::Identity:
      break;
  }
  return Matrix<T>::Ones(z.rows(), z.cols());
}

}  // namespace detail

// Batched forward pass; x is (input_dim x batch).
template <typename T>
ForwardCache<T> forward_batch(const BasicMlp<T>& p, const Matrix<T>& x) {
  if (x.rows() != p.input_dim())
    throw ShapeError("mlp forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(p.input_dim()));
  ForwardCache<T> cache;
  cache.inputs.reserve(p.layers() + 1);
  cache.pre.reserve(p.layers());
  cache.inputs.push_back(x);
  for (int l = 0; l < p.layers(); ++l) {
    Matrix<T> z = p.weights[l] * cache.inputs.back();
    z.colwise() += p.biases[l];
    cache.pre.push_back(z);
    if (l + 1 < p.layers()) detail::apply_activation(z, p.hidden);
    cache.inputs.push_back(std::move(z));
  }
  return cache;
}

template <typename T>
Vector<T> forward(const BasicMlp<T>& p, const Vector<T>& x) {
  return forward_batch(p, Matrix<T>(x)).output().col(0);
}

// Reverse-mode gradients given dLoss/dOutput (output_dim x batch).
template <typename T>
Gradients<T> backward(const BasicMlp<T>& p, const ForwardCache<T>& cache, const Matrix<T>& upstream) {
  if (cache.pre.size() != static_cast<std::size_t>(p.layers()))
    throw ShapeError("mlp backward: cache does not match network depth");
  if (upstream.rows() != p.output_dim() || upstream.cols() != cache.output().cols())
    throw ShapeError("mlp backward: upstream gradient shape mismatch");
  Gradients<T> g;
  g.weights.resize(p.layers());
  g.biases.resize(p.layers());
  Matrix<T> delta = upstream;
  for (int l = p.layers() - 1; l >= 0; --l) {
    if (l + 1 < p.layers())
      delta = delta.cwiseProduct(detail::activation_grad(cache.pre[l], cache.inputs[l + 1], p.hidden));
    g.weights[l] = delta * cache.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    delta = p.weights[l].transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace lithoseg::nn
