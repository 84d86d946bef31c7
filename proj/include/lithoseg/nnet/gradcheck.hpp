#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "lithoseg/nnet/mlp.hpp"

namespace lithoseg::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares backward() with central differences of the scalar loss
// L = sum(upstream .* f(x)), which has dL/dOutput = upstream.
inline GradCheckResult gradient_check(BasicMlp<double> p, const Matrix<double>& x, const Matrix<double>& upstream,
                                      double h = 1e-4) {
  auto loss = [&](const BasicMlp<double>& q, const Matrix<double>& in) {
    return forward_batch(q, in).output().cwiseProduct(upstream).sum();
  };
  const auto g = backward(p, forward_batch(p, x), upstream);
  GradCheckResult out;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); };
  auto probe = [&](double& slot, double analytic, const std::function<double()>& eval) {
    const double saved = slot;
    slot = saved + h;
    const double up = eval();
    slot = saved - h;
    const double down = eval();
    slot = saved;
    out.max_rel_error = std::max(out.max_rel_error, rel((up - down) / (2 * h), analytic));
    ++out.checked;
  };
  for (int l = 0; l < p.layers(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].size(); ++i)
      probe(p.weights[l](i), g.weights[l](i), [&] { return loss(p, x); });
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i)
      probe(p.biases[l](i), g.biases[l](i), [&] { return loss(p, x); });
  }
  Matrix<double> xm = x;
  for (Eigen::Index i = 0; i < xm.size(); ++i) probe(xm(i), g.input(i), [&] { return loss(p, xm); });
  return out;
}

}  // namespace lithoseg::nn
