#pragma once

#include <cmath>
#include <string>

#include "hts/matrix.hpp"

namespace hts {

struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
};

// A trainable tensor plus its gradient buffer and optimizer state.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  AdamState adam;

  Param() = default;
  Param(std::string name_, Matrix value_)
      : name(std::move(name_)), value(std::move(value_)) {
    grad = Matrix(value.rows, value.cols);
    adam.m = Matrix(value.rows, value.cols);
    adam.v = Matrix(value.rows, value.cols);
  }
};

inline void sgd_step(Matrix& param, const Matrix& grad, double lr) {
  check_same_shape(param, grad, "sgd_step");
  for (int i = 0; i < param.size(); ++i) param.a[i] -= lr * grad.a[i];
}

inline void adam_step(Matrix& param, const Matrix& grad, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  check_same_shape(param, grad, "adam_step");
  check_same_shape(param, state.m, "adam_step state");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (int i = 0; i < param.size(); ++i) {
    state.m.a[i] = beta1 * state.m.a[i] + (1.0 - beta1) * grad.a[i];
    state.v.a[i] = beta2 * state.v.a[i] + (1.0 - beta2) * grad.a[i] * grad.a[i];
    const double mhat = state.m.a[i] / bc1;
    const double vhat = state.v.a[i] / bc2;
    param.a[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace hts
