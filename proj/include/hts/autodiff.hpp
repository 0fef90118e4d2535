#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hts/matrix.hpp"
#include "hts/rng.hpp"

namespace hts {

struct Var {
  int id = -1;
};

struct BatchNormState {
  Matrix running_mean;  // 1×d
  Matrix running_var;   // 1×d, population convention
  double eps = 1e-5;
  double momentum = 0.1;

  explicit BatchNormState(int d = 0, double eps_ = 1e-5, double momentum_ = 0.1)
      : running_mean(1, d, 0.0), running_var(1, d, 1.0), eps(eps_), momentum(momentum_) {}

  int width() const { return running_mean.cols; }
};

// Eagerly-evaluated reverse-mode tape over dense matrices. Forward values are
// computed at op-recording time; backward() walks the tape once in reverse.
// One tape per forward pass; single-threaded.
class Tape {
 public:
  Var leaf(const Matrix& value, bool requires_grad = false) {
    return push(value, requires_grad, {});
  }
  Var constant(const Matrix& value) { return leaf(value, false); }

  const Matrix& value(Var v) const { return node(v).value; }

  const Matrix& grad(Var v) const {
    const NodeRec& n = node(v);
    if (!n.requires_grad) throw std::logic_error("grad: node does not require gradients");
    return n.grad;
  }

  double scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.size() != 1) throw std::logic_error("scalar: node is not 1x1, got " + m.shape_str());
    return m.a[0];
  }

  int size() const { return static_cast<int>(nodes_.size()); }

  Var matmul(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    Var out = push(hts::matmul(av, bv), needs(a) || needs(b), [this, a, b](const Matrix& g) {
      if (needs(a)) accumulate(a, hts::matmul(g, hts::transpose(value(b))));
      if (needs(b)) accumulate(b, hts::matmul(hts::transpose(value(a)), g));
    });
    return out;
  }

  Var transpose(Var x) {
    return push(hts::transpose(value(x)), needs(x), [this, x](const Matrix& g) {
      if (needs(x)) accumulate(x, hts::transpose(g));
    });
  }

  Var add(Var a, Var b) {
    return push(hts::add(value(a), value(b)), needs(a) || needs(b),
                [this, a, b](const Matrix& g) {
                  if (needs(a)) accumulate(a, g);
                  if (needs(b)) accumulate(b, g);
                });
  }

  // a: n×d, b: 1×d broadcast over the rows of a.
  Var add_rowvec(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (bv.rows != 1 || bv.cols != av.cols)
      throw std::invalid_argument("add_rowvec: want 1x" + std::to_string(av.cols) +
                                  ", got " + bv.shape_str());
    Matrix out = av;
    for (int i = 0; i < av.rows; ++i)
      for (int j = 0; j < av.cols; ++j) out(i, j) += bv(0, j);
    return push(std::move(out), needs(a) || needs(b), [this, a, b](const Matrix& g) {
      if (needs(a)) accumulate(a, g);
      if (needs(b)) {
        Matrix gb(1, g.cols);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
        accumulate(b, gb);
      }
    });
  }

  Var sub(Var a, Var b) {
    return push(hts::sub(value(a), value(b)), needs(a) || needs(b),
                [this, a, b](const Matrix& g) {
                  if (needs(a)) accumulate(a, g);
                  if (needs(b)) accumulate(b, hts::scale(g, -1.0));
                });
  }

  Var scale(Var x, double s) {
    return push(hts::scale(value(x), s), needs(x), [this, x, s](const Matrix& g) {
      if (needs(x)) accumulate(x, hts::scale(g, s));
    });
  }

  Var tanh(Var x) {
    Matrix out = value(x);
    for (double& v : out.a) v = std::tanh(v);
    const Matrix saved = out;
    return push(std::move(out), needs(x), [this, x, saved](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      for (int i = 0; i < gx.size(); ++i) gx.a[i] *= 1.0 - saved.a[i] * saved.a[i];
      accumulate(x, gx);
    });
  }

  Var softplus(Var x) {
    const Matrix& xv = value(x);
    Matrix out = xv;
    for (double& v : out.a)
      v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    const Matrix xin = xv;
    return push(std::move(out), needs(x), [this, x, xin](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      for (int i = 0; i < gx.size(); ++i) {
        const double v = xin.a[i];
        const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                    : std::exp(v) / (1.0 + std::exp(v));
        gx.a[i] *= sig;
      }
      accumulate(x, gx);
    });
  }

  Var square(Var x) {
    Matrix out = value(x);
    for (double& v : out.a) v *= v;
    return push(std::move(out), needs(x), [this, x](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      const Matrix& xv = value(x);
      for (int i = 0; i < gx.size(); ++i) gx.a[i] *= 2.0 * xv.a[i];
      accumulate(x, gx);
    });
  }

  Var sqrt_elem(Var x) {
    Matrix out = value(x);
    for (double& v : out.a) {
      if (v < 0.0) throw std::domain_error("sqrt_elem: negative entry");
      v = std::sqrt(v);
    }
    const Matrix saved = out;
    return push(std::move(out), needs(x), [this, x, saved](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      for (int i = 0; i < gx.size(); ++i)
        gx.a[i] = saved.a[i] > 0.0 ? gx.a[i] / (2.0 * saved.a[i]) : 0.0;
      accumulate(x, gx);
    });
  }

  Var frobenius_norm(Var x) {
    const double norm = hts::frobenius_norm(value(x));
    return push(Matrix(1, 1, norm), needs(x), [this, x, norm](const Matrix& g) {
      if (!needs(x) || norm == 0.0) return;  // subgradient 0 at the origin
      accumulate(x, hts::scale(value(x), g.a[0] / norm));
    });
  }

  Var mean_sq(Var x) {
    const Matrix& xv = value(x);
    const int n = xv.size();
    double s = 0.0;
    for (double v : xv.a) s += v * v;
    return push(Matrix(1, 1, s / n), needs(x), [this, x, n](const Matrix& g) {
      if (!needs(x)) return;
      accumulate(x, hts::scale(value(x), 2.0 * g.a[0] / n));
    });
  }

  Var mean_abs(Var x) {
    const Matrix& xv = value(x);
    const int n = xv.size();
    double s = 0.0;
    for (double v : xv.a) s += std::abs(v);
    return push(Matrix(1, 1, s / n), needs(x), [this, x, n](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = value(x);
      for (double& v : gx.a) v = (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)) * g.a[0] / n;
      accumulate(x, gx);
    });
  }

  Var sum_sq(Var x) {
    const Matrix& xv = value(x);
    double s = 0.0;
    for (double v : xv.a) s += v * v;
    return push(Matrix(1, 1, s), needs(x), [this, x](const Matrix& g) {
      if (!needs(x)) return;
      accumulate(x, hts::scale(value(x), 2.0 * g.a[0]));
    });
  }

  // Train-mode batchnorm without affine parameters: output columns have sample
  // mean 0 and population variance 1 (up to eps). Updates running statistics
  // in place: r <- (1-momentum)·r + momentum·batch_stat.
  Var batchnorm_train(Var x, BatchNormState& state) {
    const Matrix& xv = value(x);
    const int n = xv.rows;
    const int d = xv.cols;
    if (n < 2) throw std::invalid_argument("batchnorm_train: batch of " +
                                           std::to_string(n) + " (need >= 2)");
    if (!(state.eps > 0.0)) throw std::invalid_argument("batchnorm_train: eps must be positive");
    if (state.width() != d)
      throw std::invalid_argument("batchnorm_train: state width " +
                                  std::to_string(state.width()) + " vs input " +
                                  std::to_string(d));
    Matrix mean(1, d), var(1, d), istd(1, d);
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += xv(i, j);
      mean(0, j) = s / n;
    }
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double c = xv(i, j) - mean(0, j);
        s += c * c;
      }
      var(0, j) = s / n;
      istd(0, j) = 1.0 / std::sqrt(var(0, j) + state.eps);
    }
    Matrix xhat(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) xhat(i, j) = (xv(i, j) - mean(0, j)) * istd(0, j);
    for (int j = 0; j < d; ++j) {
      state.running_mean(0, j) =
          (1.0 - state.momentum) * state.running_mean(0, j) + state.momentum * mean(0, j);
      state.running_var(0, j) =
          (1.0 - state.momentum) * state.running_var(0, j) + state.momentum * var(0, j);
    }
    Matrix out = xhat;
    return push(std::move(out), needs(x), [this, x, xhat, istd, n, d](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx(n, d);
      for (int j = 0; j < d; ++j) {
        double gsum = 0.0, gxhat = 0.0;
        for (int i = 0; i < n; ++i) {
          gsum += g(i, j);
          gxhat += g(i, j) * xhat(i, j);
        }
        for (int i = 0; i < n; ++i)
          gx(i, j) = istd(0, j) / n * (n * g(i, j) - gsum - xhat(i, j) * gxhat);
      }
      accumulate(x, gx);
    });
  }

  // Inference-mode batchnorm: normalizes with the running statistics.
  Var batchnorm_infer(Var x, const BatchNormState& state) {
    const Matrix& xv = value(x);
    const int d = xv.cols;
    if (state.width() != d)
      throw std::invalid_argument("batchnorm_infer: state width mismatch");
    Matrix istd(1, d);
    for (int j = 0; j < d; ++j) istd(0, j) = 1.0 / std::sqrt(state.running_var(0, j) + state.eps);
    Matrix out = xv;
    for (int i = 0; i < out.rows; ++i)
      for (int j = 0; j < d; ++j) out(i, j) = (xv(i, j) - state.running_mean(0, j)) * istd(0, j);
    return push(std::move(out), needs(x), [this, x, istd](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      for (int i = 0; i < gx.rows; ++i)
        for (int j = 0; j < gx.cols; ++j) gx(i, j) *= istd(0, j);
      accumulate(x, gx);
    });
  }

  // Inverted dropout: entries are zeroed with probability rate, survivors are
  // scaled by 1/(1-rate), so the deterministic inference path needs no rescale.
  Var dropout(Var x, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw std::invalid_argument("dropout: rate must be in [0, 1)");
    const Matrix& xv = value(x);
    Matrix mask(xv.rows, xv.cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.a) v = rng.uniform() < rate ? 0.0 : keep_scale;
    Matrix out = xv;
    for (int i = 0; i < out.size(); ++i) out.a[i] *= mask.a[i];
    return push(std::move(out), needs(x), [this, x, mask](const Matrix& g) {
      if (!needs(x)) return;
      Matrix gx = g;
      for (int i = 0; i < gx.size(); ++i) gx.a[i] *= mask.a[i];
      accumulate(x, gx);
    });
  }

  // Mean negative log-likelihood of y under independent Gaussians N(mu, sigma²).
  Var gaussian_nll(Var mu, Var sigma, const Matrix& y) {
    const Matrix& mv = value(mu);
    const Matrix& sv = value(sigma);
    check_same_shape(mv, sv, "gaussian_nll");
    check_same_shape(mv, y, "gaussian_nll");
    for (double s : sv.a)
      if (!(s > 0.0)) throw std::domain_error("gaussian_nll: non-positive stddev");
    const int n = mv.size();
    constexpr double half_log_2pi = 0.9189385332046727;  // log(2π)/2
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = (y.a[i] - mv.a[i]) / sv.a[i];
      total += half_log_2pi + std::log(sv.a[i]) + 0.5 * r * r;
    }
    return push(Matrix(1, 1, total / n), needs(mu) || needs(sigma),
                [this, mu, sigma, y, n](const Matrix& g) {
                  const Matrix& mv = value(mu);
                  const Matrix& sv = value(sigma);
                  const double w = g.a[0] / n;
                  if (needs(mu)) {
                    Matrix gm(mv.rows, mv.cols);
                    for (int i = 0; i < n; ++i)
                      gm.a[i] = w * (mv.a[i] - y.a[i]) / (sv.a[i] * sv.a[i]);
                    accumulate(mu, gm);
                  }
                  if (needs(sigma)) {
                    Matrix gs(sv.rows, sv.cols);
                    for (int i = 0; i < n; ++i) {
                      const double diff = y.a[i] - mv.a[i];
                      gs.a[i] = w * (1.0 / sv.a[i] - diff * diff / (sv.a[i] * sv.a[i] * sv.a[i]));
                    }
                    accumulate(sigma, gs);
                  }
                });
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse, accumulating
  // gradients into every node that requires them.
  void backward(Var loss) {
    if (backward_called_) throw std::logic_error("backward: already called on this tape");
    backward_called_ = true;
    NodeRec& ln = nodes_.at(loss.id);
    if (ln.value.size() != 1)
      throw std::logic_error("backward: loss must be 1x1, got " + ln.value.shape_str());
    if (!ln.requires_grad)
      throw std::logic_error("backward: loss does not depend on any parameter");
    ln.grad.a[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      const NodeRec& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(n.grad);
    }
  }

 private:
  struct NodeRec {
    Matrix value;
    Matrix grad;  // allocated only when requires_grad
    bool requires_grad = false;
    std::function<void(const Matrix&)> back;
  };

  bool needs(Var v) const { return node(v).requires_grad; }

  const NodeRec& node(Var v) const {
    if (v.id < 0 || v.id >= size()) throw std::logic_error("invalid Var");
    return nodes_[v.id];
  }

  Var push(Matrix value, bool requires_grad, std::function<void(const Matrix&)> back) {
    NodeRec n;
    if (requires_grad) n.grad = Matrix(value.rows, value.cols);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(Var v, const Matrix& g) {
    Matrix& dst = nodes_[v.id].grad;
    check_same_shape(dst, g, "grad accumulate");
    for (int i = 0; i < dst.size(); ++i) dst.a[i] += g.a[i];
  }

  std::vector<NodeRec> nodes_;
  bool backward_called_ = false;
};

// Standard-normal matrix, reproducible from the rng stream.
inline Matrix gaussian_noise(int rows, int cols, Rng& rng) {
  return gaussian_matrix(rows, cols, rng);
}

}  // namespace hts
