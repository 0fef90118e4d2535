#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hts/autodiff.hpp"
#include "hts/hierarchy.hpp"
#include "hts/matrix.hpp"

namespace hts {

// Weights and bias of the output-producing layer: ŷ = W·z + b. Rows are series,
// so the aggregation matrix acts on it from the left.
struct FinalLinearLayer {
  Matrix W;  // m×d
  Matrix b;  // m×1
};

struct GaussianForecast {
  std::vector<double> mean;
  std::vector<double> stddev;  // strictly positive
};

enum class Accuracy { Mse, Mae };

inline void check_layer_dims(const Matrix& w, const Matrix& b, const AggregationMatrix& agg,
                             const char* who) {
  if (w.rows != agg.num_nodes() || b.rows != agg.num_nodes() || b.cols != 1)
    throw std::invalid_argument(std::string(who) + ": layer/hierarchy dimension mismatch");
}

// ---------------------------------------------------------------------------
// Tape (training) versions.
// ---------------------------------------------------------------------------

inline Var mse(Tape& t, Var yhat, const Matrix& y) {
  return t.mean_sq(t.sub(yhat, t.constant(y)));
}

inline Var mae(Tape& t, Var yhat, const Matrix& y) {
  return t.mean_abs(t.sub(yhat, t.constant(y)));
}

inline Var accuracy_loss(Tape& t, Var yhat, const Matrix& y, Accuracy kind) {
  return kind == Accuracy::Mse ? mse(t, yhat, y) : mae(t, yhat, y);
}

// Network coherency regularization of the final layer:
// l_c = ||W − A·W||_F + ||b − A·b||₂. Data independent: it reads only the layer.
inline Var core_regularizer(Tape& t, Var w, Var b, const AggregationMatrix& agg) {
  check_layer_dims(t.value(w), t.value(b), agg, "core_regularizer");
  const Var a = t.constant(agg.entries);
  const Var wdev = t.frobenius_norm(t.sub(w, t.matmul(a, w)));
  const Var bdev = t.frobenius_norm(t.sub(b, t.matmul(a, b)));
  return t.add(wdev, bdev);
}

// w·l_c(L) + accuracy(ŷ, y). At weight 0 the regularizer is skipped entirely so
// the graph (and the training trajectory) is identical to the unregularized one.
inline Var combined_loss(Tape& t, Var yhat, const Matrix& y, Var layer_w, Var layer_b,
                         const AggregationMatrix& agg, double weight, Accuracy kind) {
  if (weight < 0.0) throw std::invalid_argument("combined_loss: negative weight");
  const Var acc = accuracy_loss(t, yhat, y, kind);
  if (weight == 0.0) return acc;
  return t.add(acc, t.scale(core_regularizer(t, layer_w, layer_b, agg), weight));
}

// PROFHiT-style soft distributional consistency: squared moment distance between
// each series' Gaussian and the Gaussian implied by independently aggregating
// its leaves. mu/sigma are batch×m (one forecast per row); returns the mean
// over rows of Σᵢ[(μᵢ−(Aμ)ᵢ)² + (σᵢ−√((Aσ²)ᵢ))²].
inline Var profhit_consistency(Tape& t, Var mu, Var sigma, const AggregationMatrix& agg) {
  const Matrix& mv = t.value(mu);
  if (mv.cols != agg.num_nodes())
    throw std::invalid_argument("profhit_consistency: series dimension mismatch");
  for (double s : t.value(sigma).a)
    if (!(s > 0.0)) throw std::domain_error("profhit_consistency: non-positive stddev");
  const Var at = t.constant(transpose(agg.entries));
  const Var mean_dev = t.sub(mu, t.matmul(mu, at));
  const Var agg_std = t.sqrt_elem(t.matmul(t.square(sigma), at));
  const Var std_dev = t.sub(sigma, agg_std);
  return t.scale(t.add(t.sum_sq(mean_dev), t.sum_sq(std_dev)), 1.0 / mv.rows);
}

// ---------------------------------------------------------------------------
// Plain (evaluation/report) versions.
// ---------------------------------------------------------------------------

inline double mse(const Matrix& yhat, const Matrix& y) {
  check_same_shape(yhat, y, "mse");
  double s = 0.0;
  for (int i = 0; i < yhat.size(); ++i) {
    const double d = yhat.a[i] - y.a[i];
    s += d * d;
  }
  return s / yhat.size();
}

inline double mae(const Matrix& yhat, const Matrix& y) {
  check_same_shape(yhat, y, "mae");
  double s = 0.0;
  for (int i = 0; i < yhat.size(); ++i) s += std::abs(yhat.a[i] - y.a[i]);
  return s / yhat.size();
}

inline double core_regularizer(const FinalLinearLayer& layer, const AggregationMatrix& agg) {
  check_layer_dims(layer.W, layer.b, agg, "core_regularizer");
  return frobenius_norm(sub(layer.W, matmul(agg.entries, layer.W))) +
         frobenius_norm(sub(layer.b, matmul(agg.entries, layer.b)));
}

// Per-row bound on output coherency: ||z_row||₂·||W−AW||_F + ||b−Ab||₂.
// Every forward pass through the layer satisfies c(ŷ_row) ≤ bound(row).
inline std::vector<double> coherency_bound(const FinalLinearLayer& layer,
                                           const AggregationMatrix& agg, const Matrix& z) {
  check_layer_dims(layer.W, layer.b, agg, "coherency_bound");
  if (z.cols != layer.W.cols)
    throw std::invalid_argument("coherency_bound: z width " + std::to_string(z.cols) +
                                " vs layer width " + std::to_string(layer.W.cols));
  const double w_dev = frobenius_norm(sub(layer.W, matmul(agg.entries, layer.W)));
  const double b_dev = frobenius_norm(sub(layer.b, matmul(agg.entries, layer.b)));
  std::vector<double> bounds(z.rows);
  for (int r = 0; r < z.rows; ++r) bounds[r] = row_norm(z, r) * w_dev + b_dev;
  return bounds;
}

inline double profhit_consistency(const GaussianForecast& f, const AggregationMatrix& agg) {
  const int m = agg.num_nodes();
  if (static_cast<int>(f.mean.size()) != m || static_cast<int>(f.stddev.size()) != m)
    throw std::invalid_argument("profhit_consistency: dimension mismatch");
  for (double s : f.stddev)
    if (!(s > 0.0)) throw std::domain_error("profhit_consistency: non-positive stddev");
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    double agg_mean = 0.0, agg_var = 0.0;
    for (int j = 0; j < m; ++j) {
      agg_mean += agg.entries(i, j) * f.mean[j];
      agg_var += agg.entries(i, j) * f.stddev[j] * f.stddev[j];
    }
    const double dm = f.mean[i] - agg_mean;
    const double ds = f.stddev[i] - std::sqrt(agg_var);
    total += dm * dm + ds * ds;
  }
  return total;
}

inline double gaussian_nll(const GaussianForecast& f, const std::vector<double>& y) {
  if (f.mean.size() != y.size() || f.stddev.size() != y.size())
    throw std::invalid_argument("gaussian_nll: dimension mismatch");
  constexpr double half_log_2pi = 0.9189385332046727;
  double total = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!(f.stddev[i] > 0.0)) throw std::domain_error("gaussian_nll: non-positive stddev");
    const double r = (y[i] - f.mean[i]) / f.stddev[i];
    total += half_log_2pi + std::log(f.stddev[i]) + 0.5 * r * r;
  }
  return total / y.size();
}

}  // namespace hts
