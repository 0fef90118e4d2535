#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hts {

// Dense row-major matrix of doubles. Column vectors are n×1, row vectors 1×n.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix column(const std::vector<double>& v) {
    Matrix m(static_cast<int>(v.size()), 1);
    m.a = v;
    return m;
  }

  static Matrix row_vector(const std::vector<double>& v) {
    Matrix m(1, static_cast<int>(v.size()));
    m.a = v;
    return m;
  }

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : a)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline void check_same_shape(const Matrix& x, const Matrix& y, const char* op) {
  if (!x.same_shape(y))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + x.shape_str() +
                                " vs " + y.shape_str());
}

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows)
    throw std::invalid_argument("matmul: inner dimension mismatch " + x.shape_str() +
                                " vs " + y.shape_str());
  Matrix out(x.rows, y.cols);
  // i-k-j order: streams over y rows, accumulates each output row in cache.
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = &x.a[static_cast<size_t>(i) * x.cols];
    double* oi = &out.a[static_cast<size_t>(i) * out.cols];
    for (int k = 0; k < x.cols; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* yk = &y.a[static_cast<size_t>(k) * y.cols];
      for (int j = 0; j < y.cols; ++j) oi[j] += xv * yk[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& x) {
  Matrix out(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
  return out;
}

inline Matrix add(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "add");
  Matrix out = x;
  for (int i = 0; i < out.size(); ++i) out.a[i] += y.a[i];
  return out;
}

inline Matrix sub(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "sub");
  Matrix out = x;
  for (int i = 0; i < out.size(); ++i) out.a[i] -= y.a[i];
  return out;
}

inline Matrix scale(const Matrix& x, double s) {
  Matrix out = x;
  for (double& v : out.a) v *= s;
  return out;
}

inline double frobenius_norm(const Matrix& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

inline double row_norm(const Matrix& x, int r) {
  double s = 0.0;
  for (int j = 0; j < x.cols; ++j) s += x(r, j) * x(r, j);
  return std::sqrt(s);
}

inline double max_abs_diff(const Matrix& x, const Matrix& y) {
  check_same_shape(x, y, "max_abs_diff");
  double m = 0.0;
  for (int i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
  return m;
}

// Solves G·X = B for symmetric positive definite G via Cholesky.
inline Matrix solve_spd(Matrix g, Matrix b) {
  if (g.rows != g.cols || g.rows != b.rows)
    throw std::invalid_argument("solve_spd: dimension mismatch " + g.shape_str() +
                                " vs " + b.shape_str());
  const int n = g.rows;
  // Lower Cholesky factor written into g.
  for (int j = 0; j < n; ++j) {
    double diag = g(j, j);
    for (int k = 0; k < j; ++k) diag -= g(j, k) * g(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw std::runtime_error("solve_spd: matrix not positive definite");
    const double ljj = std::sqrt(diag);
    g(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (int k = 0; k < j; ++k) s -= g(i, k) * g(j, k);
      g(i, j) = s / ljj;
    }
  }
  // Forward substitution L·Y = B, then backward Lᵀ·X = Y, column by column.
  for (int c = 0; c < b.cols; ++c) {
    for (int i = 0; i < n; ++i) {
      double s = b(i, c);
      for (int k = 0; k < i; ++k) s -= g(i, k) * b(k, c);
      b(i, c) = s / g(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = b(i, c);
      for (int k = i + 1; k < n; ++k) s -= g(k, i) * b(k, c);
      b(i, c) = s / g(i, i);
    }
  }
  return b;
}

}  // namespace hts
