#pragma once

// Small dense linear algebra (Cholesky solves, trace of an inverse) and a
// central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xorpgd {

using vec = std::vector<double>;

class numerics_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class not_spd_error : public numerics_error {
 public:
  explicit not_spd_error(std::size_t pivot)
      : numerics_error("matrix is not symmetric positive definite (pivot " +
                       std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Row-major dense matrix.
class dense_matrix {
 public:
  dense_matrix() = default;
  dense_matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  dense_matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw numerics_error("dense_matrix: size mismatch");
  }

  static dense_matrix identity(std::size_t n) {
    dense_matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static dense_matrix diagonal(std::span<const double> d) {
    dense_matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double> &data() const { return data_; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend dense_matrix operator*(const dense_matrix &a, const dense_matrix &b) {
    if (a.cols_ != b.rows_) throw numerics_error("matrix product: shape mismatch");
    dense_matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }
  friend dense_matrix operator-(dense_matrix a, const dense_matrix &b) {
    for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
    return a;
  }

  vec multiply(std::span<const double> x) const {
    vec y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) y[i] += (*this)(i, j) * x[j];
    return y;
  }
  vec multiply_transposed(std::span<const double> x) const {
    vec y(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * x[i];
    return y;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Lower Cholesky factor of an SPD matrix. On breakdown the diagonal is
/// shifted once by 1e-10 * trace / n before giving up.
class cholesky {
 public:
  explicit cholesky(const dense_matrix &a) {
    if (!a.square()) throw numerics_error("cholesky: matrix must be square");
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(a(i, j) - a(j, i)) > 1e-12 * (1.0 + std::abs(a(i, j))))
          throw numerics_error("cholesky: matrix is not symmetric");
    if (auto bad = factor(a, 0.0); bad) {
      const double shift = a.rows() ? 1e-10 * std::abs(a.trace()) / static_cast<double>(a.rows()) : 0.0;
      if (auto again = factor(a, shift); again) throw not_spd_error(*again);
      jittered_ = true;
    }
  }

  std::size_t size() const { return l_.rows(); }
  bool jittered() const { return jittered_; }
  const dense_matrix &lower() const { return l_; }

  vec solve(std::span<const double> b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) throw numerics_error("cholesky solve: size mismatch");
    vec y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      double s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
      y[i] = s / l_(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l_(k, i) * y[k];
      y[i] = s / l_(i, i);
    }
    return y;
  }

  dense_matrix solve(const dense_matrix &b) const {
    if (b.rows() != size()) throw numerics_error("cholesky solve: size mismatch");
    dense_matrix x(b.rows(), b.cols());
    vec col(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
      const vec s = solve(col);
      for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = s[i];
    }
    return x;
  }

 private:
  std::optional<std::size_t> factor(const dense_matrix &a, double shift) {
    const std::size_t n = a.rows();
    l_ = dense_matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      double d = a(j, j) + shift;
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > 0.0) || !std::isfinite(d)) return j;
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
    return std::nullopt;
  }

  dense_matrix l_;
  bool jittered_ = false;
};

inline dense_matrix solve_spd(const dense_matrix &a, const dense_matrix &b) {
  return cholesky(a).solve(b);
}

inline vec solve_spd(const dense_matrix &a, std::span<const double> b) {
  return cholesky(a).solve(b);
}

inline dense_matrix inverse_spd(const dense_matrix &a) {
  return cholesky(a).solve(dense_matrix::identity(a.rows()));
}

/// Tr(A^{-1}) = ||L^{-1}||_F^2 for A = L L^T.
inline double trace_inverse(const dense_matrix &a) {
  const cholesky c(a);
  const auto &l = c.lower();
  const std::size_t n = l.rows();
  double t = 0.0;
  vec col(n);
  for (std::size_t j = 0; j < n; ++j) {
    // column j of L^{-1} by forward substitution on e_j
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0 / l(j, j);
    t += col[j] * col[j];
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= l(i, k) * col[k];
      col[i] = s / l(i, i);
      t += col[i] * col[i];
    }
  }
  return t;
}

/// Central differences with h_i = 1e-5 * (1 + |x_i|).
inline vec fd_gradient(const std::function<double(std::span<const double>)> &f,
                       std::span<const double> x) {
  vec g(x.size());
  vec probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw numerics_error("fd_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace xorpgd
