#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ohm/errors.hpp"

namespace ohm {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

// Small dense row-major matrix; used for d x d frames and effective matrices.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  Vec apply(const Vec& x) const {
    Vec y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  // y = A^T x
  Vec apply_transpose(const Vec& x) const {
    Vec y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * x[i];
    return y;
  }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat operator*(const Mat& o) const {
    Mat r(rows_, o.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const double aik = (*this)(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < o.cols_; ++j) r(i, j) += aik * o(k, j);
      }
    return r;
  }

  double max_abs_diff(const Mat& o) const {
    double m = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) m = std::max(m, std::abs(a_[i] - o.a_[i]));
    return m;
  }

 private:
  int rows_ = 0, cols_ = 0;
  Vec a_;
};

// Deviation of Q from orthogonality, max |Q^T Q - I|.
inline double orthogonality_defect(const Mat& q) {
  return (q.transposed() * q).max_abs_diff(Mat::identity(q.cols()));
}

struct EigenSym {
  Vec values;     // nonincreasing
  Mat vectors;    // orthonormal columns, vectors.col(k) <-> values[k]
};

// Cyclic Jacobi rotations; ample for the d x d matrices that arise here.
inline EigenSym jacobi_eigensym(Mat a) {
  const int n = a.rows();
  if (n != a.cols()) throw LinalgError("jacobi_eigensym: matrix not square");
  Mat q = Mat::identity(n);
  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int r = p + 1; r < n; ++r) off += a(p, r) * a(p, r);
    if (off < 1e-300) break;
    for (int p = 0; p < n; ++p) {
      for (int r = p + 1; r < n; ++r) {
        if (a(p, r) == 0.0) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * a(p, r));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (int k = 0; k < n; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
    }
  }

  EigenSym e;
  e.values.resize(n);
  for (int i = 0; i < n; ++i) e.values[i] = a(i, i);
  // sort nonincreasing, carry eigenvectors
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (e.values[order[j]] > e.values[order[i]]) std::swap(order[i], order[j]);
  EigenSym out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (int k = 0; k < n; ++k) {
    out.values[k] = e.values[order[k]];
    // sign convention: first component with magnitude above 1e-12 is positive
    double sign = 1.0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(q(i, order[k])) > 1e-12) {
        sign = q(i, order[k]) > 0 ? 1.0 : -1.0;
        break;
      }
    }
    for (int i = 0; i < n; ++i) out.vectors(i, k) = sign * q(i, order[k]);
  }
  return out;
}

}  // namespace ohm
