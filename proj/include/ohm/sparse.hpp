#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ohm/dense.hpp"
#include "ohm/errors.hpp"

namespace ohm {

// Symmetric sparse matrix in CSR form, both triangles stored.
class SparseSym {
 public:
  SparseSym() = default;

  // Graph assembly: each unordered pair contributes its off-diagonal value to
  // both triangles; parallel entries for the same pair coalesce by summation.
  static SparseSym from_graph(int n, const std::vector<std::array<int, 2>>& pairs, const Vec& offdiag,
                              const Vec& diag) {
    SparseSym m;
    m.n_ = n;
    std::vector<std::vector<std::pair<int, double>>> rows(n);
    for (int i = 0; i < n; ++i) rows[i].push_back({i, diag[i]});
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      rows[pairs[e][0]].push_back({pairs[e][1], offdiag[e]});
      rows[pairs[e][1]].push_back({pairs[e][0], offdiag[e]});
    }
    m.row_ptr_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
      auto& row = rows[i];
      std::sort(row.begin(), row.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t w = 0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (w > 0 && row[w - 1].first == row[k].first)
          row[w - 1].second += row[k].second;
        else
          row[w++] = row[k];
      }
      row.resize(w);
      m.row_ptr_[i + 1] = m.row_ptr_[i] + static_cast<int>(w);
    }
    m.col_.resize(m.row_ptr_[n]);
    m.val_.resize(m.row_ptr_[n]);
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        m.col_[m.row_ptr_[i] + static_cast<int>(k)] = rows[i][k].first;
        m.val_[m.row_ptr_[i] + static_cast<int>(k)] = rows[i][k].second;
      }
    m.diag_ = diag;
    return m;
  }

  int n() const { return n_; }
  const Vec& diag() const { return diag_; }

  void apply(const Vec& x, Vec& y) const {
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += val_[k] * x[col_[k]];
      y[i] = s;
    }
  }

  Vec residual(const Vec& x, const Vec& b) const {
    Vec r(n_);
    apply(x, r);
    for (int i = 0; i < n_; ++i) r[i] = b[i] - r[i];
    return r;
  }

  bool is_tridiagonal() const {
    for (int i = 0; i < n_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        if (std::abs(col_[k] - i) > 1) return false;
    return true;
  }

  double entry(int i, int j) const {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (col_[k] == j) return val_[k];
    return 0.0;
  }

 private:
  int n_ = 0;
  std::vector<int> row_ptr_, col_;
  Vec val_;
  Vec diag_;
};

struct CgResult {
  int iterations = 0;
  double rel_residual = 0.0;  // preconditioned residual, relative to b
  bool converged = true;
};

// Conjugate gradients with Jacobi preconditioning. x carries the initial
// guess in and the solution out; the stopping rule compares preconditioned
// residual norms against b.
inline CgResult pcg_jacobi(const SparseSym& a, const Vec& b, Vec& x, double tol, int max_iter) {
  const int n = a.n();
  CgResult res;
  Vec inv_diag(n);
  for (int i = 0; i < n; ++i) inv_diag[i] = a.diag()[i] > 0.0 ? 1.0 / a.diag()[i] : 0.0;

  double bnorm2 = 0.0;
  for (int i = 0; i < n; ++i) bnorm2 += b[i] * inv_diag[i] * b[i];
  if (bnorm2 == 0.0) {
    x.assign(n, 0.0);
    return res;
  }

  Vec r = a.residual(x, b);
  Vec z(n), p(n), q(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rho = dot(r, z);
  res.rel_residual = std::sqrt(std::max(rho, 0.0) / bnorm2);
  int it = 0;
  while (res.rel_residual > tol && it < max_iter) {
    a.apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;  // matrix not positive definite on this direction
    const double alpha = rho / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rho_next = dot(r, z);
    const double beta = rho_next / rho;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rho = rho_next;
    ++it;
    res.rel_residual = std::sqrt(std::max(rho, 0.0) / bnorm2);
  }
  res.iterations = it;
  res.converged = res.rel_residual <= tol;
  return res;
}

// Direct solve for tridiagonal SPD systems (Thomas algorithm).
inline void thomas_solve(const SparseSym& a, const Vec& b, Vec& x) {
  const int n = a.n();
  x.assign(n, 0.0);
  if (n == 0) return;
  Vec c(n, 0.0), d(n, 0.0);
  double denom = a.diag()[0];
  if (!(denom != 0.0)) throw SolverError("thomas_solve: zero pivot", 0.0);
  c[0] = a.entry(0, 1) / denom;
  d[0] = b[0] / denom;
  for (int i = 1; i < n; ++i) {
    const double lower = a.entry(i, i - 1);
    denom = a.diag()[i] - lower * c[i - 1];
    if (!(denom != 0.0)) throw SolverError("thomas_solve: zero pivot", 0.0);
    if (i + 1 < n) c[i] = a.entry(i, i + 1) / denom;
    d[i] = (b[i] - lower * d[i - 1]) / denom;
  }
  x[n - 1] = d[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
}

// Compensated accumulation for long sums of signed currents.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace ohm
