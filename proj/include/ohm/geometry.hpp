#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ohm/dense.hpp"
#include "ohm/errors.hpp"

namespace ohm {

// Orthogonal matrix whose first column is the given unit vector, completed
// over the canonical basis by Gram-Schmidt.
inline Mat complete_rotation(Vec e) {
  const int d = static_cast<int>(e.size());
  const double en = norm2(e);
  if (!(en > 0.0)) throw ParameterError("complete_rotation: zero direction");
  for (double& v : e) v /= en;
  std::vector<Vec> cols{e};
  for (int k = 0; k < d && static_cast<int>(cols.size()) < d; ++k) {
    Vec v(d, 0.0);
    v[k] = 1.0;
    for (const Vec& c : cols) {
      const double p = dot(c, v);
      for (int i = 0; i < d; ++i) v[i] -= p * c[i];
    }
    const double nv = norm2(v);
    if (nv < 1e-8) continue;
    for (double& x : v) x /= nv;
    cols.push_back(v);
  }
  if (static_cast<int>(cols.size()) != d)
    throw LinalgError("complete_rotation: could not complete an orthonormal basis");
  Mat rot(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) rot(i, j) = cols[j][i];
  return rot;
}

// Axis-aligned box. Sampling windows use closed containment; counting
// windows (intensity) use half-open [lo, hi).
struct Box {
  Vec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= hi[k] - lo[k];
    return v;
  }

  bool nondegenerate() const {
    if (lo.empty() || lo.size() != hi.size()) return false;
    for (int k = 0; k < dim(); ++k)
      if (!(hi[k] > lo[k])) return false;
    return true;
  }

  bool contains(std::span<const double> x) const {
    for (int k = 0; k < dim(); ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }

  bool contains_half_open(std::span<const double> x) const {
    for (int k = 0; k < dim(); ++k)
      if (x[k] < lo[k] || x[k] >= hi[k]) return false;
    return true;
  }

  // this box contained in outer, with tolerance slack
  bool inside(const Box& outer, double slack = 1e-9) const {
    for (int k = 0; k < dim(); ++k)
      if (lo[k] < outer.lo[k] - slack || hi[k] > outer.hi[k] + slack) return false;
    return true;
  }
};

// Observation geometry for the directional conductivity problem. The probed
// physical direction is rotation * e1; membership tests run in network
// coordinates x = rotation^T * (physical point). The region is a slab of
// levels of w dot x crossed with a transverse box:
//   interior       |w.x| <  T      with T = ell * c * w[0]
//   left/right     w.x <= -T / w.x >= +T
//   stripe         |x . axes_k| < ell/2 for k >= 2
// The plain box stripe is w = e1, c = 1/2, axes = I.
class DirectionFrame {
 public:
  static DirectionFrame box_stripe(int dim, Mat rotation = Mat()) {
    DirectionFrame f;
    f.dim_ = dim;
    f.rotation_ = rotation.rows() == dim ? rotation : Mat::identity(dim);
    f.w_ = Vec(dim, 0.0);
    f.w_[0] = 1.0;
    f.c_ = 0.5;
    f.axes_ = Mat::identity(dim);
    f.tilted_ = false;
    f.validate_();
    return f;
  }

  static DirectionFrame tilted(Mat rotation, Vec w, double c, Mat axes) {
    DirectionFrame f;
    f.dim_ = static_cast<int>(w.size());
    f.rotation_ = rotation.rows() == f.dim_ ? rotation : Mat::identity(f.dim_);
    f.w_ = std::move(w);
    f.c_ = c;
    f.axes_ = std::move(axes);
    f.tilted_ = true;
    f.validate_();
    return f;
  }

  int dim() const { return dim_; }
  const Mat& rotation() const { return rotation_; }
  const Vec& w() const { return w_; }
  double c() const { return c_; }
  const Mat& axes() const { return axes_; }
  bool is_tilted() const { return tilted_; }

  Vec to_network(std::span<const double> physical) const {
    Vec p(physical.begin(), physical.end());
    return rotation_.apply_transpose(p);
  }
  Vec to_physical(std::span<const double> network) const {
    Vec q(network.begin(), network.end());
    return rotation_.apply(q);
  }

  double slab(std::span<const double> x) const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += w_[k] * x[k];
    return s;
  }

  double slab_halfwidth(double ell) const { return ell * c_ * w_[0]; }

  bool in_stripe(std::span<const double> x, double ell) const {
    for (int k = 1; k < dim_; ++k) {
      double t = 0.0;
      for (int i = 0; i < dim_; ++i) t += axes_(i, k) * x[i];
      if (!(std::abs(t) < ell / 2.0)) return false;
    }
    return true;
  }

  bool in_interior(std::span<const double> x, double ell) const {
    return in_stripe(x, ell) && std::abs(slab(x)) < slab_halfwidth(ell);
  }

  // Scaled affine profile: 0 on the left face, 1 on the right, linear in the
  // slab coordinate across the interior.
  double affine_profile(std::span<const double> x, double ell) const {
    const double t = slab_halfwidth(ell);
    const double v = (slab(x) + t) / (2.0 * t);
    return std::clamp(v, 0.0, 1.0);
  }

  // Physical bounding box of the stripe truncated to |w.x| <= T + margin.
  Box required_physical_box(double ell, double margin) const {
    const double t = slab_halfwidth(ell) + margin;
    Box b{Vec(dim_, 0.0), Vec(dim_, 0.0)};
    bool first = true;
    for (int pattern = 0; pattern < (1 << dim_); ++pattern) {
      Vec u(dim_, 0.0);
      double trans = 0.0;  // contribution of transverse axes to w.x
      for (int k = 1; k < dim_; ++k) {
        u[k] = (pattern & (1 << k)) ? ell / 2.0 : -ell / 2.0;
        double wek = 0.0;
        for (int i = 0; i < dim_; ++i) wek += w_[i] * axes_(i, k);
        trans += u[k] * wek;
      }
      const double target = (pattern & 1) ? t : -t;
      u[0] = (target - trans) / w_[0];  // axes column 0 is e1, so w.e1 = w_[0]
      Vec x(dim_, 0.0);
      for (int k = 0; k < dim_; ++k)
        for (int i = 0; i < dim_; ++i) x[i] += axes_(i, k) * u[k];
      Vec p = to_physical(x);
      for (int i = 0; i < dim_; ++i) {
        if (first || p[i] < b.lo[i]) b.lo[i] = p[i];
        if (first || p[i] > b.hi[i]) b.hi[i] = p[i];
      }
      first = false;
    }
    return b;
  }

 private:
  void validate_() const {
    if (dim_ < 1) throw ParameterError("DirectionFrame: dimension must be >= 1");
    if (orthogonality_defect(rotation_) > 1e-12)
      throw GeometryError("DirectionFrame: rotation is not orthogonal within 1e-12");
    const double wn = norm2(w_);
    if (std::abs(wn - 1.0) > 1e-10) throw GeometryError("DirectionFrame: w is not a unit vector");
    if (!(w_[0] > 0.0)) throw GeometryError("DirectionFrame: w.e1 must be positive");
    if (!(c_ > 0.0)) throw ParameterError("DirectionFrame: c must be positive");
    if (orthogonality_defect(axes_) > 1e-10)
      throw GeometryError("DirectionFrame: frame vectors are not orthonormal");
    for (int i = 1; i < dim_; ++i)
      if (std::abs(axes_(i, 0) - 0.0) > 1e-12 || std::abs(axes_(0, 0) - 1.0) > 1e-12)
        throw GeometryError("DirectionFrame: first frame vector must be e1");
    // with orthonormal axes the unit-scale cell volume is 2c
    if (std::abs(2.0 * c_ - 1.0) > 1e-10)
      throw GeometryError("DirectionFrame: observation cell volume differs from 1");
  }

  int dim_ = 0;
  Mat rotation_;
  Vec w_;
  double c_ = 0.5;
  Mat axes_;
  bool tilted_ = false;
};

}  // namespace ohm
