#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ohm/cell_list.hpp"
#include "ohm/errors.hpp"
#include "ohm/geometry.hpp"
#include "ohm/rng.hpp"

namespace ohm {

// --------------------------------------------------------------------------
// Point clouds

struct PointCloud {
  int dim = 0;
  Vec coords;  // flat row-major, n * dim
  Box window;

  int n_points() const { return dim == 0 ? 0 : static_cast<int>(coords.size()) / dim; }
  std::span<const double> point(int i) const {
    return std::span<const double>(coords).subspan(static_cast<std::size_t>(i) * dim, dim);
  }
};

inline PointCloud sample_poisson_points(double intensity, const Box& window, std::uint64_t seed) {
  if (!(intensity > 0.0)) throw ParameterError("sample_poisson_points: intensity must be positive");
  if (!window.nondegenerate()) throw ParameterError("sample_poisson_points: degenerate window");
  PointCloud cloud;
  cloud.dim = window.dim();
  cloud.window = window;
  rng::Stream count_stream{rng::Key(seed).absorb(rng::Tag::PointCount)};
  const std::int64_t n = count_stream.next_poisson(intensity * window.volume());
  cloud.coords.resize(static_cast<std::size_t>(n) * cloud.dim);
  for (std::int64_t i = 0; i < n; ++i) {
    rng::Key k = rng::Key(seed).absorb(rng::Tag::PointCoord).absorb(static_cast<std::uint64_t>(i));
    for (int a = 0; a < cloud.dim; ++a) {
      const double u = k.uniform(static_cast<std::uint64_t>(a));
      cloud.coords[static_cast<std::size_t>(i) * cloud.dim + a] =
          window.lo[a] + u * (window.hi[a] - window.lo[a]);
    }
  }
  return cloud;
}

// All integer points inside region, lexicographic order.
inline PointCloud lattice_points(int dim, const Box& region) {
  if (dim < 1) throw ParameterError("lattice_points: dim must be >= 1");
  if (region.dim() != dim) throw ParameterError("lattice_points: region dimension mismatch");
  PointCloud cloud;
  cloud.dim = dim;
  cloud.window = region;
  std::vector<std::int64_t> lo(dim), hi(dim);
  for (int k = 0; k < dim; ++k) {
    lo[k] = static_cast<std::int64_t>(std::ceil(region.lo[k]));
    hi[k] = static_cast<std::int64_t>(std::floor(region.hi[k]));
    if (lo[k] > hi[k]) return cloud;  // empty
  }
  std::vector<std::int64_t> idx = lo;
  while (true) {
    for (int k = 0; k < dim; ++k) cloud.coords.push_back(static_cast<double>(idx[k]));
    int k = dim - 1;
    while (k >= 0 && ++idx[k] > hi[k]) {
      idx[k] = lo[k];
      --k;
    }
    if (k < 0) break;
  }
  return cloud;
}

// i.i.d. marks with density proportional to |E|^alpha on [-A, A], sampled by
// exact inverse CDF: E = sign * A * u^(1/(alpha+1)).
inline Vec sample_energy_marks(const PointCloud& cloud, double alpha, double mark_bound,
                               std::uint64_t seed) {
  if (!(alpha >= 0.0)) throw ParameterError("sample_energy_marks: alpha must be >= 0");
  if (!(mark_bound > 0.0)) throw ParameterError("sample_energy_marks: support half-width must be > 0");
  Vec marks(cloud.n_points());
  for (int i = 0; i < cloud.n_points(); ++i) {
    rng::Key k = rng::Key(seed).absorb(rng::Tag::EnergyMark).absorb(static_cast<std::uint64_t>(i));
    const double sign = k.uniform(0) < 0.5 ? -1.0 : 1.0;
    const double u = k.uniform(1);
    marks[i] = sign * mark_bound * std::pow(u, 1.0 / (alpha + 1.0));
  }
  return marks;
}

// --------------------------------------------------------------------------
// Conductance models

struct RcmWeights {
  enum class Kind { Constant, Uniform, PerAxis, Alternating };
  Kind kind = Kind::Constant;
  double value = 1.0;            // Constant
  double lo = 1.0, hi = 2.0;     // Uniform, hashed per edge
  Vec axis;                      // PerAxis
  double v0 = 1.0, v1 = 2.0;     // Alternating, by parity of the lower endpoint
};

struct LatticeRcm {
  RcmWeights weights;
};

struct BondPercolation {
  double p = 0.5;
};

struct MillerAbrahams {
  double gamma = 1.0;       // localization length
  double beta = 1.0;        // inverse temperature
  double alpha = 0.0;       // mark density exponent
  double mark_bound = 1.0;  // support half-width A
  double cutoff = 1e-12;    // conductances below this are dropped
};

struct ExplicitEdges {
  std::vector<std::pair<int, int>> pairs;  // point indices, unordered
  Vec weights;
};

using ConductanceModel = std::variant<LatticeRcm, BondPercolation, MillerAbrahams, ExplicitEdges>;

inline void validate_model(const ConductanceModel& model) {
  if (const auto* rcm = std::get_if<LatticeRcm>(&model)) {
    const auto& w = rcm->weights;
    switch (w.kind) {
      case RcmWeights::Kind::Constant:
        if (!(w.value >= 0.0)) throw ParameterError("LatticeRcm: constant weight must be >= 0");
        break;
      case RcmWeights::Kind::Uniform:
        if (!(w.lo >= 0.0) || !(w.hi >= w.lo))
          throw ParameterError("LatticeRcm: uniform weight bounds need 0 <= lo <= hi");
        break;
      case RcmWeights::Kind::PerAxis:
        if (w.axis.empty()) throw ParameterError("LatticeRcm: per-axis weights missing");
        for (double v : w.axis)
          if (!(v >= 0.0)) throw ParameterError("LatticeRcm: per-axis weight must be >= 0");
        break;
      case RcmWeights::Kind::Alternating:
        if (!(w.v0 >= 0.0) || !(w.v1 >= 0.0))
          throw ParameterError("LatticeRcm: alternating weights must be >= 0");
        break;
    }
  } else if (const auto* bp = std::get_if<BondPercolation>(&model)) {
    if (!(bp->p >= 0.0 && bp->p <= 1.0)) throw ParameterError("BondPercolation: p must lie in [0,1]");
  } else if (const auto* ma = std::get_if<MillerAbrahams>(&model)) {
    if (!(ma->gamma > 0.0)) throw ParameterError("MillerAbrahams: gamma must be > 0");
    if (!(ma->beta >= 0.0)) throw ParameterError("MillerAbrahams: beta must be >= 0");
    if (!(ma->alpha >= 0.0)) throw ParameterError("MillerAbrahams: alpha must be >= 0");
    if (!(ma->mark_bound > 0.0)) throw ParameterError("MillerAbrahams: mark support must be > 0");
    if (!(ma->cutoff >= 0.0)) throw ParameterError("MillerAbrahams: cutoff must be >= 0");
  } else if (const auto* ex = std::get_if<ExplicitEdges>(&model)) {
    if (ex->pairs.size() != ex->weights.size())
      throw ParameterError("ExplicitEdges: pair/weight count mismatch");
    for (double w : ex->weights)
      if (!(w >= 0.0)) throw ParameterError("ExplicitEdges: weights must be >= 0");
  }
}

// --------------------------------------------------------------------------
// Hashed edge fields, keyed by absolute unordered edge coordinates so the
// conductance field is a function of the seed and positions alone.

inline bool lex_less(std::span<const double> x, std::span<const double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < y[k]) return true;
    if (x[k] > y[k]) return false;
  }
  return false;
}

inline rng::Key field_edge_key(std::uint64_t seed, std::span<const double> x,
                               std::span<const double> y) {
  const bool xy = lex_less(x, y);
  auto a = xy ? x : y;
  auto b = xy ? y : x;
  rng::Key k = rng::Key(seed).absorb(rng::Tag::EdgeField);
  for (double v : a) k.absorb(v);
  for (double v : b) k.absorb(v);
  return k;
}

// weight of the nearest-neighbor bond {x, y} along the given axis
inline double field_rcm_weight(const RcmWeights& w, std::uint64_t seed, std::span<const double> x,
                               std::span<const double> y, int axis) {
  switch (w.kind) {
    case RcmWeights::Kind::Constant:
      return w.value;
    case RcmWeights::Kind::Uniform:
      return w.lo + field_edge_key(seed, x, y).uniform(0) * (w.hi - w.lo);
    case RcmWeights::Kind::PerAxis:
      return w.axis[static_cast<std::size_t>(axis)];
    case RcmWeights::Kind::Alternating: {
      std::int64_t s = 0;
      auto lo = lex_less(x, y) ? x : y;
      for (double v : lo) s += static_cast<std::int64_t>(std::floor(v));
      return (s % 2 + 2) % 2 == 0 ? w.v0 : w.v1;
    }
  }
  return 0.0;
}

inline double field_percolation_open(double p, std::uint64_t seed, std::span<const double> x,
                                     std::span<const double> y) {
  return field_edge_key(seed, x, y).uniform(0) < p ? 1.0 : 0.0;
}

// --------------------------------------------------------------------------
// Environment: realized point set + conductance evaluator

class Environment {
 public:
  Environment(PointCloud cloud, ConductanceModel model, std::uint64_t seed)
      : Environment(std::move(cloud), std::move(model), seed, Vec{}) {}

  // marks are only admissible (and then mandatory) for Miller-Abrahams;
  // when omitted they are sampled from the model's mark law
  Environment(PointCloud cloud, ConductanceModel model, std::uint64_t seed, Vec marks)
      : cloud_(std::move(cloud)), model_(std::move(model)), marks_(std::move(marks)), seed_(seed) {
    validate_model(model_);
    if (const auto* ma = std::get_if<MillerAbrahams>(&model_)) {
      if (marks_.empty()) {
        marks_ = sample_energy_marks(cloud_, ma->alpha, ma->mark_bound, seed_);
      } else {
        if (static_cast<int>(marks_.size()) != cloud_.n_points())
          throw ParameterError("Environment: one mark per point required");
        for (double e : marks_)
          if (!(std::abs(e) <= ma->mark_bound))
            throw ParameterError("Environment: mark outside [-A, A]");
      }
    } else if (!marks_.empty()) {
      throw ParameterError("Environment: marks are only valid for the Miller-Abrahams model");
    }
    if (const auto* ex = std::get_if<ExplicitEdges>(&model_)) {
      for (const auto& [i, j] : ex->pairs) {
        if (i < 0 || j < 0 || i >= cloud_.n_points() || j >= cloud_.n_points())
          throw ParameterError("ExplicitEdges: point index out of range");
        if (i == j) throw ParameterError("ExplicitEdges: self edge");
      }
      for (std::size_t e = 0; e < ex->pairs.size(); ++e)
        explicit_map_[pair_key_(ex->pairs[e].first, ex->pairs[e].second)] = ex->weights[e];
    }
    build_index_();
  }

  const PointCloud& cloud() const { return cloud_; }
  const ConductanceModel& model() const { return model_; }
  const Vec& marks() const { return marks_; }
  std::uint64_t seed() const { return seed_; }
  int dim() const { return cloud_.dim; }

  // Finite interaction radius; infinity for an uncut Miller-Abrahams field.
  double cutoff_radius() const {
    if (std::holds_alternative<LatticeRcm>(model_) || std::holds_alternative<BondPercolation>(model_))
      return 1.0;
    if (const auto* ma = std::get_if<MillerAbrahams>(&model_)) {
      if (ma->cutoff <= 0.0) return std::numeric_limits<double>::infinity();
      return 0.5 * ma->gamma * std::log(1.0 / ma->cutoff);
    }
    const auto& ex = std::get<ExplicitEdges>(model_);
    double r = 0.0;
    for (const auto& [i, j] : ex.pairs)
      r = std::max(r, distance_(cloud_.point(i), cloud_.point(j)));
    return r;
  }

  int find_point(std::span<const double> x) const {
    auto it = index_.find(coord_hash_(x));
    if (it == index_.end()) return -1;
    for (int i : it->second)
      if (std::equal(x.begin(), x.end(), cloud_.point(i).begin())) return i;
    return -1;
  }

  // Conductance keyed by point index; c of a point with itself is 0.
  double conductance_by_index(int i, int j) const {
    if (i == j) return 0.0;
    return evaluate_(i, j, cloud_.point(i), cloud_.point(j));
  }

  // Contract surface: coordinates must name cloud points, and x != y.
  double edge_conductance(std::span<const double> x, std::span<const double> y) const {
    if (std::equal(x.begin(), x.end(), y.begin(), y.end()))
      throw ContractError("edge_conductance: x and y coincide");
    const int i = find_point(x);
    if (i < 0) throw LookupError("edge_conductance: x is not a cloud point");
    const int j = find_point(y);
    if (j < 0) throw LookupError("edge_conductance: y is not a cloud point");
    return evaluate_(i, j, x, y);
  }

 private:
  static double distance_(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return std::sqrt(s);
  }

  // nearest-neighbor lattice bond test on integer-valued coordinates
  static bool is_nn_bond_(std::span<const double> x, std::span<const double> y, int* axis) {
    double sum = 0.0;
    *axis = -1;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = std::abs(x[k] - y[k]);
      if (d != 0.0 && d != 1.0) return false;
      if (d == 1.0) *axis = static_cast<int>(k);
      sum += d;
    }
    return sum == 1.0;
  }

  double evaluate_(int i, int j, std::span<const double> x, std::span<const double> y) const {
    if (const auto* rcm = std::get_if<LatticeRcm>(&model_)) {
      int axis = -1;
      if (!is_nn_bond_(x, y, &axis)) return 0.0;
      return field_rcm_weight(rcm->weights, seed_, x, y, axis);
    }
    if (const auto* bp = std::get_if<BondPercolation>(&model_)) {
      int axis = -1;
      if (!is_nn_bond_(x, y, &axis)) return 0.0;
      return field_percolation_open(bp->p, seed_, x, y);
    }
    if (const auto* ma = std::get_if<MillerAbrahams>(&model_)) {
      const double r = distance_(x, y);
      const double ex = std::abs(marks_[i]), ey = std::abs(marks_[j]);
      const double energy = ex + ey + std::abs(marks_[i] - marks_[j]);
      const double c = std::exp(-2.0 / ma->gamma * r - 0.5 * ma->beta * energy);
      return c < ma->cutoff ? 0.0 : c;
    }
    auto it = explicit_map_.find(pair_key_(i, j));
    return it == explicit_map_.end() ? 0.0 : it->second;
  }

  static std::uint64_t pair_key_(int i, int j) {
    const std::uint64_t a = static_cast<std::uint32_t>(std::min(i, j));
    const std::uint64_t b = static_cast<std::uint32_t>(std::max(i, j));
    return (a << 32) | b;
  }

  std::uint64_t coord_hash_(std::span<const double> x) const {
    rng::Key k(0x7074'6964ULL);
    for (double v : x) k.absorb(v);
    return k.bits(0);
  }

  void build_index_() {
    index_.reserve(cloud_.n_points());
    for (int i = 0; i < cloud_.n_points(); ++i) index_[coord_hash_(cloud_.point(i))].push_back(i);
    for (const auto& [h, bucket] : index_) {
      for (std::size_t a = 0; a + 1 < bucket.size(); ++a)
        for (std::size_t b = a + 1; b < bucket.size(); ++b) {
          auto pa = cloud_.point(bucket[a]);
          auto pb = cloud_.point(bucket[b]);
          if (std::equal(pa.begin(), pa.end(), pb.begin()))
            throw ParameterError("Environment: duplicate points in cloud");
        }
    }
  }

  PointCloud cloud_;
  ConductanceModel model_;
  Vec marks_;
  std::uint64_t seed_;
  std::unordered_map<std::uint64_t, std::vector<int>> index_;
  std::unordered_map<std::uint64_t, double> explicit_map_;
};

// --------------------------------------------------------------------------
// Moment function lambda_k

struct LambdaEstimate {
  int k = 0;
  double value = 0.0;
  int sample_count = 0;
  double std_error = 0.0;
  double dropped_mass_bound = 0.0;  // upper bound on the cutoff-truncated mass
};

namespace detail {

// Pathwise bound on the per-point mass removed by the Miller-Abrahams cutoff,
// weighted by |x-y|^k: exact raw conductances for candidates within the
// cutoff radius, cutoff * (window diameter)^k for every unenumerated pair.
inline double ma_dropped_bound(const Environment& env, const CellList& cells, int probe, int k,
                               double radius) {
  const auto* ma = std::get_if<MillerAbrahams>(&env.model());
  if (ma == nullptr || ma->cutoff <= 0.0) return 0.0;
  const auto x = env.cloud().point(probe);
  double near = 0.0;
  int seen = 0;
  cells.for_candidates_near(x, radius, [&](int j) {
    if (j == probe) return;
    const auto y = env.cloud().point(j);
    double r2 = 0.0;
    for (int a = 0; a < env.dim(); ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
    const double r = std::sqrt(r2);
    if (r > radius) return;
    ++seen;
    const double energy = std::abs(env.marks()[probe]) + std::abs(env.marks()[j]) +
                          std::abs(env.marks()[probe] - env.marks()[j]);
    const double raw = std::exp(-2.0 / ma->gamma * r - 0.5 * ma->beta * energy);
    if (raw < ma->cutoff) near += raw * std::pow(r, k);
  });
  double diam2 = 0.0;
  for (int a = 0; a < env.dim(); ++a) {
    const double s = env.cloud().window.hi[a] - env.cloud().window.lo[a];
    diam2 += s * s;
  }
  const double far_count = std::max(0, env.cloud().n_points() - 1 - seen);
  return near + far_count * ma->cutoff * std::pow(std::sqrt(diam2), k);
}

}  // namespace detail

// Point-averaged moment sum over probe points inside probe_window.
inline LambdaEstimate estimate_lambda_k(const Environment& env, int k, const Box& probe_window) {
  if (k != 0 && k != 2) throw ParameterError("estimate_lambda_k: k must be 0 or 2");
  if (!probe_window.nondegenerate()) throw ParameterError("estimate_lambda_k: degenerate probe window");
  const double radius = env.cutoff_radius();
  if (std::isfinite(radius)) {
    for (int a = 0; a < env.dim(); ++a)
      if (probe_window.lo[a] - env.cloud().window.lo[a] < radius - 1e-9 ||
          env.cloud().window.hi[a] - probe_window.hi[a] < radius - 1e-9)
        throw ParameterError("estimate_lambda_k: probe window margin below interaction range");
  }

  const auto& cloud = env.cloud();
  std::vector<int> probes;
  for (int i = 0; i < cloud.n_points(); ++i)
    if (probe_window.contains(cloud.point(i))) probes.push_back(i);
  if (probes.empty()) throw EstimationError("estimate_lambda_k: no probe points in window");

  double diam2 = 0.0;
  for (int a = 0; a < cloud.dim; ++a) {
    const double s = cloud.window.hi[a] - cloud.window.lo[a];
    diam2 += s * s;
  }
  const double search = std::isfinite(radius) ? radius : std::sqrt(diam2) + 1.0;
  CellList cells(cloud.coords, cloud.dim, std::max(search, 1e-9));

  LambdaEstimate est;
  est.k = k;
  est.sample_count = static_cast<int>(probes.size());
  double sum = 0.0, sumsq = 0.0, tail = 0.0;
  for (int i : probes) {
    const auto x = cloud.point(i);
    double s = 0.0;
    cells.for_candidates_near(x, search, [&](int j) {
      if (j == i) return;
      const double c = env.conductance_by_index(i, j);
      if (c <= 0.0) return;
      if (k == 0) {
        s += c;
      } else {
        const auto y = cloud.point(j);
        double r2 = 0.0;
        for (int a = 0; a < cloud.dim; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
        s += c * r2;
      }
    });
    sum += s;
    sumsq += s * s;
    tail = std::max(tail, detail::ma_dropped_bound(env, cells, i, k, search));
  }
  const double n = static_cast<double>(probes.size());
  est.value = sum / n;
  const double var = std::max(0.0, sumsq / n - est.value * est.value);
  est.std_error = probes.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  est.dropped_mass_bound = tail;
  return est;
}

}  // namespace ohm
