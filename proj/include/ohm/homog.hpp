#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ohm/env.hpp"
#include "ohm/maxflow.hpp"
#include "ohm/network.hpp"
#include "ohm/solver.hpp"
#include "ohm/sparse.hpp"
#include "ohm/union_find.hpp"

namespace ohm {

// --------------------------------------------------------------------------
// Intensity

// Mean number of process points per unit volume, half-open counting window.
// For bond percolation the relevant point process is the spanning cluster, so
// the estimate is the largest-component fraction.
inline double estimate_intensity(const Environment& env, const Box& window) {
  if (!window.nondegenerate()) throw ParameterError("estimate_intensity: degenerate window");
  if (!window.inside(env.cloud().window))
    throw ParameterError("estimate_intensity: window outside the environment window");
  const auto& cloud = env.cloud();
  std::vector<int> inside;
  for (int i = 0; i < cloud.n_points(); ++i)
    if (window.contains_half_open(cloud.point(i))) inside.push_back(i);
  if (!std::holds_alternative<BondPercolation>(env.model()))
    return static_cast<double>(inside.size()) / window.volume();

  // percolation: largest open-bond component within the window
  if (inside.empty()) return 0.0;
  UnionFind uf(static_cast<int>(inside.size()));
  CellList cells(cloud.coords, cloud.dim, 1.0);
  std::vector<int> local(cloud.n_points(), -1);
  for (std::size_t a = 0; a < inside.size(); ++a) local[inside[a]] = static_cast<int>(a);
  for (std::size_t a = 0; a < inside.size(); ++a) {
    const auto x = cloud.point(inside[a]);
    cells.for_candidates_near(x, 1.0, [&](int j) {
      if (local[j] < 0 || local[j] <= static_cast<int>(a)) return;
      if (env.conductance_by_index(inside[a], j) > 0.0) uf.unite(static_cast<int>(a), local[j]);
    });
  }
  int best = 0;
  for (std::size_t a = 0; a < inside.size(); ++a)
    best = std::max(best, uf.component_size(static_cast<int>(a)));
  return static_cast<double>(best) / window.volume();
}

// --------------------------------------------------------------------------
// Periodized samples

// A conductance sample on the d-torus of side N: nodes, undirected edges with
// geometric displacements (wrap included), evaluated from the same hashed
// fields as the infinite environment.
struct TorusGraph {
  int dim = 0;
  int n_side = 0;
  int n_nodes = 0;              // participating nodes
  std::vector<int> edge_i, edge_j;
  Vec edge_c;
  Vec edge_z;                   // flat displacements, edges * dim
  double intensity = 0.0;       // participating nodes per unit volume
  bool component_restricted = false;

  std::size_t n_edges() const { return edge_i.size(); }
  std::span<const double> displacement(std::size_t e) const {
    return std::span<const double>(edge_z).subspan(e * dim, dim);
  }
};

namespace detail {

inline void restrict_components(TorusGraph& g, bool keep_largest_only) {
  if (g.n_nodes == 0) return;
  UnionFind uf(g.n_nodes);
  for (std::size_t e = 0; e < g.n_edges(); ++e) uf.unite(g.edge_i[e], g.edge_j[e]);
  int root = uf.find(0);
  bool connected = true;
  for (int v = 0; v < g.n_nodes; ++v)
    if (uf.find(v) != root) {
      connected = false;
      break;
    }
  if (connected) return;
  g.component_restricted = true;
  if (!keep_largest_only) return;

  int best_root = 0, best_size = 0;
  for (int v = 0; v < g.n_nodes; ++v)
    if (uf.find(v) == v && uf.component_size(v) > best_size) {
      best_size = uf.component_size(v);
      best_root = v;
    }
  std::vector<int> remap(g.n_nodes, -1);
  int kept = 0;
  for (int v = 0; v < g.n_nodes; ++v)
    if (uf.find(v) == best_root) remap[v] = kept++;
  TorusGraph out;
  out.dim = g.dim;
  out.n_side = g.n_side;
  out.n_nodes = kept;
  out.component_restricted = true;
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const int a = remap[g.edge_i[e]], b = remap[g.edge_j[e]];
    if (a < 0 || b < 0) continue;
    out.edge_i.push_back(a);
    out.edge_j.push_back(b);
    out.edge_c.push_back(g.edge_c[e]);
    auto z = g.displacement(e);
    out.edge_z.insert(out.edge_z.end(), z.begin(), z.end());
  }
  out.intensity = static_cast<double>(kept) / std::pow(g.n_side, g.dim);
  g = std::move(out);
}

}  // namespace detail

// Periodizes a conductance model on the torus [0,N)^d. Lattice fields keep
// their absolute-coordinate hashing (wrap edges read the bond leaving the
// box); point-process models sample a fresh cloud in the box and connect
// minimum-image pairs, which requires the interaction radius to fit in N/2.
inline TorusGraph build_torus_graph(const ConductanceModel& model, int dim, int n_side,
                                    std::uint64_t seed, double point_intensity = 1.0) {
  validate_model(model);
  if (dim < 1) throw ParameterError("build_torus_graph: dim must be >= 1");
  if (n_side < 2) throw ParameterError("build_torus_graph: torus side must be >= 2");
  TorusGraph g;
  g.dim = dim;
  g.n_side = n_side;

  if (std::holds_alternative<LatticeRcm>(model) || std::holds_alternative<BondPercolation>(model)) {
    std::int64_t total = 1;
    for (int k = 0; k < dim; ++k) total *= n_side;
    g.n_nodes = static_cast<int>(total);
    g.intensity = 1.0;
    Vec x(dim), y(dim);
    std::vector<int> idx(dim, 0);
    for (int v = 0; v < g.n_nodes; ++v) {
      for (int k = 0; k < dim; ++k) x[k] = static_cast<double>(idx[k]);
      for (int axis = 0; axis < dim; ++axis) {
        y = x;
        y[axis] += 1.0;  // absolute neighbor, may equal N on the wrap bond
        double c = 0.0;
        if (const auto* rcm = std::get_if<LatticeRcm>(&model))
          c = field_rcm_weight(rcm->weights, seed, x, y, axis);
        else
          c = field_percolation_open(std::get<BondPercolation>(model).p, seed, x, y);
        if (c <= 0.0) continue;
        int w = 0;  // wrapped neighbor index
        {
          std::vector<int> nidx = idx;
          nidx[axis] = (nidx[axis] + 1) % n_side;
          for (int k = 0; k < dim; ++k) w = w * n_side + nidx[k];
        }
        g.edge_i.push_back(v);
        g.edge_j.push_back(w);
        g.edge_c.push_back(c);
        for (int k = 0; k < dim; ++k) g.edge_z.push_back(axis == k ? 1.0 : 0.0);
      }
      int k = dim - 1;
      while (k >= 0 && ++idx[k] == n_side) idx[k--] = 0;
    }
    detail::restrict_components(g, std::holds_alternative<BondPercolation>(model));
    return g;
  }

  if (const auto* ma = std::get_if<MillerAbrahams>(&model)) {
    Box box{Vec(dim, 0.0), Vec(dim, static_cast<double>(n_side))};
    PointCloud cloud = sample_poisson_points(point_intensity, box, seed);
    Vec marks = sample_energy_marks(cloud, ma->alpha, ma->mark_bound, seed);
    const double radius = ma->cutoff > 0.0 ? 0.5 * ma->gamma * std::log(1.0 / ma->cutoff)
                                           : std::numeric_limits<double>::infinity();
    if (!(radius < n_side / 2.0))
      throw ParameterError("build_torus_graph: interaction radius must be below N/2");
    g.n_nodes = cloud.n_points();
    g.intensity = cloud.n_points() / box.volume();

    // ghost replication across the 3^d neighboring period boxes
    Vec ghost_coords;
    std::vector<int> ghost_base;
    std::vector<int> shift(dim, -1);
    while (true) {
      for (int i = 0; i < cloud.n_points(); ++i) {
        const auto p = cloud.point(i);
        for (int k = 0; k < dim; ++k) ghost_coords.push_back(p[k] + shift[k] * n_side);
        ghost_base.push_back(i);
      }
      int k = dim - 1;
      while (k >= 0 && ++shift[k] == 2) shift[k--] = -1;
      if (k < 0) break;
    }
    CellList cells(ghost_coords, dim, std::max(radius, 1e-9));
    for (int i = 0; i < cloud.n_points(); ++i) {
      const auto x = cloud.point(i);
      cells.for_candidates_near(x, radius, [&](int gidx) {
        const int j = ghost_base[gidx];
        if (j <= i) return;
        std::span<const double> y(ghost_coords.data() + static_cast<std::size_t>(gidx) * dim, dim);
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k) r2 += (y[k] - x[k]) * (y[k] - x[k]);
        const double r = std::sqrt(r2);
        if (r > radius) return;
        const double energy =
            std::abs(marks[i]) + std::abs(marks[j]) + std::abs(marks[i] - marks[j]);
        const double c = std::exp(-2.0 / ma->gamma * r - 0.5 * ma->beta * energy);
        if (c < ma->cutoff) return;
        g.edge_i.push_back(i);
        g.edge_j.push_back(j);
        g.edge_c.push_back(c);
        for (int k = 0; k < dim; ++k) g.edge_z.push_back(y[k] - x[k]);
      });
    }
    detail::restrict_components(g, false);
    return g;
  }

  throw ParameterError("build_torus_graph: model cannot be periodized");
}

// --------------------------------------------------------------------------
// Corrector problems

struct CorrectorSolution {
  int torus_size = 0;
  Vec direction;
  Vec corrector;              // per participating node, mean zero
  double energy = 0.0;        // point-averaged optimum, estimates a.Da
  double energy_zero = 0.0;   // functional at f = 0
  Vec flux_form;              // (1/n) sum c z (a.z - grad f), estimates D a
  double residual = 0.0;
  int iterations = 0;
  bool component_restricted = false;
  double intensity = 0.0;
  int n_nodes = 0;
};

// Point-averaged discrete functional (1/2n) sum over ordered pairs, i.e.
// (1/n) sum over undirected edges of c (a.z - (f_j - f_i))^2.
inline double corrector_functional(const TorusGraph& g, const Vec& a, const Vec& f) {
  KahanSum s;
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const auto z = g.displacement(e);
    double az = 0.0;
    for (int k = 0; k < g.dim; ++k) az += a[k] * z[k];
    const double d = az - (f[g.edge_j[e]] - f[g.edge_i[e]]);
    s.add(g.edge_c[e] * d * d);
  }
  return g.n_nodes > 0 ? s.value() / g.n_nodes : 0.0;
}

// Minimizes the corrector functional on the torus: grounded weighted
// Laplacian with the compatible drift right side, one ground per component.
inline CorrectorSolution solve_corrector(const TorusGraph& g, const Vec& a, double tol = 1e-12,
                                         int max_iter = 400000) {
  if (static_cast<int>(a.size()) != g.dim) throw ParameterError("solve_corrector: direction size");
  if (norm2(a) == 0.0) throw ParameterError("solve_corrector: direction must be nonzero");

  CorrectorSolution sol;
  sol.torus_size = g.n_side;
  sol.direction = a;
  sol.component_restricted = g.component_restricted;
  sol.intensity = g.intensity;
  sol.n_nodes = g.n_nodes;
  sol.corrector.assign(g.n_nodes, 0.0);
  if (g.n_nodes == 0) return sol;

  UnionFind uf(g.n_nodes);
  for (std::size_t e = 0; e < g.n_edges(); ++e) uf.unite(g.edge_i[e], g.edge_j[e]);
  std::vector<char> grounded(g.n_nodes, 0);
  std::vector<char> seen_root(g.n_nodes, 0);
  for (int v = 0; v < g.n_nodes; ++v) {
    const int r = uf.find(v);
    if (!seen_root[r]) {
      seen_root[r] = 1;
      grounded[v] = 1;  // smallest index per component
    }
  }
  std::vector<int> unknown_of(g.n_nodes, -1);
  std::vector<int> node_of;
  for (int v = 0; v < g.n_nodes; ++v)
    if (!grounded[v]) {
      unknown_of[v] = static_cast<int>(node_of.size());
      node_of.push_back(v);
    }
  const int nf = static_cast<int>(node_of.size());

  Vec diag(nf, 0.0), rhs(nf, 0.0);
  std::vector<std::array<int, 2>> pairs;
  Vec offdiag;
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const int i = g.edge_i[e], j = g.edge_j[e];
    const double c = g.edge_c[e];
    const auto z = g.displacement(e);
    double az = 0.0;
    for (int k = 0; k < g.dim; ++k) az += a[k] * z[k];
    const int ui = unknown_of[i], uj = unknown_of[j];
    if (ui >= 0) {
      diag[ui] += c;
      rhs[ui] -= c * az;  // i is the tail of the displacement
    }
    if (uj >= 0) {
      diag[uj] += c;
      rhs[uj] += c * az;
    }
    if (ui >= 0 && uj >= 0) {
      pairs.push_back({ui, uj});
      offdiag.push_back(-c);
    }
  }

  sol.energy_zero = corrector_functional(g, a, sol.corrector);

  if (nf > 0) {
    SparseSym m = SparseSym::from_graph(nf, pairs, offdiag, diag);
    Vec x(nf, 0.0);
    if (m.is_tridiagonal()) {
      thomas_solve(m, rhs, x);
      sol.iterations = 1;
      const Vec r = m.residual(x, rhs);
      double rn = 0.0, bn = 0.0;
      for (int u = 0; u < nf; ++u) {
        const double d = m.diag()[u] > 0.0 ? 1.0 / m.diag()[u] : 0.0;
        rn += r[u] * d * r[u];
        bn += rhs[u] * d * rhs[u];
      }
      sol.residual = bn > 0.0 ? std::sqrt(rn / bn) : 0.0;
    } else {
      double target = tol;
      CgResult cg = pcg_jacobi(m, rhs, x, target, max_iter);
      if (!cg.converged)
        throw SolverError("solve_corrector: conjugate gradient did not converge", cg.rel_residual);
      sol.iterations = cg.iterations;
      sol.residual = cg.rel_residual;
      // tighten until the optimality identity (energy form vs flux form)
      // holds well inside its stated tolerance
      for (int pass = 0; pass < 2; ++pass) {
        Vec f(g.n_nodes, 0.0);
        for (int u = 0; u < nf; ++u) f[node_of[u]] = x[u];
        const double energy = corrector_functional(g, a, f);
        KahanSum proj;
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
          const auto z = g.displacement(e);
          double az = 0.0;
          for (int k = 0; k < g.dim; ++k) az += a[k] * z[k];
          const double gap = az - (f[g.edge_j[e]] - f[g.edge_i[e]]);
          proj.add(g.edge_c[e] * az * gap);
        }
        const double flux_energy = proj.value() / g.n_nodes;
        if (std::abs(energy - flux_energy) <= 1e-9 * std::max(std::abs(energy), 1e-30)) break;
        target /= 32.0;
        if (target < 1e-15) break;
        cg = pcg_jacobi(m, rhs, x, target, max_iter);
        sol.iterations += cg.iterations;
        sol.residual = cg.rel_residual;
        if (!cg.converged) break;
      }
    }
    for (int u = 0; u < nf; ++u) sol.corrector[node_of[u]] = x[u];
  }

  // mean-zero gauge
  double mean = 0.0;
  for (double v : sol.corrector) mean += v;
  mean /= g.n_nodes;
  for (double& v : sol.corrector) v -= mean;

  sol.energy = corrector_functional(g, a, sol.corrector);
  sol.flux_form.assign(g.dim, 0.0);
  std::vector<KahanSum> acc(g.dim);
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const auto z = g.displacement(e);
    double az = 0.0;
    for (int k = 0; k < g.dim; ++k) az += a[k] * z[k];
    const double gap = az - (sol.corrector[g.edge_j[e]] - sol.corrector[g.edge_i[e]]);
    for (int k = 0; k < g.dim; ++k) acc[k].add(g.edge_c[e] * z[k] * gap);
  }
  for (int k = 0; k < g.dim; ++k) sol.flux_form[k] = acc[k].value() / g.n_nodes;
  return sol;
}

// --------------------------------------------------------------------------
// Effective matrix

struct EffectiveMatrix {
  int dim = 0;
  Mat matrix;
  Vec eigenvalues;       // nonincreasing
  Mat eigenvectors;      // orthonormal columns
  double intensity = 0.0;
  int kernel_dim = 0;
  double flux_discrepancy = 0.0;  // max gap between energy and flux forms
  std::vector<Vec> seed_energies;  // per seed: q(e_1..e_d, e_i+e_j...)
  bool component_restricted = false;
};

inline void finalize_eigen(EffectiveMatrix& em) {
  EigenSym eig = jacobi_eigensym(em.matrix);
  em.eigenvalues = eig.values;
  em.eigenvectors = eig.vectors;
  const double lmax = em.eigenvalues.empty() ? 0.0 : std::max(em.eigenvalues.front(), 0.0);
  em.kernel_dim = 0;
  for (double l : em.eigenvalues)
    if (l <= 1e-8 * std::max(lmax, 1e-300)) ++em.kernel_dim;
}

// Polarization assembly: correctors along e_1..e_d give the diagonal,
// correctors along e_i + e_j recover the off-diagonal entries. Averages over
// seeds and cross-checks against the flux representation of D a.
inline EffectiveMatrix assemble_effective_matrix(const ConductanceModel& model, int dim, int n_side,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 double point_intensity = 1.0, double tol = 1e-12,
                                                 int max_iter = 400000) {
  if (n_side < 2) throw ParameterError("assemble_effective_matrix: torus side must be >= 2");
  if (seeds.empty()) throw ParameterError("assemble_effective_matrix: need at least one seed");
  EffectiveMatrix em;
  em.dim = dim;
  em.matrix = Mat(dim, dim);
  Mat sum(dim, dim);
  double intensity_sum = 0.0;

  for (std::uint64_t seed : seeds) {
    TorusGraph g = build_torus_graph(model, dim, n_side, seed, point_intensity);
    em.component_restricted |= g.component_restricted;
    Vec q_axis(dim, 0.0);
    Mat d_seed(dim, dim);
    Vec energies;
    for (int k = 0; k < dim; ++k) {
      Vec a(dim, 0.0);
      a[k] = 1.0;
      CorrectorSolution c = solve_corrector(g, a, tol, max_iter);
      q_axis[k] = c.energy;
      d_seed(k, k) = c.energy;
      energies.push_back(c.energy);
      double af = 0.0;
      for (int t = 0; t < dim; ++t) af += a[t] * c.flux_form[t];
      em.flux_discrepancy = std::max(
          em.flux_discrepancy, std::abs(c.energy - af) / std::max(std::abs(c.energy), 1e-30));
    }
    for (int i = 0; i < dim; ++i)
      for (int j = i + 1; j < dim; ++j) {
        Vec a(dim, 0.0);
        a[i] = 1.0;
        a[j] = 1.0;
        CorrectorSolution c = solve_corrector(g, a, tol, max_iter);
        energies.push_back(c.energy);
        const double dij = 0.5 * (c.energy - q_axis[i] - q_axis[j]);
        d_seed(i, j) = dij;
        d_seed(j, i) = dij;
        double af = 0.0;
        for (int t = 0; t < dim; ++t) af += a[t] * c.flux_form[t];
        em.flux_discrepancy = std::max(
            em.flux_discrepancy, std::abs(c.energy - af) / std::max(std::abs(c.energy), 1e-30));
      }
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) sum(i, j) += d_seed(i, j);
    intensity_sum += g.intensity;
    em.seed_energies.push_back(std::move(energies));
  }

  const double ns = static_cast<double>(seeds.size());
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) em.matrix(i, j) = 0.5 * (sum(i, j) + sum(j, i)) / ns;
  em.intensity = intensity_sum / ns;
  finalize_eigen(em);
  return em;
}

inline EffectiveMatrix effective_matrix_from(const Mat& d, double intensity = 1.0) {
  EffectiveMatrix em;
  em.dim = d.rows();
  em.matrix = d;
  for (int i = 0; i < em.dim; ++i)
    for (int j = i + 1; j < em.dim; ++j)
      if (std::abs(d(i, j) - d(j, i)) > 1e-10)
        throw ParameterError("effective_matrix_from: matrix is not symmetric");
  em.intensity = intensity;
  finalize_eigen(em);
  return em;
}

// Ordered eigenpairs with the deterministic sign convention.
inline EigenSym principal_directions(const EffectiveMatrix& em) {
  EigenSym e;
  e.values = em.eigenvalues;
  e.vectors = em.eigenvectors;
  return e;
}

// --------------------------------------------------------------------------
// Non-principal-direction geometry

struct DirectionGeometry {
  DirectionFrame frame;   // rotation maps e1 to the probed physical direction
  Vec w;                  // slab normal in rotated coordinates
  Vec a;                  // profile gradient, a = w / (2c w.e1)
  double a_dot_Da = 0.0;  // in rotated coordinates
  double predicted_limit = 0.0;  // m * a.Da
};

// Builds the tilted observation cell for a probe direction in Ker(D)^perp:
// rotate e -> e1, split the rotated space into Ker(D')^perp and Ker(D'),
// pick w orthogonal to D' e_2 .. D' e_{d*} with w.e1 > 0, and normalize the
// cell volume to 1 (c = 1/2 for orthonormal frames).
inline DirectionGeometry direction_geometry(const EffectiveMatrix& em, Vec e) {
  const int d = em.dim;
  if (static_cast<int>(e.size()) != d) throw ParameterError("direction_geometry: direction size");
  const double en = norm2(e);
  if (!(en > 0.0)) throw ParameterError("direction_geometry: zero direction");
  for (double& v : e) v /= en;

  const double lmax = std::max(em.eigenvalues.empty() ? 0.0 : em.eigenvalues.front(), 1e-300);
  const double thr = 1e-8 * lmax;
  // hypothesis: e has no component on kernel eigenvectors
  double kernel_mass = 0.0;
  for (int k = 0; k < d; ++k) {
    if (em.eigenvalues[k] > thr) continue;
    double proj = 0.0;
    for (int i = 0; i < d; ++i) proj += em.eigenvectors(i, k) * e[i];
    kernel_mass += proj * proj;
  }
  if (std::sqrt(kernel_mass) > 1e-8)
    throw HypothesisError("direction_geometry: direction is not in Ker(D)^perp");
  const int d_star = d - em.kernel_dim;
  if (d_star == 0) throw HypothesisError("direction_geometry: D vanishes");

  const Mat rot = complete_rotation(e);  // O e1 = e

  const Mat d_rot = rot.transposed() * em.matrix * rot;

  // orthonormal frame: e1, rest of Ker(D')^perp, then Ker(D')
  std::vector<Vec> frame_cols;
  Vec e1(d, 0.0);
  e1[0] = 1.0;
  frame_cols.push_back(e1);
  auto append_orthonormalized = [&](const Vec& cand) {
    Vec v = cand;
    for (const Vec& c : frame_cols) {
      const double p = dot(c, v);
      for (int i = 0; i < d; ++i) v[i] -= p * c[i];
    }
    const double nv = norm2(v);
    if (nv < 1e-8) return false;
    for (double& x : v) x /= nv;
    frame_cols.push_back(v);
    return true;
  };
  for (int k = 0; k < d && static_cast<int>(frame_cols.size()) < d_star; ++k) {
    if (em.eigenvalues[k] <= thr) continue;
    Vec v(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) s += rot(r, i) * em.eigenvectors(r, k);
      v[i] = s;  // rotated eigenvector
    }
    append_orthonormalized(v);
  }
  if (static_cast<int>(frame_cols.size()) != d_star)
    throw LinalgError("direction_geometry: could not build a Ker(D)^perp frame");
  for (int k = 0; k < d && static_cast<int>(frame_cols.size()) < d; ++k) {
    if (em.eigenvalues[k] > thr) continue;
    Vec v(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) s += rot(r, i) * em.eigenvectors(r, k);
      v[i] = s;
    }
    append_orthonormalized(v);
  }
  // fill any numerically dropped directions from the canonical basis
  for (int k = 0; k < d && static_cast<int>(frame_cols.size()) < d; ++k) {
    Vec v(d, 0.0);
    v[k] = 1.0;
    append_orthonormalized(v);
  }
  if (static_cast<int>(frame_cols.size()) != d)
    throw LinalgError("direction_geometry: degenerate frame");
  Mat axes(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) axes(i, j) = frame_cols[j][i];

  // w in span(e_1..e_{d*}) orthogonal to D' e_2 .. D' e_{d*}
  Vec u(d_star, 0.0);
  u[0] = 1.0;
  std::vector<Vec> constraints;
  for (int k = 1; k < d_star; ++k) {
    Vec dk = d_rot.apply(frame_cols[k]);
    Vec vk(d_star, 0.0);
    for (int t = 0; t < d_star; ++t) vk[t] = dot(frame_cols[t], dk);
    for (const Vec& c : constraints) {
      const double p = dot(c, vk);
      for (int t = 0; t < d_star; ++t) vk[t] -= p * c[t];
    }
    const double nv = norm2(vk);
    if (nv < 1e-12) throw LinalgError("direction_geometry: dependent constraints for w");
    for (double& x : vk) x /= nv;
    constraints.push_back(vk);
  }
  for (const Vec& c : constraints) {
    const double p = dot(c, u);
    for (int t = 0; t < d_star; ++t) u[t] -= p * c[t];
  }
  if (norm2(u) < 1e-10) throw LinalgError("direction_geometry: degenerate frame, w.e1 vanishes");
  if (u[0] < 0.0)
    for (double& x : u) x = -x;
  const double un = norm2(u);
  for (double& x : u) x /= un;
  Vec w(d, 0.0);
  for (int t = 0; t < d_star; ++t)
    for (int i = 0; i < d; ++i) w[i] += u[t] * frame_cols[t][i];

  DirectionGeometry out;
  const double c_half = 0.5;
  out.w = w;
  out.a.assign(d, 0.0);
  for (int i = 0; i < d; ++i) out.a[i] = w[i] / (2.0 * c_half * w[0]);
  const Vec da = d_rot.apply(out.a);
  out.a_dot_Da = dot(out.a, da);
  out.predicted_limit = em.intensity * out.a_dot_Da;

  Vec e1_gap = w;
  e1_gap[0] -= 1.0;
  if (norm2(e1_gap) < 1e-12)
    out.frame = DirectionFrame::box_stripe(d, rot);
  else
    out.frame = DirectionFrame::tilted(rot, w, c_half, axes);
  return out;
}

// --------------------------------------------------------------------------
// Crossing lower bound

struct CrossingBound {
  int n_crossings = 0;
  std::vector<int> path_lengths;  // bonds per crossing
  Vec path_resistances;           // series resistance per crossing
  double lower_bound = 0.0;       // sum_j 1/R_j
  double jensen_bound = 0.0;      // N^2 / sum_j R_j
};

// Maximal vertex-disjoint left-right crossings by unit-capacity max-flow with
// vertex splitting. The reported bound is the exact conductivity of the
// disjoint series chains, which for unit conductances is sum_j 1/s_j.
inline CrossingBound crossings_lower_bound(const ResistorNetwork& net) {
  if (!net.classified) throw ContractError("crossings_lower_bound: classify_and_prune first");
  CrossingBound out;
  const int n = net.n_nodes();

  // Vertex splitting: entry(v) = 2v, exit(v) = 2v+1 with a unit arc between
  // them, so each real node carries at most one crossing. Aggregated reservoir
  // super-nodes stand for whole sides and map to the uncapacitated terminals.
  const int source = 2 * n;
  const int sink = 2 * n + 1;
  UnitFlowGraph flow(2 * n + 2);
  std::vector<int> entry(n, -1), exit_(n, -1);
  for (int v = 0; v < n; ++v) {
    const NodeClass c = net.classes[v];
    if (c == NodeClass::InteriorIsolated) continue;  // cannot lie on a crossing
    if (net.aggregated && c == NodeClass::LeftReservoir) {
      entry[v] = exit_[v] = source;
      continue;
    }
    if (net.aggregated && c == NodeClass::RightReservoir) {
      entry[v] = exit_[v] = sink;
      continue;
    }
    entry[v] = 2 * v;
    exit_[v] = 2 * v + 1;
    flow.add_arc(entry[v], exit_[v]);
    if (c == NodeClass::LeftReservoir) flow.add_arc(source, entry[v]);
    if (c == NodeClass::RightReservoir) flow.add_arc(exit_[v], sink);
  }
  for (std::size_t e = 0; e < net.edges.size(); ++e) {
    const int i = net.edges[e].i, j = net.edges[e].j;
    if (entry[i] < 0 || entry[j] < 0) continue;
    const int pe = static_cast<int>(e);
    if (exit_[i] != sink && entry[j] != source) flow.add_arc(exit_[i], entry[j], pe);
    if (exit_[j] != sink && entry[i] != source) flow.add_arc(exit_[j], entry[i], pe);
  }

  out.n_crossings = flow.max_flow(source, sink);
  const auto paths = flow.decompose(source, sink);
  double inv_sum = 0.0, r_sum = 0.0;
  for (const auto& p : paths) {
    out.path_lengths.push_back(static_cast<int>(p.size()));
    double r = 0.0;
    for (int e : p) r += 1.0 / net.edges[static_cast<std::size_t>(e)].c;
    out.path_resistances.push_back(r);
    if (r > 0.0) inv_sum += 1.0 / r;
    r_sum += r;
  }
  out.lower_bound = inv_sum;
  out.jensen_bound =
      r_sum > 0.0 ? static_cast<double>(out.n_crossings) * out.n_crossings / r_sum : 0.0;
  return out;
}

}  // namespace ohm
