#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ohm/homog.hpp"
#include "ohm/network.hpp"
#include "ohm/parallel.hpp"
#include "ohm/solver.hpp"

namespace ohm {

// Regenerable description of a stochastic environment: enough to sample the
// model on any window or torus. Explicit edge lists carry their fixed cloud.
struct ModelSpec {
  std::string name;
  ConductanceModel model;
  int dim = 2;
  double intensity = 1.0;  // point density for point-process models
  PointCloud cloud;        // explicit models only
};

inline Environment make_environment(const ModelSpec& spec, const Box& window, std::uint64_t seed) {
  if (std::holds_alternative<MillerAbrahams>(spec.model))
    return Environment(sample_poisson_points(spec.intensity, window, seed), spec.model, seed);
  if (std::holds_alternative<ExplicitEdges>(spec.model)) {
    // the listed points are the whole environment; the observation window is
    // whatever region the caller asks about
    PointCloud cloud = spec.cloud;
    for (int k = 0; k < cloud.dim; ++k) {
      cloud.window.lo[k] = std::min(cloud.window.lo[k], window.lo[k]);
      cloud.window.hi[k] = std::max(cloud.window.hi[k], window.hi[k]);
    }
    return Environment(std::move(cloud), spec.model, seed);
  }
  return Environment(lattice_points(spec.dim, window), spec.model, seed);
}

struct SolverOptions {
  double tol = 1e-12;
  int max_iter = 200000;
  int n_gamma = 11;
  SolveMethod method = SolveMethod::Auto;
};

struct SamplingOptions {
  std::vector<std::uint64_t> seeds;
  int torus_n = 32;
};

struct SweepConfig {
  ModelSpec model;
  Vec direction;  // physical probe direction; unit vector
  std::vector<double> ells;
  double margin = -1.0;  // negative: model cutoff radius
  SolverOptions solver;
  SamplingOptions sampling;
};

// Box stripe with prediction m * e.De when the probed direction is an
// eigenvector of D; tilted observation cell otherwise.
inline DirectionGeometry observation_geometry(const EffectiveMatrix& em, Vec e) {
  const double en = norm2(e);
  if (!(en > 0.0)) throw ParameterError("observation_geometry: zero direction");
  for (double& v : e) v /= en;
  const Vec de = em.matrix.apply(e);
  const double lambda = dot(e, de);
  double off = 0.0;
  for (int i = 0; i < em.dim; ++i) off += (de[i] - lambda * e[i]) * (de[i] - lambda * e[i]);
  double scale = std::max(1.0, std::abs(em.eigenvalues.empty() ? 0.0 : em.eigenvalues.front()));
  if (std::sqrt(off) <= 1e-8 * scale) {
    DirectionGeometry g;
    g.frame = DirectionFrame::box_stripe(em.dim, complete_rotation(e));
    g.w = Vec(em.dim, 0.0);
    g.w[0] = 1.0;
    g.a = g.w;
    g.a_dot_Da = lambda;
    g.predicted_limit = em.intensity * lambda;
    return g;
  }
  return direction_geometry(em, e);
}

struct SweepCell {
  double ell = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ConductivityReport report;
  int iterations = 0;
  double residual = 0.0;
  double crossing_bound = 0.0;
  int n_crossings = 0;
};

struct SweepEllSummary {
  double ell = 0.0;
  int n_ok = 0;
  int n_failed = 0;
  double mean_rescaled = 0.0;
  double stderr_rescaled = 0.0;
};

struct SweepResult {
  ModelSpec model;
  Vec direction;
  std::vector<SweepCell> cells;  // ell-major, seed-minor
  std::vector<SweepEllSummary> per_ell;
  bool has_prediction = false;
  double predicted_limit = std::numeric_limits<double>::quiet_NaN();
  double last_gap = std::numeric_limits<double>::quiet_NaN();
  std::optional<EffectiveMatrix> effective;
  DirectionGeometry geometry;
};

namespace detail {

inline Box inflate(Box b, double pad) {
  for (int k = 0; k < b.dim(); ++k) {
    b.lo[k] -= pad;
    b.hi[k] += pad;
  }
  return b;
}

// Model interaction radius without building a full environment.
inline double model_margin(const SweepConfig& cfg) {
  if (cfg.margin >= 0.0) return cfg.margin;
  if (std::holds_alternative<LatticeRcm>(cfg.model.model) ||
      std::holds_alternative<BondPercolation>(cfg.model.model))
    return 1.0;
  if (const auto* ma = std::get_if<MillerAbrahams>(&cfg.model.model)) {
    if (ma->cutoff <= 0.0)
      throw ParameterError("sweep: unbounded interaction range needs an explicit margin");
    return 0.5 * ma->gamma * std::log(1.0 / ma->cutoff);
  }
  if (const auto* ex = std::get_if<ExplicitEdges>(&cfg.model.model)) {
    double r = 0.0;
    for (const auto& [i, j] : ex->pairs) {
      double s = 0.0;
      for (int k = 0; k < cfg.model.cloud.dim; ++k) {
        const double d = cfg.model.cloud.point(i)[k] - cfg.model.cloud.point(j)[k];
        s += d * d;
      }
      r = std::max(r, std::sqrt(s));
    }
    return r;
  }
  throw ParameterError("sweep: model needs an explicit margin");
}

struct SolvedInstance {
  ResistorNetwork net;
  PotentialSolution sol;
};

inline SolvedInstance solve_instance(const SweepConfig& cfg, const DirectionFrame& frame, double ell,
                                     std::uint64_t seed) {
  const double margin = model_margin(cfg);
  const Box window = inflate(frame.required_physical_box(ell, margin), 1e-7);
  Environment env = make_environment(cfg.model, window, seed);
  SolvedInstance inst{
      aggregate_reservoirs(classify_and_prune(build_network(env, frame, ell, margin))), {}};
  inst.sol = solve_potential(inst.net, cfg.solver.tol, cfg.solver.max_iter, cfg.solver.method);
  return inst;
}

inline SweepCell run_cell(const SweepConfig& cfg, const DirectionFrame& frame, double ell,
                          std::uint64_t seed) {
  SweepCell cell;
  cell.ell = ell;
  cell.seed = seed;
  try {
    SolvedInstance inst = solve_instance(cfg, frame, ell, seed);
    cell.report = conductivity_report(inst.net, inst.sol, cfg.solver.n_gamma);
    cell.iterations = inst.sol.iterations;
    cell.residual = inst.sol.residual;
    const CrossingBound cb = crossings_lower_bound(inst.net);
    cell.crossing_bound = cb.lower_bound;
    cell.n_crossings = cb.n_crossings;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace detail

// Multi-ell, multi-seed conductivity sweep with the homogenization prediction
// from matched model parameters. Failed cells are recorded and skipped in the
// per-ell statistics.
inline SweepResult scaling_sweep(const SweepConfig& cfg) {
  if (cfg.ells.empty()) throw ParameterError("scaling_sweep: empty ell list");
  for (std::size_t i = 1; i < cfg.ells.size(); ++i)
    if (!(cfg.ells[i] > cfg.ells[i - 1])) throw ParameterError("scaling_sweep: ell list must increase");
  if (cfg.sampling.seeds.empty()) throw ParameterError("scaling_sweep: empty seed list");

  SweepResult result;
  result.model = cfg.model;
  result.direction = cfg.direction;

  if (!std::holds_alternative<ExplicitEdges>(cfg.model.model)) {
    result.effective = assemble_effective_matrix(cfg.model.model, cfg.model.dim, cfg.sampling.torus_n,
                                                 cfg.sampling.seeds, cfg.model.intensity,
                                                 cfg.solver.tol, cfg.solver.max_iter);
    result.geometry = observation_geometry(*result.effective, cfg.direction);
    result.predicted_limit = result.geometry.predicted_limit;
    result.has_prediction = true;
  } else {
    result.geometry.frame =
        DirectionFrame::box_stripe(cfg.model.dim, complete_rotation(cfg.direction));
  }
  const DirectionFrame frame = result.geometry.frame;

  const int n_ell = static_cast<int>(cfg.ells.size());
  const int n_seed = static_cast<int>(cfg.sampling.seeds.size());
  result.cells.resize(static_cast<std::size_t>(n_ell) * n_seed);
  parallel_for(n_ell * n_seed, [&](int idx) {
    const double ell = cfg.ells[idx / n_seed];
    const std::uint64_t seed = cfg.sampling.seeds[idx % n_seed];
    result.cells[idx] = detail::run_cell(cfg, frame, ell, seed);
  });

  for (int le = 0; le < n_ell; ++le) {
    SweepEllSummary s;
    s.ell = cfg.ells[le];
    double sum = 0.0, sumsq = 0.0;
    for (int se = 0; se < n_seed; ++se) {
      const SweepCell& c = result.cells[static_cast<std::size_t>(le) * n_seed + se];
      if (!c.ok) {
        ++s.n_failed;
        continue;
      }
      ++s.n_ok;
      sum += c.report.rescaled;
      sumsq += c.report.rescaled * c.report.rescaled;
    }
    if (s.n_ok > 0) {
      s.mean_rescaled = sum / s.n_ok;
      const double var = std::max(0.0, sumsq / s.n_ok - s.mean_rescaled * s.mean_rescaled);
      s.stderr_rescaled = s.n_ok > 1 ? std::sqrt(var / (s.n_ok - 1)) : 0.0;
    }
    result.per_ell.push_back(s);
  }
  if (result.has_prediction && !result.per_ell.empty()) {
    const auto& last = result.per_ell.back();
    if (last.n_ok > 0)
      result.last_gap = std::abs(last.mean_rescaled - result.predicted_limit) /
                        std::max(std::abs(result.predicted_limit), 1e-12);
  }
  return result;
}

// --------------------------------------------------------------------------
// Weak convergence probe

struct WeakConvergenceProbe {
  std::vector<double> ells;
  int n_phi = 3;
  // pairing[e * n_phi + p] = eps^d sum over interior-box nodes of
  // (V - psi)(x) phi(eps x)
  Vec pairings;
};

// Fixed test-function family on the unit cell: a polynomial bump and two
// sine-modulated variants.
inline double probe_test_function(int index, std::span<const double> q) {
  double bump = 1.0;
  for (double v : q) {
    const double t = 1.0 - 4.0 * v * v;
    bump *= t * t;
  }
  if (index == 0) return bump;
  if (index == 1) return bump * std::sin(M_PI * q[0]);
  return bump * std::sin(M_PI * (q.size() > 1 ? q[1] : 2.0 * q[0]));
}

inline WeakConvergenceProbe weak_convergence_probe(const SweepConfig& cfg) {
  if (cfg.ells.empty()) throw ParameterError("weak_convergence_probe: empty ell list");
  if (cfg.sampling.seeds.empty()) throw ParameterError("weak_convergence_probe: empty seed list");
  const std::uint64_t seed = cfg.sampling.seeds.front();
  const DirectionFrame frame = DirectionFrame::box_stripe(cfg.model.dim);

  WeakConvergenceProbe probe;
  probe.ells = cfg.ells;
  probe.pairings.assign(cfg.ells.size() * probe.n_phi, 0.0);
  std::vector<std::string> failures(cfg.ells.size());
  parallel_for(static_cast<int>(cfg.ells.size()), [&](int le) {
    try {
      const double ell = cfg.ells[le];
      const double eps = 1.0 / ell;
      const detail::SolvedInstance inst = detail::solve_instance(cfg, frame, ell, seed);
      for (int p = 0; p < probe.n_phi; ++p) {
        KahanSum s;
        Vec q(inst.net.dim);
        for (int v = 0; v < inst.net.n_nodes(); ++v) {
          if (inst.net.classes[v] != NodeClass::Interior &&
              inst.net.classes[v] != NodeClass::InteriorIsolated)
            continue;
          const auto x = inst.net.node(v);
          for (int k = 0; k < inst.net.dim; ++k) q[k] = eps * x[k];
          const double psi = frame.affine_profile(q, 1.0);
          s.add((inst.sol.values[v] - psi) * probe_test_function(p, q));
        }
        probe.pairings[static_cast<std::size_t>(le) * probe.n_phi + p] =
            std::pow(eps, inst.net.dim) * s.value();
      }
    } catch (const Error& e) {
      failures[le] = e.what();
    }
  });
  for (std::size_t le = 0; le < failures.size(); ++le)
    if (!failures[le].empty())
      throw SolverError("weak_convergence_probe: cell failed: " + failures[le], 0.0);
  return probe;
}

// --------------------------------------------------------------------------
// Mott sweep

struct MottRow {
  double beta = 0.0;
  double mott_scale = 0.0;  // beta^((alpha+1)/(alpha+1+d))
  double d11 = 0.0;
  double log_d11 = 0.0;
};

// Corrector-based D_11 on a fixed point sample per seed, swept over beta.
// Only qualitative monotonicity is claimed; no exponent fit is performed.
inline std::vector<MottRow> mott_sweep(const std::vector<double>& betas, const SweepConfig& cfg) {
  const auto* ma = std::get_if<MillerAbrahams>(&cfg.model.model);
  if (ma == nullptr) throw ParameterError("mott_sweep: model must be Miller-Abrahams");
  if (betas.empty()) throw ParameterError("mott_sweep: empty beta list");
  for (std::size_t i = 1; i < betas.size(); ++i)
    if (!(betas[i] > betas[i - 1])) throw ParameterError("mott_sweep: betas must increase");
  if (cfg.sampling.seeds.empty()) throw ParameterError("mott_sweep: empty seed list");

  std::vector<MottRow> rows(betas.size());
  std::vector<std::string> failures(betas.size());
  parallel_for(static_cast<int>(betas.size()), [&](int bi) {
    try {
      MillerAbrahams swept = *ma;
      swept.beta = betas[bi];
      double sum = 0.0;
      for (std::uint64_t seed : cfg.sampling.seeds) {
        TorusGraph g = build_torus_graph(swept, cfg.model.dim, cfg.sampling.torus_n, seed,
                                         cfg.model.intensity);
        Vec e1(cfg.model.dim, 0.0);
        e1[0] = 1.0;
        sum += solve_corrector(g, e1, cfg.solver.tol, cfg.solver.max_iter).energy;
      }
      MottRow row;
      row.beta = betas[bi];
      row.mott_scale = std::pow(betas[bi], (swept.alpha + 1.0) / (swept.alpha + 1.0 + cfg.model.dim));
      row.d11 = sum / cfg.sampling.seeds.size();
      row.log_d11 = row.d11 > 0.0 ? std::log(row.d11) : -std::numeric_limits<double>::infinity();
      rows[bi] = row;
    } catch (const Error& e) {
      failures[bi] = e.what();
    }
  });
  for (std::size_t bi = 0; bi < failures.size(); ++bi)
    if (!failures[bi].empty()) throw SolverError("mott_sweep: " + failures[bi], 0.0);
  return rows;
}

}  // namespace ohm
