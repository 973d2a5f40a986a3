#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ohm/network.hpp"
#include "ohm/sparse.hpp"

namespace ohm {

struct PotentialSolution {
  Vec values;             // per network node, boundary conventions applied
  double residual = 0.0;  // relative preconditioned residual of the reduced solve
  int iterations = 0;
  double energy = 0.0;    // total dissipated energy
};

struct ConductivityReport {
  double sigma_flux = 0.0;
  double sigma_energy = 0.0;
  std::vector<std::pair<double, double>> flux_profile;  // (gamma, flux)
  double rescaled = 0.0;                                // ell^(2-d) * sigma_energy
  double ell = 0.0;
};

struct ReducedSystem {
  SparseSym matrix;
  Vec rhs;
  std::vector<int> free_nodes;  // unknown index -> node id
  std::vector<int> unknown_of;  // node id -> unknown index, -1 if clamped
};

// Kirchhoff system on the free (interior, non-isolated) nodes: weighted graph
// Laplacian with reservoir adjacencies folded into diagonal and right side.
inline ReducedSystem assemble_reduced_system(const ResistorNetwork& net) {
  if (!net.classified)
    throw ContractError("assemble_reduced_system: network must be classified (run classify_and_prune)");
  ReducedSystem sys;
  const int n = net.n_nodes();
  sys.unknown_of.assign(n, -1);
  for (int v = 0; v < n; ++v)
    if (net.classes[v] == NodeClass::Interior) {
      sys.unknown_of[v] = static_cast<int>(sys.free_nodes.size());
      sys.free_nodes.push_back(v);
    }
  const int nf = static_cast<int>(sys.free_nodes.size());
  Vec diag(nf, 0.0);
  sys.rhs.assign(nf, 0.0);
  std::vector<std::array<int, 2>> pairs;
  Vec offdiag;
  for (const auto& e : net.edges) {
    const int ui = sys.unknown_of[e.i];
    const int uj = sys.unknown_of[e.j];
    if (ui >= 0) diag[ui] += e.c;
    if (uj >= 0) diag[uj] += e.c;
    if (ui >= 0 && uj >= 0) {
      pairs.push_back({ui, uj});
      offdiag.push_back(-e.c);
    } else if (ui >= 0 || uj >= 0) {
      const int u = ui >= 0 ? ui : uj;
      const int other = ui >= 0 ? e.j : e.i;
      if (net.classes[other] == NodeClass::RightReservoir) sys.rhs[u] += e.c;
    }
  }
  sys.matrix = SparseSym::from_graph(nf, pairs, offdiag, diag);
  return sys;
}

inline double dissipated_energy(const ResistorNetwork& net, const PotentialSolution& sol) {
  KahanSum s;
  for (const auto& e : net.edges) {
    const double d = sol.values[e.i] - sol.values[e.j];
    s.add(e.c * d * d);
  }
  return s.value();
}

// Current through the slab level gamma, signed from the low side to the high
// side. gamma lives in [-T, T) with T the interior slab halfwidth.
inline double flux_through_hyperplane(const ResistorNetwork& net, const PotentialSolution& sol,
                                      double gamma) {
  const double t_half = net.frame.slab_halfwidth(net.ell);
  if (!(gamma >= -t_half && gamma < t_half))
    throw ParameterError("flux_through_hyperplane: gamma outside [-ell/2, ell/2)");
  KahanSum s;
  for (const auto& e : net.edges) {
    const double si = net.slab(e.i), sj = net.slab(e.j);
    const double lo = std::min(si, sj), hi = std::max(si, sj);
    if (lo <= gamma && gamma < hi) {
      const int low_node = si <= sj ? e.i : e.j;
      const int high_node = si <= sj ? e.j : e.i;
      s.add(e.c * (sol.values[high_node] - sol.values[low_node]));
    }
  }
  return s.value();
}

// Boundary-flux conductivity: total current leaving the left reservoir.
inline double boundary_flux(const ResistorNetwork& net, const PotentialSolution& sol) {
  KahanSum s;
  for (const auto& e : net.edges) {
    const bool li = net.classes[e.i] == NodeClass::LeftReservoir;
    const bool lj = net.classes[e.j] == NodeClass::LeftReservoir;
    if (li == lj) continue;
    const int left = li ? e.i : e.j;
    const int other = li ? e.j : e.i;
    s.add(e.c * (sol.values[other] - sol.values[left]));
  }
  return s.value();
}

enum class SolveMethod { Auto, Cg };

namespace detail {

struct SolveChecks {
  double kirchhoff_inf = 0.0;   // max |residual| / diagonal
  double flux_spread = 0.0;     // relative over the default gamma grid
  double energy_gap = 0.0;      // |energy - flux| / max(1, |flux|)
  double range_violation = 0.0; // max excursion below 0 / above 1
};

inline SolveChecks run_checks(const ResistorNetwork& net, const ReducedSystem& sys,
                              const PotentialSolution& sol) {
  SolveChecks c;
  Vec x(sys.free_nodes.size());
  for (std::size_t u = 0; u < sys.free_nodes.size(); ++u) x[u] = sol.values[sys.free_nodes[u]];
  const Vec r = sys.matrix.residual(x, sys.rhs);
  for (std::size_t u = 0; u < r.size(); ++u) {
    const double d = sys.matrix.diag()[u];
    if (d > 0.0) c.kirchhoff_inf = std::max(c.kirchhoff_inf, std::abs(r[u]) / d);
  }
  const double t_half = net.frame.slab_halfwidth(net.ell);
  const double base = flux_through_hyperplane(net, sol, -t_half);
  double spread = 0.0;
  for (int g = 0; g < 11; ++g) {
    const double gamma = -t_half + g * (2.0 * t_half / 11.0);
    spread = std::max(spread, std::abs(flux_through_hyperplane(net, sol, gamma) - base));
  }
  c.flux_spread = spread / std::max(std::abs(base), std::numeric_limits<double>::epsilon());
  const double energy = dissipated_energy(net, sol);
  c.energy_gap = std::abs(energy - base) / std::max(1.0, std::abs(base));
  for (double v : sol.values)
    c.range_violation = std::max({c.range_violation, -v, v - 1.0});
  return c;
}

}  // namespace detail

// Solves for the electric potential: 0 on the left reservoir and isolated
// components, 1 on the right reservoir, Kirchhoff balance at free nodes.
// Starts from the affine profile; the result is guess-independent up to tol.
// After nominal convergence the finite-volume identities (flux invariance,
// energy identity, maximum principle) are checked and the tolerance tightened
// if they are not met at their stated multiples.
inline PotentialSolution solve_potential(const ResistorNetwork& net, double tol = 1e-12,
                                         int max_iter = 200000,
                                         SolveMethod method = SolveMethod::Auto) {
  if (!(tol > 0.0)) throw ParameterError("solve_potential: tol must be positive");
  ReducedSystem sys = assemble_reduced_system(net);

  PotentialSolution sol;
  sol.values.assign(net.n_nodes(), 0.0);
  for (int v = 0; v < net.n_nodes(); ++v) {
    switch (net.classes[v]) {
      case NodeClass::LeftReservoir:
      case NodeClass::InteriorIsolated: sol.values[v] = 0.0; break;
      case NodeClass::RightReservoir: sol.values[v] = 1.0; break;
      case NodeClass::Interior: sol.values[v] = net.frame.affine_profile(net.node(v), net.ell); break;
    }
  }

  const int nf = static_cast<int>(sys.free_nodes.size());
  if (nf > 0) {
    // Free components whose reservoir boundary is single-sided carry the
    // boundary constant exactly (maximum principle); only components bridging
    // both reservoirs need a linear solve.
    UnionFind comps(nf);
    for (const auto& e : net.edges) {
      const int ui = sys.unknown_of[e.i], uj = sys.unknown_of[e.j];
      if (ui >= 0 && uj >= 0) comps.unite(ui, uj);
    }
    std::vector<char> sees_left(nf, 0), sees_right(nf, 0);
    for (const auto& e : net.edges) {
      const int ui = sys.unknown_of[e.i], uj = sys.unknown_of[e.j];
      if ((ui >= 0) == (uj >= 0)) continue;
      const int u = ui >= 0 ? ui : uj;
      const NodeClass other = net.classes[ui >= 0 ? e.j : e.i];
      if (other == NodeClass::LeftReservoir) sees_left[comps.find(u)] = 1;
      if (other == NodeClass::RightReservoir) sees_right[comps.find(u)] = 1;
    }
    std::vector<int> active_of(nf, -1);
    std::vector<int> unknown_of_active;
    for (int u = 0; u < nf; ++u) {
      const int root = comps.find(u);
      if (sees_left[root] && sees_right[root]) {
        active_of[u] = static_cast<int>(unknown_of_active.size());
        unknown_of_active.push_back(u);
      } else {
        sol.values[sys.free_nodes[u]] = sees_right[root] ? 1.0 : 0.0;
      }
    }

    const int na = static_cast<int>(unknown_of_active.size());
    if (na > 0) {
      Vec diag(na, 0.0), rhs(na, 0.0);
      std::vector<std::array<int, 2>> pairs;
      Vec offdiag;
      for (const auto& e : net.edges) {
        const int ui = sys.unknown_of[e.i], uj = sys.unknown_of[e.j];
        const int ai = ui >= 0 ? active_of[ui] : -1;
        const int aj = uj >= 0 ? active_of[uj] : -1;
        if (ai >= 0) diag[ai] += e.c;
        if (aj >= 0) diag[aj] += e.c;
        if (ai >= 0 && aj >= 0) {
          pairs.push_back({ai, aj});
          offdiag.push_back(-e.c);
        } else if (ai >= 0 || aj >= 0) {
          const int a = ai >= 0 ? ai : aj;
          const int other = ai >= 0 ? e.j : e.i;
          if (net.classes[other] == NodeClass::RightReservoir) rhs[a] += e.c;
        }
      }
      SparseSym m = SparseSym::from_graph(na, pairs, offdiag, diag);
      Vec x(na);
      for (int a = 0; a < na; ++a)
        x[a] = sol.values[sys.free_nodes[unknown_of_active[a]]];

      const bool tridiag = method == SolveMethod::Auto && m.is_tridiagonal();
      if (tridiag) {
        thomas_solve(m, rhs, x);
        const Vec r = m.residual(x, rhs);
        double rn = 0.0, bn = 0.0;
        for (int a = 0; a < na; ++a) {
          const double d = m.diag()[a] > 0.0 ? 1.0 / m.diag()[a] : 0.0;
          rn += r[a] * d * r[a];
          bn += rhs[a] * d * rhs[a];
        }
        sol.residual = bn > 0.0 ? std::sqrt(rn / bn) : 0.0;
        sol.iterations = 1;
        for (int a = 0; a < na; ++a) sol.values[sys.free_nodes[unknown_of_active[a]]] = x[a];
      } else {
        double target = tol;
        int budget = max_iter;
        CgResult cg = pcg_jacobi(m, rhs, x, target, budget);
        sol.iterations = cg.iterations;
        sol.residual = cg.rel_residual;
        if (!cg.converged)
          throw SolverError("solve_potential: conjugate gradient did not converge", cg.rel_residual);
        for (int a = 0; a < na; ++a) sol.values[sys.free_nodes[unknown_of_active[a]]] = x[a];

        // identity-driven refinement; each pass is a warm-started CG continuation
        for (int pass = 0; pass < 3; ++pass) {
          const auto checks = detail::run_checks(net, sys, sol);
          const bool ok = checks.kirchhoff_inf <= tol && checks.flux_spread <= 10.0 * tol &&
                          checks.energy_gap <= 10.0 * tol && checks.range_violation <= 1e-10;
          if (ok) break;
          target /= 32.0;
          if (target < 1e-15) break;
          budget -= cg.iterations;
          if (budget <= 0) break;
          cg = pcg_jacobi(m, rhs, x, target, budget);
          sol.iterations += cg.iterations;
          sol.residual = cg.rel_residual;
          for (int a = 0; a < na; ++a) sol.values[sys.free_nodes[unknown_of_active[a]]] = x[a];
          if (!cg.converged) break;
        }
      }
    }
  }

  for (double& v : sol.values) {
    // clip pure rounding excursions, never more than the allowed slack
    if (v < 0.0 && v > -1e-14) v = 0.0;
    if (v > 1.0 && v < 1.0 + 1e-14) v = 1.0;
  }
  sol.energy = dissipated_energy(net, sol);
  return sol;
}

inline ConductivityReport conductivity_report(const ResistorNetwork& net, const PotentialSolution& sol,
                                              int n_gamma = 11) {
  ConductivityReport rep;
  rep.ell = net.ell;
  rep.sigma_energy = dissipated_energy(net, sol);
  rep.sigma_flux = boundary_flux(net, sol);
  const double t_half = net.frame.slab_halfwidth(net.ell);
  for (int g = 0; g < n_gamma; ++g) {
    const double gamma = -t_half + g * (2.0 * t_half / n_gamma);
    rep.flux_profile.push_back({gamma, flux_through_hyperplane(net, sol, gamma)});
  }
  rep.rescaled = std::pow(net.ell, 2 - net.dim) * rep.sigma_energy;
  return rep;
}

// Energy of a feasible competitor: must be 0 on the left reservoir and
// isolated components, 1 on the right reservoir.
inline double competitor_energy(const ResistorNetwork& net, const Vec& competitor) {
  if (static_cast<int>(competitor.size()) != net.n_nodes())
    throw ContractError("competitor_energy: size mismatch");
  for (int v = 0; v < net.n_nodes(); ++v) {
    const NodeClass c = net.classes[v];
    if ((c == NodeClass::LeftReservoir || c == NodeClass::InteriorIsolated) && competitor[v] != 0.0)
      throw ContractError("competitor_energy: competitor must vanish on the left reservoir and isolated components");
    if (c == NodeClass::RightReservoir && competitor[v] != 1.0)
      throw ContractError("competitor_energy: competitor must equal 1 on the right reservoir");
  }
  KahanSum s;
  for (const auto& e : net.edges) {
    const double d = competitor[e.i] - competitor[e.j];
    s.add(e.c * d * d);
  }
  return s.value();
}

}  // namespace ohm
