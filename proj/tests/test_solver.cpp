#include <doctest.h>

#include <cmath>

#include "ohm/io.hpp"
#include "ohm/rng.hpp"
#include "ohm/solver.hpp"
#include "oracles.hpp"

using namespace ohm;

namespace {

Environment unit_lattice(int dim, double half, std::uint64_t seed = 1) {
  Box region{Vec(dim, -half), Vec(dim, half)};
  return Environment(lattice_points(dim, region), LatticeRcm{RcmWeights{}}, seed);
}

ResistorNetwork chain3() {
  Environment env = unit_lattice(1, 2.5);
  return classify_and_prune(build_network(env, DirectionFrame::box_stripe(1), 3.0));
}

ResistorNetwork divider(double a, double b) {
  PointCloud cloud;
  cloud.dim = 1;
  cloud.coords = {-2.0, 0.0, 2.0};
  cloud.window = Box{{-3.5}, {3.5}};
  ExplicitEdges ex;
  ex.pairs = {{0, 1}, {1, 2}};
  ex.weights = {a, b};
  Environment env(cloud, ex, 1);
  return classify_and_prune(build_network(env, DirectionFrame::box_stripe(1), 3.0));
}

}  // namespace

TEST_CASE("reduced system assembly") {
  SUBCASE("1-d chain gives the expected tridiagonal system") {
    const ResistorNetwork net = chain3();
    const ReducedSystem sys = assemble_reduced_system(net);
    REQUIRE(sys.matrix.n() == 3);
    CHECK(sys.matrix.entry(0, 0) == 2.0);
    CHECK(sys.matrix.entry(0, 1) == -1.0);
    CHECK(sys.matrix.entry(0, 2) == 0.0);
    CHECK(sys.matrix.entry(1, 0) == -1.0);
    CHECK(sys.matrix.entry(1, 1) == 2.0);
    CHECK(sys.matrix.entry(1, 2) == -1.0);
    CHECK(sys.matrix.entry(2, 1) == -1.0);
    CHECK(sys.matrix.entry(2, 2) == 2.0);
    CHECK(sys.rhs == Vec{0.0, 0.0, 1.0});
  }
  SUBCASE("two-resistor divider is a single unknown") {
    const ResistorNetwork net = divider(1.0, 3.0);
    const ReducedSystem sys = assemble_reduced_system(net);
    REQUIRE(sys.matrix.n() == 1);
    CHECK(sys.matrix.entry(0, 0) == 4.0);
    CHECK(sys.rhs == Vec{3.0});
  }
  SUBCASE("unclassified network is a contract violation") {
    Environment env = unit_lattice(1, 2.5);
    const ResistorNetwork raw = build_network(env, DirectionFrame::box_stripe(1), 3.0);
    CHECK_THROWS_AS(assemble_reduced_system(raw), ContractError);
  }
  SUBCASE("fully pruned network solves as a no-op") {
    Environment env(lattice_points(2, Box{{-2.5, -2.5}, {2.5, 2.5}}), BondPercolation{0.0}, 2);
    const ResistorNetwork net =
        classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 3.0));
    const PotentialSolution sol = solve_potential(net);
    CHECK(sol.energy == 0.0);
    CHECK(sol.iterations == 0);
    for (double v : sol.values) CHECK(v == 0.0);
  }
}

TEST_CASE("solve_potential closed forms") {
  SUBCASE("1-d series potentials") {
    const ResistorNetwork net = chain3();
    const PotentialSolution sol = solve_potential(net);
    // nodes sorted: -2 -1 0 1 2
    CHECK(sol.values[0] == doctest::Approx(0.0));
    CHECK(sol.values[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(sol.values[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.values[3] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(sol.values[4] == doctest::Approx(1.0));
  }
  SUBCASE("divider potential is b/(a+b)") {
    const PotentialSolution sol = solve_potential(divider(1.0, 3.0));
    CHECK(sol.values[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("2-d potential depends only on the first coordinate") {
    Environment env = unit_lattice(2, 2.5);
    const ResistorNetwork net =
        classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 3.0));
    const PotentialSolution sol = solve_potential(net);
    for (int v = 0; v < net.n_nodes(); ++v) {
      if (net.classes[v] != NodeClass::Interior) continue;
      CHECK(sol.values[v] == doctest::Approx((net.node(v)[0] + 2.0) / 4.0).epsilon(1e-10));
    }
  }
  SUBCASE("initial guess does not matter (cg equals thomas)") {
    const ResistorNetwork net = chain3();
    const PotentialSolution a = solve_potential(net, 1e-13, 100000, SolveMethod::Auto);
    const PotentialSolution b = solve_potential(net, 1e-13, 100000, SolveMethod::Cg);
    for (std::size_t v = 0; v < a.values.size(); ++v)
      CHECK(a.values[v] == doctest::Approx(b.values[v]).epsilon(1e-10));
  }
}

TEST_CASE("flux through hyperplanes") {
  const ResistorNetwork net = chain3();
  const PotentialSolution sol = solve_potential(net);
  CHECK(flux_through_hyperplane(net, sol, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(flux_through_hyperplane(net, sol, -1.2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(flux_through_hyperplane(net, sol, 1.5), ParameterError);
  CHECK_THROWS_AS(flux_through_hyperplane(net, sol, -1.6), ParameterError);

  Environment env2 = unit_lattice(2, 2.5);
  const ResistorNetwork net2 =
      classify_and_prune(build_network(env2, DirectionFrame::box_stripe(2), 3.0));
  const PotentialSolution sol2 = solve_potential(net2);
  for (double gamma : {-1.5, -0.7, 0.0, 0.4, 1.2})
    CHECK(flux_through_hyperplane(net2, sol2, gamma) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("dissipated energy") {
  const ResistorNetwork net = chain3();
  const PotentialSolution sol = solve_potential(net);
  CHECK(sol.energy == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sol.energy == doctest::Approx(flux_through_hyperplane(net, sol, 0.0)).epsilon(1e-11));

  PotentialSolution zero = sol;
  zero.values.assign(net.n_nodes(), 0.0);
  CHECK(dissipated_energy(net, zero) == 0.0);

  Environment env2 = unit_lattice(2, 2.5);
  const ResistorNetwork net2 =
      classify_and_prune(build_network(env2, DirectionFrame::box_stripe(2), 3.0));
  const PotentialSolution sol2 = solve_potential(net2);
  CHECK(sol2.energy == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("conductivity report") {
  SUBCASE("1-d rescaled is ell/(ell+1)") {
    const ResistorNetwork net = chain3();
    const PotentialSolution sol = solve_potential(net);
    const ConductivityReport rep = conductivity_report(net, sol);
    CHECK(rep.rescaled == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rep.sigma_flux == doctest::Approx(rep.sigma_energy).epsilon(1e-11));
    REQUIRE(rep.flux_profile.size() == 11);
    for (const auto& [gamma, flux] : rep.flux_profile)
      CHECK(flux == doctest::Approx(rep.sigma_flux).epsilon(1e-10));
  }
  SUBCASE("disconnected network reports zeros") {
    Environment env(lattice_points(2, Box{{-2.5, -2.5}, {2.5, 2.5}}), BondPercolation{0.0}, 2);
    const ResistorNetwork net =
        classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 3.0));
    const PotentialSolution sol = solve_potential(net);
    const ConductivityReport rep = conductivity_report(net, sol);
    CHECK(rep.sigma_flux == 0.0);
    CHECK(rep.sigma_energy == 0.0);
    CHECK(rep.rescaled == 0.0);
  }
}

TEST_CASE("competitor energies and minimality") {
  const ResistorNetwork net = chain3();
  const PotentialSolution sol = solve_potential(net);

  SUBCASE("affine competitor") {
    Vec psi(net.n_nodes());
    for (int v = 0; v < net.n_nodes(); ++v) psi[v] = net.frame.affine_profile(net.node(v), net.ell);
    // profile slope 1/3 inside, jumps 1/6 at the boundary edges
    CHECK(competitor_energy(net, psi) == doctest::Approx(5.0 / 18.0).epsilon(1e-12));
    CHECK(sol.energy <= competitor_energy(net, psi) + 1e-9);
  }
  SUBCASE("step competitor costs a full unit drop") {
    Vec step(net.n_nodes());
    for (int v = 0; v < net.n_nodes(); ++v) step[v] = net.node(v)[0] >= 0.0 ? 1.0 : 0.0;
    CHECK(competitor_energy(net, step) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.energy <= 1.0);
  }
  SUBCASE("random feasible competitors never beat the solution") {
    rng::Stream rand{rng::Key(77)};
    for (int trial = 0; trial < 50; ++trial) {
      Vec comp(net.n_nodes());
      for (int v = 0; v < net.n_nodes(); ++v) {
        switch (net.classes[v]) {
          case NodeClass::LeftReservoir:
          case NodeClass::InteriorIsolated: comp[v] = 0.0; break;
          case NodeClass::RightReservoir: comp[v] = 1.0; break;
          case NodeClass::Interior: comp[v] = rand.next_uniform(); break;
        }
      }
      CHECK(sol.energy <= competitor_energy(net, comp) + 1e-9);
    }
  }
  SUBCASE("constraint violations are contract errors") {
    Vec bad(net.n_nodes(), 0.5);
    CHECK_THROWS_AS(competitor_energy(net, bad), ContractError);
  }
}

TEST_CASE("kirchhoff balance and maximum principle on mixed instances") {
  std::vector<ConductanceModel> models;
  models.push_back(LatticeRcm{RcmWeights{RcmWeights::Kind::Uniform, 1.0, 1.0, 2.0, {}, 1.0, 2.0}});
  models.push_back(BondPercolation{0.6});
  for (auto& m : models) {
    Environment env(lattice_points(2, Box{{-9.5, -9.5}, {9.5, 9.5}}), m, 5);
    const ResistorNetwork net =
        aggregate_reservoirs(classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 16.0)));
    const PotentialSolution sol = solve_potential(net, 1e-12);
    const ReducedSystem sys = assemble_reduced_system(net);
    Vec x(sys.free_nodes.size());
    for (std::size_t u = 0; u < sys.free_nodes.size(); ++u) x[u] = sol.values[sys.free_nodes[u]];
    const Vec r = sys.matrix.residual(x, sys.rhs);
    for (std::size_t u = 0; u < r.size(); ++u)
      CHECK(std::abs(r[u]) <= 1e-12 * sys.matrix.diag()[u] + 1e-15);
    for (double v : sol.values) {
      CHECK(v >= -1e-10);
      CHECK(v <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("cg matches a dense direct solve on small random networks") {
  rng::Stream pick{rng::Key(123)};
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const double p = 0.4 + 0.4 * pick.next_uniform();
    Environment env(lattice_points(2, Box{{-3.5, -3.5}, {3.5, 3.5}}), BondPercolation{p}, seed);
    const ResistorNetwork net =
        aggregate_reservoirs(classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 5.0)));
    const ReducedSystem sys = assemble_reduced_system(net);
    if (sys.matrix.n() == 0) continue;
    REQUIRE(sys.matrix.n() <= 50);
    Mat dense(sys.matrix.n(), sys.matrix.n());
    for (int i = 0; i < sys.matrix.n(); ++i)
      for (int j = 0; j < sys.matrix.n(); ++j) dense(i, j) = sys.matrix.entry(i, j);
    const Vec exact = oracle::dense_solve(dense, sys.rhs);
    const PotentialSolution sol = solve_potential(net, 1e-12, 100000, SolveMethod::Cg);
    for (std::size_t u = 0; u < sys.free_nodes.size(); ++u)
      CHECK(std::abs(sol.values[sys.free_nodes[u]] - exact[u]) <= 1e-8);
  }
}

TEST_CASE("non-convergence raises a solver error carrying the residual") {
  Environment env(lattice_points(2, Box{{-17.5, -17.5}, {17.5, 17.5}}),
                  LatticeRcm{RcmWeights{RcmWeights::Kind::Uniform, 1.0, 1.0, 2.0, {}, 1.0, 2.0}}, 3);
  const ResistorNetwork net =
      aggregate_reservoirs(classify_and_prune(build_network(env, DirectionFrame::box_stripe(2), 32.0)));
  try {
    solve_potential(net, 1e-12, 2, SolveMethod::Cg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual > 0.0);
  }
}
