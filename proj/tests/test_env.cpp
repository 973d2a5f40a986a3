#include <doctest.h>

#include <cmath>

#include "ohm/env.hpp"

using namespace ohm;

namespace {

Box box2(double lo, double hi) { return Box{{lo, lo}, {hi, hi}}; }

Environment lattice_env(int dim, double half, ConductanceModel model, std::uint64_t seed = 1) {
  Box region{Vec(dim, -half), Vec(dim, half)};
  return Environment(lattice_points(dim, region), std::move(model), seed);
}

}  // namespace

TEST_CASE("poisson point sampling") {
  SUBCASE("empirical mean count at intensity 5 on [0,10]^2") {
    double sum = 0.0;
    for (int seed = 1; seed <= 200; ++seed)
      sum += sample_poisson_points(5.0, box2(0, 10), seed).n_points();
    CHECK(std::abs(sum / 200.0 - 500.0) < 3.0 * std::sqrt(500.0));
  }
  SUBCASE("degenerate window is a parameter error") {
    Box degenerate{{0.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(sample_poisson_points(1.0, degenerate, 1), ParameterError);
    CHECK_THROWS_AS(sample_poisson_points(0.0, box2(0, 1), 1), ParameterError);
  }
  SUBCASE("same seed reproduces the cloud") {
    const PointCloud a = sample_poisson_points(3.0, box2(0, 5), 99);
    const PointCloud b = sample_poisson_points(3.0, box2(0, 5), 99);
    CHECK(a.coords == b.coords);
  }
  SUBCASE("points lie in the window") {
    const PointCloud c = sample_poisson_points(2.0, box2(-1, 1), 5);
    for (int i = 0; i < c.n_points(); ++i) CHECK(c.window.contains(c.point(i)));
  }
}

TEST_CASE("energy marks") {
  const PointCloud cloud = sample_poisson_points(1.0, Box{{0.0}, {100000.0}}, 11);
  const int n = cloud.n_points();
  REQUIRE(n > 50000);
  SUBCASE("alpha 0 is uniform, E|E| = 1/2") {
    const Vec marks = sample_energy_marks(cloud, 0.0, 1.0, 3);
    double s = 0.0;
    for (double e : marks) s += std::abs(e);
    CHECK(std::abs(s / n - 0.5) < 0.005);
  }
  SUBCASE("alpha 1 gives E|E| = 2/3") {
    const Vec marks = sample_energy_marks(cloud, 1.0, 1.0, 3);
    double s = 0.0;
    for (double e : marks) s += std::abs(e);
    CHECK(std::abs(s / n - 2.0 / 3.0) < 2.0 / 300.0);
  }
  SUBCASE("support bound holds for every draw") {
    const Vec marks = sample_energy_marks(cloud, 2.5, 1.0, 4);
    for (double e : marks) CHECK(std::abs(e) <= 1.0);
  }
  SUBCASE("negative alpha rejected") {
    CHECK_THROWS_AS(sample_energy_marks(cloud, -0.5, 1.0, 3), ParameterError);
  }
}

TEST_CASE("lattice point enumeration") {
  SUBCASE("1-d window (-2.5, 2.5)") {
    const PointCloud c = lattice_points(1, Box{{-2.5}, {2.5}});
    CHECK(c.n_points() == 5);
    CHECK(c.point(0)[0] == -2.0);
    CHECK(c.point(4)[0] == 2.0);
  }
  SUBCASE("2-d 3x3 grid") {
    const PointCloud c = lattice_points(2, box2(-1.5, 1.5));
    CHECK(c.n_points() == 9);
  }
  SUBCASE("no integer points") {
    const PointCloud c = lattice_points(2, box2(0.1, 0.9));
    CHECK(c.n_points() == 0);
  }
}

TEST_CASE("edge conductance per model") {
  SUBCASE("MA with beta 0 only sees the distance") {
    PointCloud cloud;
    cloud.dim = 2;
    cloud.coords = {0.0, 0.0, 1.0, 0.0};
    cloud.window = box2(-1, 2);
    Environment env(cloud, MillerAbrahams{2.0, 0.0, 0.0, 1.0, 1e-12}, 7);
    const double c = env.edge_conductance(cloud.point(0), cloud.point(1));
    CHECK(c == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("zero marks kill the energy term at any beta") {
    PointCloud cloud;
    cloud.dim = 2;
    cloud.coords = {0.0, 0.0, 1.0, 0.0};
    cloud.window = box2(-1, 2);
    Environment env(cloud, MillerAbrahams{2.0, 10.0, 0.0, 1.0, 1e-12}, 7, Vec{0.0, 0.0});
    const double c = env.edge_conductance(cloud.point(0), cloud.point(1));
    CHECK(c == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("percolation p=1 keeps every nearest-neighbor bond") {
    Environment env = lattice_env(2, 2.5, BondPercolation{1.0});
    const auto& cloud = env.cloud();
    const int origin = env.find_point(Vec{0.0, 0.0});
    const int right = env.find_point(Vec{1.0, 0.0});
    const int diag = env.find_point(Vec{1.0, 1.0});
    REQUIRE(origin >= 0);
    CHECK(env.edge_conductance(cloud.point(origin), cloud.point(right)) == 1.0);
    CHECK(env.edge_conductance(cloud.point(origin), cloud.point(diag)) == 0.0);
  }
  SUBCASE("MA formula with explicit marks") {
    PointCloud cloud;
    cloud.dim = 2;
    cloud.coords = {0.0, 0.0, 3.0, 4.0};  // distance 5
    cloud.window = box2(-1, 5);
    const double gamma = 1.5, beta = 2.5;
    Environment env(cloud, MillerAbrahams{gamma, beta, 0.0, 1.0, 0.0}, 7, Vec{0.3, -0.2});
    const double expected =
        std::exp(-2.0 / gamma * 5.0 - 0.5 * beta * (0.3 + 0.2 + 0.5));
    CHECK(env.conductance_by_index(0, 1) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(env.conductance_by_index(0, 0) == 0.0);  // self conductance
  }
  SUBCASE("MA cutoff zeroes weak filaments") {
    PointCloud cloud;
    cloud.dim = 1;
    cloud.coords = {0.0, 10.0};
    cloud.window = Box{{-1.0}, {11.0}};
    Environment env(cloud, MillerAbrahams{1.0, 0.0, 0.0, 1.0, 1e-3}, 7);
    CHECK(env.conductance_by_index(0, 1) == 0.0);  // exp(-20) below cutoff
  }
  SUBCASE("coinciding arguments violate the contract") {
    Environment env = lattice_env(2, 1.5, BondPercolation{0.5});
    const auto p = env.cloud().point(0);
    CHECK_THROWS_AS(env.edge_conductance(p, p), ContractError);
  }
  SUBCASE("unknown point is a lookup error") {
    Environment env = lattice_env(2, 1.5, BondPercolation{0.5});
    const Vec outside{7.5, 7.5};
    CHECK_THROWS_AS(env.edge_conductance(env.cloud().point(0), outside), LookupError);
  }
}

TEST_CASE("conductance symmetry across models") {
  std::vector<ConductanceModel> models;
  models.push_back(LatticeRcm{RcmWeights{RcmWeights::Kind::Uniform, 1.0, 1.0, 2.0, {}, 1.0, 2.0}});
  models.push_back(BondPercolation{0.5});
  models.push_back(MillerAbrahams{1.0, 2.0, 0.0, 1.0, 1e-10});
  for (auto& m : models) {
    Environment env = lattice_env(2, 3.5, std::move(m), 17);
    const int n = env.cloud().n_points();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        CHECK(env.conductance_by_index(i, j) == env.conductance_by_index(j, i));
  }
}

TEST_CASE("determinism and translation covariance of hashed fields") {
  RcmWeights w;
  w.kind = RcmWeights::Kind::Uniform;
  w.lo = 1.0;
  w.hi = 2.0;
  Environment a = lattice_env(2, 3.5, LatticeRcm{w}, 5);
  // same seed, window shifted by an integer vector: same absolute edges
  Box shifted{{-1.5, -2.5}, {5.5, 4.5}};
  Environment b(lattice_points(2, shifted), LatticeRcm{w}, 5);
  const Vec x{0.0, 0.0}, y{1.0, 0.0};
  const double ca = a.edge_conductance(x, y);
  const double cb = b.edge_conductance(x, y);
  CHECK(ca == cb);
  CHECK(ca >= 1.0);
  CHECK(ca <= 2.0);

  // field evaluation does not depend on cloud enumeration order
  const int ia = a.find_point(x), ja = a.find_point(y);
  const int ib = b.find_point(x), jb = b.find_point(y);
  CHECK(a.conductance_by_index(ia, ja) == b.conductance_by_index(ib, jb));
}

TEST_CASE("lambda_k estimation") {
  SUBCASE("homogeneous Z^2 moments are exact") {
    Environment env = lattice_env(2, 6.5, LatticeRcm{RcmWeights{}});
    const LambdaEstimate l0 = estimate_lambda_k(env, 0, box2(-4.5, 4.5));
    CHECK(l0.value == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(l0.std_error == doctest::Approx(0.0));
    const LambdaEstimate l2 = estimate_lambda_k(env, 2, box2(-4.5, 4.5));
    CHECK(l2.value == doctest::Approx(4.0).epsilon(1e-14));
  }
  SUBCASE("percolation p=0.5 has mean weighted degree 2") {
    Environment env = lattice_env(2, 52.5, BondPercolation{0.5}, 23);
    const LambdaEstimate l0 = estimate_lambda_k(env, 0, box2(-50.5, 50.5));
    CHECK(l0.sample_count >= 10000);
    CHECK(std::abs(l0.value - 2.0) < 3.0 * l0.std_error);
  }
  SUBCASE("probe window must leave the interaction margin") {
    Environment env = lattice_env(2, 3.5, BondPercolation{0.5});
    CHECK_THROWS_AS(estimate_lambda_k(env, 0, box2(-3.4, 3.4)), ParameterError);
  }
  SUBCASE("empty probe set") {
    Environment env = lattice_env(2, 3.5, BondPercolation{0.5});
    CHECK_THROWS_AS(estimate_lambda_k(env, 0, box2(0.1, 0.9)), EstimationError);
  }
  SUBCASE("k outside {0,2}") {
    Environment env = lattice_env(2, 3.5, BondPercolation{0.5});
    CHECK_THROWS_AS(estimate_lambda_k(env, 1, box2(-1.5, 1.5)), ParameterError);
  }
}

TEST_CASE("MA dropped-mass bound dominates the sampled dropped mass") {
  const MillerAbrahams ma{1.0, 2.0, 0.0, 1.0, 1e-4};  // large cutoff drops real edges
  Box window = box2(0, 12);
  Environment env(sample_poisson_points(1.0, window, 31), ma, 31);
  const LambdaEstimate l0 = estimate_lambda_k(env, 0, box2(5.0, 7.0));
  // brute-force dropped mass per probe point over the whole sampled cloud
  const auto& cloud = env.cloud();
  double actual_max = 0.0;
  for (int i = 0; i < cloud.n_points(); ++i) {
    if (!box2(5.0, 7.0).contains(cloud.point(i))) continue;
    double dropped = 0.0;
    for (int j = 0; j < cloud.n_points(); ++j) {
      if (j == i) continue;
      double r2 = 0.0;
      for (int k = 0; k < 2; ++k)
        r2 += (cloud.point(i)[k] - cloud.point(j)[k]) * (cloud.point(i)[k] - cloud.point(j)[k]);
      const double energy = std::abs(env.marks()[i]) + std::abs(env.marks()[j]) +
                            std::abs(env.marks()[i] - env.marks()[j]);
      const double raw = std::exp(-2.0 / ma.gamma * std::sqrt(r2) - 0.5 * ma.beta * energy);
      if (raw < ma.cutoff) dropped += raw;
    }
    actual_max = std::max(actual_max, dropped);
  }
  CHECK(l0.dropped_mass_bound >= actual_max);
  CHECK(l0.dropped_mass_bound > 0.0);
}
