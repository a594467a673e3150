#include <catch2/catch_amalgamated.hpp>

#include "vop/energy.hpp"
#include "vop/solver.hpp"

using namespace vop;

namespace {

double sup_diff(const VectorField& a, const VectorField& b) {
  REQUIRE(a.values.size() == b.values.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s = std::max(s, std::abs(a.values[i] - b.values[i]));
  return s;
}

HalfPlaneSolution oblique_half_plane(int m) {
  HalfPlaneSolution hp;
  hp.nu = {1.0 / std::sqrt(5.0), 2.0 / std::sqrt(5.0), 0.0};
  hp.e.assign(static_cast<std::size_t>(m), 0.0);
  hp.e[0] = 1.0;
  if (m > 1) {
    hp.e[0] = 1.0 / std::sqrt(2.0);
    hp.e[1] = 1.0 / std::sqrt(2.0);
  }
  return hp;
}

}  // namespace

TEST_CASE("prox_shrink closed form") {
  std::vector<double> z{3.0, 4.0};
  auto r = prox_shrink(z, 1.0);
  CHECK(r[0] == Catch::Approx(1.8).margin(1e-15));
  CHECK(r[1] == Catch::Approx(2.4).margin(1e-15));

  auto small = prox_shrink(std::vector<double>{0.5, 0.0}, 1.0);
  CHECK(small[0] == 0.0);
  CHECK(small[1] == 0.0);

  auto zero = prox_shrink(std::vector<double>{0.0, 0.0}, 0.3);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("zero boundary data yields the zero field") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 17);
  BoundaryData bd;
  bd.m = 2;
  bd.values.assign(boundary_nodes(g).size() * 2, 0.0);
  auto [u, rep] = solve(g, 2, bd);
  CHECK(u.sup_norm() == 0.0);
  CHECK(rep.converged);
}

TEST_CASE("1d profile: oracle and solver agree, profile monotone nonnegative") {
  Grid g = make_cube_grid(1, 0.0, 1.0, 5);
  BoundaryData bd;
  bd.m = 1;
  bd.values = {0.0, 0.5};  // u(0) = 0, u(1) = 0.5
  VectorField uo = oracle_solve(g, 1, bd);
  SolveParams p;
  p.tol_rel_energy = 1e-14;
  p.max_iter = 200000;
  auto [us, rep] = solve(g, 1, bd, p);
  CHECK(rep.converged);
  CHECK(sup_diff(uo, us) <= 1e-8);
  for (std::int64_t i = 0; i < g.nodes(); ++i) CHECK(uo.values[static_cast<std::size_t>(i)] >= -1e-15);
  for (std::int64_t i = 0; i + 1 < g.nodes(); ++i)
    CHECK(uo.values[static_cast<std::size_t>(i + 1)] >= uo.values[static_cast<std::size_t>(i)] - 1e-15);
}

TEST_CASE("oracle equivalence on seeded 8x8 instances") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 8);
  for (std::uint64_t seed : {11u, 12u}) {
    BoundaryData bd = random_boundary(g, 2, seed);
    VectorField uo = oracle_solve(g, 2, bd);
    SolveParams p;
    p.tol_rel_energy = 1e-14;
    p.max_iter = 500000;
    auto [us, rep] = solve(g, 2, bd, p);
    CHECK(rep.converged);
    CHECK(sup_diff(uo, us) <= 1e-6);
  }
}

TEST_CASE("oracle guards instance size") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 16);
  BoundaryData bd = random_boundary(g, 2, 1);
  CHECK_THROWS_AS(oracle_solve(g, 2, bd), InstanceTooLarge);
}

TEST_CASE("mirror-symmetric boundary data gives a symmetric minimiser") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 9);
  // data even in x1: value depends on |x1| and x2
  BoundaryData bd;
  bd.m = 1;
  const auto bn = boundary_nodes(g);
  bd.values.resize(bn.size());
  for (std::size_t k = 0; k < bn.size(); ++k) {
    const Point p = g.node_point(bn[k]);
    bd.values[k] = 0.4 * p[0] * p[0] + 0.3 * std::max(p[1], 0.0) * p[1];
  }
  VectorField u = oracle_solve(g, 1, bd);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    auto idx = g.node_multi(i);
    auto mirrored = idx;
    mirrored[0] = g.count[0] - 1 - idx[0];
    CHECK(u.values[static_cast<std::size_t>(i)] ==
          Catch::Approx(u.values[static_cast<std::size_t>(g.node_index(mirrored))]).margin(1e-12));
  }
}

TEST_CASE("non-accelerated energy history is exactly nonincreasing") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 33);
  BoundaryData bd = random_boundary(g, 2, 5);
  SolveParams p;
  p.momentum = false;
  p.tol_rel_energy = 1e-12;
  p.max_iter = 20000;
  auto [u, rep] = solve(g, 2, bd, p);
  REQUIRE(rep.energy_history_decimated.size() >= 2);
  for (std::size_t i = 0; i + 1 < rep.energy_history_decimated.size(); ++i)
    REQUIRE(rep.energy_history_decimated[i + 1] <= rep.energy_history_decimated[i]);
}

TEST_CASE("uniqueness: zero seed and random seed converge to the same field") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 33);
  BoundaryData bd = random_boundary(g, 2, 77);
  SolveParams p;
  p.tol_rel_energy = 1e-13;
  p.max_iter = 400000;
  auto [u0, rep0] = solve(g, 2, bd, p);
  REQUIRE(rep0.converged);

  SolveParams p2 = p;
  VectorField seed(g, 2);
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (auto& v : seed.values) v = dist(rng);
  p2.seed_field = seed;
  auto [u1, rep1] = solve(g, 2, bd, p2);
  REQUIRE(rep1.converged);
  CHECK(sup_diff(u0, u1) <= 1e-6);
}

TEST_CASE("half-plane boundary data reproduces the profile") {
  // oblique normal: the interpolated profile is not a discrete lattice
  // equilibrium, so this exercises genuine discretisation error
  Grid g = make_cube_grid(2, -1.0, 1.0, 65);
  const double h = g.spacing[0];
  HalfPlaneSolution hp = oblique_half_plane(2);
  BoundaryData bd = half_plane_boundary(g, hp);
  SolveParams p;
  p.tol_rel_energy = 1e-13;
  p.max_iter = 400000;
  auto [u, rep] = solve(g, 2, bd, p);
  REQUIRE(rep.converged);
  VectorField exact = eval_half_plane(g, hp);
  CHECK(sup_diff(u, exact) <= 10.0 * h * h);
}

TEST_CASE("residuals of the exact profile and the zero field") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 65);
  VectorField f = eval_half_plane(g, canonical_half_plane(2, 2));
  ResidualReport r = residual(f, 1e-6);
  CHECK(r.pde_residual_sup <= 1e-10);
  CHECK(r.zero_set_laplacian_sup <= 1e-10);

  VectorField z(g, 2);
  ResidualReport rz = residual(z, 1e-6);
  CHECK(rz.pde_residual_sup == 0.0);
  CHECK(rz.zero_set_laplacian_sup == 0.0);
  CHECK(rz.vacuous);
}

TEST_CASE("solved random-boundary field satisfies the system away from the kink") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 129);
  BoundaryData bd = random_boundary(g, 2, 424242);
  SolveParams p;
  p.tol_rel_energy = 1e-13;
  p.max_iter = 400000;
  auto [u, rep] = solve(g, 2, bd, p);
  REQUIRE(rep.converged);
  ResidualReport r = residual(u, default_delta(u));
  CHECK(r.pde_residual_sup <= 5e-2);
}

TEST_CASE("interior gradient bound holds with a uniform constant") {
  // ratio (sup_{B_3/4}|u| + sup_{B_3/4}|grad u|) / (L1 norm on B_1 + 1),
  // frozen regression bound across the small corpus
  auto ratio_for = [](const BoundaryData& bd, const Grid& g, int m) {
    SolveParams p;
    p.tol_rel_energy = 1e-12;
    p.max_iter = 200000;
    auto [u, rep] = solve(g, m, bd, p);
    REQUIRE(rep.converged);
    const GradientField gr = gradient(u);
    double supu = 0.0, supg = 0.0;
    for (std::int64_t i = 0; i < g.nodes(); ++i) {
      const Point x = g.node_point(i);
      if (norm(x, g.dim) > 0.75) continue;
      supu = std::max(supu, u.norm_at(i));
      supg = std::max(supg, std::sqrt(gr.frob2_at(i)));
    }
    const double l1 = detail::ball_cell_integral(g, detail::norm_nodal(u), Ball{Point{}, 1.0});
    return (supu + supg) / (l1 + 1.0);
  };
  Grid g = make_cube_grid(2, -1.0, 1.0, 65);
  CHECK(ratio_for(half_plane_boundary(g, canonical_half_plane(2, 2)), g, 2) <= 3.0);
  CHECK(ratio_for(random_boundary(g, 2, 9), g, 2) <= 3.0);
  CHECK(ratio_for(rotated_boundary(g, 0.5, 2), g, 2) <= 3.0);
}
