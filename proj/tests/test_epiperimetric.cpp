#include <catch2/catch_amalgamated.hpp>

#include "vop/epiperimetric.hpp"

using namespace vop;

TEST_CASE("homogeneous extension is exactly r^2 g at the nodes") {
  PolarGrid grid;
  grid.n_r = 32;
  grid.n_theta = 64;
  HomogeneousDatum d = perturbation_family(PerturbationMode::angular_mode, 0.1, grid, 3);
  PolarField c = homogeneous_extension(d);
  for (int i : {0, 7, 31})
    for (int j : {0, 11, 63}) {
      const double r2 = sq(grid.radius(i));
      CHECK(c.at(i, j)[0] == r2 * d.at(j)[0]);
    }
  // scaling between rings is exactly quadratic by construction
  const double r_a = grid.radius(5), r_b = grid.radius(20);
  for (int j = 0; j < grid.n_theta; j += 9)
    CHECK(c.at(5, j)[0] * r_b * r_b == Catch::Approx(c.at(20, j)[0] * r_a * r_a).margin(1e-18));

  HomogeneousDatum z;
  z.grid = grid;
  z.m = 1;
  z.g.assign(static_cast<std::size_t>(grid.n_theta), 0.0);
  PolarField cz = homogeneous_extension(z);
  for (double v : cz.values) CHECK(v == 0.0);
}

TEST_CASE("perturbation families") {
  PolarGrid grid;
  SECTION("amplitude 0 is exactly the canonical trace") {
    HomogeneousDatum d = perturbation_family(PerturbationMode::amplitude, 0.0, grid);
    for (int j = 0; j < grid.n_theta; ++j) {
      const double s = std::max(std::sin(grid.theta(j)), 0.0);
      CHECK(d.at(j)[0] == 0.5 * s * s);
    }
    CHECK(d.delta_to_H <= 1e-6);
  }
  SECTION("rotations stay inside the family") {
    HomogeneousDatum d = perturbation_family(PerturbationMode::rotation, 0.1, grid);
    CHECK(d.delta_to_H <= 1e-6);
  }
  SECTION("angular harmonics leave the family") {
    HomogeneousDatum d = perturbation_family(PerturbationMode::angular_mode, 0.1, grid, 3);
    CHECK(d.delta_to_H > 0.05);
  }
  SECTION("guards") {
    CHECK_THROWS_AS(perturbation_family(PerturbationMode::amplitude, 0.7, grid), InvalidMode);
    CHECK_THROWS_AS(parse_mode("unknown"), InvalidMode);
    CHECK(parse_mode("angular_mode_2") == PerturbationMode::angular_mode);
  }
}

TEST_CASE("discrete balanced energy matches closed forms on homogeneous data") {
  PolarGrid grid;
  auto M_c_of = [&](PerturbationMode m, double delta, int k = 2) {
    return polar_M(homogeneous_extension(perturbation_family(m, delta, grid, k)));
  };
  // closed forms: M((1+d)h) = (pi/16)(1 - d^2);
  //               M(h + d cos(2 theta) ext) = pi/16 + d
  CHECK(M_c_of(PerturbationMode::amplitude, 0.0) == Catch::Approx(pi / 16).margin(3e-4));
  CHECK(M_c_of(PerturbationMode::amplitude, 0.1) ==
        Catch::Approx((pi / 16) * (1 - 0.01)).margin(3e-4));
  CHECK(M_c_of(PerturbationMode::rotation, 0.1) == Catch::Approx(pi / 16).epsilon(0.01));
  CHECK(M_c_of(PerturbationMode::angular_mode, 0.1) == Catch::Approx(pi / 16 + 0.1).margin(3e-4));
  const double d = 0.1;
  const double second_closed =
      -pi / 16 - d * d * pi / 2 + (pi / 4) * std::sqrt(0.25 + d * d) + d * pi / 4;
  CHECK(M_c_of(PerturbationMode::second_component, d) == Catch::Approx(second_closed).margin(3e-4));
}

TEST_CASE("minimising with the canonical trace keeps the balanced energy at alpha/2") {
  HomogeneousDatum d = perturbation_family(PerturbationMode::amplitude, 0.0, PolarGrid{});
  auto [res, v] = minimize_M(d);
  CHECK(res.M_c == Catch::Approx(pi / 16).epsilon(0.01));
  CHECK(res.M_v == Catch::Approx(pi / 16).epsilon(0.01));
  CHECK(res.M_v <= res.M_c + 1e-10);
  CHECK(std::abs(res.denominator) <= 2e-3);
}

TEST_CASE("amplitude data sits below alpha/2 and still improves strictly") {
  // closed form M((1+d)h) = (pi/16)(1-d^2) < pi/16: outside the inequality's
  // regime, flagged rather than clamped
  HomogeneousDatum d = perturbation_family(PerturbationMode::amplitude, 0.1, PolarGrid{});
  auto [res, v] = minimize_M(d);
  CHECK(res.denominator < 0.0);
  CHECK(res.status == EpiStatus::below_alpha_half);
  CHECK(res.M_v < res.M_c);

  // independent competitor scan: v_beta = (1 + d r^beta) h matches the datum
  // on the ring. The scalar profile is a critical point of the balanced
  // energy, so this family is first-order degenerate (dM/dbeta-improvement
  // vanishes); the minimiser must still not lose to any member.
  const PolarGrid& grid = d.grid;
  double best_beta_M = std::numeric_limits<double>::infinity();
  for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0}) {
    PolarField w(grid, 1);
    for (int i = 0; i < grid.n_r; ++i) {
      const double r = grid.radius(i);
      for (int j = 0; j < grid.n_theta; ++j) {
        const double s = std::max(std::sin(grid.theta(j)), 0.0);
        w.at(i, j)[0] = (1.0 + 0.1 * std::pow(r, beta)) * r * r * 0.5 * s * s;
      }
    }
    best_beta_M = std::min(best_beta_M, polar_M(w));
  }
  CHECK(best_beta_M <= res.M_c + 1e-12);     // beta = 0 reproduces c
  CHECK(res.M_v <= best_beta_M + 1e-10);     // the minimiser beats the family
}

TEST_CASE("off-family data yields a definite epiperimetric gain") {
  SECTION("angular mode 2") {
    HomogeneousDatum d = perturbation_family(PerturbationMode::angular_mode, 0.1, PolarGrid{}, 2);
    auto [res, v] = minimize_M(d);
    REQUIRE(res.status == EpiStatus::ok);
    CHECK(res.denominator == Catch::Approx(0.1).epsilon(0.05));
    CHECK(res.kappa_achieved >= 0.01);
    CHECK(res.M_v <= res.M_c + 1e-10);
  }
  SECTION("second component") {
    HomogeneousDatum d = perturbation_family(PerturbationMode::second_component, 0.1, PolarGrid{});
    auto [res, v] = minimize_M(d);
    REQUIRE(res.status == EpiStatus::ok);
    CHECK(res.kappa_achieved >= 0.01);
    CHECK(res.M_v <= res.M_c + 1e-10);
  }
  SECTION("zero data is flagged below the model value") {
    HomogeneousDatum z;
    z.grid = PolarGrid{};
    z.m = 1;
    z.g.assign(static_cast<std::size_t>(z.grid.n_theta), 0.0);
    z.delta_to_H = detail::datum_distance_to_profiles(z);
    auto [res, v] = minimize_M(z);
    CHECK(res.M_c == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.M_v == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.status == EpiStatus::below_alpha_half);
  }
}
