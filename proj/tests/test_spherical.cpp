#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "vop/spherical.hpp"

using namespace vop;

namespace {

// discrete Rayleigh quotient of the arc operator (cell-centered, reflective
// Dirichlet closure), matching the eigensolver's quadratic form
double arc_rayleigh(const ArcProblem& p, const std::vector<double>& v,
                    const std::vector<double>& nodes) {
  const int n = static_cast<int>(v.size());
  const double dth = (p.theta_hi - p.theta_lo) / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i + 1 < n; ++i) num += sq(v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i)]) / dth;
  num += 2.0 * (sq(v[0]) + sq(v[static_cast<std::size_t>(n - 1)])) / dth;
  for (int i = 0; i < n; ++i) {
    num += p.q(nodes[static_cast<std::size_t>(i)]) * sq(v[static_cast<std::size_t>(i)]) * dth;
    den += sq(v[static_cast<std::size_t>(i)]) * dth;
  }
  return num / den;
}

ArcProblem half_arc_profile_problem(int n_nodes) {
  ArcProblem p;
  p.theta_lo = 0.0;
  p.theta_hi = pi;
  p.q = [](double th) { return 2.0 / sq(std::sin(th)); };
  p.q0 = 2.0;
  p.n_nodes = n_nodes;
  return p;
}

}  // namespace

TEST_CASE("constant potential shifts the free-arc spectrum exactly") {
  ArcProblem p;
  p.theta_lo = 0.0;
  p.theta_hi = pi;
  p.q = [](double) { return 0.01; };
  p.q0 = 0.01;
  p.n_nodes = 2000;
  EigenResult r = eigensolve(p, 3);
  CHECK(r.lambdas[0] == Catch::Approx(1.01).margin(1e-4));
  CHECK(r.lambdas[1] == Catch::Approx(4.01).margin(1e-3));
  CHECK(r.lambdas[2] == Catch::Approx(9.01).margin(5e-3));
}

TEST_CASE("profile potential on the half-circle: lambda_1 = 4, eigenfunction is the trace") {
  ArcProblem p = half_arc_profile_problem(2000);
  EigenResult r = eigensolve(p, 1);
  CHECK(r.lambdas[0] == Catch::Approx(4.0).epsilon(0.005));

  // eigenfunction proportional to sin^2 within 1e-2 relative L2
  const int n = p.n_nodes;
  const double dth = pi / n;
  std::vector<double> target(static_cast<std::size_t>(n));
  double nn = 0.0;
  for (int i = 0; i < n; ++i) {
    target[static_cast<std::size_t>(i)] = sq(std::sin(r.nodes[static_cast<std::size_t>(i)]));
    nn += sq(target[static_cast<std::size_t>(i)]) * dth;
  }
  nn = std::sqrt(nn);
  double err = 0.0;
  for (int i = 0; i < n; ++i)
    err += sq(r.vectors[0][static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)] / nn) * dth;
  CHECK(std::sqrt(err) <= 1e-2);
}

TEST_CASE("profile potential on the half-sphere cap: lambda_1 = 6") {
  CapProblem p;
  p.phi_lo = 0.0;
  p.phi_hi = 0.5 * pi;
  p.q = [](double ph) { return 2.0 / sq(std::cos(ph)); };
  p.q0 = 2.0;
  p.n_nodes = 2000;
  EigenResult r = eigensolve(p, 1);
  CHECK(r.lambdas[0] == Catch::Approx(6.0).epsilon(0.01));
}

TEST_CASE("shift bound") {
  SECTION("constant q attains equality") {
    ArcProblem p;
    p.theta_lo = 0.2;
    p.theta_hi = 2.4;
    p.q = [](double) { return 1.7; };
    p.q0 = 1.7;
    p.n_nodes = 800;
    ShiftBoundReport rep = check_shift_bound(p, 3);
    CHECK(rep.holds);
    CHECK(std::abs(rep.min_slack) <= 1e-8);
  }
  SECTION("non-constant q is strict") {
    ArcProblem p;
    p.theta_lo = 0.0;
    p.theta_hi = pi;
    p.q = [](double th) { return 1.0 + sq(std::sin(th)); };
    p.q0 = 1.0;
    p.n_nodes = 800;
    ShiftBoundReport rep = check_shift_bound(p, 3);
    CHECK(rep.holds);
    CHECK(rep.min_slack >= 1e-3);
  }
  SECTION("unit constant potential on the half-arc gives lambda_1 = 2") {
    ArcProblem p;
    p.theta_lo = 0.0;
    p.theta_hi = pi;
    p.q = [](double) { return 1.0; };
    p.q0 = 1.0;
    p.n_nodes = 1000;
    EigenResult r = eigensolve(p, 1);
    CHECK(r.lambdas[0] == Catch::Approx(2.0).margin(1e-3));
  }
}

TEST_CASE("domain monotonicity") {
  ArcProblem p;
  p.theta_lo = 0.0;
  p.theta_hi = pi;
  p.q = [](double) { return 1.0; };
  p.q0 = 1.0;
  p.n_nodes = 600;
  SECTION("strict increase on a shrunken arc") {
    const std::vector<double> fractions{0.2};
    DomainMonotonicityReport rep = check_domain_monotonicity(p, fractions, 2);
    CHECK(rep.monotone);
    CHECK(rep.lambda1_margin > 1e-6);
    // lambda_1 of the 0.8 pi arc with unit shift: (pi/0.8pi)^2 + 1
    CHECK(rep.lambdas[1][0] == Catch::Approx(1.0 / 0.64 + 1.0).margin(1e-2));
  }
  SECTION("identical domains give identical eigenvalues") {
    const std::vector<double> fractions{0.0};
    DomainMonotonicityReport rep = check_domain_monotonicity(p, fractions, 2);
    CHECK(rep.lambdas[0][0] == Catch::Approx(rep.lambdas[1][0]).margin(1e-12));
    CHECK(rep.lambdas[0][1] == Catch::Approx(rep.lambdas[1][1]).margin(1e-12));
  }
  SECTION("seeded random potentials stay monotone across nested arcs") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> amp(0.0, 0.4);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
    for (int inst = 0; inst < 5; ++inst) {
      const double a1 = amp(rng), a2 = amp(rng), p1 = phase(rng), p2 = phase(rng);
      ArcProblem q = p;
      q.q = [=](double th) {
        return 1.0 + a1 * 0.5 * (1.0 + std::sin(th + p1)) + a2 * 0.5 * (1.0 + std::sin(2 * th + p2));
      };
      const std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5};
      DomainMonotonicityReport rep = check_domain_monotonicity(q, fractions, 2);
      CHECK(rep.monotone);
      CHECK(rep.lambda1_margin > 1e-6);
    }
  }
}

TEST_CASE("half-domain verification") {
  SECTION("dim 2") {
    HalfDomainReport rep = verify_half_sphere(2);
    CHECK(rep.lambda1 == Catch::Approx(4.0).epsilon(0.005));
    CHECK(rep.lambda2 >= 6.0 - 0.1);
    CHECK(rep.lambda1_ok);
    CHECK(rep.gap_ok);
  }
  SECTION("dim 3") {
    HalfDomainReport rep = verify_half_sphere(3);
    CHECK(rep.lambda1 == Catch::Approx(6.0).epsilon(0.01));
    CHECK(rep.lambda2 >= 8.0 - 0.1);
  }
  SECTION("flooring the potential is consistent with the shift bound") {
    // q = 2/sin^2 >= 2, and lambda_1(-Lap') = 1 on the half-arc, so
    // lambda_1 >= 3; the measured 4 clears it
    HalfDomainReport rep = verify_half_sphere(2);
    CHECK(rep.lambda1 >= 3.0 - 1e-6);
  }
}

TEST_CASE("perturbed half-domains keep lambda_2 above 2n for small extensions") {
  SECTION("dim 2, q0 = 1") {
    const std::vector<double> deltas{0.0, 0.05, 0.1};
    PerturbedCapReport rep = check_perturbed_cap(2, deltas, 1.0);
    // delta = 0: lambda_2 = 4 + 1 exactly
    CHECK(rep.samples[0].lambda2 == Catch::Approx(5.0).margin(1e-2));
    for (const auto& s : rep.samples) CHECK(s.above_2n);
    CHECK(rep.delta_threshold >= 0.1);
  }
  SECTION("dim 2, tiny q0 at large delta leaves the regime") {
    const std::vector<double> deltas{0.3};
    PerturbedCapReport rep = check_perturbed_cap(2, deltas, 0.01);
    CHECK_FALSE(rep.samples[0].above_2n);  // reported, not an error
  }
  SECTION("dim 3, q0 = 1") {
    const std::vector<double> deltas{0.0, 0.1};
    PerturbedCapReport rep = check_perturbed_cap(3, deltas, 1.0);
    for (const auto& s : rep.samples) CHECK(s.above_2n);
  }
}

TEST_CASE("spectral invariants") {
  ArcProblem p = half_arc_profile_problem(1000);
  EigenResult r = eigensolve(p, 3);
  SECTION("ascending with a simple first eigenvalue") {
    CHECK(r.lambdas[0] < r.lambdas[1]);
    CHECK(r.lambdas[1] <= r.lambdas[2] + 1e-12);
  }
  SECTION("first eigenfunction is positive inside") {
    double mn = std::numeric_limits<double>::infinity();
    for (double v : r.vectors[0]) mn = std::min(mn, v);
    CHECK(mn > 0.0);
  }
  SECTION("Rayleigh quotient consistency") {
    const double rq = arc_rayleigh(p, r.vectors[0], r.nodes);
    CHECK(std::abs(rq - r.lambdas[0]) <= 1e-8 * (1.0 + std::abs(rq)));
  }
  SECTION("second-order refinement behaviour") {
    auto l1 = [&](int n) {
      ArcProblem q = half_arc_profile_problem(n);
      return eigensolve(q, 1).lambdas[0];
    };
    const double a = l1(250), b = l1(500), c = l1(1000);
    CHECK(std::abs(a - b) <= 4.0 * std::abs(b - c) + 1e-10);
  }
}
