#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "vop/energy.hpp"
#include "vop/field_io.hpp"

using namespace vop;

TEST_CASE("make_grid derives spacing and node coordinates") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 129);
  CHECK(g.spacing[0] == Catch::Approx(1.0 / 64).epsilon(0));
  CHECK(g.spacing[1] == Catch::Approx(1.0 / 64).epsilon(0));
  CHECK(g.nodes() == 129 * 129);
  // node coordinates reproducible as lo + i*h
  CHECK(g.coord(0, 64) == Catch::Approx(0.0).margin(1e-15));
  CHECK(g.coord(1, 128) == 1.0);

  Grid g3 = make_cube_grid(3, 0.0, 1.0, 65);
  CHECK(g3.spacing[2] == Catch::Approx(1.0 / 64).epsilon(0));
  CHECK(g3.nodes() == 65ll * 65 * 65);
}

TEST_CASE("make_grid guards") {
  CHECK_THROWS_AS(make_cube_grid(2, -1.0, 1.0, 2), ResolutionTooSmall);
  CHECK_THROWS_AS(make_cube_grid(4, -1.0, 1.0, 9), InvalidDimension);
  std::array<std::array<double, 2>, 1> ext{{{1.0, -1.0}}};
  std::array<std::int64_t, 1> res{9};
  CHECK_THROWS_AS(make_grid(1, ext, res), DegenerateExtent);
}

TEST_CASE("eval_half_plane node values") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 21);  // h = 0.1, nodes at multiples of 0.1
  HalfPlaneSolution hp = canonical_half_plane(2, 2);
  VectorField f = eval_half_plane(g, hp);
  auto at = [&](double x, double y) {
    std::array<std::int64_t, 3> idx{static_cast<std::int64_t>(std::lround((x + 1) / 0.1)),
                                    static_cast<std::int64_t>(std::lround((y + 1) / 0.1)), 0};
    return f.at(g.node_index(idx));
  };
  CHECK(at(0.3, 0.5)[0] == Catch::Approx(0.125).margin(1e-15));
  CHECK(at(0.3, 0.5)[1] == 0.0);
  CHECK(at(0.3, -0.5)[0] == 0.0);

  HalfPlaneSolution diag;
  diag.nu = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0};
  diag.e = {1.0};
  VectorField fd = eval_half_plane(g, diag);
  CHECK(fd.at(g.node_index({15, 15, 0}))[0] == Catch::Approx(0.25).margin(1e-14));
}

TEST_CASE("gradient is quadratically exact at interior nodes") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 21);
  VectorField f = eval_half_plane(g, canonical_half_plane(2, 2));
  GradientField gr = gradient(f);
  const std::int64_t id = g.node_index({13, 15, 0});  // (0.3, 0.5)
  CHECK(gr.at(id, 0, 0) == Catch::Approx(0.0).margin(1e-14));
  CHECK(gr.at(id, 0, 1) == Catch::Approx(0.5).margin(1e-14));
  CHECK(gr.at(id, 1, 0) == 0.0);
  CHECK(gr.at(id, 1, 1) == 0.0);
  // flat region
  const std::int64_t idneg = g.node_index({13, 5, 0});  // (0.3, -0.5)
  CHECK(gr.at(idneg, 0, 0) == 0.0);
  CHECK(gr.at(idneg, 0, 1) == 0.0);

  VectorField cst(g, 1);
  for (auto& v : cst.values) v = 3.25;
  GradientField gc = gradient(cst);
  for (double v : gc.values) CHECK(v == 0.0);
}

TEST_CASE("laplacian reproduces the model identities") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 33);
  VectorField f = eval_half_plane(g, canonical_half_plane(2, 2));
  VectorField lap = laplacian(f);
  // interior node in {x2 > 0}, one cell above the kink line
  const std::int64_t id = g.node_index({16, 20, 0});
  CHECK(lap.at(id)[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(lap.at(id)[1] == Catch::Approx(0.0).margin(1e-15));

  // linear field
  VectorField lin(g, 1);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    Point p = g.node_point(i);
    lin.values[static_cast<std::size_t>(i)] = 2.0 * p[0] - 0.5 * p[1] + 1.0;
  }
  VectorField ll = laplacian(lin);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    if (g.is_boundary(g.node_multi(i))) continue;
    CHECK(std::abs(ll.values[static_cast<std::size_t>(i)]) < 1e-12);
  }

  // u = |x|^2/4 has Laplacian 1 everywhere in 2D
  VectorField q(g, 2);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    Point p = g.node_point(i);
    q.at(i)[0] = 0.25 * (p[0] * p[0] + p[1] * p[1]);
  }
  VectorField lq = laplacian(q);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    if (g.is_boundary(g.node_multi(i))) continue;
    CHECK(lq.at(i)[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(lq.at(i)[1] == 0.0);
  }
}

TEST_CASE("gradient and laplacian are linear operators") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 17);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorField u(g, 2), v(g, 2);
  for (auto& x : u.values) x = dist(rng);
  for (auto& x : v.values) x = dist(rng);
  const double a = 1.7, b = -0.3;
  VectorField w(g, 2);
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] = a * u.values[i] + b * v.values[i];

  GradientField gu = gradient(u), gv = gradient(v), gw = gradient(w);
  for (std::size_t i = 0; i < gw.values.size(); ++i)
    REQUIRE(gw.values[i] == Catch::Approx(a * gu.values[i] + b * gv.values[i]).margin(1e-12));

  VectorField lu = laplacian(u), lv = laplacian(v), lw = laplacian(w);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    if (g.is_boundary(g.node_multi(i))) continue;
    for (int c = 0; c < 2; ++c)
      REQUIRE(lw.at(i)[static_cast<std::size_t>(c)] ==
              Catch::Approx(a * lu.at(i)[static_cast<std::size_t>(c)] +
                            b * lv.at(i)[static_cast<std::size_t>(c)])
                  .margin(1e-9));
  }
}

TEST_CASE("laplacian of 0.5*(x.nu)^2 equals |nu|^2 = 1 at interior nodes") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 25);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Point nu{dist(rng), dist(rng), 0.0};
  const double nn = norm(nu, 2);
  nu[0] /= nn;
  nu[1] /= nn;
  VectorField f(g, 1);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    const double t = dot(g.node_point(i), nu, 2);
    f.values[static_cast<std::size_t>(i)] = 0.5 * t * t;
  }
  VectorField lap = laplacian(f);
  for (std::int64_t i = 0; i < g.nodes(); ++i) {
    if (g.is_boundary(g.node_multi(i))) continue;
    REQUIRE(lap.values[static_cast<std::size_t>(i)] == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("trace_sphere samples and guards") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 129);
  VectorField f = eval_half_plane(g, canonical_half_plane(2, 2));
  SphereTrace tr = trace_sphere(f, Point{}, 0.5, 64);
  const double h = g.spacing[0];
  // value at theta = pi/2 is h(0, 0.5) = 0.125
  const std::size_t j = 16;  // 64 angles, pi/2 at index 16
  CHECK(tr.directions[j][1] == Catch::Approx(1.0).margin(1e-14));
  CHECK(tr.values[j * 2] == Catch::Approx(0.125).margin(2 * h * h));
  CHECK(tr.values[j * 2 + 1] == 0.0);

  VectorField z(g, 1);
  SphereTrace tz = trace_sphere(z, Point{}, 0.5, 64);
  for (double v : tz.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(trace_sphere(f, Point{0.9, 0.9, 0.0}, 0.5, 64), BallNotContained);
}

TEST_CASE("trace_sphere converges at second order for a quadratic field") {
  auto trace_err = [](std::int64_t nnodes) {
    Grid g = make_cube_grid(2, -1.0, 1.0, nnodes);
    VectorField f(g, 1);
    for (std::int64_t i = 0; i < g.nodes(); ++i) {
      const Point p = g.node_point(i);
      f.values[static_cast<std::size_t>(i)] = 0.3 * p[0] * p[0] + 0.2 * p[0] * p[1] - 0.15 * p[1] * p[1];
    }
    SphereTrace tr = trace_sphere(f, Point{0.1, -0.05, 0.0}, 0.6, 64);
    double err = 0.0;
    for (std::size_t j = 0; j < tr.directions.size(); ++j) {
      const double x = 0.1 + 0.6 * tr.directions[j][0];
      const double y = -0.05 + 0.6 * tr.directions[j][1];
      const double exact = 0.3 * x * x + 0.2 * x * y - 0.15 * y * y;
      err = std::max(err, std::abs(tr.values[j] - exact));
    }
    return err;
  };
  const double e1 = trace_err(65);
  const double e2 = trace_err(129);
  CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("gauss-legendre rule integrates polynomials") {
  GaussLegendre gl = gauss_legendre(16);
  double sw = 0.0, sx2 = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    sw += gl.weights[i];
    sx2 += gl.weights[i] * gl.nodes[i] * gl.nodes[i];
  }
  CHECK(sw == Catch::Approx(2.0).margin(1e-13));
  CHECK(sx2 == Catch::Approx(2.0 / 3.0).margin(1e-13));
}

TEST_CASE("VOPF1 round trip is bit exact") {
  Grid g = make_cube_grid(3, -0.5, 1.5, 5);
  VectorField f(g, 2);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (auto& v : f.values) v = dist(rng);

  const std::string path = std::filesystem::temp_directory_path() / "vop_io_test.vopf";
  write_field(f, path);
  VectorField r = read_field(path);
  REQUIRE(r.grid.dim == 3);
  REQUIRE(r.m == 2);
  REQUIRE(r.values.size() == f.values.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) REQUIRE(r.values[i] == f.values[i]);
  // re-serialization is byte identical
  const std::string path2 = std::filesystem::temp_directory_path() / "vop_io_test2.vopf";
  write_field(r, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  REQUIRE(sa == sb);

  SECTION("truncated file") {
    std::ofstream t(path2, std::ios::binary | std::ios::trunc);
    t.write(sa.data(), static_cast<std::streamsize>(sa.size() / 2));
    t.close();
    CHECK_THROWS_AS(read_field(path2), FormatError);
  }
  SECTION("bad magic") {
    std::string bad = sa;
    bad[0] = 'X';
    std::ofstream t(path2, std::ios::binary | std::ios::trunc);
    t.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    t.close();
    CHECK_THROWS_AS(read_field(path2), FormatError);
  }
}

TEST_CASE("chunked reductions are independent of thread count") {
  Grid g = make_cube_grid(2, -1.0, 1.0, 65);
  VectorField f = eval_half_plane(g, canonical_half_plane(2, 2));
  set_threads(1);
  const EnergyBreakdown e1 = energy_E(f, Ball{Point{}, 1.0});
  set_threads(4);
  const EnergyBreakdown e4 = energy_E(f, Ball{Point{}, 1.0});
  set_threads(1);
  CHECK(e1.total == e4.total);
  CHECK(e1.dirichlet == e4.dirichlet);
  CHECK(e1.mass == e4.mass);
}
