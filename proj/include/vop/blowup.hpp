#pragma once

#include <vector>

#include "vop/energy.hpp"

namespace vop {

/// u_r(x) = u(x0 + r x) / r^2 resampled onto a fixed reference grid covering
/// B_1. Keeping the reference grid fixed across a sequence makes successive
/// differences measure the field, not the mesh.
struct RescaledField {
  Point x0{};
  double radius = 0.0;
  VectorField field;  // on the reference grid
};

inline Grid default_reference_grid(int dim) { return make_cube_grid(dim, -1.0, 1.0, 129); }

inline RescaledField rescale(const VectorField& f, const Point& x0, double r,
                             const Grid& ref_grid) {
  const Grid& g = f.grid;
  if (r <= 0.0) throw Error("rescale: radius must be positive");
  if (!g.contains_ball({x0, r})) throw BallNotContained("rescale: ball exceeds the source grid");
  RescaledField out;
  out.x0 = x0;
  out.radius = r;
  out.field = VectorField(ref_grid, f.m);
  const double inv_r2 = 1.0 / (r * r);
  parallel_for(static_cast<std::size_t>(ref_grid.nodes()), [&](std::size_t ii) {
    const auto id = static_cast<std::int64_t>(ii);
    Point x = ref_grid.node_point(id);
    Point src = x0;
    for (int a = 0; a < g.dim; ++a) src[a] += r * x[a];
    // nodes of the covering cube outside B_1 may fall outside the source
    // grid; clamp them (no consumer integrates outside B_1)
    for (int a = 0; a < g.dim; ++a) src[a] = std::clamp(src[a], g.lo[a], g.hi[a]);
    sample_into(f, src, out.field.at(id));
    for (int c = 0; c < f.m; ++c) out.field.at(id)[static_cast<std::size_t>(c)] *= inv_r2;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Best half-plane profile fit in L^2(B_1). For fixed nu the optimal axis e
// is the normalised projection integral(u h_nu); the nu search runs a coarse
// directional grid, then golden-section refinement on the exact discrete
// objective. Deterministic tie-break: lexicographically smallest nu.
// ---------------------------------------------------------------------------

struct HalfPlaneFit {
  HalfPlaneSolution best;
  double l2_distance = 0.0;
  double w12_distance = 0.0;
};

namespace detail {

inline Point direction_2d(double theta) { return {std::cos(theta), std::sin(theta), 0.0}; }

inline Point direction_3d(double phi, double psi) {
  return {std::sin(phi) * std::cos(psi), std::sin(phi) * std::sin(psi), std::cos(phi)};
}

/// integral over B_1 of u(x) max(x.nu, 0)^2 / 2 dx per component, via
/// precomputed radial moments on a spherical quadrature.
struct ProjectionTable {
  int dim = 0;
  int m = 0;
  std::vector<Point> dirs;
  std::vector<double> weights;  // unit-sphere measure
  std::vector<double> moments;  // dirs x m: integral_0^1 u(r w) r^{n+1} dr
};

inline ProjectionTable build_projection_table(const VectorField& u) {
  const Grid& g = u.grid;
  ProjectionTable t;
  t.dim = g.dim;
  t.m = u.m;
  if (g.dim == 2) {
    const int n_ang = 2048;
    t.dirs.reserve(n_ang);
    t.weights.assign(n_ang, 2.0 * pi / n_ang);
    for (int j = 0; j < n_ang; ++j)
      t.dirs.push_back(direction_2d(2.0 * pi * (j + 0.5) / n_ang));
  } else if (g.dim == 3) {
    const int n_pol = 64, n_az = 128;
    const GaussLegendre gl = gauss_legendre(n_pol);
    for (int i = 0; i < n_pol; ++i)
      for (int j = 0; j < n_az; ++j) {
        const double ct = gl.nodes[static_cast<std::size_t>(i)];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        const double psi = 2.0 * pi * (j + 0.5) / n_az;
        t.dirs.push_back({st * std::cos(psi), st * std::sin(psi), ct});
        t.weights.push_back(gl.weights[static_cast<std::size_t>(i)] * 2.0 * pi / n_az);
      }
  } else {
    t.dirs = {Point{-1, 0, 0}, Point{1, 0, 0}};
    t.weights = {1.0, 1.0};
  }
  const int n_rad = 96;
  t.moments.assign(t.dirs.size() * static_cast<std::size_t>(u.m), 0.0);
  std::vector<double> buf(static_cast<std::size_t>(u.m));
  for (std::size_t d = 0; d < t.dirs.size(); ++d) {
    for (int k = 0; k < n_rad; ++k) {
      const double r = (k + 0.5) / n_rad;
      Point x{};
      for (int a = 0; a < g.dim; ++a) x[a] = r * t.dirs[d][a];
      sample_into(u, x, buf);
      const double w = std::pow(r, g.dim + 1) / n_rad;
      for (int c = 0; c < u.m; ++c)
        t.moments[d * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(c)] += w * buf[static_cast<std::size_t>(c)];
    }
  }
  return t;
}

/// |integral u h_nu| for a candidate direction, from the moment table.
inline double projection_strength(const ProjectionTable& t, const Point& nu,
                                  std::vector<double>* b_out = nullptr) {
  std::vector<double> b(static_cast<std::size_t>(t.m), 0.0);
  for (std::size_t d = 0; d < t.dirs.size(); ++d) {
    const double s = dot(t.dirs[d], nu, t.dim);
    if (s <= 0.0) continue;
    const double w = 0.5 * s * s * t.weights[d];
    for (int c = 0; c < t.m; ++c)
      b[static_cast<std::size_t>(c)] += w * t.moments[d * static_cast<std::size_t>(t.m) + static_cast<std::size_t>(c)];
  }
  double n2 = 0.0;
  for (double v : b) n2 += v * v;
  if (b_out) *b_out = std::move(b);
  return std::sqrt(n2);
}

/// Exact discrete squared L2(B_1) distance between u and the profile
/// (nu, e), and the W^{1,2} variant, via ball-weighted cell quadrature.
inline std::pair<double, double> profile_distance2(const VectorField& u,
                                                   const HalfPlaneSolution& hp) {
  const Grid& g = u.grid;
  VectorField diff = u;
  const VectorField hf = eval_half_plane(g, hp);
  for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= hf.values[i];
  const double l2 = ball_cell_integral(g, norm2_nodal(diff), Ball{Point{}, 1.0});
  const double grad2 = ball_cell_integral(g, grad_norm2_nodal(diff), Ball{Point{}, 1.0});
  return {std::max(l2, 0.0), std::max(l2 + grad2, 0.0)};
}

}  // namespace detail

inline HalfPlaneFit fit_half_plane(const VectorField& u) {
  const Grid& g = u.grid;
  if (!g.contains_ball({Point{}, 1.0}))
    throw BallNotContained("fit_half_plane: grid must contain B_1");
  const double l2norm2 = detail::ball_cell_integral(g, detail::norm2_nodal(u), Ball{Point{}, 1.0});
  if (std::sqrt(l2norm2) < 1e-10) throw DegenerateField("fit_half_plane: field is numerically zero");

  const detail::ProjectionTable table = detail::build_projection_table(u);

  Point best_nu{};
  double best_val = -1.0;
  if (g.dim == 2) {
    const int coarse = 64;
    double best_theta = 0.0;
    for (int j = 0; j < coarse; ++j) {
      const double th = 2.0 * pi * j / coarse;
      const Point nu = detail::direction_2d(th);
      const double v = detail::projection_strength(table, nu);
      if (v > best_val + 1e-15 ||
          (std::abs(v - best_val) <= 1e-15 && nu < best_nu)) {
        best_val = v;
        best_theta = th;
        best_nu = nu;
      }
    }
    const double span = 2.0 * pi / coarse;
    const double th = golden_section(
        [&](double t) { return -detail::projection_strength(table, detail::direction_2d(t)); },
        best_theta - span, best_theta + span, 1e-9);
    best_nu = detail::direction_2d(th);
  } else if (g.dim == 3) {
    const int coarse = 64;
    double best_phi = 0.0, best_psi = 0.0;
    for (int i = 0; i < coarse; ++i)
      for (int j = 0; j < coarse; ++j) {
        const double phi = pi * (i + 0.5) / coarse;
        const double psi = 2.0 * pi * j / coarse;
        const Point nu = detail::direction_3d(phi, psi);
        const double v = detail::projection_strength(table, nu);
        if (v > best_val + 1e-15 ||
            (std::abs(v - best_val) <= 1e-15 && nu < best_nu)) {
          best_val = v;
          best_phi = phi;
          best_psi = psi;
          best_nu = nu;
        }
      }
    // alternate golden refinements in the two angles
    double span_p = pi / coarse, span_s = 2.0 * pi / coarse;
    for (int round = 0; round < 3; ++round) {
      best_phi = golden_section(
          [&](double p) {
            return -detail::projection_strength(table, detail::direction_3d(p, best_psi));
          },
          best_phi - span_p, best_phi + span_p, 1e-8);
      best_psi = golden_section(
          [&](double s) {
            return -detail::projection_strength(table, detail::direction_3d(best_phi, s));
          },
          best_psi - span_s, best_psi + span_s, 1e-8);
      span_p *= 0.25;
      span_s *= 0.25;
    }
    best_nu = detail::direction_3d(best_phi, best_psi);
  } else {
    best_nu = detail::projection_strength(table, Point{1, 0, 0}) >=
                      detail::projection_strength(table, Point{-1, 0, 0})
                  ? Point{1, 0, 0}
                  : Point{-1, 0, 0};
  }

  // polish on the exact discrete objective (its minimum is bit-exact zero
  // for profiles sampled on this grid)
  auto exact_d2 = [&](const Point& nu) {
    std::vector<double> b;
    detail::projection_strength(table, nu, &b);
    double n2 = 0.0;
    for (double v : b) n2 += v * v;
    HalfPlaneSolution hp;
    hp.nu = nu;
    hp.e.assign(static_cast<std::size_t>(u.m), 0.0);
    if (n2 > 0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (int c = 0; c < u.m; ++c) hp.e[static_cast<std::size_t>(c)] = b[static_cast<std::size_t>(c)] * inv;
    } else {
      hp.e[0] = 1.0;
    }
    return std::make_pair(detail::profile_distance2(u, hp).first, hp);
  };

  if (g.dim == 2) {
    double th = std::atan2(best_nu[1], best_nu[0]);
    th = golden_section(
        [&](double t) { return exact_d2(detail::direction_2d(t)).first; }, th - 2e-3, th + 2e-3,
        1e-10);
    best_nu = detail::direction_2d(th);
  } else if (g.dim == 3) {
    double phi = std::acos(std::clamp(best_nu[2], -1.0, 1.0));
    double psi = std::atan2(best_nu[1], best_nu[0]);
    for (int round = 0; round < 2; ++round) {
      phi = golden_section(
          [&](double p) { return exact_d2(detail::direction_3d(p, psi)).first; }, phi - 2e-3,
          phi + 2e-3, 1e-9);
      psi = golden_section(
          [&](double s) { return exact_d2(detail::direction_3d(phi, s)).first; }, psi - 2e-3,
          psi + 2e-3, 1e-9);
    }
    best_nu = detail::direction_3d(phi, psi);
  }

  auto [d2, hp] = exact_d2(best_nu);
  HalfPlaneFit fit;
  fit.best = hp;
  const auto [l2sq, w12sq] = detail::profile_distance2(u, hp);
  fit.l2_distance = std::sqrt(l2sq);
  fit.w12_distance = std::sqrt(w12sq);
  (void)d2;
  return fit;
}

inline HalfPlaneFit fit_half_plane(const RescaledField& rf) { return fit_half_plane(rf.field); }

// ---------------------------------------------------------------------------
// Blow-up sequences: rescalings at decreasing radii compared through their
// boundary traces in L^1(bd B_1).
// ---------------------------------------------------------------------------

struct BlowupSequence {
  Point x0{};
  std::vector<double> radii;        // strictly decreasing
  std::vector<RescaledField> fields;
  std::vector<double> l1_differences;  // successive trace differences
  bool cauchy = false;
};

inline BlowupSequence blowup_sequence(const VectorField& f, const Point& x0,
                                      std::span<const double> radii, const Grid& ref_grid) {
  if (radii.size() < 2) throw Error("blowup_sequence: need at least two radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1]))
      throw Error("blowup_sequence: radii must be strictly decreasing");
  const double floor = 5.0 * f.grid.max_spacing();
  for (double r : radii)
    if (r < floor)
      throw RadiusBelowResolution("blowup_sequence: radius below 5 grid spacings");

  BlowupSequence seq;
  seq.x0 = x0;
  seq.radii.assign(radii.begin(), radii.end());
  for (double r : radii) seq.fields.push_back(rescale(f, x0, r, ref_grid));

  const int n_ang = ref_grid.dim == 3 ? 128 : 512;
  std::vector<SphereTrace> traces;
  traces.reserve(seq.fields.size());
  for (const auto& rf : seq.fields)
    traces.push_back(trace_sphere(rf.field, Point{}, 1.0, n_ang));
  for (std::size_t i = 0; i + 1 < traces.size(); ++i)
    seq.l1_differences.push_back(trace_l1_difference(traces[i], traces[i + 1]));

  seq.cauchy = !seq.l1_differences.empty() && seq.l1_differences.back() <= 5e-3;
  for (std::size_t i = 0; i + 1 < seq.l1_differences.size(); ++i)
    if (seq.l1_differences[i + 1] > std::max(seq.l1_differences[i], 1e-8)) seq.cauchy = false;
  return seq;
}

// ---------------------------------------------------------------------------
// Energy decay fit: least squares on log(W(r) - W0) against log r. Exposes
// the fitted exponent and the rate/regularity parameters it implies.
// ---------------------------------------------------------------------------

struct DecayFit {
  double gamma_hat = 0.0;  // fitted exponent of W(r) - W0
  double C_hat = 0.0;
  double kappa_hat = 0.0;  // gamma / (n + 2 + gamma)
  double beta_hat = 0.0;   // gamma / (2 + gamma)
  double r_lo = 0.0, r_hi = 0.0;
  double fit_quality = 0.0;  // R^2
  bool exact_homogeneous = false;  // W(r) constant: no finite decay rate
};

inline DecayFit fit_decay(const WeissScan& scan, int dim) {
  DecayFit out;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scan.radii.size(); ++i) {
    const double y = scan.values[i] - scan.w0_estimate;
    if (y > 1e-6) {
      lx.push_back(std::log(scan.radii[i]));
      ly.push_back(std::log(y));
    }
  }
  if (lx.size() < 4) {
    out.exact_homogeneous = true;
    return out;
  }
  const LineFit fit = fit_line(lx, ly);
  out.gamma_hat = fit.slope;
  out.C_hat = std::exp(fit.intercept);
  out.fit_quality = fit.r2;
  out.r_lo = std::exp(lx.front());
  out.r_hi = std::exp(lx.back());
  out.kappa_hat = out.gamma_hat / (dim + 2 + out.gamma_hat);
  out.beta_hat = out.gamma_hat / (2.0 + out.gamma_hat);
  return out;
}

}  // namespace vop
