#pragma once

#include <optional>
#include <vector>

#include "vop/sphere.hpp"

namespace vop {

// ---------------------------------------------------------------------------
// Volume quadrature over grid cells. A cell's contribution is the corner
// average of a nodal integrand minus the exact quadratic defect
// (1/12) sum_a h_a^2 f_aa, which removes the leading O(h^2) bias; cells
// straddling a ball boundary are weighted by an antialiased 4^n-subsample
// inclusion fraction that varies smoothly with the radius.
// ---------------------------------------------------------------------------

namespace detail {

/// Smooth inclusion profile for one subsample: the overlap fraction of an
/// equal-volume disc/ball at signed distance `gap` from a locally straight
/// interface. Isotropic and exact to first moment, so cut-cell quadrature
/// varies smoothly with the radius.
inline double inclusion_profile(double gap, double rho, int dim) {
  if (gap >= rho) return 1.0;
  if (gap <= -rho) return 0.0;
  const double t = gap / rho;
  if (dim == 1) return 0.5 * (1.0 + t);
  if (dim == 2) return 0.5 + (t * std::sqrt(1.0 - t * t) + std::asin(t)) / pi;
  // dim == 3: spherical cap volume fraction
  return 0.25 * (2.0 + 3.0 * t - t * t * t);
}

inline double subsample_radius(const Grid& g, int sub) {
  // radius of the ball with the same volume as one subcell
  double v = 1.0;
  for (int a = 0; a < g.dim; ++a) v *= g.spacing[a] / sub;
  if (g.dim == 1) return 0.5 * v;
  if (g.dim == 2) return std::sqrt(v / pi);
  return std::cbrt(3.0 * v / (4.0 * pi));
}

inline double cell_ball_fraction(const Grid& g, const Point& center, double r,
                                 const std::array<std::int64_t, 3>& c) {
  const Point cc = g.cell_center(c);
  double half_diag2 = 0.0;
  for (int a = 0; a < g.dim; ++a) half_diag2 += sq(0.5 * g.spacing[a]);
  const double half_diag = std::sqrt(half_diag2);
  double d = 0.0;
  for (int a = 0; a < g.dim; ++a) d += sq(cc[a] - center[a]);
  d = std::sqrt(d);
  if (d <= r - half_diag) return 1.0;
  if (d >= r + half_diag) return 0.0;

  const int sub = 4;
  const double rho = subsample_radius(g, sub);
  double inside = 0.0;
  int total = 0;
  std::array<int, 3> it{};
  for (it[0] = 0; it[0] < (g.dim > 0 ? sub : 1); ++it[0])
    for (it[1] = 0; it[1] < (g.dim > 1 ? sub : 1); ++it[1])
      for (it[2] = 0; it[2] < (g.dim > 2 ? sub : 1); ++it[2]) {
        double dist2 = 0.0;
        for (int a = 0; a < g.dim; ++a) {
          const double x = g.lo[a] + (static_cast<double>(c[a]) +
                                      (static_cast<double>(it[a]) + 0.5) / sub) *
                                         g.spacing[a];
          dist2 += sq(x - center[a]);
        }
        ++total;
        inside += inclusion_profile(r - std::sqrt(dist2), rho, g.dim);
      }
  return inside / static_cast<double>(total);
}

/// Integral of a nodal scalar over the grid box intersected with an optional
/// ball. Deterministic chunked pairwise reduction.
inline double ball_cell_integral(const Grid& g, const std::vector<double>& f,
                                 std::optional<Ball> ball) {
  const double vol = g.cell_volume();
  const int corners = 1 << g.dim;
  const double inv_corners = 1.0 / corners;

  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.count[a];
    }
  }

  return chunked_sum(static_cast<std::size_t>(g.cells()), [&](std::size_t ci) {
    const auto c = g.cell_multi(static_cast<std::int64_t>(ci));
    bool straddles = false;
    if (ball) {
      const Point cc = g.cell_center(c);
      double half_diag2 = 0.0;
      for (int a = 0; a < g.dim; ++a) half_diag2 += sq(0.5 * g.spacing[a]);
      const double half_diag = std::sqrt(half_diag2);
      double d = 0.0;
      for (int a = 0; a < g.dim; ++a) d += sq(cc[a] - ball->center[a]);
      d = std::sqrt(d);
      if (d >= ball->radius + half_diag) return 0.0;
      straddles = d > ball->radius - half_diag;
    }

    std::array<double, 8> fc{};
    for (int k = 0; k < corners; ++k) {
      std::array<std::int64_t, 3> idx = c;
      for (int a = 0; a < g.dim; ++a)
        if (k & (1 << a)) idx[a] += 1;
      fc[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(g.node_index(idx))];
    }

    if (straddles) {
      // Cut cell: 4^n subsample midpoint rule with a ramped inclusion weight
      // per subsample, multilinear integrand within the cell (plus the
      // quadratic interpolation defect). Placing the integrand at the
      // subsamples keeps the shell contribution first-moment exact.
      std::array<double, 3> d2a{};
      std::array<int, 3> d2n{};
      for (int k = 0; k < corners; ++k) {
        std::array<std::int64_t, 3> idx = c;
        for (int a = 0; a < g.dim; ++a)
          if (k & (1 << a)) idx[a] += 1;
        const std::int64_t id = g.node_index(idx);
        for (int a = 0; a < g.dim; ++a) {
          if (idx[a] == 0 || idx[a] == g.count[a] - 1) continue;
          d2a[a] += f[static_cast<std::size_t>(id + stride[a])] -
                    2.0 * f[static_cast<std::size_t>(id)] +
                    f[static_cast<std::size_t>(id - stride[a])];
          d2n[a] += 1;
        }
      }
      for (int a = 0; a < g.dim; ++a)
        if (d2n[a] > 0) d2a[a] /= d2n[a];

      const int sub = 4;
      const double rho = subsample_radius(g, sub);
      double acc = 0.0;
      std::array<int, 3> it{};
      for (it[0] = 0; it[0] < (g.dim > 0 ? sub : 1); ++it[0])
        for (it[1] = 0; it[1] < (g.dim > 1 ? sub : 1); ++it[1])
          for (it[2] = 0; it[2] < (g.dim > 2 ? sub : 1); ++it[2]) {
            double dist2 = 0.0;
            std::array<double, 3> t{};
            for (int a = 0; a < g.dim; ++a) {
              t[a] = (static_cast<double>(it[a]) + 0.5) / sub;
              const double x = g.lo[a] + (static_cast<double>(c[a]) + t[a]) * g.spacing[a];
              dist2 += sq(x - ball->center[a]);
            }
            const double wgt =
                inclusion_profile(ball->radius - std::sqrt(dist2), rho, g.dim);
            if (wgt == 0.0) continue;
            double val = 0.0;
            for (int k = 0; k < corners; ++k) {
              double lam = 1.0;
              for (int a = 0; a < g.dim; ++a) lam *= (k & (1 << a)) ? t[a] : 1.0 - t[a];
              val += lam * fc[static_cast<std::size_t>(k)];
            }
            for (int a = 0; a < g.dim; ++a) val -= 0.5 * t[a] * (1.0 - t[a]) * d2a[a];
            acc += wgt * val;
          }
      const double subvol = vol / static_cast<double>(1 << (2 * g.dim));
      return acc * subvol;
    }

    // Full cell: corner average minus the quadratic defect.
    double avg = 0.0;
    double corr = 0.0;
    int corr_count = 0;
    for (int k = 0; k < corners; ++k) {
      std::array<std::int64_t, 3> idx = c;
      for (int a = 0; a < g.dim; ++a)
        if (k & (1 << a)) idx[a] += 1;
      const std::int64_t id = g.node_index(idx);
      bool has_stencil = true;
      for (int a = 0; a < g.dim; ++a)
        if (idx[a] == 0 || idx[a] == g.count[a] - 1) has_stencil = false;
      if (!has_stencil) continue;
      double d2 = 0.0;  // sum_a h_a^2 f_aa as raw second differences
      for (int a = 0; a < g.dim; ++a)
        d2 += f[static_cast<std::size_t>(id + stride[a])] - 2.0 * f[static_cast<std::size_t>(id)] +
              f[static_cast<std::size_t>(id - stride[a])];
      corr += d2;
      ++corr_count;
    }
    for (int k = 0; k < corners; ++k) avg += fc[static_cast<std::size_t>(k)];
    avg *= inv_corners;
    if (corr_count > 0) avg -= corr / (12.0 * corr_count);
    return vol * avg;
  });
}

/// Nodal |grad u|^2 without materialising the full gradient tensor.
inline std::vector<double> grad_norm2_nodal(const VectorField& f) {
  const Grid& g = f.grid;
  std::vector<double> q(static_cast<std::size_t>(g.nodes()), 0.0);
  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.count[a];
    }
  }
  parallel_for(static_cast<std::size_t>(g.nodes()), [&](std::size_t ii) {
    const auto id = static_cast<std::int64_t>(ii);
    const auto idx = g.node_multi(id);
    double acc = 0.0;
    for (int a = 0; a < g.dim; ++a) {
      const double inv2h = 1.0 / (2.0 * g.spacing[a]);
      const std::int64_t s = stride[a];
      for (int c = 0; c < f.m; ++c) {
        double d;
        if (idx[a] == 0) {
          d = (-3.0 * f.values[static_cast<std::size_t>(id * f.m + c)] +
               4.0 * f.values[static_cast<std::size_t>((id + s) * f.m + c)] -
               f.values[static_cast<std::size_t>((id + 2 * s) * f.m + c)]) *
              inv2h;
        } else if (idx[a] == g.count[a] - 1) {
          d = (3.0 * f.values[static_cast<std::size_t>(id * f.m + c)] -
               4.0 * f.values[static_cast<std::size_t>((id - s) * f.m + c)] +
               f.values[static_cast<std::size_t>((id - 2 * s) * f.m + c)]) *
              inv2h;
        } else {
          d = (f.values[static_cast<std::size_t>((id + s) * f.m + c)] -
               f.values[static_cast<std::size_t>((id - s) * f.m + c)]) *
              inv2h;
        }
        acc += d * d;
      }
    }
    q[ii] = acc;
  });
  return q;
}

inline std::vector<double> norm_nodal(const VectorField& f) {
  std::vector<double> w(static_cast<std::size_t>(f.grid.nodes()), 0.0);
  parallel_for(w.size(), [&](std::size_t i) { w[i] = f.norm_at(static_cast<std::int64_t>(i)); });
  return w;
}

/// Multilinear sample of a nodal scalar with the leading interpolation bias
/// removed via nodal second differences. Intended for smooth integrands
/// (boundary integrals of |u|^2); level-set extraction keeps plain
/// multilinear sampling.
inline double sample_scalar_corrected(const Grid& g, const std::vector<double>& f, const Point& x) {
  std::array<std::int64_t, 3> base{};
  std::array<double, 3> t{};
  for (int a = 0; a < g.dim; ++a) {
    double s = (x[a] - g.lo[a]) / g.spacing[a];
    s = std::clamp(s, 0.0, static_cast<double>(g.count[a] - 1));
    auto i = static_cast<std::int64_t>(s);
    if (i > g.count[a] - 2) i = g.count[a] - 2;
    base[a] = i;
    t[a] = s - static_cast<double>(i);
  }
  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.count[a];
    }
  }
  const int corners = 1 << g.dim;
  double lin = 0.0;
  std::array<double, 3> d2{};  // interpolated second difference per axis
  std::array<int, 3> d2n{};
  for (int k = 0; k < corners; ++k) {
    double wgt = 1.0;
    std::array<std::int64_t, 3> idx = base;
    for (int a = 0; a < g.dim; ++a) {
      if (k & (1 << a)) {
        idx[a] += 1;
        wgt *= t[a];
      } else {
        wgt *= 1.0 - t[a];
      }
    }
    const std::int64_t id = g.node_index(idx);
    lin += wgt * f[static_cast<std::size_t>(id)];
    for (int a = 0; a < g.dim; ++a) {
      if (idx[a] == 0 || idx[a] == g.count[a] - 1) continue;
      d2[a] += f[static_cast<std::size_t>(id + stride[a])] - 2.0 * f[static_cast<std::size_t>(id)] +
               f[static_cast<std::size_t>(id - stride[a])];
      d2n[a] += 1;
    }
  }
  double corr = 0.0;
  for (int a = 0; a < g.dim; ++a)
    if (d2n[a] > 0) corr += 0.5 * t[a] * (1.0 - t[a]) * d2[a] / d2n[a];
  return lin - corr;
}

/// Physical integral over |x - center| = r of |u|^2, with bias-corrected
/// sampling of the nodal |u|^2 field.
inline double sphere_norm2_integral(const VectorField& f, const std::vector<double>& norm2_nodal,
                                    const Point& center, double r, int n_angular) {
  const Grid& g = f.grid;
  if (g.dim == 1) {
    Point a = center, b = center;
    a[0] -= r;
    b[0] += r;
    return sample_scalar_corrected(g, norm2_nodal, a) + sample_scalar_corrected(g, norm2_nodal, b);
  }
  if (g.dim == 2) {
    const double w = 2.0 * pi / n_angular;
    const double s = chunked_sum(static_cast<std::size_t>(n_angular), [&](std::size_t j) {
      const double th = 2.0 * pi * static_cast<double>(j) / n_angular;
      Point x = center;
      x[0] += r * std::cos(th);
      x[1] += r * std::sin(th);
      return sample_scalar_corrected(g, norm2_nodal, x);
    });
    return r * w * s;
  }
  const int n_polar = std::max(8, n_angular / 2);
  const GaussLegendre gl = gauss_legendre(n_polar);
  const double waz = 2.0 * pi / n_angular;
  const std::size_t total = static_cast<std::size_t>(n_polar) * static_cast<std::size_t>(n_angular);
  const double s = chunked_sum(total, [&](std::size_t k) {
    const std::size_t i = k / static_cast<std::size_t>(n_angular);
    const std::size_t j = k % static_cast<std::size_t>(n_angular);
    const double ct = gl.nodes[i];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double psi = 2.0 * pi * static_cast<double>(j) / n_angular;
    Point x = center;
    x[0] += r * st * std::cos(psi);
    x[1] += r * st * std::sin(psi);
    x[2] += r * ct;
    return gl.weights[i] * waz * sample_scalar_corrected(g, norm2_nodal, x);
  });
  return r * r * s;
}

inline std::vector<double> norm2_nodal(const VectorField& f) {
  std::vector<double> w(static_cast<std::size_t>(f.grid.nodes()), 0.0);
  parallel_for(w.size(), [&](std::size_t i) {
    const double* v = f.values.data() + static_cast<std::int64_t>(i) * f.m;
    double s = 0.0;
    for (int c = 0; c < f.m; ++c) s += v[c] * v[c];
    w[i] = s;
  });
  return w;
}

}  // namespace detail

struct EnergyBreakdown {
  double dirichlet = 0.0;  // integral of |grad u|^2
  double mass = 0.0;       // integral of 2|u|
  double total = 0.0;      // dirichlet + mass
};

inline EnergyBreakdown energy_E(const VectorField& f, std::optional<Ball> ball = std::nullopt) {
  const Grid& g = f.grid;
  if (ball && !g.contains_ball(*ball))
    throw BallNotContained("energy_E: ball exceeds the grid extents");
  EnergyBreakdown out;
  {
    const std::vector<double> q = detail::grad_norm2_nodal(f);
    out.dirichlet = detail::ball_cell_integral(g, q, ball);
  }
  {
    const std::vector<double> w = detail::norm_nodal(f);
    out.mass = 2.0 * detail::ball_cell_integral(g, w, ball);
  }
  out.total = out.dirichlet + out.mass;
  return out;
}

// ---------------------------------------------------------------------------
// The balanced boundary-adjusted energy on the unit ball and the Weiss
// functional at a point and radius.
// ---------------------------------------------------------------------------

struct MValue {
  double volume_part = 0.0;    // integral over B_1 of |grad v|^2 + 2|v|
  double boundary_part = 0.0;  // 2 * integral over bd B_1 of |v|^2
  double value = 0.0;          // volume_part - boundary_part
};

inline int default_trace_samples(int dim) { return dim == 3 ? 192 : 1024; }

inline MValue functional_M(const VectorField& f, int n_angular = 0) {
  const Grid& g = f.grid;
  if (n_angular == 0) n_angular = default_trace_samples(g.dim);
  const Ball b{Point{}, 1.0};
  if (!g.contains_ball(b)) throw BallNotContained("functional_M: grid must contain B_1");
  MValue out;
  out.volume_part = energy_E(f, b).total;
  const std::vector<double> w2 = detail::norm2_nodal(f);
  out.boundary_part = 2.0 * detail::sphere_norm2_integral(f, w2, b.center, b.radius, n_angular);
  out.value = out.volume_part - out.boundary_part;
  return out;
}

struct WeissValue {
  Point center{};
  double radius = 0.0;
  double value = 0.0;
};

inline WeissValue weiss_W(const VectorField& f, const Point& x0, double r, int n_angular = 0) {
  const Grid& g = f.grid;
  if (n_angular == 0) n_angular = default_trace_samples(g.dim);
  if (r <= 0.0) throw Error("weiss_W: radius must be positive");
  if (!g.contains_ball({x0, r})) throw BallNotContained("weiss_W: ball exceeds the grid");
  const EnergyBreakdown e = energy_E(f, Ball{x0, r});
  const std::vector<double> w2 = detail::norm2_nodal(f);
  const double boundary = detail::sphere_norm2_integral(f, w2, x0, r, n_angular);
  WeissValue out;
  out.center = x0;
  out.radius = r;
  const int n = g.dim;
  out.value = e.total / std::pow(r, n + 2) - 2.0 * boundary / std::pow(r, n + 3);
  return out;
}

struct WeissScan {
  Point center{};
  std::vector<double> radii;   // strictly increasing
  std::vector<double> values;  // W at each radius
  double w0_estimate = 0.0;    // extrapolated right limit
  bool extrapolated = false;   // false: fell back to the smallest-radius value
  double monotone_violation = 0.0;
};

namespace detail {

/// Fit W(r) ~ W0 + C r^gamma through three points (smallest radii) and
/// return W0, or nothing when the data do not support the model.
inline std::optional<double> richardson_w0(const std::array<double, 3>& r,
                                           const std::array<double, 3>& w) {
  const double d1 = w[1] - w[0];
  const double d2 = w[2] - w[1];
  if (std::abs(d1) < 1e-14 || std::abs(d2) < 1e-14) return std::nullopt;
  const double q = d2 / d1;
  if (!(q > 0.0)) return std::nullopt;  // non-monotone triple
  auto ratio = [&](double gamma) {
    const double a = std::pow(r[0], gamma), b = std::pow(r[1], gamma), c = std::pow(r[2], gamma);
    return (c - b) / (b - a);
  };
  // Bracket gamma in (0.05, 8) by bisection on ratio(gamma) = q.
  double lo = 0.05, hi = 8.0;
  double flo = ratio(lo) - q, fhi = ratio(hi) - q;
  if (flo * fhi > 0.0) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = ratio(mid) - q;
    if (flo * fm <= 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  const double gamma = 0.5 * (lo + hi);
  const double ra = std::pow(r[0], gamma), rb = std::pow(r[1], gamma);
  const double denom = rb - ra;
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double C = d1 / denom;
  // Reject when the power-law coefficient is so large that the fit is a
  // cancellation artefact (condition proxy).
  if (std::abs(C) * std::pow(r[0], gamma) > 1e8 * (1.0 + std::abs(w[0]))) return std::nullopt;
  return w[0] - C * ra;
}

}  // namespace detail

inline WeissScan weiss_scan(const VectorField& f, const Point& x0, std::span<const double> radii,
                            int n_angular = 0) {
  if (radii.size() < 1) throw Error("weiss_scan: need at least one radius");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) throw Error("weiss_scan: radii must be strictly increasing");
  WeissScan scan;
  scan.center = x0;
  scan.radii.assign(radii.begin(), radii.end());
  scan.values.resize(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i)
    scan.values[i] = weiss_W(f, x0, radii[i], n_angular).value;
  for (std::size_t i = 0; i + 1 < radii.size(); ++i)
    scan.monotone_violation = std::max(scan.monotone_violation, scan.values[i] - scan.values[i + 1]);
  scan.monotone_violation = std::max(scan.monotone_violation, 0.0);

  scan.w0_estimate = scan.values.front();
  if (radii.size() >= 3) {
    const std::array<double, 3> r{scan.radii[0], scan.radii[1], scan.radii[2]};
    const std::array<double, 3> w{scan.values[0], scan.values[1], scan.values[2]};
    if (auto w0 = detail::richardson_w0(r, w)) {
      scan.w0_estimate = *w0;
      scan.extrapolated = true;
    }
  }
  return scan;
}

/// Geometric radius ladder in [r_min, r_max] used by scans and classifiers.
inline std::vector<double> scan_radii(double r_min, double r_max, double ratio = 1.2) {
  if (!(r_min > 0.0) || !(r_max > r_min)) throw Error("scan_radii: need 0 < r_min < r_max");
  std::vector<double> out;
  for (double r = r_min; r < r_max * (1.0 - 1e-12); r *= ratio) out.push_back(r);
  out.push_back(r_max);
  return out;
}

// ---------------------------------------------------------------------------
// The model energy density alpha_n = H^{n-1}(bd B_1) / (2n(n+2)).
// ---------------------------------------------------------------------------

struct AlphaN {
  int dim = 0;
  double value = 0.0;
};

inline AlphaN alpha_n(int dim) {
  if (dim < 1 || dim > 3) throw InvalidDimension("alpha_n: dim must be 1, 2 or 3");
  return {dim, surface_measure(dim) / (2.0 * dim * (dim + 2))};
}

}  // namespace vop
