#pragma once

#include <optional>
#include <vector>

#include "vop/energy.hpp"
#include "vop/solver.hpp"

namespace vop {

// ---------------------------------------------------------------------------
// Discrete free boundary: cells crossed by the |u| = delta level, and the
// subset where the interpolated gradient (nearly) vanishes. The gradient
// threshold is a grid-scale proxy for the exact condition grad u = 0; points
// where |grad u| is small but nonzero may be misplaced, so reports carry the
// thresholds used.
// ---------------------------------------------------------------------------

struct FreeBoundarySet {
  std::vector<std::int64_t> gamma;   // cell ids crossed by {|u| = delta}
  std::vector<std::int64_t> gamma0;  // subset with |grad u| <= eps_grad
  std::vector<Point> gamma_points;   // representative point per gamma cell
  std::vector<Point> gamma0_points;
  double delta = 0.0;
  double eps_grad = 0.0;
};

inline double default_eps_grad(const Grid& g) { return 5.0 * g.max_spacing(); }

inline FreeBoundarySet extract_free_boundary(const VectorField& f, double delta,
                                             double eps_grad) {
  if (delta <= 0.0) throw Error("extract_free_boundary: delta must be positive");
  const Grid& g = f.grid;
  FreeBoundarySet fb;
  fb.delta = delta;
  fb.eps_grad = eps_grad;

  const GradientField gr = gradient(f);
  const std::int64_t ncells = g.cells();
  const int corners = 1 << g.dim;
  for (std::int64_t ci = 0; ci < ncells; ++ci) {
    const auto c = g.cell_multi(ci);
    bool above = false, below = false;
    std::array<std::int64_t, 8> corner_ids{};
    for (int k = 0; k < corners; ++k) {
      std::array<std::int64_t, 3> idx = c;
      for (int a = 0; a < g.dim; ++a)
        if (k & (1 << a)) idx[a] += 1;
      corner_ids[static_cast<std::size_t>(k)] = g.node_index(idx);
      (f.norm_at(corner_ids[static_cast<std::size_t>(k)]) > delta ? above : below) = true;
    }
    if (!(above && below)) continue;

    // representative point: linear interpolation of the |u| - delta crossing
    // on the first straddling cell edge
    Point rep = g.cell_center(c);
    for (int k = 0; k < corners; ++k) {
      bool found = false;
      for (int a = 0; a < g.dim && !found; ++a) {
        if (k & (1 << a)) continue;
        const std::int64_t lo = corner_ids[static_cast<std::size_t>(k)];
        const std::int64_t hi = corner_ids[static_cast<std::size_t>(k | (1 << a))];
        const double flo = f.norm_at(lo) - delta;
        const double fhi = f.norm_at(hi) - delta;
        if (flo * fhi < 0.0) {
          const double t = flo / (flo - fhi);
          Point p = g.node_point(lo);
          p[a] += t * g.spacing[a];
          rep = p;
          found = true;
        }
      }
      if (found) break;
    }

    fb.gamma.push_back(ci);
    fb.gamma_points.push_back(rep);

    // interpolated |grad u| at the cell center: corner average per entry
    double g2 = 0.0;
    for (int cc = 0; cc < f.m; ++cc)
      for (int a = 0; a < g.dim; ++a) {
        double acc = 0.0;
        for (int k = 0; k < corners; ++k)
          acc += gr.at(corner_ids[static_cast<std::size_t>(k)], cc, a);
        g2 += sq(acc / corners);
      }
    if (std::sqrt(g2) <= eps_grad) {
      fb.gamma0.push_back(ci);
      fb.gamma0_points.push_back(rep);
    }
  }
  return fb;
}

// ---------------------------------------------------------------------------
// Quantitative audits.
// ---------------------------------------------------------------------------

struct NonDegeneracySample {
  Point point{};
  double radius = 0.0;
  double sup_u = 0.0;
  double bound = 0.0;  // r^2 / (2n)
  double ratio = 0.0;
};

struct NonDegeneracyReport {
  std::vector<NonDegeneracySample> samples;
  double min_ratio = std::numeric_limits<double>::infinity();
};

/// sup over closed B_r(x0) node values of |u| against r^2/(2n), per sampled
/// free-boundary point and radius. The node sup underestimates the true sup,
/// so a passing ratio is conservative.
inline NonDegeneracyReport audit_nondegeneracy(const VectorField& f,
                                               std::span<const Point> points,
                                               std::span<const double> radii) {
  const Grid& g = f.grid;
  NonDegeneracyReport rep;
  for (const Point& x0 : points) {
    // the point must lie in the closure of the support
    double near_sup = 0.0;
    for (int pass = 0; pass < 1; ++pass) {
      const double rprobe = 2.0 * g.max_spacing();
      std::array<std::int64_t, 3> lo{}, hi{};
      for (int a = 0; a < g.dim; ++a) {
        lo[a] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>((x0[a] - rprobe - g.lo[a]) / g.spacing[a]), 0, g.count[a] - 1);
        hi[a] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>((x0[a] + rprobe - g.lo[a]) / g.spacing[a]) + 1, 0,
            g.count[a] - 1);
      }
      std::array<std::int64_t, 3> it = lo;
      for (;;) {
        near_sup = std::max(near_sup, f.norm_at(g.node_index(it)));
        int a = g.dim - 1;
        for (; a >= 0; --a) {
          if (++it[a] <= hi[a]) break;
          it[a] = lo[a];
        }
        if (a < 0) break;
      }
    }
    if (near_sup <= 0.0)
      throw Error("audit_nondegeneracy: point not in the closure of the support");

    for (double r : radii) {
      if (!g.contains_ball({x0, r}))
        throw BallNotContained("audit_nondegeneracy: ball exceeds the grid");
      std::array<std::int64_t, 3> lo{}, hi{};
      for (int a = 0; a < g.dim; ++a) {
        lo[a] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::ceil((x0[a] - r - g.lo[a]) / g.spacing[a] - 1e-9)), 0,
            g.count[a] - 1);
        hi[a] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::floor((x0[a] + r - g.lo[a]) / g.spacing[a] + 1e-9)), 0,
            g.count[a] - 1);
      }
      NonDegeneracySample s;
      s.point = x0;
      s.radius = r;
      const double r2 = r * r;
      std::array<std::int64_t, 3> it = lo;
      for (;;) {
        const Point p = g.node_point(it);
        double d2 = 0.0;
        for (int a = 0; a < g.dim; ++a) d2 += sq(p[a] - x0[a]);
        if (d2 <= r2 * (1.0 + 1e-12))
          s.sup_u = std::max(s.sup_u, f.norm_at(g.node_index(it)));
        int a = g.dim - 1;
        for (; a >= 0; --a) {
          if (++it[a] <= hi[a]) break;
          it[a] = lo[a];
        }
        if (a < 0) break;
      }
      s.bound = r2 / (2.0 * g.dim);
      s.ratio = s.sup_u / s.bound;
      rep.min_ratio = std::min(rep.min_ratio, s.ratio);
      rep.samples.push_back(s);
    }
  }
  return rep;
}

struct GrowthReport {
  double C_value = 0.0;  // max |u| / dist^2
  double C_grad = 0.0;   // max |grad u| / dist
  double dist_floor = 0.0;
};

/// Brute-force nearest-distance growth constants over nodes in B_1/2, with
/// distances clamped below at 2h.
inline GrowthReport audit_quadratic_growth(const VectorField& f, const FreeBoundarySet& fb) {
  if (fb.gamma0_points.empty()) throw EmptyGamma0("audit_quadratic_growth: no gamma0 points");
  const Grid& g = f.grid;
  GrowthReport rep;
  rep.dist_floor = 2.0 * g.max_spacing();
  const GradientField gr = gradient(f);
  for (std::int64_t id = 0; id < g.nodes(); ++id) {
    const Point x = g.node_point(id);
    if (norm(x, g.dim) > 0.5) continue;
    double d2 = std::numeric_limits<double>::infinity();
    for (const Point& p : fb.gamma0_points) {
      double s = 0.0;
      for (int a = 0; a < g.dim; ++a) s += sq(x[a] - p[a]);
      d2 = std::min(d2, s);
    }
    const double d = std::max(std::sqrt(d2), rep.dist_floor);
    rep.C_value = std::max(rep.C_value, f.norm_at(id) / (d * d));
    rep.C_grad = std::max(rep.C_grad, std::sqrt(gr.frob2_at(id)) / d);
  }
  return rep;
}

struct SubharmonicityReport {
  double min_lap_U_minus_1 = 0.0;  // over {|u| > delta} away from the kink
  double A_min = 0.0;              // min of |grad u|^2 - |grad U|^2
  bool vacuous = true;
};

inline SubharmonicityReport audit_subharmonicity(const VectorField& f, double delta) {
  if (delta <= 0.0) throw Error("audit_subharmonicity: delta must be positive");
  const Grid& g = f.grid;
  SubharmonicityReport rep;
  rep.min_lap_U_minus_1 = std::numeric_limits<double>::infinity();
  rep.A_min = std::numeric_limits<double>::infinity();

  const VectorField U = magnitude_field(f);
  const VectorField lapU = laplacian(U);
  const GradientField gu = gradient(f);
  const GradientField gU = gradient(U);

  // 2-cell exclusion band around the level crossing
  std::vector<char> near_gamma(static_cast<std::size_t>(g.nodes()), 0);
  {
    const std::int64_t ncells = g.cells();
    for (std::int64_t ci = 0; ci < ncells; ++ci) {
      const auto c = g.cell_multi(ci);
      bool above = false, below = false;
      for (int k = 0; k < (1 << g.dim); ++k) {
        std::array<std::int64_t, 3> idx = c;
        for (int a = 0; a < g.dim; ++a)
          if (k & (1 << a)) idx[a] += 1;
        (f.norm_at(g.node_index(idx)) > delta ? above : below) = true;
      }
      if (!(above && below)) continue;
      std::array<std::int64_t, 3> lo{}, hi{};
      for (int a = 0; a < g.dim; ++a) {
        lo[a] = std::max<std::int64_t>(0, c[a] - 2);
        hi[a] = std::min<std::int64_t>(g.count[a] - 1, c[a] + 3);
      }
      std::array<std::int64_t, 3> it = lo;
      for (;;) {
        near_gamma[static_cast<std::size_t>(g.node_index(it))] = 1;
        int a = g.dim - 1;
        for (; a >= 0; --a) {
          if (++it[a] <= hi[a]) break;
          it[a] = lo[a];
        }
        if (a < 0) break;
      }
    }
  }

  for (std::int64_t id = 0; id < g.nodes(); ++id) {
    if (g.is_boundary(g.node_multi(id))) continue;
    if (near_gamma[static_cast<std::size_t>(id)]) continue;
    if (f.norm_at(id) <= delta) continue;
    rep.vacuous = false;
    rep.min_lap_U_minus_1 =
        std::min(rep.min_lap_U_minus_1, lapU.values[static_cast<std::size_t>(id)] - 1.0);
    rep.A_min = std::min(rep.A_min, gu.frob2_at(id) - gU.frob2_at(id));
  }
  if (rep.vacuous) {
    rep.min_lap_U_minus_1 = 0.0;
    rep.A_min = 0.0;
  }
  return rep;
}

struct SupportReport {
  double eps_l1 = 0.0;       // L1(B_1) distance to the half-plane profile
  double penetration = 0.0;  // max over supp u in B_1/2 of (-x.nu)_+
  double scaled = 0.0;       // penetration * eps_l1^{-1/(2n+2)}
};

inline SupportReport audit_support_localization(const VectorField& f, const HalfPlaneSolution& hp) {
  const Grid& g = f.grid;
  if (!g.contains_ball({Point{}, 1.0}))
    throw BallNotContained("audit_support_localization: grid must contain B_1");
  hp.validate(g.dim);
  SupportReport rep;

  VectorField diff = f;
  {
    const VectorField hfield = eval_half_plane(g, hp);
    if (hfield.m != f.m) throw Error("audit_support_localization: component mismatch");
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= hfield.values[i];
  }
  rep.eps_l1 = detail::ball_cell_integral(g, detail::norm_nodal(diff), Ball{Point{}, 1.0});

  const double delta = default_delta(f);
  for (std::int64_t id = 0; id < g.nodes(); ++id) {
    const Point x = g.node_point(id);
    if (norm(x, g.dim) > 0.5) continue;
    if (f.norm_at(id) <= delta) continue;
    rep.penetration = std::max(rep.penetration, -dot(x, hp.nu, g.dim));
  }
  rep.penetration = std::max(rep.penetration, 0.0);
  if (rep.eps_l1 > 0.0 && rep.penetration > 0.0)
    rep.scaled = rep.penetration * std::pow(rep.eps_l1, -1.0 / (2.0 * g.dim + 2.0));
  return rep;
}

// ---------------------------------------------------------------------------
// Classification of free-boundary points by the macroscopic energy criterion.
// ---------------------------------------------------------------------------

enum class Verdict { regular, indeterminate };

struct PointClassification {
  Point point{};
  Verdict verdict = Verdict::indeterminate;
  double W_at_rmin = 0.0;
  WeissScan scan;
};

struct Classification {
  std::vector<PointClassification> points;
  double threshold = 0.0;  // alpha_n/2 + margin
  double margin = 0.0;
  std::size_t skipped = 0;  // gamma0 points whose r_min ball leaves the grid
};

/// Copy of the set with gamma0 trimmed to the k points nearest to x0.
inline FreeBoundarySet filter_gamma0_near(const FreeBoundarySet& fb, const Point& x0,
                                          std::size_t k) {
  FreeBoundarySet out = fb;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < fb.gamma0_points.size(); ++i) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) d += sq(fb.gamma0_points[i][a] - x0[a]);
    order.emplace_back(d, i);
  }
  std::sort(order.begin(), order.end());
  out.gamma0.clear();
  out.gamma0_points.clear();
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    out.gamma0.push_back(fb.gamma0[order[i].second]);
    out.gamma0_points.push_back(fb.gamma0_points[order[i].second]);
  }
  return out;
}

/// Default margin 0.1*alpha_n: the true spectral gap above alpha_n/2 exists
/// but is not quantified, so the classifier uses a configurable conservative
/// stand-in.
inline Classification classify_points(const VectorField& f, const FreeBoundarySet& fb,
                                      double r_min, double margin = -1.0) {
  const Grid& g = f.grid;
  const double an = alpha_n(g.dim).value;
  Classification out;
  out.margin = margin < 0.0 ? 0.1 * an : margin;
  out.threshold = 0.5 * an + out.margin;

  for (const Point& x0 : fb.gamma0_points) {
    // admissible radii: geometric ladder from r_min while the ball fits
    double r_max = std::numeric_limits<double>::infinity();
    for (int a = 0; a < g.dim; ++a) {
      r_max = std::min(r_max, x0[a] - g.lo[a]);
      r_max = std::min(r_max, g.hi[a] - x0[a]);
    }
    if (r_max < r_min) {
      ++out.skipped;
      continue;
    }
    PointClassification pc;
    pc.point = x0;
    std::vector<double> radii;
    for (double r = r_min; r <= r_max * (1.0 + 1e-12) && radii.size() < 12; r *= 1.35)
      radii.push_back(std::min(r, r_max));
    pc.scan = weiss_scan(f, x0, radii);
    pc.W_at_rmin = radii.size() >= 4 ? pc.scan.w0_estimate : pc.scan.values.front();
    pc.verdict = pc.W_at_rmin < out.threshold ? Verdict::regular : Verdict::indeterminate;
    out.points.push_back(std::move(pc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local graph fit of the free boundary around a regular point: sub-cell
// level-crossing samples, least-squares normals, and a Hoelder exponent
// estimate for the normal field.
// ---------------------------------------------------------------------------

struct GraphFit {
  std::vector<Point> samples;
  std::vector<Point> normals;
  Point nu_mean{};
  double beta_hat = 0.0;
  double fit_r2 = 0.0;
  bool exact_flat = false;  // no measurable normal variation
};

inline GraphFit fit_boundary_graph(const VectorField& f, const FreeBoundarySet& fb,
                                   const Classification& cls, const Point& x0, double window,
                                   int refinement_levels = 20) {
  const Grid& g = f.grid;
  bool regular = false;
  for (const auto& pc : cls.points) {
    double d = 0.0;
    for (int a = 0; a < g.dim; ++a) d += sq(pc.point[a] - x0[a]);
    if (std::sqrt(d) <= 2.0 * g.max_spacing() && pc.verdict == Verdict::regular) regular = true;
  }
  if (!regular) throw NotRegular("fit_boundary_graph: x0 is not classified regular");

  // refined level-crossing samples: bisect |u| = delta along grid edges
  // inside the window
  GraphFit out;
  const double delta = fb.delta;
  for (std::size_t k = 0; k < fb.gamma.size(); ++k) {
    const Point p = fb.gamma_points[k];
    bool inside = true;
    for (int a = 0; a < g.dim; ++a)
      if (std::abs(p[a] - x0[a]) > window) inside = false;
    if (!inside) continue;
    const auto c = g.cell_multi(fb.gamma[k]);
    // bisect along each straddling edge of the cell
    for (int kk = 0; kk < (1 << g.dim); ++kk) {
      for (int a = 0; a < g.dim; ++a) {
        if (kk & (1 << a)) continue;
        std::array<std::int64_t, 3> idx = c;
        for (int b = 0; b < g.dim; ++b)
          if (kk & (1 << b)) idx[b] += 1;
        const Point plo = g.node_point(idx);
        Point phi = plo;
        phi[a] += g.spacing[a];
        double flo = sample_norm(f, plo) - delta;
        double fhi = sample_norm(f, phi) - delta;
        if (flo * fhi >= 0.0) continue;
        Point lo_pt = plo, hi_pt = phi;
        for (int lvl = 0; lvl < refinement_levels; ++lvl) {
          Point mid = lo_pt;
          for (int b = 0; b < g.dim; ++b) mid[b] = 0.5 * (lo_pt[b] + hi_pt[b]);
          const double fm = sample_norm(f, mid) - delta;
          if (flo * fm <= 0.0) {
            hi_pt = mid;
            fhi = fm;
          } else {
            lo_pt = mid;
            flo = fm;
          }
        }
        Point s = lo_pt;
        for (int b = 0; b < g.dim; ++b) s[b] = 0.5 * (lo_pt[b] + hi_pt[b]);
        out.samples.push_back(s);
      }
    }
  }
  if (out.samples.size() < 4)
    throw InsufficientBoundarySamples("fit_boundary_graph: too few level-crossing samples");

  // normals: local least-squares plane fit over neighbours within 6h,
  // oriented toward the support side via the gradient of |u|
  const double rfit = 6.0 * g.max_spacing();
  std::vector<double> scratch(static_cast<std::size_t>(f.m));
  for (const Point& s : out.samples) {
    Point mean{};
    int cnt = 0;
    for (const Point& q : out.samples) {
      double d = 0.0;
      for (int a = 0; a < g.dim; ++a) d += sq(q[a] - s[a]);
      if (std::sqrt(d) > rfit) continue;
      for (int a = 0; a < g.dim; ++a) mean[a] += q[a];
      ++cnt;
    }
    for (int a = 0; a < g.dim; ++a) mean[a] /= cnt;
    // covariance
    std::array<std::array<double, 3>, 3> cov{};
    for (const Point& q : out.samples) {
      double d = 0.0;
      for (int a = 0; a < g.dim; ++a) d += sq(q[a] - s[a]);
      if (std::sqrt(d) > rfit) continue;
      for (int a = 0; a < g.dim; ++a)
        for (int b = 0; b < g.dim; ++b) cov[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += (q[a] - mean[a]) * (q[b] - mean[b]);
    }
    // smallest-eigenvector direction by inverse power iteration on cov +
    // small ridge
    Point n{};
    if (g.dim == 2) {
      const double a = cov[0][0], b = cov[0][1], c = cov[1][1];
      const double tr = a + c, det = a * c - b * b;
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
      const double lmin = tr / 2.0 - disc;
      // (cov - lmin I) n = 0
      if (std::abs(b) > 1e-300 || std::abs(a - lmin) > 1e-300) {
        if (std::abs(b) >= std::abs(a - lmin)) {
          n[0] = 1.0;
          n[1] = -(a - lmin) / (b == 0.0 ? 1e-300 : b);
        } else {
          n[0] = -b / (a - lmin);
          n[1] = 1.0;
        }
      } else {
        n[0] = 0.0;
        n[1] = 1.0;
      }
    } else {
      // dim 3: two rounds of power iteration on adj to reach the smallest
      // eigenvector is fragile; use cross products of the two largest
      // spread directions instead
      Point d1{}, d2{};
      double best1 = -1.0, best2 = -1.0;
      for (const Point& q : out.samples) {
        double d = 0.0;
        for (int a = 0; a < g.dim; ++a) d += sq(q[a] - s[a]);
        const double dist = std::sqrt(d);
        if (dist > rfit || dist < 1e-14) continue;
        if (dist > best1) {
          best2 = best1;
          d2 = d1;
          best1 = dist;
          for (int a = 0; a < 3; ++a) d1[a] = q[a] - s[a];
        } else if (dist > best2) {
          best2 = dist;
          for (int a = 0; a < 3; ++a) d2[a] = q[a] - s[a];
        }
      }
      n[0] = d1[1] * d2[2] - d1[2] * d2[1];
      n[1] = d1[2] * d2[0] - d1[0] * d2[2];
      n[2] = d1[0] * d2[1] - d1[1] * d2[0];
    }
    const double nn = norm(n, g.dim);
    if (nn < 1e-14) continue;
    for (int a = 0; a < g.dim; ++a) n[a] /= nn;
    // orient toward growing |u|
    Point probe = s;
    for (int a = 0; a < g.dim; ++a) probe[a] += n[a] * g.max_spacing();
    Point probe2 = s;
    for (int a = 0; a < g.dim; ++a) probe2[a] -= n[a] * g.max_spacing();
    if (g.contains_point(probe) && g.contains_point(probe2) &&
        sample_norm(f, probe) < sample_norm(f, probe2))
      for (int a = 0; a < g.dim; ++a) n[a] = -n[a];
    out.normals.push_back(n);
    for (int a = 0; a < g.dim; ++a) out.nu_mean[a] += n[a];
  }
  if (out.normals.size() < 4)
    throw InsufficientBoundarySamples("fit_boundary_graph: too few normals");
  {
    const double nn = norm(out.nu_mean, g.dim);
    if (nn > 0) for (int a = 0; a < g.dim; ++a) out.nu_mean[a] /= nn;
  }

  // Hoelder fit: log |nu_i - nu_j| against log |x_i - x_j|
  std::vector<double> lx, ly;
  const std::size_t nsmp = std::min<std::size_t>(out.normals.size(), 200);
  double max_dn = 0.0;
  for (std::size_t i = 0; i < nsmp; ++i)
    for (std::size_t j = i + 1; j < nsmp; ++j) {
      double dx = 0.0, dn = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        dx += sq(out.samples[i][a] - out.samples[j][a]);
        dn += sq(out.normals[i][a] - out.normals[j][a]);
      }
      dx = std::sqrt(dx);
      dn = std::sqrt(dn);
      max_dn = std::max(max_dn, dn);
      if (dx < 2.0 * g.max_spacing() || dn < 1e-9) continue;
      lx.push_back(std::log(dx));
      ly.push_back(std::log(dn));
    }
  if (max_dn < 1e-9 || lx.size() < 8) {
    out.exact_flat = true;
    return out;
  }
  const LineFit fit = fit_line(lx, ly);
  out.beta_hat = fit.slope;
  out.fit_r2 = fit.r2;
  return out;
}

}  // namespace vop
