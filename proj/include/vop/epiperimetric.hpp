#pragma once

#include <vector>

#include "vop/energy.hpp"
#include "vop/solver.hpp"

namespace vop {

// ---------------------------------------------------------------------------
// Polar grid on the unit disc (dim fixed to 2). Radial nodes are
// Chebyshev-clustered toward r = 1 (r_i = sin(pi/2 * (i+1)/n_r)); the
// angular direction is uniform and periodic, which makes the r = 1 boundary
// ring quadrature the dominant-accuracy piece of the balanced energy.
// ---------------------------------------------------------------------------

struct PolarGrid {
  int n_r = 96;
  int n_theta = 384;

  void validate() const {
    if (n_r < 16 || n_theta < 64) throw Error("polar grid: need n_r >= 16 and n_theta >= 64");
  }

  double radius(int i) const { return std::sin(0.5 * pi * (i + 1.0) / n_r); }
  double theta(int j) const { return 2.0 * pi * j / n_theta; }
  double dtheta() const { return 2.0 * pi / n_theta; }

  /// dual ring width: [r_{i-1/2}, r_{i+1/2}] with r_{-1/2} = 0 and the
  /// outer ring truncated at 1
  double ring_width(int i) const {
    const double lo = i == 0 ? 0.0 : 0.5 * (radius(i - 1) + radius(i));
    const double hi = i == n_r - 1 ? 1.0 : 0.5 * (radius(i) + radius(i + 1));
    return hi - lo;
  }

  std::int64_t nodes() const { return static_cast<std::int64_t>(n_r) * n_theta; }
  std::int64_t index(int i, int j) const { return static_cast<std::int64_t>(i) * n_theta + j; }
};

struct PolarField {
  PolarGrid grid;
  int m = 1;
  std::vector<double> values;  // (n_r * n_theta) * m, ring-major

  PolarField() = default;
  PolarField(const PolarGrid& g, int comps)
      : grid(g), m(comps), values(static_cast<std::size_t>(g.nodes() * comps), 0.0) {}

  std::span<double> at(int i, int j) {
    return {values.data() + grid.index(i, j) * m, static_cast<std::size_t>(m)};
  }
  std::span<const double> at(int i, int j) const {
    return {values.data() + grid.index(i, j) * m, static_cast<std::size_t>(m)};
  }
};

// ---------------------------------------------------------------------------
// Boundary data on the unit circle and its distance to the half-plane
// profile family in the combined W^{1,2}(B_1) + L^inf(B_1) norm (computed on
// the 2-homogeneous extensions, which reduces to 1d integrals of the trace).
// ---------------------------------------------------------------------------

struct HomogeneousDatum {
  PolarGrid grid;
  int m = 1;
  std::vector<double> g;  // n_theta * m, samples of the trace
  double delta_to_H = 0.0;

  std::span<const double> at(int j) const {
    return {g.data() + static_cast<std::int64_t>(j) * m, static_cast<std::size_t>(m)};
  }
};

namespace detail {

/// trace of the canonical profile with normal angle phi at angle theta
inline double profile_trace(double theta, double phi) {
  const double c = std::cos(theta - phi);
  return c > 0.0 ? 0.5 * c * c : 0.0;
}

/// Combined-norm distance of the 2-homogeneous extension of `g` to the
/// profile family: W12(B_1)^2 = (1/6 + 1) int |D|^2 + (1/4) int |D'|^2 and
/// Linf(B_1) = max |D| for D(theta) = g - trace(nu, e).
inline double datum_distance_to_profiles(const HomogeneousDatum& d) {
  const int nt = d.grid.n_theta;
  const int m = d.m;
  const double dth = d.grid.dtheta();

  auto combined = [&](double phi) {
    // L2-optimal axis for this phi
    std::vector<double> b(static_cast<std::size_t>(m), 0.0);
    double tnorm2 = 0.0;
    for (int j = 0; j < nt; ++j) {
      const double t = profile_trace(d.grid.theta(j), phi);
      tnorm2 += t * t * dth;
      for (int c = 0; c < m; ++c) b[static_cast<std::size_t>(c)] += t * d.at(j)[static_cast<std::size_t>(c)] * dth;
    }
    double bn = 0.0;
    for (double v : b) bn += v * v;
    bn = std::sqrt(bn);
    std::vector<double> e(static_cast<std::size_t>(m), 0.0);
    if (bn > 1e-300) {
      for (int c = 0; c < m; ++c) e[static_cast<std::size_t>(c)] = b[static_cast<std::size_t>(c)] / bn;
    } else {
      e[0] = 1.0;
    }
    // difference and its centered angular derivative
    double i2 = 0.0, id2 = 0.0, linf = 0.0;
    std::vector<double> diff(static_cast<std::size_t>(nt * m));
    for (int j = 0; j < nt; ++j) {
      const double t = profile_trace(d.grid.theta(j), phi);
      double n2 = 0.0;
      for (int c = 0; c < m; ++c) {
        const double v = d.at(j)[static_cast<std::size_t>(c)] - t * e[static_cast<std::size_t>(c)];
        diff[static_cast<std::size_t>(j * m + c)] = v;
        n2 += v * v;
      }
      i2 += n2 * dth;
      linf = std::max(linf, std::sqrt(n2));
    }
    for (int j = 0; j < nt; ++j) {
      const int jp = (j + 1) % nt, jm = (j + nt - 1) % nt;
      double n2 = 0.0;
      for (int c = 0; c < m; ++c) {
        const double dv = (diff[static_cast<std::size_t>(jp * m + c)] -
                           diff[static_cast<std::size_t>(jm * m + c)]) /
                          (2.0 * dth);
        n2 += dv * dv;
      }
      id2 += n2 * dth;
    }
    const double w12 = std::sqrt((1.0 / 6.0 + 1.0) * i2 + 0.25 * id2);
    return w12 + linf;
  };

  double best = std::numeric_limits<double>::infinity();
  double best_phi = 0.0;
  const int coarse = 512;
  for (int k = 0; k < coarse; ++k) {
    const double phi = 2.0 * pi * k / coarse;
    const double v = combined(phi);
    if (v < best) {
      best = v;
      best_phi = phi;
    }
  }
  const double span = 2.0 * pi / coarse;
  const double phi = golden_section(combined, best_phi - span, best_phi + span, 1e-8);
  return std::min(best, combined(phi));
}

}  // namespace detail

enum class PerturbationMode { amplitude, rotation, second_component, angular_mode };

inline PerturbationMode parse_mode(const std::string& s) {
  if (s == "amplitude") return PerturbationMode::amplitude;
  if (s == "rotation") return PerturbationMode::rotation;
  if (s == "second_component") return PerturbationMode::second_component;
  if (s.rfind("angular_mode", 0) == 0) return PerturbationMode::angular_mode;
  throw InvalidMode("unknown perturbation mode: " + s);
}

/// Named boundary-data families around the canonical profile trace
/// max(sin theta, 0)^2 / 2.
inline HomogeneousDatum perturbation_family(PerturbationMode mode, double delta,
                                            const PolarGrid& grid = {}, int angular_k = 3) {
  grid.validate();
  if (delta < 0.0 || delta > 0.5) throw InvalidMode("perturbation delta must lie in [0, 0.5]");
  HomogeneousDatum d;
  d.grid = grid;
  d.m = mode == PerturbationMode::second_component ? 2 : 1;
  d.g.assign(static_cast<std::size_t>(grid.n_theta * d.m), 0.0);
  for (int j = 0; j < grid.n_theta; ++j) {
    const double th = grid.theta(j);
    const double s = std::max(std::sin(th), 0.0);
    double* out = d.g.data() + static_cast<std::int64_t>(j) * d.m;
    switch (mode) {
      case PerturbationMode::amplitude:
        out[0] = (1.0 + delta) * 0.5 * s * s;
        break;
      case PerturbationMode::rotation: {
        const double c = std::cos(th - (0.5 * pi + delta));
        out[0] = c > 0.0 ? 0.5 * c * c : 0.0;
        break;
      }
      case PerturbationMode::second_component: {
        out[0] = 0.5 * s * s;
        out[1] = delta * sq(std::sin(th));
        break;
      }
      case PerturbationMode::angular_mode:
        out[0] = 0.5 * s * s + delta * std::cos(angular_k * th);
        break;
    }
  }
  d.delta_to_H = detail::datum_distance_to_profiles(d);
  return d;
}

/// c(r, theta) = r^2 g(theta), exact at the polar nodes.
inline PolarField homogeneous_extension(const HomogeneousDatum& d) {
  PolarField c(d.grid, d.m);
  for (int i = 0; i < d.grid.n_r; ++i) {
    const double r2 = sq(d.grid.radius(i));
    for (int j = 0; j < d.grid.n_theta; ++j)
      for (int cc = 0; cc < d.m; ++cc)
        c.at(i, j)[static_cast<std::size_t>(cc)] = r2 * d.at(j)[static_cast<std::size_t>(cc)];
  }
  return c;
}

// ---------------------------------------------------------------------------
// Discrete balanced energy on the polar grid and its minimisation over
// fields matching the datum on the r = 1 ring.
// ---------------------------------------------------------------------------

namespace detail {

struct PolarEnergy {
  PolarGrid g;
  int m;
  std::vector<double> a_rad;   // n_r - 1: weight on radial differences
  std::vector<double> a_ang;   // n_r: weight on angular differences
  std::vector<double> w_mass;  // n_r: nodal mass weight

  PolarEnergy(const PolarGrid& grid, int comps) : g(grid), m(comps) {
    a_rad.resize(static_cast<std::size_t>(g.n_r - 1));
    a_ang.resize(static_cast<std::size_t>(g.n_r));
    w_mass.resize(static_cast<std::size_t>(g.n_r));
    const double dth = g.dtheta();
    for (int i = 0; i + 1 < g.n_r; ++i) {
      const double dr = g.radius(i + 1) - g.radius(i);
      const double rmid = 0.5 * (g.radius(i) + g.radius(i + 1));
      a_rad[static_cast<std::size_t>(i)] = rmid * dth / dr;
    }
    for (int i = 0; i < g.n_r; ++i) {
      const double ri = g.radius(i);
      const double di = g.ring_width(i);
      a_ang[static_cast<std::size_t>(i)] = di / (ri * dth);
      w_mass[static_cast<std::size_t>(i)] = ri * di * dth;
    }
  }

  /// Dirichlet + mass part over the disc (the boundary term of the balanced
  /// energy is fixed by the datum and added separately).
  double volume_energy(const PolarField& v) const {
    const int nr = g.n_r, nt = g.n_theta;
    return chunked_sum(static_cast<std::size_t>(g.nodes()), [&](std::size_t ii) {
      const int i = static_cast<int>(ii) / nt;
      const int j = static_cast<int>(ii) % nt;
      const double* vij = v.values.data() + static_cast<std::int64_t>(ii) * m;
      double acc = 0.0;
      if (i + 1 < nr) {
        const double* vup = v.at(i + 1, j).data();
        double d2 = 0.0;
        for (int c = 0; c < m; ++c) d2 += sq(vup[c] - vij[c]);
        acc += a_rad[static_cast<std::size_t>(i)] * d2;
      }
      {
        const double* vnx = v.at(i, (j + 1) % nt).data();
        double d2 = 0.0;
        for (int c = 0; c < m; ++c) d2 += sq(vnx[c] - vij[c]);
        acc += a_ang[static_cast<std::size_t>(i)] * d2;
      }
      double n2 = 0.0;
      for (int c = 0; c < m; ++c) n2 += vij[c] * vij[c];
      acc += 2.0 * w_mass[static_cast<std::size_t>(i)] * std::sqrt(n2);
      return acc;
    });
  }

  /// -2 int_{bd B_1} |v|^2 from the datum ring (periodic trapezoid).
  double boundary_term(const HomogeneousDatum& d) const {
    const double dth = g.dtheta();
    double s = 0.0;
    for (int j = 0; j < g.n_theta; ++j) {
      double n2 = 0.0;
      for (int c = 0; c < m; ++c) n2 += sq(d.at(j)[static_cast<std::size_t>(c)]);
      s += n2 * dth;
    }
    return -2.0 * s;
  }

  void smooth_gradient(const PolarField& v, std::vector<double>& grad) const {
    const int nr = g.n_r, nt = g.n_theta;
    parallel_for(static_cast<std::size_t>(g.nodes()), [&](std::size_t ii) {
      const int i = static_cast<int>(ii) / nt;
      const int j = static_cast<int>(ii) % nt;
      double* out = grad.data() + static_cast<std::int64_t>(ii) * m;
      if (i == nr - 1) {
        for (int c = 0; c < m; ++c) out[c] = 0.0;  // boundary ring fixed
        return;
      }
      const double* vij = v.values.data() + static_cast<std::int64_t>(ii) * m;
      for (int c = 0; c < m; ++c) {
        double acc = 0.0;
        if (i + 1 < nr)
          acc += 2.0 * a_rad[static_cast<std::size_t>(i)] * (vij[c] - v.at(i + 1, j)[static_cast<std::size_t>(c)]);
        if (i > 0)
          acc += 2.0 * a_rad[static_cast<std::size_t>(i - 1)] * (vij[c] - v.at(i - 1, j)[static_cast<std::size_t>(c)]);
        acc += 2.0 * a_ang[static_cast<std::size_t>(i)] *
               (vij[c] - v.at(i, (j + 1) % nt)[static_cast<std::size_t>(c)]);
        acc += 2.0 * a_ang[static_cast<std::size_t>(i)] *
               (vij[c] - v.at(i, (j + nt - 1) % nt)[static_cast<std::size_t>(c)]);
        out[c] = acc;
      }
    });
  }

  /// diag of the quadratic-form Hessian; the Jacobi metric 2*diag majorises
  /// it (diagonally dominant with nonpositive off-diagonal entries)
  double hessian_diag(int i) const {
    double h = 4.0 * a_ang[static_cast<std::size_t>(i)];
    if (i + 1 < g.n_r) h += 2.0 * a_rad[static_cast<std::size_t>(i)];
    if (i > 0) h += 2.0 * a_rad[static_cast<std::size_t>(i - 1)];
    return h;
  }
};

}  // namespace detail

struct EpiParams {
  double tol_rel_energy = 1e-11;
  std::int64_t max_iter = 60000;
};

enum class EpiStatus {
  ok,                      // denominator > threshold, kappa defined
  exact_half_plane,        // |denominator| below threshold
  below_alpha_half,        // M_c < alpha_n/2: outside the inequality's regime
};

struct EpiResult {
  double M_c = 0.0;
  double M_v = 0.0;
  double alpha_half = 0.0;
  double denominator = 0.0;     // M_c - alpha_n/2
  double kappa_achieved = 0.0;  // defined only when status == ok
  EpiStatus status = EpiStatus::ok;
  std::int64_t iterations = 0;
};

/// Minimise the balanced energy over fields equal to the datum on the r = 1
/// ring. For fixed boundary values this equals minimising the volume energy;
/// the solver is a Jacobi-preconditioned proximal gradient with the exact
/// nodal shrinkage, started from the homogeneous extension, and only accepts
/// descent steps (so M_v <= M_c holds bitwise).
inline std::pair<EpiResult, PolarField> minimize_M(const HomogeneousDatum& d,
                                                   const EpiParams& params = {}) {
  d.grid.validate();
  const detail::PolarEnergy E(d.grid, d.m);
  PolarField v = homogeneous_extension(d);
  const double boundary = E.boundary_term(d);

  const double E_c = E.volume_energy(v);
  double energy = E_c;
  std::vector<double> grad(v.values.size());
  std::vector<double> step(static_cast<std::size_t>(d.grid.n_r));
  for (int i = 0; i < d.grid.n_r; ++i) step[static_cast<std::size_t>(i)] = 0.5 / E.hessian_diag(i);

  PolarField best = v;
  double best_energy = energy;
  std::vector<double> y = v.values, prev = v.values, cand(v.values.size());
  double t_mom = 1.0;
  double scale = 1.0;
  std::int64_t it = 0;
  const int nt = d.grid.n_theta, nr = d.grid.n_r;

  auto prox_step = [&](const std::vector<double>& from, std::vector<double>& out) {
    PolarField tmp;
    tmp.grid = d.grid;
    tmp.m = d.m;
    tmp.values = from;  // gradient reads a PolarField view
    E.smooth_gradient(tmp, grad);
    out = from;
    parallel_for(static_cast<std::size_t>(d.grid.nodes()), [&](std::size_t ii) {
      const int i = static_cast<int>(ii) / nt;
      if (i == nr - 1) return;
      const double tau = scale * step[static_cast<std::size_t>(i)];
      double* z = out.data() + static_cast<std::int64_t>(ii) * d.m;
      for (int c = 0; c < d.m; ++c)
        z[c] = from[ii * static_cast<std::size_t>(d.m) + static_cast<std::size_t>(c)] -
               tau * grad[ii * static_cast<std::size_t>(d.m) + static_cast<std::size_t>(c)];
      prox_shrink(std::span(z, static_cast<std::size_t>(d.m)),
                  tau * E.w_mass[static_cast<std::size_t>(i)]);
    });
  };

  std::vector<double> history{energy};
  const std::size_t window = 100;
  bool converged = false;
  PolarField vtmp;
  vtmp.grid = d.grid;
  vtmp.m = d.m;
  for (it = 1; it <= params.max_iter; ++it) {
    prox_step(y, cand);
    vtmp.values = cand;
    double cand_energy = E.volume_energy(vtmp);
    if (!std::isfinite(cand_energy)) throw NonFiniteEncountered("minimize_M: non-finite energy");

    bool restart = false;
    const double slack = 1e-12 * (std::abs(energy) + 1.0);
    if (cand_energy > energy + slack) {
      t_mom = 1.0;
      y = v.values;
      prox_step(y, cand);
      vtmp.values = cand;
      cand_energy = E.volume_energy(vtmp);
      int bt = 0;
      while (cand_energy > energy + slack && bt++ < 30) {
        scale *= 0.5;
        prox_step(y, cand);
        vtmp.values = cand;
        cand_energy = E.volume_energy(vtmp);
      }
      restart = true;
    } else {
      double s = 0.0;
      for (std::size_t i = 0; i < cand.size(); ++i)
        s += (y[i] - cand[i]) * (cand[i] - v.values[i]);
      restart = s > 0.0;
    }
    prev.swap(v.values);
    v.values = cand;
    energy = cand_energy;
    if (energy < best_energy) {
      best_energy = energy;
      best.values = v.values;
    }
    if (restart) {
      t_mom = 1.0;
      y = v.values;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
      const double beta = (t_mom - 1.0) / t_next;
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = v.values[i] + beta * (v.values[i] - prev[i]);
      t_mom = t_next;
    }
    history.push_back(energy);
    if (history.size() > window) {
      const double e_old = history[history.size() - 1 - window];
      if ((e_old - energy) <= params.tol_rel_energy * (std::abs(energy) + 1.0)) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) throw NotConverged("minimize_M: iteration limit reached");

  EpiResult res;
  res.M_c = E_c + boundary;
  res.M_v = best_energy + boundary;
  res.alpha_half = 0.5 * alpha_n(2).value;
  res.denominator = res.M_c - res.alpha_half;
  res.iterations = it;
  if (res.denominator > 1e-10) {
    res.status = EpiStatus::ok;
    res.kappa_achieved = (res.M_c - res.M_v) / res.denominator;
  } else if (res.denominator < -1e-10) {
    res.status = EpiStatus::below_alpha_half;
  } else {
    res.status = EpiStatus::exact_half_plane;
  }
  return {res, std::move(best)};
}

/// Discrete balanced energy of an arbitrary polar field with its own r = 1
/// ring as the datum (diagnostic).
inline double polar_M(const PolarField& v) {
  const detail::PolarEnergy E(v.grid, v.m);
  HomogeneousDatum d;
  d.grid = v.grid;
  d.m = v.m;
  d.g.assign(static_cast<std::size_t>(v.grid.n_theta * v.m), 0.0);
  for (int j = 0; j < v.grid.n_theta; ++j)
    for (int c = 0; c < v.m; ++c)
      d.g[static_cast<std::size_t>(j * v.m + c)] = v.at(v.grid.n_r - 1, j)[static_cast<std::size_t>(c)];
  return E.volume_energy(v) + E.boundary_term(d);
}

}  // namespace vop
