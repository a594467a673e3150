#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "vop/boundary.hpp"

namespace vop {

/// Group shrinkage: prox of tau * 2|.| on R^m, (1 - 2 tau / |z|)_+ z.
inline void prox_shrink(std::span<double> z, double tau) {
  double n2 = 0.0;
  for (double v : z) n2 += v * v;
  const double n = std::sqrt(n2);
  if (n <= 2.0 * tau) {
    for (double& v : z) v = 0.0;
    return;
  }
  const double scale = 1.0 - 2.0 * tau / n;
  for (double& v : z) v *= scale;
}

inline std::vector<double> prox_shrink(std::vector<double> z, double tau) {
  prox_shrink(std::span(z), tau);
  return z;
}

enum class StepRule { fixed, backtracking };

struct SolveParams {
  StepRule step_rule = StepRule::backtracking;
  bool momentum = true;
  double tol_rel_energy = 1e-10;
  std::int64_t max_iter = 200000;
  std::optional<VectorField> seed_field;
};

struct SolveReport {
  std::int64_t iterations = 0;
  double final_energy = 0.0;
  std::vector<double> energy_history_decimated;
  double grad_map_norm = 0.0;  // prox-gradient fixed-point residual, PDE units
  bool converged = false;
};

namespace detail {

/// Discrete objective: sum over axis edges of vol*(du/h_a)^2 plus
/// sum over nodes of 2*vol*w_trap*|u|; its minimiser satisfies the
/// (2n+1)-point optimality system.
struct DiscreteEnergy {
  const Grid* g;
  int m;
  double vol;
  std::array<std::int64_t, 3> stride{};
  // per-node masks: bit 7 = boundary (fixed), bits 0..2 = at the high edge
  // along axis a (no outgoing edge there); trapezoid weight cached separately
  std::vector<std::uint8_t> mask;
  std::vector<float> trap;

  explicit DiscreteEnergy(const Grid& grid, int comps) : g(&grid), m(comps), vol(grid.cell_volume()) {
    std::int64_t s = 1;
    for (int a = grid.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= grid.count[a];
    }
    const std::int64_t nodes = grid.nodes();
    mask.assign(static_cast<std::size_t>(nodes), 0);
    trap.assign(static_cast<std::size_t>(nodes), 1.0f);
    for (std::int64_t id = 0; id < nodes; ++id) {
      const auto idx = grid.node_multi(id);
      std::uint8_t b = 0;
      double w = 1.0;
      for (int a = 0; a < grid.dim; ++a) {
        if (idx[a] == grid.count[a] - 1) b |= static_cast<std::uint8_t>(1u << a);
        if (idx[a] == 0 || idx[a] == grid.count[a] - 1) {
          b |= 0x80;
          w *= 0.5;
        }
      }
      mask[static_cast<std::size_t>(id)] = b;
      trap[static_cast<std::size_t>(id)] = static_cast<float>(w);
    }
  }

  bool fixed(std::int64_t id) const { return (mask[static_cast<std::size_t>(id)] & 0x80) != 0; }

  double value(const std::vector<double>& u) const {
    const std::int64_t nodes = g->nodes();
    std::array<double, 3> invh2{};
    for (int a = 0; a < g->dim; ++a) invh2[a] = 1.0 / sq(g->spacing[a]);
    const int dim = g->dim, mm = m;
    return chunked_sum(static_cast<std::size_t>(nodes), [&](std::size_t ii) {
      const auto id = static_cast<std::int64_t>(ii);
      const std::uint8_t mk = mask[ii];
      double acc = 0.0;
      double n2 = 0.0;
      const double* uj = u.data() + id * mm;
      for (int c = 0; c < mm; ++c) n2 += uj[c] * uj[c];
      acc += 2.0 * trap[ii] * std::sqrt(n2);
      for (int a = 0; a < dim; ++a) {
        if (mk & (1u << a)) continue;  // each edge counted at its low node
        const double* un = u.data() + (id + stride[a]) * mm;
        double e = 0.0;
        for (int c = 0; c < mm; ++c) e += sq(un[c] - uj[c]);
        acc += e * invh2[a];
      }
      return vol * acc;
    });
  }

  /// Gradient of the smooth (Dirichlet) part at interior nodes:
  /// grad_j = -2 vol * (discrete Laplacian of u at j).
  void smooth_gradient(const std::vector<double>& u, std::vector<double>& grad) const {
    const std::int64_t nodes = g->nodes();
    std::array<double, 3> invh2{};
    for (int a = 0; a < g->dim; ++a) invh2[a] = 1.0 / sq(g->spacing[a]);
    const int dim = g->dim, mm = m;
    parallel_for(static_cast<std::size_t>(nodes), [&](std::size_t ii) {
      const auto id = static_cast<std::int64_t>(ii);
      if (mask[ii] & 0x80) {
        for (int c = 0; c < mm; ++c) grad[static_cast<std::size_t>(id * mm + c)] = 0.0;
        return;  // boundary nodes are fixed
      }
      const double* uj = u.data() + id * mm;
      for (int c = 0; c < mm; ++c) {
        double lap = 0.0;
        for (int a = 0; a < dim; ++a) {
          lap += (u[static_cast<std::size_t>((id + stride[a]) * mm + c)] - 2.0 * uj[c] +
                  u[static_cast<std::size_t>((id - stride[a]) * mm + c)]) *
                 invh2[a];
        }
        grad[static_cast<std::size_t>(id * mm + c)] = -2.0 * vol * lap;
      }
    });
  }

  double lipschitz_bound() const {
    double s = 0.0;
    for (int a = 0; a < g->dim; ++a) s += 4.0 / sq(g->spacing[a]);
    return 2.0 * vol * s;
  }
};

inline void decimate_history(std::vector<double>& h, std::size_t max_len = 512) {
  if (h.size() <= max_len) return;
  std::vector<double> out;
  const std::size_t stride = (h.size() + max_len - 1) / max_len;
  for (std::size_t i = 0; i < h.size(); i += stride) out.push_back(h[i]);
  if (out.back() != h.back()) out.push_back(h.back());
  h = std::move(out);
}

}  // namespace detail

/// Minimise the discrete energy over fields with fixed boundary data.
/// Proximal gradient (optionally FISTA-accelerated with energy restart);
/// the nonsmooth node term is handled exactly by prox_shrink.
inline std::pair<VectorField, SolveReport> solve(const Grid& grid, int m, const BoundaryData& bd,
                                                 const SolveParams& params = {}) {
  bd.validate(grid);
  if (params.tol_rel_energy <= 0.0) throw Error("solve: tol_rel_energy must be positive");
  if (params.max_iter < 1) throw Error("solve: max_iter must be >= 1");

  VectorField u(grid, m);
  if (params.seed_field) {
    if (params.seed_field->grid.nodes() != grid.nodes() || params.seed_field->m != m)
      throw Error("solve: seed field shape mismatch");
    u.values = params.seed_field->values;
    if (!u.all_finite()) throw NonFiniteEncountered("solve: seed field non-finite");
  }
  apply_boundary(u, bd);

  const detail::DiscreteEnergy E(grid, m);
  const double L0 = E.lipschitz_bound();
  double tau = 1.0 / L0;
  const double vol = grid.cell_volume();
  const std::int64_t nodes = grid.nodes();

  std::vector<double> grad(u.values.size());
  std::vector<double> y = u.values;      // extrapolated point
  std::vector<double> prev = u.values;   // previous iterate
  std::vector<double> cand(u.values.size());

  double energy = E.value(u.values);
  if (!std::isfinite(energy)) throw NonFiniteEncountered("solve: non-finite initial energy");
  std::vector<double> history{energy};

  double t_mom = 1.0;
  double grad_map = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::int64_t it = 0;

  auto prox_step = [&](const std::vector<double>& from, double step, std::vector<double>& out) {
    E.smooth_gradient(from, grad);
    out = from;
    parallel_for(static_cast<std::size_t>(nodes), [&](std::size_t ii) {
      const auto id = static_cast<std::int64_t>(ii);
      if (E.fixed(id)) return;
      double* z = out.data() + id * m;
      for (int c = 0; c < m; ++c) z[c] = from[static_cast<std::size_t>(id * m + c)] -
                                          step * grad[static_cast<std::size_t>(id * m + c)];
      prox_shrink(std::span(z, static_cast<std::size_t>(m)), step * vol);
    });
  };

  // fixed-point residual of the plain prox step at u, in PDE units
  auto fixed_point_residual = [&](double step) {
    prox_step(u.values, step, cand);
    double res = 0.0;
    for (std::int64_t id = 0; id < nodes; ++id) {
      double n2 = 0.0;
      for (int c = 0; c < m; ++c)
        n2 += sq(u.values[static_cast<std::size_t>(id * m + c)] -
                 cand[static_cast<std::size_t>(id * m + c)]);
      res = std::max(res, std::sqrt(n2));
    }
    return res / (step * 2.0 * vol);
  };

  const double grad_map_tol = std::sqrt(params.tol_rel_energy);
  const std::size_t window = 100;
  std::int64_t next_confirm = 0;
  for (it = 1; it <= params.max_iter; ++it) {
    const std::vector<double>& base = params.momentum ? y : u.values;
    prox_step(base, tau, cand);
    double cand_energy = E.value(cand);
    if (!std::isfinite(cand_energy)) throw NonFiniteEncountered("solve: non-finite energy");

    if (params.momentum) {
      // adaptive restart: gradient-mapping test plus an energy safeguard
      const double slack = 1e-12 * (std::abs(energy) + 1.0);
      bool restart = false;
      if (cand_energy > energy + slack) {
        t_mom = 1.0;
        y = u.values;
        prox_step(y, tau, cand);
        cand_energy = E.value(cand);
        if (params.step_rule == StepRule::backtracking) {
          int bt = 0;
          while (cand_energy > energy + slack && bt++ < 40) {
            tau *= 0.5;
            prox_step(y, tau, cand);
            cand_energy = E.value(cand);
          }
        }
        restart = true;
      } else {
        double s = 0.0;
        for (std::size_t i = 0; i < cand.size(); ++i)
          s += (y[i] - cand[i]) * (cand[i] - u.values[i]);
        restart = s > 0.0;
      }
      prev.swap(u.values);
      u.values = cand;
      if (restart) {
        t_mom = 1.0;
        y = u.values;
      } else {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        const double beta = (t_mom - 1.0) / t_next;
        parallel_for(u.values.size(), [&](std::size_t i) {
          y[i] = u.values[i] + beta * (u.values[i] - prev[i]);
        });
        t_mom = t_next;
      }
    } else {
      if (params.step_rule == StepRule::backtracking) {
        int bt = 0;
        while (cand_energy > energy && bt++ < 40) {
          tau *= 0.5;
          prox_step(u.values, tau, cand);
          cand_energy = E.value(cand);
        }
      }
      if (cand_energy <= energy) {
        prev.swap(u.values);
        u.values = cand;
      } else {
        cand_energy = energy;  // no admissible descent step; stay put
      }
    }

    energy = cand_energy;
    history.push_back(energy);

    bool flat = false;
    if (history.size() > window) {
      const double e_old = history[history.size() - 1 - window];
      flat = (e_old - energy) <= params.tol_rel_energy * (std::abs(energy) + 1.0);
    }
    if (flat && it >= next_confirm) {
      grad_map = fixed_point_residual(tau);
      next_confirm = it + 25;
      if (grad_map < grad_map_tol) {
        converged = true;
        break;
      }
    }
  }

  SolveReport rep;
  rep.iterations = std::min(it, params.max_iter);
  rep.final_energy = energy;
  rep.grad_map_norm = grad_map;
  rep.converged = converged;
  detail::decimate_history(history);
  rep.energy_history_decimated = std::move(history);
  return {std::move(u), std::move(rep)};
}

/// Independent oracle for tiny instances: cyclic exact coordinate
/// minimisation. Each node update is the closed-form minimiser of its local
/// quadratic-plus-2|.| objective (a shrinkage of the weighted neighbour
/// average); convexity drives the sweep to the global minimum.
inline VectorField oracle_solve(const Grid& grid, int m, const BoundaryData& bd,
                                double tol = 1e-12, std::int64_t max_sweeps = 500000) {
  for (int a = 0; a < grid.dim; ++a)
    if (grid.count[a] > 12) throw InstanceTooLarge("oracle_solve: more than 12 nodes per axis");
  if (m > 2) throw InstanceTooLarge("oracle_solve: m > 2");
  bd.validate(grid);

  VectorField u(grid, m);
  apply_boundary(u, bd);

  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = grid.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= grid.count[a];
    }
  }
  double inv_weight_sum = 0.0;
  {
    double A = 0.0;
    for (int a = 0; a < grid.dim; ++a) A += 2.0 / sq(grid.spacing[a]);
    inv_weight_sum = 1.0 / A;
  }

  const std::int64_t nodes = grid.nodes();
  for (std::int64_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::int64_t id = 0; id < nodes; ++id) {
      const auto idx = grid.node_multi(id);
      if (grid.is_boundary(idx)) continue;
      std::array<double, 2> z{};
      for (int c = 0; c < m; ++c) {
        double b = 0.0;
        for (int a = 0; a < grid.dim; ++a)
          b += (u.values[static_cast<std::size_t>((id + stride[a]) * m + c)] +
                u.values[static_cast<std::size_t>((id - stride[a]) * m + c)]) /
               sq(grid.spacing[a]);
        z[static_cast<std::size_t>(c)] = b * inv_weight_sum;
      }
      prox_shrink(std::span(z.data(), static_cast<std::size_t>(m)), 0.5 * inv_weight_sum);
      for (int c = 0; c < m; ++c) {
        double& cur = u.values[static_cast<std::size_t>(id * m + c)];
        max_change = std::max(max_change, std::abs(cur - z[static_cast<std::size_t>(c)]));
        cur = z[static_cast<std::size_t>(c)];
      }
    }
    if (max_change < tol) break;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Pointwise system residuals. Nodes within 2 cells of the discrete free
// boundary are excluded from the PDE sup (the profile is only C^{1,alpha}
// there; stencil residuals do not converge at the kink) and reported
// separately.
// ---------------------------------------------------------------------------

struct ResidualReport {
  double pde_residual_sup = 0.0;        // |lap u - u/|u|| where |u| > delta, away from the kink
  double near_gamma_residual_sup = 0.0; // the same sup inside the 2-cell band
  double zero_set_laplacian_sup = 0.0;  // |lap u| where the node and all neighbours are dead
  double delta = 0.0;
  bool vacuous = false;  // no node qualified for the PDE sup
};

inline ResidualReport residual(const VectorField& f, double delta) {
  if (delta <= 0.0) throw Error("residual: delta must be positive");
  const Grid& g = f.grid;
  ResidualReport rep;
  rep.delta = delta;

  // cells crossed by the |u| = delta level
  std::vector<char> near_gamma(static_cast<std::size_t>(g.nodes()), 0);
  {
    std::vector<std::array<std::int64_t, 3>> gamma_cells;
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
      if (above && below) gamma_cells.push_back(c);
    }
    for (const auto& c : gamma_cells) {
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
          if (++it[a] < hi[a] + 1) break;
          it[a] = lo[a];
        }
        if (a < 0) break;
      }
    }
  }

  const VectorField lap = laplacian(f);
  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.count[a];
    }
  }

  bool any_pde = false;
  for (std::int64_t id = 0; id < g.nodes(); ++id) {
    const auto idx = g.node_multi(id);
    if (g.is_boundary(idx)) continue;
    const double nu = f.norm_at(id);
    if (nu > delta) {
      double r2 = 0.0;
      for (int c = 0; c < f.m; ++c) {
        const double s = f.values[static_cast<std::size_t>(id * f.m + c)] / nu;
        r2 += sq(lap.values[static_cast<std::size_t>(id * f.m + c)] - s);
      }
      const double r = std::sqrt(r2);
      if (near_gamma[static_cast<std::size_t>(id)]) {
        rep.near_gamma_residual_sup = std::max(rep.near_gamma_residual_sup, r);
      } else {
        rep.pde_residual_sup = std::max(rep.pde_residual_sup, r);
        any_pde = true;
      }
    } else {
      bool all_dead = true;
      for (int a = 0; a < g.dim && all_dead; ++a) {
        if (f.norm_at(id + stride[a]) > delta || f.norm_at(id - stride[a]) > delta)
          all_dead = false;
      }
      if (all_dead) {
        double r2 = 0.0;
        for (int c = 0; c < f.m; ++c) r2 += sq(lap.values[static_cast<std::size_t>(id * f.m + c)]);
        rep.zero_set_laplacian_sup = std::max(rep.zero_set_laplacian_sup, std::sqrt(r2));
      }
    }
  }
  rep.vacuous = !any_pde;
  return rep;
}

/// Scale-free default support threshold.
inline double default_delta(const VectorField& f) { return 1e-6 * std::max(f.sup_norm(), 1e-300); }

}  // namespace vop
