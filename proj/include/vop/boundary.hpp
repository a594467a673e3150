#pragma once

#include <random>
#include <vector>

#include "vop/field.hpp"

namespace vop {

/// Boundary node ids in ascending node-index order (the fixed traversal all
/// boundary data uses).
inline std::vector<std::int64_t> boundary_nodes(const Grid& g) {
  std::vector<std::int64_t> out;
  const std::int64_t n = g.nodes();
  for (std::int64_t i = 0; i < n; ++i)
    if (g.is_boundary(g.node_multi(i))) out.push_back(i);
  return out;
}

/// Dirichlet data: values on boundary nodes, aligned with boundary_nodes().
struct BoundaryData {
  int m = 1;
  std::vector<double> values;  // boundary nodes * m

  void validate(const Grid& g) const {
    const auto bn = boundary_nodes(g);
    if (values.size() != bn.size() * static_cast<std::size_t>(m))
      throw Error("boundary data shape does not match the grid boundary");
    for (double v : values)
      if (!std::isfinite(v)) throw NonFiniteEncountered("boundary data contains non-finite values");
  }
};

inline BoundaryData boundary_from_field(const VectorField& f) {
  BoundaryData bd;
  bd.m = f.m;
  for (std::int64_t id : boundary_nodes(f.grid)) {
    auto v = f.at(id);
    bd.values.insert(bd.values.end(), v.begin(), v.end());
  }
  return bd;
}

inline void apply_boundary(VectorField& f, const BoundaryData& bd) {
  const auto bn = boundary_nodes(f.grid);
  if (bd.m != f.m || bd.values.size() != bn.size() * static_cast<std::size_t>(f.m))
    throw Error("apply_boundary: shape mismatch");
  for (std::size_t k = 0; k < bn.size(); ++k)
    for (int c = 0; c < f.m; ++c)
      f.values[static_cast<std::size_t>(bn[k] * f.m + c)] =
          bd.values[k * static_cast<std::size_t>(f.m) + static_cast<std::size_t>(c)];
}

// ---------------------------------------------------------------------------
// Named boundary generators. All are analytic functions of the node
// coordinates, so the data is resolution-independent and reproducible.
// ---------------------------------------------------------------------------

inline BoundaryData half_plane_boundary(const Grid& g, const HalfPlaneSolution& hp) {
  return boundary_from_field(eval_half_plane(g, hp));
}

/// Half-plane data with the normal rotated by `angle` in the (x1, xn) plane.
inline BoundaryData rotated_boundary(const Grid& g, double angle, int m) {
  HalfPlaneSolution hp = canonical_half_plane(g.dim, m);
  const int last = g.dim - 1;
  hp.nu[0] = std::sin(angle);
  hp.nu[last] = std::cos(angle);
  return half_plane_boundary(g, hp);
}

/// Half-plane trace plus an angular-harmonic perturbation
/// amplitude * |x|^2 cos(k theta) applied to component `comp`.
inline BoundaryData perturbed_half_plane_boundary(const Grid& g, const HalfPlaneSolution& hp,
                                                  int mode_k, double amplitude, int comp = 0) {
  if (g.dim < 2) throw InvalidMode("perturbed boundary data needs dim >= 2");
  if (comp < 0 || comp >= hp.m()) throw InvalidMode("perturbation component out of range");
  VectorField f = eval_half_plane(g, hp);
  BoundaryData bd = boundary_from_field(f);
  const auto bn = boundary_nodes(g);
  for (std::size_t k = 0; k < bn.size(); ++k) {
    const Point p = g.node_point(bn[k]);
    const double r2 = dot(p, p, g.dim);
    const double th = std::atan2(p[1], p[0]);
    bd.values[k * static_cast<std::size_t>(bd.m) + static_cast<std::size_t>(comp)] +=
        amplitude * r2 * std::cos(mode_k * th);
  }
  return bd;
}

/// Seeded random boundary data: per component a random quadratic polynomial
/// in x with coefficients ~ U(-amplitude, amplitude).
inline BoundaryData random_boundary(const Grid& g, int m, std::uint64_t seed,
                                    double amplitude = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  // coefficient layout per component: constant, linear (dim), quadratic
  // (dim*(dim+1)/2)
  const int nq = g.dim * (g.dim + 1) / 2;
  std::vector<double> coef(static_cast<std::size_t>(m * (1 + g.dim + nq)));
  for (auto& c : coef) c = dist(rng);

  BoundaryData bd;
  bd.m = m;
  const auto bn = boundary_nodes(g);
  bd.values.resize(bn.size() * static_cast<std::size_t>(m));
  for (std::size_t k = 0; k < bn.size(); ++k) {
    const Point p = g.node_point(bn[k]);
    for (int c = 0; c < m; ++c) {
      const double* cf = coef.data() + static_cast<std::size_t>(c * (1 + g.dim + nq));
      double v = cf[0];
      int pos = 1;
      for (int a = 0; a < g.dim; ++a) v += cf[pos++] * p[a];
      for (int a = 0; a < g.dim; ++a)
        for (int b = a; b < g.dim; ++b) v += cf[pos++] * p[a] * p[b];
      bd.values[k * static_cast<std::size_t>(m) + static_cast<std::size_t>(c)] = v;
    }
  }
  return bd;
}

}  // namespace vop
