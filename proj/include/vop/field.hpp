#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "vop/grid.hpp"

namespace vop {

/// Map u : grid -> R^m, stored node-major with the m components interleaved.
struct VectorField {
  Grid grid;
  int m = 1;
  std::vector<double> values;  // nodes() * m

  VectorField() = default;
  VectorField(const Grid& g, int components)
      : grid(g), m(components), values(static_cast<std::size_t>(g.nodes() * components), 0.0) {}

  std::span<double> at(std::int64_t node) {
    return {values.data() + node * m, static_cast<std::size_t>(m)};
  }
  std::span<const double> at(std::int64_t node) const {
    return {values.data() + node * m, static_cast<std::size_t>(m)};
  }

  double norm_at(std::int64_t node) const {
    double s = 0.0;
    const double* v = values.data() + node * m;
    for (int c = 0; c < m; ++c) s += v[c] * v[c];
    return std::sqrt(s);
  }

  double sup_norm() const {
    double s = 0.0;
    const std::int64_t n = grid.nodes();
    for (std::int64_t i = 0; i < n; ++i) s = std::max(s, norm_at(i));
    return s;
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Element of the model family: x -> 0.5 * max(x . nu, 0)^2 * e with
/// |nu| = |e| = 1.
struct HalfPlaneSolution {
  Point nu{};
  std::vector<double> e;

  int m() const { return static_cast<int>(e.size()); }

  void validate(int dim) const {
    if (std::abs(norm(nu, dim) - 1.0) > 1e-12) throw Error("half-plane: |nu| != 1");
    double s = 0.0;
    for (double c : e) s += c * c;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-12) throw Error("half-plane: |e| != 1");
  }

  double scalar(const Point& x, int dim) const {
    const double t = dot(x, nu, dim);
    return t > 0.0 ? 0.5 * t * t : 0.0;
  }
};

inline HalfPlaneSolution canonical_half_plane(int dim, int m) {
  HalfPlaneSolution hp;
  hp.nu[dim - 1] = 1.0;
  hp.e.assign(static_cast<std::size_t>(m), 0.0);
  hp.e[0] = 1.0;
  return hp;
}

inline VectorField eval_half_plane(const Grid& grid, const HalfPlaneSolution& hp) {
  hp.validate(grid.dim);
  VectorField f(grid, hp.m());
  const std::int64_t n = grid.nodes();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto id = static_cast<std::int64_t>(i);
    const double v = hp.scalar(grid.node_point(id), grid.dim);
    double* out = f.values.data() + id * f.m;
    for (int c = 0; c < f.m; ++c) out[c] = v * hp.e[static_cast<std::size_t>(c)];
  });
  return f;
}

// ---------------------------------------------------------------------------
// Discrete differential operators. Central differences at interior nodes,
// one-sided second-order at the boundary; both are exact on quadratics.
// ---------------------------------------------------------------------------

/// Per-node gradient, layout [node][component][axis].
struct GradientField {
  Grid grid;
  int m = 1;
  std::vector<double> values;  // nodes * m * dim

  double at(std::int64_t node, int c, int axis) const {
    return values[static_cast<std::size_t>((node * m + c) * grid.dim + axis)];
  }

  /// |grad u|^2 at a node (Frobenius norm over components x axes).
  double frob2_at(std::int64_t node) const {
    const double* p = values.data() + node * m * grid.dim;
    double s = 0.0;
    for (int k = 0; k < m * grid.dim; ++k) s += p[k] * p[k];
    return s;
  }
};

inline GradientField gradient(const VectorField& f) {
  const Grid& g = f.grid;
  GradientField out;
  out.grid = g;
  out.m = f.m;
  out.values.assign(static_cast<std::size_t>(g.nodes() * f.m * g.dim), 0.0);

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
        out.values[static_cast<std::size_t>((id * f.m + c) * g.dim + a)] = d;
      }
    }
  });
  return out;
}

/// Standard (2n+1)-point Laplacian at interior nodes. Boundary nodes carry
/// NaN: the stencil does not reach there and no consumer reads them.
inline VectorField laplacian(const VectorField& f) {
  const Grid& g = f.grid;
  VectorField out(g, f.m);

  std::array<std::int64_t, 3> stride{};
  {
    std::int64_t s = 1;
    for (int a = g.dim - 1; a >= 0; --a) {
      stride[a] = s;
      s *= g.count[a];
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();

  parallel_for(static_cast<std::size_t>(g.nodes()), [&](std::size_t ii) {
    const auto id = static_cast<std::int64_t>(ii);
    const auto idx = g.node_multi(id);
    if (g.is_boundary(idx)) {
      for (int c = 0; c < f.m; ++c) out.values[static_cast<std::size_t>(id * f.m + c)] = nan;
      return;
    }
    for (int c = 0; c < f.m; ++c) {
      double acc = 0.0;
      const double uc = f.values[static_cast<std::size_t>(id * f.m + c)];
      for (int a = 0; a < g.dim; ++a) {
        const std::int64_t s = stride[a];
        const double up = f.values[static_cast<std::size_t>((id + s) * f.m + c)];
        const double dn = f.values[static_cast<std::size_t>((id - s) * f.m + c)];
        acc += (up - 2.0 * uc + dn) / (g.spacing[a] * g.spacing[a]);
      }
      out.values[static_cast<std::size_t>(id * f.m + c)] = acc;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Multilinear interpolation. Coordinates are clamped into the box by up to
// 1e-9 * h to absorb roundoff at the extents; genuine outside queries are the
// caller's responsibility (traces guard with contains_ball).
// ---------------------------------------------------------------------------

inline void sample_into(const VectorField& f, const Point& x, std::span<double> out) {
  const Grid& g = f.grid;
  std::array<std::int64_t, 3> base{};
  std::array<double, 3> w{};
  for (int a = 0; a < g.dim; ++a) {
    double t = (x[a] - g.lo[a]) / g.spacing[a];
    t = std::clamp(t, 0.0, static_cast<double>(g.count[a] - 1));
    auto i = static_cast<std::int64_t>(t);
    if (i > g.count[a] - 2) i = g.count[a] - 2;
    base[a] = i;
    w[a] = t - static_cast<double>(i);
  }
  for (int c = 0; c < f.m; ++c) out[static_cast<std::size_t>(c)] = 0.0;
  const int corners = 1 << g.dim;
  for (int k = 0; k < corners; ++k) {
    double weight = 1.0;
    std::array<std::int64_t, 3> idx = base;
    for (int a = 0; a < g.dim; ++a) {
      if (k & (1 << a)) {
        idx[a] += 1;
        weight *= w[a];
      } else {
        weight *= 1.0 - w[a];
      }
    }
    if (weight == 0.0) continue;
    const std::int64_t id = g.node_index(idx);
    const double* v = f.values.data() + id * f.m;
    for (int c = 0; c < f.m; ++c) out[static_cast<std::size_t>(c)] += weight * v[c];
  }
}

inline double sample_norm(const VectorField& f, const Point& x) {
  std::array<double, 8> buf{};
  if (f.m > 8) throw Error("sample_norm: m > 8 unsupported");
  sample_into(f, x, std::span(buf.data(), static_cast<std::size_t>(f.m)));
  double s = 0.0;
  for (int c = 0; c < f.m; ++c) s += buf[static_cast<std::size_t>(c)] * buf[static_cast<std::size_t>(c)];
  return std::sqrt(s);
}

/// Scalar field |u| on the same grid.
inline VectorField magnitude_field(const VectorField& f) {
  VectorField out(f.grid, 1);
  const std::int64_t n = f.grid.nodes();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    out.values[i] = f.norm_at(static_cast<std::int64_t>(i));
  });
  return out;
}

}  // namespace vop
