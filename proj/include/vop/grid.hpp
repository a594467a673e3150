#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>

#include "vop/common.hpp"

namespace vop {

using Point = std::array<double, 3>;  // unused trailing coordinates are zero

inline double dot(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Point& a, int dim) { return std::sqrt(dot(a, a, dim)); }

struct Ball {
  Point center{};
  double radius = 0.0;
};

/// Node-centered tensor grid over an axis-aligned box in R^n, n in {1,2,3}.
/// Nodes along axis a sit at lo[a] + i * spacing[a], i = 0 .. count[a]-1,
/// with spacing[a] = (hi[a] - lo[a]) / (count[a] - 1).
struct Grid {
  int dim = 0;
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  std::array<std::int64_t, 3> count{};
  std::array<double, 3> spacing{};

  std::int64_t nodes() const {
    std::int64_t n = 1;
    for (int a = 0; a < dim; ++a) n *= count[a];
    return n;
  }

  std::int64_t cells() const {
    std::int64_t n = 1;
    for (int a = 0; a < dim; ++a) n *= count[a] - 1;
    return n;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing[a];
    return v;
  }

  double coord(int axis, std::int64_t i) const { return lo[axis] + static_cast<double>(i) * spacing[axis]; }

  /// Row-major linear index, last axis fastest.
  std::int64_t node_index(const std::array<std::int64_t, 3>& idx) const {
    std::int64_t id = 0;
    for (int a = 0; a < dim; ++a) id = id * count[a] + idx[a];
    return id;
  }

  std::array<std::int64_t, 3> node_multi(std::int64_t id) const {
    std::array<std::int64_t, 3> idx{};
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = id % count[a];
      id /= count[a];
    }
    return idx;
  }

  Point node_point(const std::array<std::int64_t, 3>& idx) const {
    Point p{};
    for (int a = 0; a < dim; ++a) p[a] = coord(a, idx[a]);
    return p;
  }

  Point node_point(std::int64_t id) const { return node_point(node_multi(id)); }

  bool is_boundary(const std::array<std::int64_t, 3>& idx) const {
    for (int a = 0; a < dim; ++a)
      if (idx[a] == 0 || idx[a] == count[a] - 1) return true;
    return false;
  }

  /// Cell indexing: cell c spans nodes c .. c+1 per axis.
  std::int64_t cell_index(const std::array<std::int64_t, 3>& c) const {
    std::int64_t id = 0;
    for (int a = 0; a < dim; ++a) id = id * (count[a] - 1) + c[a];
    return id;
  }

  std::array<std::int64_t, 3> cell_multi(std::int64_t id) const {
    std::array<std::int64_t, 3> c{};
    for (int a = dim - 1; a >= 0; --a) {
      c[a] = id % (count[a] - 1);
      id /= count[a] - 1;
    }
    return c;
  }

  Point cell_center(const std::array<std::int64_t, 3>& c) const {
    Point p{};
    for (int a = 0; a < dim; ++a) p[a] = lo[a] + (static_cast<double>(c[a]) + 0.5) * spacing[a];
    return p;
  }

  bool contains_point(const Point& p, double slack = 1e-12) const {
    for (int a = 0; a < dim; ++a)
      if (p[a] < lo[a] - slack || p[a] > hi[a] + slack) return false;
    return true;
  }

  bool contains_ball(const Ball& b, double slack = 1e-12) const {
    for (int a = 0; a < dim; ++a) {
      if (b.center[a] - b.radius < lo[a] - slack) return false;
      if (b.center[a] + b.radius > hi[a] + slack) return false;
    }
    return true;
  }

  double min_spacing() const {
    double h = spacing[0];
    for (int a = 1; a < dim; ++a) h = std::min(h, spacing[a]);
    return h;
  }

  double max_spacing() const {
    double h = spacing[0];
    for (int a = 1; a < dim; ++a) h = std::max(h, spacing[a]);
    return h;
  }
};

inline Grid make_grid(int dim, std::span<const std::array<double, 2>> extents,
                      std::span<const std::int64_t> resolution) {
  if (dim < 1 || dim > 3) throw InvalidDimension("grid dimension must be 1, 2 or 3");
  if (static_cast<int>(extents.size()) != dim || static_cast<int>(resolution.size()) != dim)
    throw InvalidDimension("extents/resolution arity does not match dim");
  Grid g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a][0] < extents[a][1]))
      throw DegenerateExtent("axis extent must satisfy lo < hi");
    if (resolution[a] < 3) throw ResolutionTooSmall("need at least 3 nodes per axis");
    g.lo[a] = extents[a][0];
    g.hi[a] = extents[a][1];
    g.count[a] = resolution[a];
    g.spacing[a] = (g.hi[a] - g.lo[a]) / static_cast<double>(resolution[a] - 1);
  }
  return g;
}

/// Convenience: cube [lo, hi]^dim with the same node count on every axis.
inline Grid make_cube_grid(int dim, double lo, double hi, std::int64_t n) {
  if (dim < 1 || dim > 3) throw InvalidDimension("grid dimension must be 1, 2 or 3");
  std::array<std::array<double, 2>, 3> ext{};
  std::array<std::int64_t, 3> res{};
  for (int a = 0; a < dim; ++a) {
    ext[a] = {lo, hi};
    res[a] = n;
  }
  return make_grid(dim, std::span(ext.data(), static_cast<std::size_t>(dim)),
                   std::span(res.data(), static_cast<std::size_t>(dim)));
}

}  // namespace vop
