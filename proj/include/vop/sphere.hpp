#pragma once

#include <cmath>
#include <vector>

#include "vop/field.hpp"

namespace vop {

/// H^{n-1} measure of the unit sphere boundary in R^n.
inline double surface_measure(int dim) {
  switch (dim) {
    case 1: return 2.0;        // two points
    case 2: return 2.0 * pi;   // circle
    case 3: return 4.0 * pi;   // sphere
    default: throw InvalidDimension("surface_measure: dim must be 1, 2 or 3");
  }
}

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre rule by Newton iteration on P_n.
inline GaussLegendre gauss_legendre(int n) {
  GaussLegendre gl;
  gl.nodes.resize(static_cast<std::size_t>(n));
  gl.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.nodes[static_cast<std::size_t>(i)] = x;
    gl.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return gl;
}

/// Restriction of a field to a sphere |x - center| = radius, with quadrature
/// weights on the *unit* sphere (they sum to surface_measure(dim)); scale by
/// radius^{dim-1} for the physical measure.
///   n=2: uniform angles theta_j (periodic trapezoid);
///   n=3: Gauss-Legendre in the polar angle x uniform azimuth.
struct SphereTrace {
  Point center{};
  double radius = 0.0;
  int dim = 0;
  int m = 0;
  std::vector<Point> directions;  // unit vectors
  std::vector<double> weights;
  std::vector<double> values;  // samples * m
};

inline SphereTrace trace_sphere(const VectorField& f, const Point& center, double radius,
                                int n_angular) {
  const Grid& g = f.grid;
  if (radius <= 0.0) throw Error("trace_sphere: radius must be positive");
  if (g.dim >= 2 && n_angular < 16) throw Error("trace_sphere: need at least 16 angular samples");
  if (!g.contains_ball({center, radius}))
    throw BallNotContained("trace_sphere: sampling sphere leaves the grid");

  SphereTrace tr;
  tr.center = center;
  tr.radius = radius;
  tr.dim = g.dim;
  tr.m = f.m;

  if (g.dim == 1) {
    tr.directions = {Point{-1.0, 0.0, 0.0}, Point{1.0, 0.0, 0.0}};
    tr.weights = {1.0, 1.0};
  } else if (g.dim == 2) {
    tr.directions.reserve(static_cast<std::size_t>(n_angular));
    tr.weights.assign(static_cast<std::size_t>(n_angular), 2.0 * pi / n_angular);
    for (int j = 0; j < n_angular; ++j) {
      const double th = 2.0 * pi * static_cast<double>(j) / n_angular;
      tr.directions.push_back(Point{std::cos(th), std::sin(th), 0.0});
    }
  } else {
    const int n_polar = std::max(8, n_angular / 2);
    const GaussLegendre gl = gauss_legendre(n_polar);  // in t = cos(phi)
    tr.directions.reserve(static_cast<std::size_t>(n_polar * n_angular));
    tr.weights.reserve(static_cast<std::size_t>(n_polar * n_angular));
    const double waz = 2.0 * pi / n_angular;
    for (int i = 0; i < n_polar; ++i) {
      const double t = gl.nodes[static_cast<std::size_t>(i)];
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int j = 0; j < n_angular; ++j) {
        const double psi = 2.0 * pi * static_cast<double>(j) / n_angular;
        tr.directions.push_back(Point{s * std::cos(psi), s * std::sin(psi), t});
        tr.weights.push_back(gl.weights[static_cast<std::size_t>(i)] * waz);
      }
    }
  }

  const std::size_t ns = tr.directions.size();
  tr.values.assign(ns * static_cast<std::size_t>(f.m), 0.0);
  parallel_for(ns, [&](std::size_t i) {
    Point x = center;
    for (int a = 0; a < g.dim; ++a) x[a] += radius * tr.directions[i][a];
    sample_into(f, x, std::span(tr.values.data() + i * static_cast<std::size_t>(f.m),
                                static_cast<std::size_t>(f.m)));
  });
  return tr;
}

/// integral over the unit sphere of |v|^2 (multiply by r^{n-1} for physical).
inline double trace_norm2_integral(const SphereTrace& tr) {
  const std::size_t ns = tr.directions.size();
  return chunked_sum(ns, [&](std::size_t i) {
    const double* v = tr.values.data() + i * static_cast<std::size_t>(tr.m);
    double s = 0.0;
    for (int c = 0; c < tr.m; ++c) s += v[c] * v[c];
    return tr.weights[i] * s;
  });
}

/// integral over the unit sphere of |v - w| for two traces on the same rule.
inline double trace_l1_difference(const SphereTrace& a, const SphereTrace& b) {
  if (a.directions.size() != b.directions.size() || a.m != b.m)
    throw Error("trace_l1_difference: incompatible traces");
  const std::size_t ns = a.directions.size();
  return chunked_sum(ns, [&](std::size_t i) {
    double s = 0.0;
    for (int c = 0; c < a.m; ++c) {
      const double d = a.values[i * static_cast<std::size_t>(a.m) + static_cast<std::size_t>(c)] -
                       b.values[i * static_cast<std::size_t>(b.m) + static_cast<std::size_t>(c)];
      s += d * d;
    }
    return a.weights[i] * std::sqrt(s);
  });
}

}  // namespace vop
