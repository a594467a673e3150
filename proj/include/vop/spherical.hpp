#pragma once

#include <functional>
#include <random>
#include <vector>

#include "vop/common.hpp"

namespace vop {

// ---------------------------------------------------------------------------
// Sturm-Liouville eigenproblems for L = -Lap' + q on arcs of the unit circle
// (dim 2) and axisymmetric caps of the unit sphere (dim 3), with Dirichlet
// conditions at interval ends away from the poles. Nodes are cell-centered
// (interior-offset), so potentials that blow up at the Dirichlet endpoints
// stay finite at every node; the eigenfunctions of interest vanish
// quadratically there and second-order accuracy survives in practice.
// ---------------------------------------------------------------------------

struct ArcProblem {
  double theta_lo = 0.0;
  double theta_hi = pi;
  std::function<double(double)> q;  // potential, >= q0 > 0 on the interior
  double q0 = 1.0;
  int n_nodes = 512;

  void validate() const {
    if (!(theta_lo < theta_hi) || theta_lo < -2.0 * pi || theta_hi > 2.0 * pi)
      throw Error("arc problem: need theta_lo < theta_hi within one turn");
    if (n_nodes < 64) throw Error("arc problem: need at least 64 nodes");
    if (!(q0 > 0.0)) throw Error("arc problem: q0 must be positive");
  }
};

struct CapProblem {
  double phi_lo = 0.0;  // polar angle from the north pole
  double phi_hi = 0.5 * pi;
  std::function<double(double)> q;
  double q0 = 1.0;
  int n_nodes = 512;

  void validate() const {
    if (!(0.0 <= phi_lo && phi_lo < phi_hi && phi_hi <= pi))
      throw Error("cap problem: need 0 <= phi_lo < phi_hi <= pi");
    if (n_nodes < 64) throw Error("cap problem: need at least 64 nodes");
    if (!(q0 > 0.0)) throw Error("cap problem: q0 must be positive");
  }
};

struct EigenResult {
  std::vector<double> lambdas;               // ascending
  std::vector<std::vector<double>> vectors;  // node samples, L2-normalised
  std::vector<double> nodes;                 // angular coordinates
  std::vector<double> weights;               // L2 quadrature weights
};

namespace detail {

/// Symmetric tridiagonal eigen-pairs by Sturm-sequence bisection plus
/// inverse iteration. Returns the k smallest eigenvalues and vectors.
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;  // size n-1
};

inline int sturm_count(const Tridiag& t, double x) {
  // number of eigenvalues strictly below x
  const std::size_t n = t.diag.size();
  int count = 0;
  double d = t.diag[0] - x;
  if (d < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    double denom = d;
    if (std::abs(denom) < 1e-300) denom = denom < 0 ? -1e-300 : 1e-300;
    d = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / denom;
    if (d < 0.0) ++count;
  }
  return count;
}

inline double bisect_eigenvalue(const Tridiag& t, int k, double lo, double hi) {
  // k-th smallest (0-based): smallest x with count(x+) > k
  for (int it = 0; it < 200 && (hi - lo) > 1e-14 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(t, mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

/// Solve (T - sigma I) x = b with partial pivoting (3 bands + fill-in).
inline void shifted_solve(const Tridiag& t, double sigma, std::vector<double>& x) {
  const std::size_t n = t.diag.size();
  std::vector<double> a(n), b(n), c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i] = t.diag[i] - sigma;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    b[i] = t.off[i];
    c[i] = t.off[i];
  }
  // forward elimination with partial pivoting; d holds the second
  // superdiagonal fill-in
  std::vector<double> rhs = x;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(c[i]) > std::abs(a[i])) {
      std::swap(a[i], c[i]);
      const double tmp_b = b[i];
      b[i] = a[i + 1];
      a[i + 1] = tmp_b;
      d[i] = b[i + 1];
      b[i + 1] = 0.0;
      std::swap(rhs[i], rhs[i + 1]);
    }
    if (std::abs(a[i]) < 1e-300) a[i] = 1e-300;
    const double m = c[i] / a[i];
    a[i + 1] -= m * b[i];
    if (i + 2 < n) b[i + 1] -= m * d[i];
    rhs[i + 1] -= m * rhs[i];
    c[i] = 0.0;
  }
  if (std::abs(a[n - 1]) < 1e-300) a[n - 1] = 1e-300;
  x[n - 1] = rhs[n - 1] / a[n - 1];
  if (n >= 2) x[n - 2] = (rhs[n - 2] - b[n - 2] * x[n - 1]) / a[n - 2];
  for (std::size_t ii = n; ii-- > 2;) {
    const std::size_t i = ii - 2;
    x[i] = (rhs[i] - b[i] * x[i + 1] - d[i] * x[i + 2]) / a[i];
  }
}

inline std::pair<std::vector<double>, std::vector<std::vector<double>>> tridiag_eigs(
    const Tridiag& t, int k) {
  const std::size_t n = t.diag.size();
  // Gershgorin bounds
  double lo = t.diag[0], hi = t.diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.off[i - 1]);
    if (i + 1 < n) r += std::abs(t.off[i]);
    lo = std::min(lo, t.diag[i] - r);
    hi = std::max(hi, t.diag[i] + r);
  }
  std::vector<double> lambdas;
  std::vector<std::vector<double>> vectors;
  for (int j = 0; j < k; ++j) {
    const double lam = bisect_eigenvalue(t, j, lo, hi);
    lambdas.push_back(lam);
    // inverse iteration with a slightly detuned shift
    std::vector<double> x(n);
    std::mt19937_64 rng(12345 + static_cast<std::uint64_t>(j));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : x) v = dist(rng);
    const double detune = 1e-10 * (1.0 + std::abs(lam));
    for (int it = 0; it < 8; ++it) {
      // orthogonalise against previous vectors when eigenvalues cluster
      for (std::size_t p = 0; p + 1 <= vectors.size(); ++p) {
        if (std::abs(lambdas[p] - lam) > 1e-3 * (1.0 + std::abs(lam))) continue;
        double dp = 0.0;
        for (std::size_t i = 0; i < n; ++i) dp += x[i] * vectors[p][i];
        for (std::size_t i = 0; i < n; ++i) x[i] -= dp * vectors[p][i];
      }
      shifted_solve(t, lam + detune, x);
      double nn = 0.0;
      for (double v : x) nn += v * v;
      nn = std::sqrt(nn);
      if (!(nn > 0.0) || !std::isfinite(nn)) throw NotConverged("tridiag inverse iteration");
      for (auto& v : x) v /= nn;
    }
    vectors.push_back(std::move(x));
  }
  return {lambdas, vectors};
}

}  // namespace detail

/// Eigen-pairs of the arc problem: cell-centered second differences with
/// reflective Dirichlet closure (ghost value -v_0), Sturm bisection +
/// inverse iteration.
inline EigenResult eigensolve(const ArcProblem& p, int k) {
  p.validate();
  if (k < 1 || k > 5) throw Error("eigensolve: k must be in 1..5");
  const int n = p.n_nodes;
  const double dth = (p.theta_hi - p.theta_lo) / n;

  detail::Tridiag t;
  t.diag.resize(static_cast<std::size_t>(n));
  t.off.assign(static_cast<std::size_t>(n - 1), -1.0 / sq(dth));
  EigenResult out;
  out.nodes.resize(static_cast<std::size_t>(n));
  out.weights.assign(static_cast<std::size_t>(n), dth);
  for (int i = 0; i < n; ++i) {
    const double th = p.theta_lo + (i + 0.5) * dth;
    out.nodes[static_cast<std::size_t>(i)] = th;
    const double qv = p.q(th);
    if (!std::isfinite(qv))
      throw PotentialSingular("eigensolve: potential not finite at an interior node");
    const double bdry = (i == 0 || i == n - 1) ? 1.0 : 0.0;  // ghost reflection
    t.diag[static_cast<std::size_t>(i)] = (2.0 + bdry) / sq(dth) + qv;
  }

  auto [lams, vecs] = detail::tridiag_eigs(t, k);
  out.lambdas = std::move(lams);
  // L2(arc) normalisation and positive-first sign convention
  for (std::size_t j = 0; j < vecs.size(); ++j) {
    double nn = 0.0;
    for (std::size_t i = 0; i < vecs[j].size(); ++i) nn += sq(vecs[j][i]) * dth;
    nn = std::sqrt(nn);
    for (auto& v : vecs[j]) v /= nn;
  }
  if (!vecs.empty()) {
    double s = 0.0;
    for (double v : vecs[0]) s += v;
    if (s < 0.0)
      for (auto& v : vecs[0]) v = -v;
  }
  out.vectors = std::move(vecs);
  return out;
}

/// Eigen-pairs of the axisymmetric cap problem
/// -(sin phi)^{-1} (sin phi v')' + q v = lambda v, symmetrised with the
/// metric weight sin(phi). Interval endpoints at the poles are natural
/// (the metric flux vanishes); others are Dirichlet.
inline EigenResult eigensolve(const CapProblem& p, int k) {
  p.validate();
  if (k < 1 || k > 5) throw Error("eigensolve: k must be in 1..5");
  const int n = p.n_nodes;
  const double dph = (p.phi_hi - p.phi_lo) / n;
  const bool pole_lo = p.phi_lo < 1e-12;
  const bool pole_hi = p.phi_hi > pi - 1e-12;

  std::vector<double> s(static_cast<std::size_t>(n));       // sin(phi_i)
  std::vector<double> sface(static_cast<std::size_t>(n + 1));  // sin at faces
  EigenResult out;
  out.nodes.resize(static_cast<std::size_t>(n));
  out.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double ph = p.phi_lo + (i + 0.5) * dph;
    out.nodes[static_cast<std::size_t>(i)] = ph;
    s[static_cast<std::size_t>(i)] = std::sin(ph);
    out.weights[static_cast<std::size_t>(i)] = std::sin(ph) * dph;
  }
  for (int i = 0; i <= n; ++i) sface[static_cast<std::size_t>(i)] = std::sin(p.phi_lo + i * dph);

  detail::Tridiag t;
  t.diag.resize(static_cast<std::size_t>(n));
  t.off.resize(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    const double ph = out.nodes[static_cast<std::size_t>(i)];
    const double qv = p.q(ph);
    if (!std::isfinite(qv))
      throw PotentialSingular("eigensolve: potential not finite at an interior node");
    double flux = 0.0;
    // interior faces
    if (i > 0) flux += sface[static_cast<std::size_t>(i)];
    if (i + 1 < n) flux += sface[static_cast<std::size_t>(i + 1)];
    // boundary closures: poles are natural (face weight sin = 0 anyway),
    // other ends Dirichlet via ghost reflection
    if (i == 0 && !pole_lo) flux += 2.0 * sface[0];
    if (i == n - 1 && !pole_hi) flux += 2.0 * sface[static_cast<std::size_t>(n)];
    t.diag[static_cast<std::size_t>(i)] = flux / (s[static_cast<std::size_t>(i)] * sq(dph)) + qv;
  }
  for (int i = 0; i + 1 < n; ++i)
    t.off[static_cast<std::size_t>(i)] =
        -sface[static_cast<std::size_t>(i + 1)] /
        (sq(dph) * std::sqrt(s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i + 1)]));

  auto [lams, vecs] = detail::tridiag_eigs(t, k);
  out.lambdas = std::move(lams);
  // transform back from the symmetrised variable w = sqrt(sin phi) v and
  // L2(cap, sin phi dphi) normalise
  for (auto& w : vecs) {
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] /= std::sqrt(s[static_cast<std::size_t>(i)]);
    double nn = 0.0;
    for (int i = 0; i < n; ++i) nn += sq(w[static_cast<std::size_t>(i)]) * out.weights[static_cast<std::size_t>(i)];
    nn = std::sqrt(nn);
    for (auto& v : w) v /= nn;
  }
  if (!vecs.empty()) {
    double sum = 0.0;
    for (double v : vecs[0]) sum += v;
    if (sum < 0.0)
      for (auto& v : vecs[0]) v = -v;
  }
  out.vectors = std::move(vecs);
  return out;
}

// ---------------------------------------------------------------------------
// Structural checks used by the verification suites.
// ---------------------------------------------------------------------------

struct DomainMonotonicityReport {
  std::vector<double> fractions;              // shrink factors applied
  std::vector<std::vector<double>> lambdas;   // per fraction, ascending
  bool monotone = false;        // lambda_k nondecreasing under shrinking
  double lambda1_margin = 0.0;  // min increase of lambda_1 between steps
};

/// Lambda_k on nested sub-arcs: shrinking the domain cannot lower any
/// eigenvalue, and strictly raises the first.
inline DomainMonotonicityReport check_domain_monotonicity(const ArcProblem& p,
                                                          std::span<const double> shrink_fractions,
                                                          int k) {
  DomainMonotonicityReport rep;
  rep.fractions.assign(shrink_fractions.begin(), shrink_fractions.end());
  rep.fractions.insert(rep.fractions.begin(), 0.0);  // original domain first
  const double mid = 0.5 * (p.theta_lo + p.theta_hi);
  const double half = 0.5 * (p.theta_hi - p.theta_lo);
  for (double f : rep.fractions) {
    if (f < 0.0 || f >= 1.0) throw Error("check_domain_monotonicity: fractions must lie in [0,1)");
    ArcProblem sub = p;
    sub.theta_lo = mid - (1.0 - f) * half;
    sub.theta_hi = mid + (1.0 - f) * half;
    rep.lambdas.push_back(eigensolve(sub, k).lambdas);
  }
  rep.monotone = true;
  rep.lambda1_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < rep.lambdas.size(); ++i) {
    for (int j = 0; j < k; ++j)
      if (rep.lambdas[i + 1][static_cast<std::size_t>(j)] <
          rep.lambdas[i][static_cast<std::size_t>(j)] - 1e-9)
        rep.monotone = false;
    rep.lambda1_margin =
        std::min(rep.lambda1_margin, rep.lambdas[i + 1][0] - rep.lambdas[i][0]);
  }
  return rep;
}

struct ShiftBoundReport {
  std::vector<double> lambda_full;   // eigenvalues of -Lap' + q
  std::vector<double> lambda_plain;  // eigenvalues of -Lap'
  double q0 = 0.0;
  double min_slack = 0.0;  // min over k of lambda_full_k - (q0 + lambda_plain_k)
  bool holds = false;
};

inline ShiftBoundReport check_shift_bound(const ArcProblem& p, int k) {
  ShiftBoundReport rep;
  rep.q0 = p.q0;
  rep.lambda_full = eigensolve(p, k).lambdas;
  ArcProblem plain = p;
  // the discrete operator needs a finite potential; 0 keeps -Lap' exactly
  plain.q = [](double) { return 0.0; };
  plain.q0 = 1.0;  // unused by the discretisation
  rep.lambda_plain = eigensolve(plain, k).lambdas;
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j)
    rep.min_slack = std::min(rep.min_slack, rep.lambda_full[static_cast<std::size_t>(j)] -
                                                (p.q0 + rep.lambda_plain[static_cast<std::size_t>(j)]));
  rep.holds = rep.min_slack >= -1e-8;
  return rep;
}

struct HalfDomainReport {
  int dim = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double expected_lambda1 = 0.0;  // 2n
  bool lambda1_ok = false;
  bool gap_ok = false;  // lambda2 > 2 + 2n - tol
};

/// The half-circle / half-sphere with the profile potential q = 1/h:
/// lambda_1 = 2n with eigenfunction proportional to the profile trace, and
/// lambda_2 clears 2 + 2n.
inline HalfDomainReport verify_half_sphere(int dim, int n_nodes = 2000, double tol1 = 0.005,
                                           double tol2 = 0.1) {
  if (dim != 2 && dim != 3) throw InvalidDimension("verify_half_sphere: dim must be 2 or 3");
  HalfDomainReport rep;
  rep.dim = dim;
  rep.expected_lambda1 = 2.0 * dim;
  if (dim == 2) {
    ArcProblem p;
    p.theta_lo = 0.0;
    p.theta_hi = pi;
    p.q = [](double th) { return 2.0 / sq(std::sin(th)); };
    p.q0 = 2.0;
    p.n_nodes = n_nodes;
    EigenResult r = eigensolve(p, 2);
    rep.lambda1 = r.lambdas[0];
    rep.lambda2 = r.lambdas[1];
  } else {
    CapProblem p;
    p.phi_lo = 0.0;
    p.phi_hi = 0.5 * pi;
    p.q = [](double ph) { return 2.0 / sq(std::cos(ph)); };
    p.q0 = 2.0;
    p.n_nodes = n_nodes;
    EigenResult r = eigensolve(p, 2);
    rep.lambda1 = r.lambdas[0];
    rep.lambda2 = r.lambdas[1];
  }
  rep.lambda1_ok = std::abs(rep.lambda1 - rep.expected_lambda1) <= tol1 * rep.expected_lambda1;
  rep.gap_ok = rep.lambda2 > 2.0 + 2.0 * dim - tol2;
  return rep;
}

struct PerturbedCapSample {
  double delta = 0.0;
  double lambda2 = 0.0;
  bool above_2n = false;
};

struct PerturbedCapReport {
  int dim = 0;
  double q0 = 0.0;
  std::vector<PerturbedCapSample> samples;
  double delta_threshold = 0.0;  // largest probed delta with lambda2 > 2n
};

/// Domains extending an angle delta past the half-domain with q = q0:
/// lambda_2 stays above 2n for delta below a q0-dependent threshold, mapped
/// empirically (the lemma's delta(n, q0) is an existence constant).
inline PerturbedCapReport check_perturbed_cap(int dim, std::span<const double> deltas, double q0,
                                              int n_nodes = 1500) {
  if (dim != 2 && dim != 3) throw InvalidDimension("check_perturbed_cap: dim must be 2 or 3");
  PerturbedCapReport rep;
  rep.dim = dim;
  rep.q0 = q0;
  for (double d : deltas) {
    if (d < 0.0 || d > 0.3) throw Error("check_perturbed_cap: deltas must lie in [0, 0.3]");
    double lambda2 = 0.0;
    if (dim == 2) {
      ArcProblem p;
      p.theta_lo = -d;
      p.theta_hi = pi + d;
      p.q = [q0](double) { return q0; };
      p.q0 = q0;
      p.n_nodes = n_nodes;
      lambda2 = eigensolve(p, 2).lambdas[1];
    } else {
      CapProblem p;
      p.phi_lo = 0.0;
      p.phi_hi = 0.5 * pi + d;
      p.q = [q0](double) { return q0; };
      p.q0 = q0;
      p.n_nodes = n_nodes;
      lambda2 = eigensolve(p, 2).lambdas[1];
    }
    PerturbedCapSample s;
    s.delta = d;
    s.lambda2 = lambda2;
    s.above_2n = lambda2 > 2.0 * dim;
    if (s.above_2n) rep.delta_threshold = std::max(rep.delta_threshold, d);
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace vop
