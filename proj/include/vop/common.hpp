#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vop {

inline constexpr double pi = std::numbers::pi;

inline double sq(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Error taxonomy. Every throwing operation uses one of these named types so
// callers (and the CLI) can report failures precisely.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define VOP_ERROR_TYPE(Name)       \
  struct Name : Error {            \
    using Error::Error;            \
  }

VOP_ERROR_TYPE(InvalidDimension);
VOP_ERROR_TYPE(DegenerateExtent);
VOP_ERROR_TYPE(ResolutionTooSmall);
VOP_ERROR_TYPE(BallNotContained);
VOP_ERROR_TYPE(NonFiniteEncountered);
VOP_ERROR_TYPE(NotConverged);
VOP_ERROR_TYPE(InstanceTooLarge);
VOP_ERROR_TYPE(EmptyGamma0);
VOP_ERROR_TYPE(NotRegular);
VOP_ERROR_TYPE(InsufficientBoundarySamples);
VOP_ERROR_TYPE(DegenerateField);
VOP_ERROR_TYPE(RadiusBelowResolution);
VOP_ERROR_TYPE(InvalidMode);
VOP_ERROR_TYPE(PotentialSingular);
VOP_ERROR_TYPE(IoError);
VOP_ERROR_TYPE(FormatError);
VOP_ERROR_TYPE(SchemaError);

#undef VOP_ERROR_TYPE

// ---------------------------------------------------------------------------
// Deterministic reductions. All energy/norm reports go through a fixed
// pairwise summation tree so runs are bit-reproducible, independent of the
// number of worker threads.
// ---------------------------------------------------------------------------

namespace detail {

inline double pairwise_sum_rec(const double* p, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_rec(p, half) + pairwise_sum_rec(p + half, n - half);
}

}  // namespace detail

inline double pairwise_sum(std::span<const double> x) {
  return detail::pairwise_sum_rec(x.data(), x.size());
}

inline std::atomic<int>& thread_count_ref() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_threads(int n) { thread_count_ref().store(n < 1 ? 1 : n); }
inline int threads() { return thread_count_ref().load(); }

/// Chunked map over [0, n): chunks are assigned to workers but the chunk
/// boundaries themselves are fixed, so chunk-local results never depend on
/// the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body, std::size_t chunk = 4096) {
  const int nt = threads();
  if (nt <= 1 || n <= chunk) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      const std::size_t b = c * chunk;
      const std::size_t e = std::min(n, b + chunk);
      for (std::size_t i = b; i < e; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt) - 1);
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

/// Deterministic sum of term(i) for i in [0, n). Terms are accumulated
/// sequentially inside fixed 4096-wide chunks, chunk subtotals are combined
/// pairwise; the result is identical for any thread count.
template <class F>
double chunked_sum(std::size_t n, F&& term, std::size_t chunk = 4096) {
  if (n == 0) return 0.0;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  const int nt = threads();
  auto do_chunk = [&](std::size_t c) {
    const std::size_t b = c * chunk;
    const std::size_t e = std::min(n, b + chunk);
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  };
  if (nt <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c) do_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= nchunks) return;
        do_chunk(c);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  return pairwise_sum(partial);
}

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.
// ---------------------------------------------------------------------------

/// Golden-section search for the minimum of a unimodal f on [a, b].
template <class F>
double golden_section(F&& f, double a, double b, double tol = 1e-10,
                      int max_iter = 200) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope * x with R^2 diagnostic.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error("fit_line: need >= 2 paired samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit out;
  if (sxx <= 0) {
    out.intercept = my;
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r2 = (syy <= 0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return out;
}

// ---------------------------------------------------------------------------
// Content checksums (FNV-1a, 64 bit) for manifests. Not cryptographic;
// integrity marker only.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::span<const std::byte> data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::byte b : data) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(std::as_bytes(std::span<const char>(s.data(), s.size())));
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace vop
