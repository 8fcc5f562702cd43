#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msp {

using Vec = std::vector<double>;
using index_t = std::ptrdiff_t;

/// Thrown when a matrix expected to be positive definite exposes a
/// non-positive pivot during factorization.
class IndefiniteError : public std::runtime_error {
 public:
  explicit IndefiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a nominally invertible matrix turns out numerically singular.
class SingularError : public std::runtime_error {
 public:
  explicit SingularError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Small vector kernels. Everything operates on plain std::vector<double>.
// ---------------------------------------------------------------------------

inline double dot(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

/// y += a*x
inline void axpy(double a, const Vec& x, Vec& y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vec scaled(const Vec& x, double a) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i];
  return y;
}

inline Vec vsum(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "vsum: length mismatch");
  Vec z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + y[i];
  return z;
}

inline Vec vdiff(const Vec& x, const Vec& y) {
  require(x.size() == y.size(), "vdiff: length mismatch");
  Vec z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - y[i];
  return z;
}

/// Concatenate two vectors (block vectors for saddle systems).
inline Vec vcat(const Vec& top, const Vec& bottom) {
  Vec z;
  z.reserve(top.size() + bottom.size());
  z.insert(z.end(), top.begin(), top.end());
  z.insert(z.end(), bottom.begin(), bottom.end());
  return z;
}

// ---------------------------------------------------------------------------
// Deterministic random numbers. The standard distributions are not pinned
// down across library implementations, so the generator below derives
// uniforms and normals directly from the mt19937_64 bit stream; identical
// seeds give identical streams on every platform.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // xorshift* -- small, fast, and fully specified here.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec normal_vec(std::size_t n) {
    Vec v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  Vec uniform_vec(std::size_t n, double lo = 0.0, double hi = 1.0) {
    Vec v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace msp
