#pragma once

// Small dense vector/matrix helpers. Everything in this project is desk
// scale (networks a few hundred nodes wide at most), so a flat row-major
// buffer is all we need.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace relumip {

using Vec = std::vector<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  Vec multiply(const Vec& x) const {
    assert(static_cast<int>(x.size()) == cols);
    Vec y(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      const double* row = data.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
      y[r] = acc;
    }
    return y;
  }

  // y = A^T x
  Vec multiply_transposed(const Vec& x) const {
    assert(static_cast<int>(x.size()) == rows);
    Vec y(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double* row = data.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) y[c] += row[c] * x[r];
    }
    return y;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline double dot(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l1_distance(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline Vec clamp_to_box(Vec x, const Vec& lo, const Vec& hi) {
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
  return x;
}

// Solve A x = b by Gaussian elimination with partial pivoting.
// Returns false when A is singular (within tol). Used by the brute-force
// vertex oracle; not on any solver hot path.
inline bool solve_dense(Matrix a, Vec b, Vec& x, double tol = 1e-11) {
  const int n = a.rows;
  if (a.cols != n || static_cast<int>(b.size()) != n) throw std::invalid_argument("solve_dense: shape mismatch");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      double v = std::fabs(a(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best <= tol) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
      std::swap(b[piv], b[col]);
    }
    const double d = a(col, col);
    for (int r = col + 1; r < n; ++r) {
      double f = a(r, col) / d;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
    x[r] = acc / a(r, r);
  }
  return true;
}

// Deterministic RNG wrapper. std::uniform_real_distribution is
// implementation-defined, so the draws here are built directly from the
// mt19937_64 stream to keep seeded runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform01() { return std::ldexp(static_cast<double>(gen_()), -64); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; one cached value.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 1e-300);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  uint64_t next_u64() { return gen_(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace relumip
