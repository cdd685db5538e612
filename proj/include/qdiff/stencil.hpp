#pragma once

// Exact central-difference stencils of arbitrary order.
//
// For a derivative order m and half-width n (m <= 2n) the stencil weights
// d_j, j in [-n, n], satisfy
//
//     f^(m)(x) = h^-m * sum_j d_j f(x + j h) + O(h^(2n-m+1)).
//
// Off-centre weights come from the elementary symmetric polynomial of degree
// 2n-m over the node multiset {-n..n} \ {0, j}; the centre weight is the
// negated sum of the others. Everything is exact rational arithmetic; floating
// point only appears when a stencil is applied to samples.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qdiff/error.hpp"

namespace qdiff {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline constexpr int kDefaultMaxHalfWidth = 64;

struct StencilKey {
  int m = 1;  ///< derivative order
  int n = 1;  ///< half-width; the stencil spans 2n+1 nodes

  friend bool operator==(const StencilKey&, const StencilKey&) = default;
};

/// Throws PreconditionError unless 1 <= m <= 2n and 1 <= n <= max_n.
inline void validate(const StencilKey& key, int max_n = kDefaultMaxHalfWidth) {
  if (key.m < 1 || key.n < 1) {
    throw PreconditionError("stencil key requires positive m and n (got m=" +
                            std::to_string(key.m) + ", n=" + std::to_string(key.n) + ")");
  }
  if (key.m > 2 * key.n) {
    throw PreconditionError("central difference requires m <= 2n (got m=" +
                            std::to_string(key.m) + ", n=" + std::to_string(key.n) + ")");
  }
  if (key.n > max_n) {
    throw PreconditionError("half-width n=" + std::to_string(key.n) +
                            " exceeds the configured limit " + std::to_string(max_n));
  }
}

/// Immutable set of exact central-difference weights for one (m, n).
class Stencil {
 public:
  Stencil(StencilKey key, std::vector<Rational> coeffs) : key_(key), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != static_cast<std::size_t>(2 * key_.n + 1)) {
      throw InternalError("stencil coefficient vector has the wrong length");
    }
    approx_.reserve(coeffs_.size());
    signs_.reserve(coeffs_.size());
    for (const auto& c : coeffs_) {
      abs_sum_ += abs(c);
      approx_.push_back(c.convert_to<long double>());
      signs_.push_back(c >= 0 ? 1 : 0);
    }
    abs_sum_approx_ = abs_sum_.convert_to<long double>();
  }

  const StencilKey& key() const { return key_; }
  int m() const { return key_.m; }
  int n() const { return key_.n; }

  /// Exact weight d_j for j in [-n, n].
  const Rational& coeff(int j) const { return coeffs_.at(index(j)); }
  /// Weight rounded to long double.
  long double coeff_approx(int j) const { return approx_.at(index(j)); }
  /// Sign bit: 1 when d_j >= 0, else 0.
  int sign_bit(int j) const { return signs_.at(index(j)); }

  /// D = sum_j |d_j|, exact.
  const Rational& abs_sum() const { return abs_sum_; }
  long double abs_sum_approx() const { return abs_sum_approx_; }

  /// Offsets j with d_j != 0, ascending.
  std::vector<int> nonzero_offsets() const {
    std::vector<int> out;
    for (int j = -key_.n; j <= key_.n; ++j) {
      if (coeff(j) != 0) out.push_back(j);
    }
    return out;
  }

  const std::vector<Rational>& coeffs() const { return coeffs_; }

  friend bool operator==(const Stencil& a, const Stencil& b) {
    return a.key_ == b.key_ && a.coeffs_ == b.coeffs_;
  }

 private:
  std::size_t index(int j) const {
    if (j < -key_.n || j > key_.n) {
      throw PreconditionError("stencil offset " + std::to_string(j) + " outside [-n, n]");
    }
    return static_cast<std::size_t>(j + key_.n);
  }

  StencilKey key_;
  std::vector<Rational> coeffs_;
  std::vector<long double> approx_;
  std::vector<int> signs_;
  Rational abs_sum_{0};
  long double abs_sum_approx_ = 0;
};

namespace detail {

inline BigInt factorial(int k) {
  BigInt out = 1;
  for (int i = 2; i <= k; ++i) out *= i;
  return out;
}

// e_0..e_degree of the given integers, by the product recurrence
// prod_i (1 + v_i t) = sum_k e_k t^k.
inline std::vector<BigInt> elementary_symmetric(const std::vector<int>& values, int degree) {
  std::vector<BigInt> e(static_cast<std::size_t>(degree) + 1, BigInt(0));
  e[0] = 1;
  int seen = 0;
  for (int v : values) {
    ++seen;
    for (int k = std::min(seen, degree); k >= 1; --k) {
      e[k] += e[k - 1] * v;
    }
  }
  return e;
}

}  // namespace detail

/// Central-difference weights via elementary symmetric polynomials.
///
/// Weight for j != 0 is (-1)^(m+n-j) m! e_{2n-m}(N \ {0,j}) / ((n+j)! (n-j)!),
/// N = {-n..n}; this is the m-th derivative at 0 of the Lagrange basis
/// polynomial of node j. The centre weight closes the zeroth moment.
inline Stencil compute_stencil(StencilKey key, int max_n = kDefaultMaxHalfWidth) {
  validate(key, max_n);
  const int n = key.n;
  const int m = key.m;
  const int degree = 2 * n - m;
  const BigInt m_fact = detail::factorial(m);

  std::vector<Rational> coeffs(static_cast<std::size_t>(2 * n + 1), Rational(0));
  Rational off_centre_sum = 0;
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * n));
  for (int j = -n; j <= n; ++j) {
    if (j == 0) continue;
    nodes.clear();
    for (int l = -n; l <= n; ++l) {
      if (l != 0 && l != j) nodes.push_back(l);
    }
    const BigInt a = detail::elementary_symmetric(nodes, degree)[degree];
    Rational d(m_fact * a, detail::factorial(n + j) * detail::factorial(n - j));
    if (((m + n - j) % 2 + 2) % 2 == 1) d = -d;
    coeffs[j + n] = d;
    off_centre_sum += d;
  }
  coeffs[n] = -off_centre_sum;
  return Stencil(key, std::move(coeffs));
}

/// Independent construction: solve sum_j w_j j^k = m! [k == m], k = 0..2n,
/// by exact Gauss-Jordan elimination. Used to cross-check compute_stencil.
inline Stencil vandermonde_stencil(StencilKey key, int max_n = kDefaultMaxHalfWidth) {
  validate(key, max_n);
  const int n = key.n;
  const int size = 2 * n + 1;
  // Augmented matrix, rows are moments k, columns are nodes j.
  std::vector<std::vector<Rational>> a(size, std::vector<Rational>(size + 1, Rational(0)));
  for (int k = 0; k < size; ++k) {
    for (int col = 0; col < size; ++col) {
      const int j = col - n;
      BigInt p = 1;
      for (int e = 0; e < k; ++e) p *= j;
      a[k][col] = Rational(p);
    }
    a[k][size] = (k == key.m) ? Rational(detail::factorial(key.m)) : Rational(0);
  }
  for (int col = 0; col < size; ++col) {
    int pivot = -1;
    for (int row = col; row < size; ++row) {
      if (a[row][col] != 0) {
        pivot = row;
        break;
      }
    }
    if (pivot < 0) throw InternalError("Vandermonde system is singular");
    std::swap(a[pivot], a[col]);
    const Rational inv = 1 / a[col][col];
    for (int c = col; c <= size; ++c) a[col][c] *= inv;
    for (int row = 0; row < size; ++row) {
      if (row == col || a[row][col] == 0) continue;
      const Rational factor = a[row][col];
      for (int c = col; c <= size; ++c) a[row][c] -= factor * a[col][c];
    }
  }
  std::vector<Rational> coeffs(static_cast<std::size_t>(size));
  for (int col = 0; col < size; ++col) coeffs[col] = a[col][size];
  return Stencil(key, std::move(coeffs));
}

/// h^-m * sum_j d_j samples[j]. Every offset with a nonzero weight must be present.
template <typename Real = double>
Real apply_stencil(const Stencil& st, const std::map<int, Real>& samples, Real h) {
  if (!(h > 0)) throw PreconditionError("stencil step h must be positive");
  Real acc = 0;
  for (int j = -st.n(); j <= st.n(); ++j) {
    if (st.coeff(j) == 0) continue;
    const auto it = samples.find(j);
    if (it == samples.end()) {
      throw PreconditionError("missing sample for stencil offset " + std::to_string(j));
    }
    acc += static_cast<Real>(st.coeff_approx(j)) * it->second;
  }
  return acc / std::pow(h, static_cast<Real>(st.m()));
}

/// Convenience overload sampling f at x + j h.
template <typename Real, typename Fn>
Real apply_stencil(const Stencil& st, Fn&& f, Real x, Real h) {
  if (!(h > 0)) throw PreconditionError("stencil step h must be positive");
  Real acc = 0;
  for (int j = -st.n(); j <= st.n(); ++j) {
    if (st.coeff(j) == 0) continue;
    acc += static_cast<Real>(st.coeff_approx(j)) * static_cast<Real>(f(x + static_cast<Real>(j) * h));
  }
  return acc / std::pow(h, static_cast<Real>(st.m()));
}

/// Uniform bound M m (e m / 2)^(2n) on the remainder factor, given
/// |f^(2n+1)| <= M everywhere.
inline double residual_bound(double M, StencilKey key) {
  validate(key);
  if (M < 0) throw PreconditionError("residual bound requires M >= 0");
  if (M == 0) return 0.0;
  const double m = key.m;
  return M * m * std::pow(std::numbers::e * m / 2.0, 2.0 * key.n);
}

/// Upper bound 2m [2 (1 + ln n)]^m on the absolute weight sum D.
inline double abs_sum_bound(StencilKey key) {
  validate(key);
  const double m = key.m;
  return 2.0 * m * std::pow(2.0 * (1.0 + std::log(static_cast<double>(key.n))), m);
}

}  // namespace qdiff
