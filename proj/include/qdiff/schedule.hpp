#pragma once

// Parameter schedules driven by Gevrey smoothness.
//
// A function is in the Gevrey class G(A, c, sigma) when every derivative obeys
// |f^(k)| <= A c^k (k!)^sigma. From (A, c, sigma), the derivative order m and
// the tolerance eps we derive the stencil half-width and step that keep the
// truncation error below eps, either with the smallest stencil (n = ceil(m/2),
// h = h_min) or with a logarithmically growing stencil and an eps-independent
// step (n = n_th, h = h_th).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "qdiff/error.hpp"
#include "qdiff/stencil.hpp"

namespace qdiff {

/// Relative slack used when a boundary case of an inequality is hit exactly
/// (h_min saturates the truncation condition by construction).
inline constexpr double kScheduleRelTol = 1e-12;

struct GevreySpec {
  double A = 1.0;      ///< scale of the function
  double c = 1.0;      ///< inverse variation scale
  double sigma = 0.0;  ///< smoothness exponent

  double sigma_plus() const { return std::max(sigma, 0.0); }

  void validate() const {
    if (!(A > 0) || !(c > 0) || !std::isfinite(A) || !std::isfinite(c) || !std::isfinite(sigma)) {
      throw PreconditionError("Gevrey spec requires finite A > 0, c > 0 and finite sigma");
    }
  }
};

inline int half_width_min(int m) { return (m + 1) / 2; }

/// A c^k (k!)^sigma, evaluated in the log domain.
inline double gevrey_deriv_bound(const GevreySpec& g, int k) {
  g.validate();
  if (k < 0) throw PreconditionError("derivative index must be nonnegative");
  const long double log_value = std::log(static_cast<long double>(g.A)) +
                                k * std::log(static_cast<long double>(g.c)) +
                                g.sigma * std::lgamma(static_cast<long double>(k) + 1.0L);
  if (log_value > std::log(static_cast<long double>(std::numeric_limits<double>::max()))) {
    throw OutOfRangeError("Gevrey bound A c^k (k!)^sigma overflows double for k=" + std::to_string(k));
  }
  return static_cast<double>(std::exp(log_value));
}

/// eps' = e eps / (2 (e c m)^m A).
inline double eps_prime(const GevreySpec& g, int m, double eps) {
  g.validate();
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (m < 1) throw PreconditionError("derivative order must be positive");
  const long double log_value = 1.0L + std::log(static_cast<long double>(eps)) - std::log(2.0L) -
                                m * std::log(std::numbers::e_v<long double> * g.c * m) -
                                std::log(static_cast<long double>(g.A));
  return static_cast<double>(std::exp(log_value));
}

/// Upper limit on eps' for which the threshold schedule is valid.
inline double eps_prime_limit(double a) {
  constexpr double ln2 = std::numbers::ln2;
  if (a >= ln2) return std::exp2(a - (a / ln2) * (a / ln2));
  return std::exp2(a - 1.0);
}

/// True iff eps' lies within the admissible range for exponent m sigma^+.
inline bool check_eps_condition(const GevreySpec& g, int m, double eps_prime_value) {
  return eps_prime_value <= eps_prime_limit(m * g.sigma_plus());
}

/// Threshold half-width n_th, clamped below by ceil(m/2).
inline int n_th(const GevreySpec& g, int m, double eps) {
  const double ep = eps_prime(g, m, eps);
  const double a = m * g.sigma_plus();
  if (!check_eps_condition(g, m, ep)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "eps'=" << ep << " violates the admissible bound " << eps_prime_limit(a)
        << " for m*sigma+=" << a << "; tighten eps";
    throw PreconditionError(msg.str());
  }
  const double log_ratio = a - std::log2(ep);
  if (!(log_ratio > 0)) {
    throw PreconditionError("log2(2^(m sigma+)/eps') must be positive");
  }
  const double raw = 0.5 * (log_ratio + std::log2(log_ratio) - 0.5);
  const double value = std::ceil(raw);
  if (value > std::numeric_limits<int>::max() / 4) {
    throw OutOfRangeError("n_th does not fit the stencil limits");
  }
  return std::max(half_width_min(m), static_cast<int>(value));
}

/// h_th = 1 / (e c m (2n+1)^sigma+).
inline double h_th(const GevreySpec& g, int m, int n) {
  g.validate();
  if (n < half_width_min(m)) throw PreconditionError("h_th requires n >= ceil(m/2)");
  return 1.0 / (std::numbers::e * g.c * m * std::pow(2.0 * n + 1.0, g.sigma_plus()));
}

/// Step that saturates the truncation condition at the smallest stencil.
inline double h_min(const GevreySpec& g, int m, double eps) {
  g.validate();
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (m < 1) throw PreconditionError("derivative order must be positive");
  const long double lm = m;
  const long double base = std::log(2.0L / (std::numbers::e_v<long double> * g.c * lm));
  if (m % 2 == 1) {
    const long double log_sq = std::log(static_cast<long double>(eps)) - std::log(static_cast<long double>(g.A)) -
                               std::log(static_cast<long double>(g.c)) - g.sigma * std::lgamma(lm + 3.0L) -
                               std::log(lm) + (lm + 1.0L) * base;
    return static_cast<double>(std::exp(0.5L * log_sq));
  }
  const long double log_h = std::log(static_cast<long double>(eps)) - std::log(static_cast<long double>(g.A)) -
                            std::log(static_cast<long double>(g.c)) - g.sigma * std::lgamma(lm + 2.0L) -
                            std::log(lm) + lm * base;
  return static_cast<double>(std::exp(log_h));
}

/// Log of A c^(2n+1) ((2n+1)!)^sigma m (e m / 2)^(2n) h^(2n-m+1).
inline long double log_truncation_bound(const GevreySpec& g, int m, int n, double h) {
  const long double lm = m;
  return std::log(static_cast<long double>(g.A)) + (2.0L * n + 1.0L) * std::log(static_cast<long double>(g.c)) +
         g.sigma * std::lgamma(2.0L * n + 2.0L) + std::log(lm) +
         2.0L * n * std::log(std::numbers::e_v<long double> * lm / 2.0L) +
         (2.0L * n - lm + 1.0L) * std::log(static_cast<long double>(h));
}

/// Truncation-error bound |f^(m) - D_{n,m,h} f| for f in G(A, c, sigma).
inline double truncation_bound(const GevreySpec& g, int m, int n, double h) {
  g.validate();
  validate(StencilKey{m, n});
  if (!(h > 0)) throw PreconditionError("step h must be positive");
  return static_cast<double>(std::exp(log_truncation_bound(g, m, n, h)));
}

/// True iff the truncation bound at (n, h) does not exceed eps.
inline bool check_h_condition(const GevreySpec& g, int m, int n, double h, double eps) {
  g.validate();
  validate(StencilKey{m, n});
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  if (h <= 0) return true;
  return log_truncation_bound(g, m, n, h) <= std::log(static_cast<long double>(eps)) + kScheduleRelTol;
}

/// eps~ = h^m eps / D: precision the integrand oracle must deliver.
inline double eps_tilde(const Stencil& st, double h, double eps) {
  if (!(h > 0) || !(eps > 0)) throw PreconditionError("eps_tilde requires h > 0 and eps > 0");
  return static_cast<double>(std::pow(static_cast<long double>(h), st.m()) * eps / st.abs_sum_approx());
}

/// Smallest x with x^a / 2^x <= eps guaranteed for all larger x.
inline double x_tilde(double a, double eps) {
  if (a < 0) throw PreconditionError("x_tilde requires a >= 0");
  if (!(eps > 0)) throw PreconditionError("x_tilde requires eps > 0");
  if (eps > eps_prime_limit(a)) {
    throw PreconditionError("eps exceeds the admissible bound for a=" + std::to_string(a));
  }
  const double l = a - std::log2(eps);
  if (a == 0) return l;
  return l + a * std::log2(l);
}

/// Qubit figure ceil(log2(range / eps~)^a) for the finite-precision oracle.
inline std::int64_t qubit_estimate(double eps_tilde_value, double range_bound, double a = 1.0) {
  if (!(eps_tilde_value > 0)) throw PreconditionError("qubit estimate requires eps~ > 0");
  if (!(range_bound > 0) || !(a > 0)) throw PreconditionError("qubit estimate requires range > 0 and a > 0");
  const double bits = std::log2(range_bound) - std::log2(eps_tilde_value);
  if (bits <= 0) return 0;
  return static_cast<std::int64_t>(std::ceil(std::pow(bits, a)));
}

enum class ScheduleMode { minimal, threshold };

inline std::string to_string(ScheduleMode mode) {
  return mode == ScheduleMode::minimal ? "minimal" : "threshold";
}

/// All schedule quantities for one (spec, m, eps).
struct Schedule {
  int m = 1;
  double eps = 0;
  GevreySpec gevrey;
  double epsPrime = 0;
  double sigmaPlus = 0;
  std::optional<int> nTh;     ///< present when the eps' condition holds
  std::optional<double> hTh;  ///< likewise
  double hMin = 0;
  std::string thresholdDiagnostic;  ///< why nTh is absent, if it is

  /// (n, h) for the requested mode; throws if the threshold pair is unavailable.
  std::pair<int, double> choose(ScheduleMode mode) const {
    if (mode == ScheduleMode::minimal) return {half_width_min(m), hMin};
    if (!nTh) throw PreconditionError("threshold schedule unavailable: " + thresholdDiagnostic);
    return {*nTh, *hTh};
  }
};

inline Schedule make_schedule(const GevreySpec& g, int m, double eps) {
  g.validate();
  if (m < 1) throw PreconditionError("derivative order must be positive");
  if (!(eps > 0)) throw PreconditionError("eps must be positive");
  Schedule s;
  s.m = m;
  s.eps = eps;
  s.gevrey = g;
  s.epsPrime = eps_prime(g, m, eps);
  s.sigmaPlus = g.sigma_plus();
  s.hMin = h_min(g, m, eps);
  try {
    const int n = n_th(g, m, eps);
    s.nTh = n;
    s.hTh = h_th(g, m, n);
  } catch (const PreconditionError& e) {
    s.thresholdDiagnostic = e.what();
  }
  return s;
}

}  // namespace qdiff
