#pragma once

// The two estimation methods for V^(m)(x) = d^m/dx^m E[F(S, x)].
//
// Both reduce to one amplitude-estimation call on an encoded success
// probability P. The probability is computed exactly from the discrete grid,
// the stencil and the quantised integrand; only the amplitude measurement is
// stochastic. The naive method loops over the stencil inside each oracle
// call; the sum-in-QAE method folds the stencil into the superposition with
// weights |d_j| / D and a sign flag.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/distribution.hpp"
#include "qdiff/error.hpp"
#include "qdiff/integrand.hpp"
#include "qdiff/qae.hpp"
#include "qdiff/schedule.hpp"
#include "qdiff/stencil.hpp"

namespace qdiff {

enum class Method { naive_smooth, naive_nonsmooth, sum_in_qae };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::naive_smooth: return "naive_smooth";
    case Method::naive_nonsmooth: return "naive_nonsmooth";
    case Method::sum_in_qae: return "sum_in_qae";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "naive_smooth") return Method::naive_smooth;
  if (s == "naive_nonsmooth") return Method::naive_nonsmooth;
  if (s == "sum_in_qae") return Method::sum_in_qae;
  throw ConfigError("unknown method '" + s + "'");
}

/// Tolerance on P leaving [0, 1] and on the two nonsmooth encodings agreeing.
inline constexpr double kProbabilitySlack = 1e-12;

struct DiffJob {
  double x = 0;
  int m = 1;
  double eps = 0.01;
  Method method = Method::naive_nonsmooth;
  int n = 1;
  double h = 0.1;
  std::shared_ptr<const DiscreteDistribution> dist;
  Integrand integrand;
  QaeConfig qae;
  double qubitExponent = 1.0;  ///< a in the O(log^a(1/eps)) oracle qubit count
  int maxHalfWidth = kDefaultMaxHalfWidth;

  /// Gevrey constants that drive the schedule and the truncation bound.
  const GevreySpec& gevrey() const {
    if (method == Method::naive_smooth) {
      if (!integrand.gevreyF) {
        throw PreconditionError("method naive_smooth needs F(s, .) declared smooth; integrand '" + integrand.label +
                                "' is not");
      }
      return *integrand.gevreyF;
    }
    return integrand.value_gevrey();
  }
};

/// Fills n and h of a job from its Gevrey declaration.
inline void apply_schedule(DiffJob& job, ScheduleMode mode) {
  const Schedule s = make_schedule(job.gevrey(), job.m, job.eps);
  const auto [n, h] = s.choose(mode);
  job.n = n;
  job.h = h;
}

struct OracleCalls {
  std::int64_t F = 0;
  std::int64_t S = 0;
  std::int64_t coef = 0;
  std::int64_t sign = 0;
};

/// The three error components; each bound is at most eps when the job validates.
struct ErrorBudget {
  double truncationBound = 0;      ///< |V^(m) - D_{n,m,h} V| from the Gevrey schedule
  double quantizationBound = 0;    ///< |D V - Y| transfer bound D eps~ / (2 h^m)
  double quantizationRealized = 0; ///< measured |D V - Y| on the grid
  double qaeTarget = 0;            ///< |Y - Y~| requested from amplitude estimation
  double qaeRealized = 0;          ///< measured |Y - Y~|
};

struct SmoothnessAudit {
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  double worstRatio = 0;  ///< max sampled |F^(k)| / (A c^k (k!)^sigma), k = 0, 1
};

struct DiffEstimate {
  Method method = Method::naive_nonsmooth;
  int n = 0;
  double h = 0;
  double epsTilde = 0;
  double normalizer = 0;   ///< Y = normalizer (2P - 1)
  double ampEps = 0;       ///< amplitude accuracy passed to QAE
  double pTrue = 0;
  double pTilde = 0;
  double y = 0;            ///< exact encoded value (quantised stencil sum)
  double yTilde = 0;
  int nonzeroOffsets = 0;
  OracleCalls oracleCalls;
  QAEResult qae;
  std::int64_t qubitReport = 0;
  ErrorBudget errorBudget;
};

namespace detail {

struct StencilSums {
  long double quantized = 0;  ///< sum_j d_j sum_s p_s F_q(s, x + j h)
  long double raw = 0;        ///< same without quantisation
};

inline StencilSums stencil_sums(const Stencil& st, const DiscreteDistribution& dist, const QuantizedIntegrand& fq,
                                double x, double h) {
  StencilSums out;
  const auto& pts = dist.points();
  const auto& ps = dist.probs();
  for (int j : st.nonzero_offsets()) {
    const double xj = x + j * h;
    CompensatedSum q;
    CompensatedSum r;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = fq.base().eval(pts[i], xj);
      if (!std::isfinite(v)) throw PreconditionError("integrand is not finite at s=" + std::to_string(pts[i]));
      q.add(ps[i] * fq.quantize(v));
      r.add(ps[i] * v);
    }
    out.quantized += st.coeff_approx(j) * static_cast<long double>(q.value());
    out.raw += st.coeff_approx(j) * static_cast<long double>(r.value());
  }
  return out;
}

inline double checked_probability(long double p, const char* what) {
  if (!(p >= -kProbabilitySlack && p <= 1.0L + kProbabilitySlack)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " encoded probability " << static_cast<double>(p)
        << " leaves [0, 1]; the smoothness or bound declaration is violated";
    throw InternalError(msg.str());
  }
  return std::clamp(static_cast<double>(p), 0.0, 1.0);
}

inline void validate_job(const DiffJob& job) {
  if (!job.dist) throw PreconditionError("job has no distribution");
  if (!job.integrand.eval) throw PreconditionError("job has no integrand");
  if (!(job.eps > 0)) throw PreconditionError("eps must be positive");
  if (!(job.h > 0)) throw PreconditionError("step h must be positive");
  if (!(job.integrand.bound > 0)) throw PreconditionError("integrand bound B must be positive");
  validate(StencilKey{job.m, job.n}, job.maxHalfWidth);
  const GevreySpec& g = job.gevrey();
  if (!check_h_condition(g, job.m, job.n, job.h, job.eps)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "step h=" << job.h << " violates the truncation condition for (m=" << job.m << ", n=" << job.n
        << ", eps=" << job.eps << "): bound " << truncation_bound(g, job.m, job.n, job.h);
    throw PreconditionError(msg.str());
  }
  job.integrand.check_nodes(job.x, job.n, job.h);
}

}  // namespace detail

/// Encoded probability of the smooth naive method:
/// 1/2 + Xq / (2 h^m (A c^m (m!)^sigma + 2 eps)).
inline double encoded_probability_smooth(const DiffJob& job) {
  if (!job.integrand.smooth()) {
    throw PreconditionError("smooth encoding needs F(s, .) declared smooth; integrand '" + job.integrand.label +
                            "' is not");
  }
  detail::validate_job(job);
  const Stencil st = compute_stencil({job.m, job.n}, job.maxHalfWidth);
  const GevreySpec& g = *job.integrand.gevreyF;
  const QuantizedIntegrand fq(job.integrand, eps_tilde(st, job.h, job.eps));
  const auto sums = detail::stencil_sums(st, *job.dist, fq, job.x, job.h);
  const long double norm = gevrey_deriv_bound(g, job.m) + 2.0L * job.eps;
  const long double hm = std::pow(static_cast<long double>(job.h), job.m);
  return detail::checked_probability(0.5L + sums.quantized / (2.0L * hm * norm), "smooth");
}

/// Encoded probability of the nonsmooth naive method: 1/2 + Xq / (2 D (B + eps~)).
inline double encoded_probability_nonsmooth(const DiffJob& job) {
  detail::validate_job(job);
  const Stencil st = compute_stencil({job.m, job.n}, job.maxHalfWidth);
  const double et = eps_tilde(st, job.h, job.eps);
  const QuantizedIntegrand fq(job.integrand, et);
  const auto sums = detail::stencil_sums(st, *job.dist, fq, job.x, job.h);
  const long double denom = 2.0L * st.abs_sum_approx() * (job.integrand.bound + static_cast<long double>(et));
  return detail::checked_probability(0.5L + sums.quantized / denom, "nonsmooth");
}

/// Success probability of the sum-in-QAE state, computed outcome by outcome:
/// (j, s) has weight |d_j| / D * p_s and the flag agrees with the sign bit of
/// d_j with probability 1/2 + F_q / (2 (B + eps~)).
inline double encoded_probability_sum_in_qae(const DiffJob& job) {
  detail::validate_job(job);
  const Stencil st = compute_stencil({job.m, job.n}, job.maxHalfWidth);
  const double et = eps_tilde(st, job.h, job.eps);
  const QuantizedIntegrand fq(job.integrand, et);
  const long double d = st.abs_sum_approx();
  const long double scale = 2.0L * (job.integrand.bound + static_cast<long double>(et));
  const auto& pts = job.dist->points();
  const auto& ps = job.dist->probs();
  long double total = 0;
  for (int j : st.nonzero_offsets()) {
    const long double w = std::abs(st.coeff_approx(j)) / d;
    const double sign = st.sign_bit(j) ? 1.0 : -1.0;
    const double xj = job.x + j * job.h;
    CompensatedSum acc;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double flag = 0.5 + static_cast<double>(sign * fq(pts[i], xj) / scale);
      acc.add(ps[i] * flag);
    }
    total += w * static_cast<long double>(acc.value());
  }
  return detail::checked_probability(total, "sum-in-QAE");
}

/// Samples |F| <= A and |dF/dx| <= A c (1!)^sigma around the stencil span.
/// Violations are reported, never thrown.
inline SmoothnessAudit audit_smoothness(const DiffJob& job, int x_samples = 33, int s_stride = 0) {
  SmoothnessAudit audit;
  if (!job.integrand.gevreyF || !job.dist) return audit;
  const GevreySpec& g = *job.integrand.gevreyF;
  const auto& pts = job.dist->points();
  const std::size_t stride =
      s_stride > 0 ? static_cast<std::size_t>(s_stride) : std::max<std::size_t>(1, pts.size() / 64);
  const double span = job.n * job.h;
  const double dx = 1e-4 * std::max(job.h, 1e-8);
  const double b0 = gevrey_deriv_bound(g, 0);
  const double b1 = gevrey_deriv_bound(g, 1);
  for (int i = 0; i < x_samples; ++i) {
    const double x = job.x - span + 2.0 * span * i / std::max(1, x_samples - 1);
    for (std::size_t k = 0; k < pts.size(); k += stride) {
      const double s = pts[k];
      const double f0 = job.integrand.eval(s, x);
      const double f1 = (job.integrand.eval(s, x + dx) - job.integrand.eval(s, x - dx)) / (2.0 * dx);
      const double ratio = std::max(std::abs(f0) / b0, std::abs(f1) / b1);
      audit.worstRatio = std::max(audit.worstRatio, ratio);
      ++audit.samples;
      if (ratio > 1.0 + 1e-9) ++audit.violations;
    }
  }
  return audit;
}

/// Deterministic part of a run: the encoded probability and everything needed
/// to turn an amplitude estimate back into a derivative estimate. Computing it
/// once lets repeated trials share the (grid-sized) summation.
struct EncodedJob {
  Method method = Method::naive_nonsmooth;
  StencilKey key;
  int nonzeroOffsets = 0;
  long double absSum = 0;
  double epsTilde = 0;
  long double normalizer = 0;
  double pTrue = 0;
  double y = 0;
  ErrorBudget bounds;  ///< bound and quantisation fields filled; QAE fields per trial
  std::int64_t qubitReport = 0;
};

/// Validates the job and computes its encoded probability. For sum_in_qae the
/// outcome-level probability is checked against the nonsmooth naive encoding.
inline EncodedJob encode(const DiffJob& job) {
  detail::validate_job(job);
  const Stencil st = compute_stencil({job.m, job.n}, job.maxHalfWidth);
  const double et = eps_tilde(st, job.h, job.eps);
  const QuantizedIntegrand fq(job.integrand, et);
  const auto sums = detail::stencil_sums(st, *job.dist, fq, job.x, job.h);
  const long double hm = std::pow(static_cast<long double>(job.h), job.m);

  EncodedJob enc;
  enc.method = job.method;
  enc.key = st.key();
  enc.nonzeroOffsets = static_cast<int>(st.nonzero_offsets().size());
  enc.absSum = st.abs_sum_approx();
  enc.epsTilde = et;
  if (job.method == Method::naive_smooth) {
    if (job.integrand.discontinuousInX) {
      throw PreconditionError("integrand '" + job.integrand.label + "' is discontinuous in x; use a nonsmooth method");
    }
    const long double norm = gevrey_deriv_bound(job.gevrey(), job.m) + 2.0L * job.eps;
    enc.normalizer = norm;
    enc.pTrue = detail::checked_probability(0.5L + sums.quantized / (2.0L * hm * norm), "smooth");
  } else {
    const long double bd = st.abs_sum_approx() * (job.integrand.bound + static_cast<long double>(et));
    enc.normalizer = bd / hm;
    enc.pTrue = detail::checked_probability(0.5L + sums.quantized / (2.0L * bd), "nonsmooth");
    if (job.method == Method::sum_in_qae) {
      const double p_joint = encoded_probability_sum_in_qae(job);
      if (std::abs(p_joint - enc.pTrue) > kProbabilitySlack) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "sum-in-QAE probability " << p_joint << " differs from the naive encoding " << enc.pTrue;
        throw InternalError(msg.str());
      }
      enc.pTrue = p_joint;
    }
  }
  enc.y = static_cast<double>(sums.quantized / hm);
  enc.qubitReport = qubit_estimate(et, job.integrand.bound + 1.0, job.qubitExponent);
  enc.bounds.truncationBound = truncation_bound(job.gevrey(), job.m, job.n, job.h);
  enc.bounds.quantizationBound = static_cast<double>(st.abs_sum_approx() * et / (2.0L * hm));
  enc.bounds.quantizationRealized = static_cast<double>(std::abs(sums.quantized - sums.raw) / hm);
  enc.bounds.qaeTarget = job.eps;
  return enc;
}

/// One amplitude-estimation trial on an encoded job.
inline DiffEstimate estimate(const EncodedJob& enc, const DiffJob& job, Rng& rng) {
  DiffEstimate est;
  est.method = enc.method;
  est.n = enc.key.n;
  est.h = job.h;
  est.epsTilde = enc.epsTilde;
  est.normalizer = static_cast<double>(enc.normalizer);
  est.pTrue = enc.pTrue;
  est.y = enc.y;
  est.ampEps = static_cast<double>(job.eps / (2.0L * enc.normalizer));
  if (est.ampEps < kMinAmplitudeEps) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "required amplitude accuracy " << est.ampEps << " (normalizer " << est.normalizer
        << ") is below the simulable floor " << kMinAmplitudeEps << "; loosen eps or enlarge h";
    throw PreconditionError(msg.str());
  }
  est.qae = estimate_amplitude(AmplitudeProblem(enc.pTrue), est.ampEps, job.qae, rng);
  est.pTilde = est.qae.estimate;
  est.yTilde = static_cast<double>(enc.normalizer * (2.0L * est.pTilde - 1.0L));

  est.nonzeroOffsets = enc.nonzeroOffsets;
  const std::int64_t base_calls = est.qae.groverCalls;
  if (enc.method == Method::sum_in_qae) {
    est.oracleCalls = {base_calls, base_calls, base_calls, base_calls};
  } else {
    est.oracleCalls = {base_calls * enc.nonzeroOffsets, base_calls, 0, 0};
  }
  est.qubitReport = enc.qubitReport;
  est.errorBudget = enc.bounds;
  est.errorBudget.qaeRealized = std::abs(est.yTilde - est.y);
  return est;
}

/// Naive iteration method, smooth or nonsmooth normalisation by job.method.
inline DiffEstimate run_naive(const DiffJob& job, Rng& rng) {
  if (job.method == Method::sum_in_qae) throw PreconditionError("run_naive needs a naive method");
  return estimate(encode(job), job, rng);
}

/// Sum-in-QAE method.
inline DiffEstimate run_sum_in_qae(const DiffJob& job, Rng& rng) {
  if (job.method != Method::sum_in_qae) throw PreconditionError("run_sum_in_qae needs method sum_in_qae");
  return estimate(encode(job), job, rng);
}

inline DiffEstimate run_job(const DiffJob& job, Rng& rng) { return estimate(encode(job), job, rng); }

enum class QubitBudget { large, small };

inline std::string to_string(QubitBudget b) { return b == QubitBudget::large ? "large" : "small"; }

struct MethodChoice {
  Method method;
  ScheduleMode mode;
};

/// Ranked recommendation; a second entry means both are competitive.
struct Recommendation {
  std::vector<MethodChoice> ranked;
};

/// Method and (n, h) setting favoured for the given smoothness and qubit budget.
inline Recommendation select_method(bool smooth_f, QubitBudget budget, int m, double sigma) {
  if (!smooth_f) return {{{Method::sum_in_qae, ScheduleMode::threshold}}};
  if (budget == QubitBudget::large) return {{{Method::naive_smooth, ScheduleMode::minimal}}};
  const double a = m * std::max(sigma, 0.0);
  if (a >= 1.0) {
    return {{{Method::naive_smooth, ScheduleMode::threshold}, {Method::sum_in_qae, ScheduleMode::threshold}}};
  }
  return {{{Method::sum_in_qae, ScheduleMode::threshold}, {Method::naive_smooth, ScheduleMode::threshold}}};
}

}  // namespace qdiff
