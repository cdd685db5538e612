#pragma once

// Classical simulation of amplitude estimation.
//
// The estimator never touches a state vector: a Grover iterate applied k times
// to the base oracle turns the success probability into sin^2((2k+1) theta),
// so each depth is simulated by binomial sampling at that probability.
// Query accounting charges 2k+1 base-oracle invocations per shot at depth k.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qdiff/error.hpp"

namespace qdiff {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; derives well-separated child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trial `index` under a root seed: splitmix64(root ^ splitmix64(index)).
inline std::uint64_t trial_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(root ^ splitmix64(index));
}

struct AmplitudeProblem {
  double pTrue = 0;

  explicit AmplitudeProblem(double p) : pTrue(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("success probability must lie in [0, 1]");
  }
  double theta() const { return std::asin(std::sqrt(pTrue)); }
};

struct QAEResult {
  double estimate = 0;
  std::int64_t groverCalls = 0;  ///< base-oracle invocations, depth k charged 2k+1
  std::int64_t shots = 0;
  double targetEps = 0;
  double confidence = 0;
  int maxDepthExponent = 0;      ///< K: deepest iterate count is 2^(K-1)
};

enum class QaeVariant { mlae, classical };

inline std::string to_string(QaeVariant v) { return v == QaeVariant::mlae ? "mlae" : "classical"; }

/// Tuned so that |estimate - p| <= eps holds with empirical probability well
/// above 0.99 at delta = 0.01 (see the calibration test).
struct MlaeOptions {
  double depthScale = 1.0;        ///< c_s in K = ceil(log2(c_s / eps))
  int shotsPerDepth = 0;          ///< 0: derive from delta
  int baseShots = 32;             ///< shots per depth at delta = 0.01
  int repeats = 1;                ///< median of this many independent runs
};

/// Shots per depth for a failure probability delta: scales like ln(1/delta).
inline int mlae_shots_for_delta(const MlaeOptions& opt, double delta) {
  if (opt.shotsPerDepth > 0) return opt.shotsPerDepth;
  return std::max(1, static_cast<int>(std::ceil(opt.baseShots * std::log(1.0 / delta) / std::log(100.0))));
}

/// Smallest amplitude accuracy the simulator accepts; below this the phase
/// (2k+1) theta loses too many bits in floating point.
inline constexpr double kMinAmplitudeEps = 1e-10;

namespace detail {

inline void check_qae_args(double eps, double delta) {
  if (!(eps > 0 && eps < 1)) throw PreconditionError("amplitude accuracy must lie in (0, 1)");
  if (!(delta > 0 && delta < 1)) throw PreconditionError("failure probability must lie in (0, 1)");
  if (eps < kMinAmplitudeEps) {
    throw PreconditionError("amplitude accuracy " + std::to_string(eps) + " is below the simulable floor " +
                            std::to_string(kMinAmplitudeEps));
  }
}

inline std::int64_t draw_binomial(Rng& rng, std::int64_t trials, double p) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<std::int64_t> dist(trials, p);
  return dist(rng);
}

struct DepthRecord {
  std::int64_t factor;  // 2k + 1
  std::int64_t ones;
  std::int64_t shots;
};

inline double log_likelihood(const std::vector<DepthRecord>& records, std::size_t upto, double theta) {
  double ll = 0;
  for (std::size_t i = 0; i < upto; ++i) {
    const auto& r = records[i];
    const double s = std::sin(static_cast<double>(r.factor) * theta);
    const double p1 = s * s;
    const double p0 = 1.0 - p1;
    if (r.ones > 0) {
      if (p1 <= 0) return -std::numeric_limits<double>::infinity();
      ll += r.ones * std::log(p1);
    }
    const std::int64_t zeros = r.shots - r.ones;
    if (zeros > 0) {
      if (p0 <= 0) return -std::numeric_limits<double>::infinity();
      ll += zeros * std::log(p0);
    }
  }
  return ll;
}

// Beam search over the theta grid. After each depth every local maximum of
// the accumulated likelihood within kBeamNats of the best is kept (at most
// kMaxCandidates), and the next depth is searched within kWindowPeriods alias
// periods pi/(2k+1) around each survivor. A single window would lose the
// true peak whenever an early depth picked an alias.
inline constexpr double kWindowPeriods = 4.0;
inline constexpr double kBeamNats = 12.0;
inline constexpr std::size_t kMaxCandidates = 16;
inline constexpr double kProbesPerPeriod = 64.0;

struct GridInterval {
  std::int64_t lo;
  std::int64_t hi;
};

inline std::vector<GridInterval> merge_intervals(std::vector<GridInterval> v) {
  std::sort(v.begin(), v.end(), [](const GridInterval& a, const GridInterval& b) { return a.lo < b.lo; });
  std::vector<GridInterval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.lo <= out.back().hi + 1) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// One maximum-likelihood run. Grid: theta_i = i * step, i = 0..cells with
// step <= eps / 10 and theta_cells = pi / 2, so both endpoints are grid
// points. The last depth is scanned at full grid resolution; ties go to the
// smaller theta.
inline QAEResult mlae_single(double p_true, double eps, int shots, double depth_scale, Rng& rng) {
  const double theta_true = std::asin(std::sqrt(p_true));
  const int k_exp = std::max(1, static_cast<int>(std::ceil(std::log2(depth_scale / eps))));

  std::vector<DepthRecord> records;
  records.reserve(static_cast<std::size_t>(k_exp) + 1);
  std::int64_t calls = 0;
  std::int64_t total_shots = 0;
  for (int k = 0; k <= k_exp; ++k) {
    const std::int64_t depth = (k == 0) ? 0 : (std::int64_t{1} << (k - 1));
    const std::int64_t factor = 2 * depth + 1;
    const long double s = std::sin(static_cast<long double>(factor) * theta_true);
    const double p = static_cast<double>(s * s);
    records.push_back({factor, draw_binomial(rng, shots, p), shots});
    calls += shots * factor;
    total_shots += shots;
  }

  const double half_pi = std::numbers::pi / 2;
  const auto cells = static_cast<std::int64_t>(std::ceil(half_pi / (eps / 10.0)));
  const double step = half_pi / static_cast<double>(cells);

  std::vector<GridInterval> search{{0, cells}};
  std::int64_t best = 0;
  for (std::size_t stage = 0; stage < records.size(); ++stage) {
    const bool last = stage + 1 == records.size();
    const double period = std::numbers::pi / static_cast<double>(records[stage].factor);
    const std::int64_t stride =
        last ? 1 : std::max<std::int64_t>(1, static_cast<std::int64_t>(period / kProbesPerPeriod / step));

    struct Peak {
      std::int64_t at;
      double ll;
    };
    std::vector<Peak> peaks;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (const auto& iv : search) {
      double prev2 = -std::numeric_limits<double>::infinity();
      double prev = -std::numeric_limits<double>::infinity();
      std::int64_t prev_at = iv.lo;
      for (std::int64_t i = iv.lo;; i += stride) {
        const bool past = i > iv.hi;
        const std::int64_t at = past ? iv.hi : i;
        const double ll = past ? -std::numeric_limits<double>::infinity()
                               : log_likelihood(records, stage + 1, static_cast<double>(at) * step);
        if (i > iv.lo && prev >= prev2 && prev > ll) peaks.push_back({prev_at, prev});
        if (ll > best_ll) {
          best_ll = ll;
          best = at;
        }
        if (past) break;
        prev2 = prev;
        prev = ll;
        prev_at = at;
      }
    }
    if (last) break;

    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.ll > b.ll; });
    const double next_period = std::numbers::pi / static_cast<double>(records[stage + 1].factor);
    const auto half = static_cast<std::int64_t>(std::ceil(kWindowPeriods * next_period / step)) + stride;
    std::vector<GridInterval> next;
    for (std::size_t i = 0; i < peaks.size() && i < kMaxCandidates; ++i) {
      if (peaks[i].ll < best_ll - kBeamNats) break;
      next.push_back({std::max<std::int64_t>(0, peaks[i].at - half), std::min(cells, peaks[i].at + half)});
    }
    if (next.empty()) {
      next.push_back({std::max<std::int64_t>(0, best - half), std::min(cells, best + half)});
    }
    search = merge_intervals(std::move(next));
  }

  QAEResult out;
  if (best == 0) {
    out.estimate = 0.0;
  } else if (best == cells) {
    out.estimate = 1.0;
  } else {
    const double s = std::sin(static_cast<double>(best) * step);
    out.estimate = std::clamp(s * s, 0.0, 1.0);
  }
  out.groverCalls = calls;
  out.shots = total_shots;
  out.targetEps = eps;
  out.maxDepthExponent = k_exp;
  return out;
}

}  // namespace detail

/// Maximum-likelihood amplitude estimation with depths 0, 1, 2, 4, ..., 2^(K-1).
inline QAEResult mlae_estimate(const AmplitudeProblem& prob, double eps, double delta, Rng& rng,
                               const MlaeOptions& opt = {}) {
  detail::check_qae_args(eps, delta);
  if (opt.repeats < 1) throw PreconditionError("repeats must be >= 1");
  if (!(opt.depthScale > 0)) throw PreconditionError("depth scale must be positive");
  const int shots = mlae_shots_for_delta(opt, delta);
  std::vector<double> estimates;
  QAEResult total;
  for (int i = 0; i < opt.repeats; ++i) {
    const QAEResult one = detail::mlae_single(prob.pTrue, eps, shots, opt.depthScale, rng);
    estimates.push_back(one.estimate);
    total.groverCalls += one.groverCalls;
    total.shots += one.shots;
    total.maxDepthExponent = one.maxDepthExponent;
  }
  std::sort(estimates.begin(), estimates.end());
  total.estimate = estimates[estimates.size() / 2];
  total.targetEps = eps;
  total.confidence = 1.0 - delta;
  return total;
}

/// Hoeffding sample count ceil(ln(2/delta) / (2 eps^2)).
inline std::int64_t hoeffding_samples(double eps, double delta) {
  return static_cast<std::int64_t>(std::ceil(std::log(2.0 / delta) / (2.0 * eps * eps)));
}

/// Plain Bernoulli sampling baseline (depth 0 only).
inline QAEResult classical_mc_estimate(const AmplitudeProblem& prob, double eps, double delta, Rng& rng) {
  if (!(eps > 0 && eps < 1)) throw PreconditionError("accuracy must lie in (0, 1)");
  if (!(delta > 0 && delta < 1)) throw PreconditionError("failure probability must lie in (0, 1)");
  const std::int64_t samples = hoeffding_samples(eps, delta);
  QAEResult out;
  out.estimate = static_cast<double>(detail::draw_binomial(rng, samples, prob.pTrue)) / static_cast<double>(samples);
  out.groverCalls = samples;
  out.shots = samples;
  out.targetEps = eps;
  out.confidence = 1.0 - delta;
  return out;
}

struct QaeConfig {
  QaeVariant variant = QaeVariant::mlae;
  double delta = 0.01;
  MlaeOptions mlae;
};

/// Dispatch on the configured variant.
inline QAEResult estimate_amplitude(const AmplitudeProblem& prob, double eps, const QaeConfig& cfg, Rng& rng) {
  return cfg.variant == QaeVariant::mlae ? mlae_estimate(prob, eps, cfg.delta, rng, cfg.mlae)
                                         : classical_mc_estimate(prob, eps, cfg.delta, rng);
}

}  // namespace qdiff
