#pragma once

// Integrands F(s, x), their finite-precision quantisation, and the
// Black-Scholes example with closed-form Greeks used as validation oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdiff/distribution.hpp"
#include "qdiff/error.hpp"
#include "qdiff/schedule.hpp"

namespace qdiff {

struct Interval {
  double lo = 0;
  double hi = 0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// F(s, x) with a uniform bound B and a smoothness declaration.
///
/// gevreyF declares F(s, .) in G(A, c, sigma) uniformly in s (the smooth
/// case). gevreyV declares only the expectation V in a Gevrey class (the
/// nonsmooth case). A smooth F implies a smooth V with the same constants.
struct Integrand {
  std::string label;
  std::function<double(double, double)> eval;
  double bound = 0;                     ///< B with |F| <= B
  bool discontinuousInX = false;        ///< F(s, .) has jumps; a smooth declaration is refused
  std::optional<GevreySpec> gevreyF;
  std::optional<GevreySpec> gevreyV;
  std::optional<Interval> xWindow;      ///< stencil nodes must stay inside when set
  std::optional<double> xExclusiveMin;  ///< nodes must exceed this (e.g. spot > 0)

  double operator()(double s, double x) const { return eval(s, x); }

  bool smooth() const { return gevreyF.has_value(); }

  /// Gevrey constants of V: the explicit V declaration, else those of F.
  const GevreySpec& value_gevrey() const {
    if (gevreyV) return *gevreyV;
    if (gevreyF) return *gevreyF;
    throw PreconditionError("integrand '" + label + "' carries no Gevrey declaration for V");
  }

  /// Throws unless every node x + j h, |j| <= n, lies in the admissible x range.
  void check_nodes(double x, int n, double h) const {
    for (int j = -n; j <= n; j += 2 * n) {
      const double node = x + j * h;
      if (xWindow && !xWindow->contains(node)) {
        throw PreconditionError("stencil node " + std::to_string(node) + " leaves the declared x-window [" +
                                std::to_string(xWindow->lo) + ", " + std::to_string(xWindow->hi) + "]");
      }
      if (xExclusiveMin && !(node > *xExclusiveMin)) {
        throw PreconditionError("stencil node " + std::to_string(node) + " is outside the parameter domain");
      }
    }
  }
};

/// Attaches a Gevrey declaration for F(s, .); refused for discontinuous F.
inline void declare_smooth_integrand(Integrand& f, const GevreySpec& g) {
  g.validate();
  if (f.discontinuousInX) {
    throw PreconditionError("integrand '" + f.label + "' is discontinuous in x and cannot be declared smooth");
  }
  f.gevreyF = g;
}

/// F rounded to the nearest integer multiple of epsQ: |F_q - F| <= epsQ / 2.
class QuantizedIntegrand {
 public:
  QuantizedIntegrand(Integrand base, double eps_q) : base_(std::move(base)), eps_q_(eps_q) {
    if (!(eps_q_ > 0) || !std::isfinite(eps_q_)) throw PreconditionError("quantisation step must be positive");
  }

  double operator()(double s, double x) const { return quantize(base_.eval(s, x)); }
  double quantize(double v) const { return std::nearbyint(v / eps_q_) * eps_q_; }

  const Integrand& base() const { return base_; }
  double eps_q() const { return eps_q_; }

 private:
  Integrand base_;
  double eps_q_;
};

// ---------------------------------------------------------------------------
// Black-Scholes

enum class Payoff { call, digital };
enum class GreekParameter { P0, sigma, r };

inline std::string to_string(Payoff p) { return p == Payoff::call ? "call" : "digital"; }
inline std::string to_string(GreekParameter p) {
  switch (p) {
    case GreekParameter::P0: return "P0";
    case GreekParameter::sigma: return "sigma";
    case GreekParameter::r: return "r";
  }
  return "?";
}

struct BlackScholesModel {
  double P0 = 100;
  double sigma = 0.2;
  double r = 0.05;
  double T = 1;
  double K = 100;
  Payoff payoff = Payoff::call;

  void validate() const {
    if (!(P0 > 0) || !(sigma > 0) || !(T > 0) || !(K > 0) || !std::isfinite(r)) {
      throw PreconditionError("Black-Scholes model requires P0, sigma, T, K > 0 and finite r");
    }
  }

  double parameter(GreekParameter p) const {
    switch (p) {
      case GreekParameter::P0: return P0;
      case GreekParameter::sigma: return sigma;
      case GreekParameter::r: return r;
    }
    return 0;
  }

  BlackScholesModel with(GreekParameter p, double x) const {
    BlackScholesModel out = *this;
    switch (p) {
      case GreekParameter::P0: out.P0 = x; break;
      case GreekParameter::sigma: out.sigma = x; break;
      case GreekParameter::r: out.r = x; break;
    }
    return out;
  }
};

/// P0 exp(sigma sqrt(T) s + (r - sigma^2 / 2) T).
inline double bs_terminal_price(const BlackScholesModel& model, double s) {
  return model.P0 * std::exp(model.sigma * std::sqrt(model.T) * s + (model.r - 0.5 * model.sigma * model.sigma) * model.T);
}

inline double payoff_call(double P, double K) { return std::max(P - K, 0.0); }
inline double payoff_digital(double P, double K) { return P >= K ? 1.0 : 0.0; }

inline double apply_payoff(Payoff p, double P, double K) {
  return p == Payoff::call ? payoff_call(P, K) : payoff_digital(P, K);
}

/// Integrand of the present value e^{-rT} payoff(P_T) with x substituted for
/// one model parameter. s_max bounds |s| on the grid; the x-window bounds the
/// parameter and is mandatory for the (unbounded) call payoff.
inline Integrand make_greek_integrand(const BlackScholesModel& model, GreekParameter parameter, double s_max,
                                      std::optional<Interval> x_window = std::nullopt) {
  model.validate();
  if (!(s_max > 0)) throw PreconditionError("grid half-range must be positive");
  if (x_window && !(x_window->lo < x_window->hi)) throw PreconditionError("x-window must satisfy lo < hi");
  if (!x_window && model.payoff == Payoff::call) {
    throw PreconditionError("a call payoff needs a declared x-window to bound F");
  }
  if (!x_window && parameter == GreekParameter::r) {
    throw PreconditionError("parameter r needs a declared x-window to bound the discount factor");
  }
  if (x_window && parameter != GreekParameter::r && !(x_window->lo > 0)) {
    throw PreconditionError("x-window for P0 or sigma must be positive");
  }

  const double sqrt_t = std::sqrt(model.T);
  double max_price = 0;
  double max_discount = std::exp(-model.r * model.T);
  if (x_window) {
    switch (parameter) {
      case GreekParameter::P0:
        max_price = bs_terminal_price(model.with(parameter, x_window->hi), s_max);
        break;
      case GreekParameter::sigma: {
        const double best = std::clamp(s_max / sqrt_t, x_window->lo, x_window->hi);
        max_price = bs_terminal_price(model.with(parameter, best), s_max);
        break;
      }
      case GreekParameter::r:
        max_price = bs_terminal_price(model.with(parameter, x_window->hi), s_max);
        max_discount = std::exp(-x_window->lo * model.T);
        break;
    }
  }
  const double payoff_sup = model.payoff == Payoff::call ? payoff_call(max_price, model.K) : 1.0;

  Integrand f;
  f.label = to_string(model.payoff) + "-" + to_string(parameter);
  f.bound = payoff_sup * std::max(1.0, max_discount);
  f.discontinuousInX = model.payoff == Payoff::digital;
  f.xWindow = x_window;
  if (parameter != GreekParameter::r) f.xExclusiveMin = 0.0;
  f.eval = [model, parameter](double s, double x) {
    const BlackScholesModel m = model.with(parameter, x);
    return std::exp(-m.r * m.T) * apply_payoff(m.payoff, bs_terminal_price(m, s), m.K);
  };
  return f;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Closed-form present value (call, or cash-or-nothing digital paying 1).
inline double bs_price(const BlackScholesModel& m) {
  m.validate();
  const double vol = m.sigma * std::sqrt(m.T);
  const double d1 = (std::log(m.P0 / m.K) + (m.r + 0.5 * m.sigma * m.sigma) * m.T) / vol;
  const double d2 = d1 - vol;
  const double disc = std::exp(-m.r * m.T);
  if (m.payoff == Payoff::call) return m.P0 * normal_cdf(d1) - m.K * disc * normal_cdf(d2);
  return disc * normal_cdf(d2);
}

/// Closed-form Black-Scholes sensitivities: delta, gamma, vega and rho.
inline double analytic_greek(const BlackScholesModel& m, GreekParameter parameter, int order) {
  m.validate();
  const double sqrt_t = std::sqrt(m.T);
  const double vol = m.sigma * sqrt_t;
  const double d1 = (std::log(m.P0 / m.K) + (m.r + 0.5 * m.sigma * m.sigma) * m.T) / vol;
  const double d2 = d1 - vol;
  const double disc = std::exp(-m.r * m.T);
  const bool call = m.payoff == Payoff::call;

  if (parameter == GreekParameter::P0 && order == 1) {
    return call ? normal_cdf(d1) : disc * normal_pdf(d2) / (m.P0 * vol);
  }
  if (parameter == GreekParameter::P0 && order == 2) {
    return call ? normal_pdf(d1) / (m.P0 * vol) : -disc * normal_pdf(d2) * d1 / (m.P0 * m.P0 * vol * vol);
  }
  if (parameter == GreekParameter::sigma && order == 1) {
    return call ? m.P0 * normal_pdf(d1) * sqrt_t : -disc * normal_pdf(d2) * d1 / m.sigma;
  }
  if (parameter == GreekParameter::r && order == 1) {
    return call ? m.K * m.T * disc * normal_cdf(d2)
                : -m.T * disc * normal_cdf(d2) + disc * normal_pdf(d2) * sqrt_t / m.sigma;
  }
  throw PreconditionError("no closed-form Greek for parameter " + to_string(parameter) + " and order " +
                          std::to_string(order));
}

namespace detail {

// d^i/dz^i Phi(z) for i = 0..k.
inline std::vector<double> normal_cdf_derivatives(double z, int k) {
  std::vector<double> out(static_cast<std::size_t>(k) + 1);
  out[0] = normal_cdf(z);
  // Probabilists' Hermite recursion: Phi^(i) = (-1)^(i-1) He_{i-1} phi.
  double he_prev = 0.0;
  double he = 1.0;
  const double pdf = normal_pdf(z);
  for (int i = 1; i <= k; ++i) {
    out[i] = ((i - 1) % 2 == 0 ? 1.0 : -1.0) * he * pdf;
    const double next = z * he - (i - 1) * he_prev;
    he_prev = he;
    he = next;
  }
  return out;
}

}  // namespace detail

/// d^k/dP0^k of the closed-form price for k = 0..k_max, at spot S.
///
/// Differentiates in u = ln S (where the price is a combination of Phi(d(u)))
/// and maps back with signed Stirling numbers of the first kind.
inline std::vector<double> spot_derivatives(const BlackScholesModel& model, double S, int k_max) {
  model.validate();
  const double vol = model.sigma * std::sqrt(model.T);
  const double disc = std::exp(-model.r * model.T);
  const double d2 = (std::log(S / model.K) + (model.r - 0.5 * model.sigma * model.sigma) * model.T) / vol;
  const double d1 = d2 + vol;
  const auto phi1 = detail::normal_cdf_derivatives(d1, k_max);
  const auto phi2 = detail::normal_cdf_derivatives(d2, k_max);

  // g[j] = d^j/du^j of the price as a function of u.
  std::vector<double> g(static_cast<std::size_t>(k_max) + 1);
  for (int j = 0; j <= k_max; ++j) {
    const double digital_part = disc * phi2[j] / std::pow(vol, j);
    if (model.payoff == Payoff::digital) {
      g[j] = digital_part;
      continue;
    }
    double binom = 1.0;
    double spot_part = 0.0;
    for (int i = 0; i <= j; ++i) {
      spot_part += binom * S * phi1[i] / std::pow(vol, i);
      binom = binom * (j - i) / (i + 1);
    }
    g[j] = spot_part - model.K * digital_part;
  }

  std::vector<double> out(static_cast<std::size_t>(k_max) + 1);
  out[0] = g[0];
  std::vector<double> stirling{0.0, 1.0};  // s(1, j), j = 0..1
  for (int k = 1; k <= k_max; ++k) {
    if (k > 1) {
      std::vector<double> next(static_cast<std::size_t>(k) + 1, 0.0);
      for (int j = 1; j <= k; ++j) {
        next[j] = stirling[j - 1] - (k - 1) * (j < static_cast<int>(stirling.size()) ? stirling[j] : 0.0);
      }
      stirling = std::move(next);
    }
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) acc += stirling[j] * g[j];
    out[k] = acc / std::pow(S, k);
  }
  return out;
}

/// Outcome of fitting Gevrey constants to sampled derivative bounds.
struct GevreyCalibration {
  GevreySpec spec;
  std::vector<double> derivativeBounds;  ///< sup |V^(k)| over the window, k = 0..k_max
  double headroom = 2.0;
};

/// Fits (A, c) with sigma = 0 to the first k_max spot derivatives of the
/// closed-form price over the window, then multiplies A by the headroom.
inline GevreyCalibration calibrate_value_gevrey(const BlackScholesModel& model, Interval window, int k_max = 8,
                                                double headroom = 2.0, int samples = 401) {
  model.validate();
  if (!(window.lo > 0) || !(window.lo < window.hi)) throw PreconditionError("calibration window must be 0 < lo < hi");
  if (k_max < 1 || samples < 2) throw PreconditionError("calibration needs k_max >= 1 and >= 2 samples");
  GevreyCalibration cal;
  cal.headroom = headroom;
  cal.derivativeBounds.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int i = 0; i < samples; ++i) {
    const double S = window.lo + (window.hi - window.lo) * i / (samples - 1);
    const auto d = spot_derivatives(model, S, k_max);
    for (int k = 0; k <= k_max; ++k) cal.derivativeBounds[k] = std::max(cal.derivativeBounds[k], std::abs(d[k]));
  }
  const double a0 = cal.derivativeBounds[0];
  if (!(a0 > 0)) throw PreconditionError("price vanishes on the calibration window");
  double c = 0.0;
  for (int k = 1; k <= k_max; ++k) c = std::max(c, std::pow(cal.derivativeBounds[k] / a0, 1.0 / k));
  cal.spec = GevreySpec{headroom * a0, c, 0.0};
  return cal;
}

/// Gevrey constants for the call integrand F(s, .) in the spot: |F| <= B and
/// |dF/dP0| <= e^{-rT} P_T(s_max) / P0, higher derivatives vanish off the kink.
inline GevreyCalibration calibrate_call_integrand_gevrey(const BlackScholesModel& model, const Integrand& f,
                                                         double s_max, double headroom = 2.0) {
  model.validate();
  if (model.payoff != Payoff::call) throw PreconditionError("integrand calibration applies to the call payoff only");
  BlackScholesModel unit = model;
  unit.P0 = 1.0;
  const double slope = std::exp(-model.r * model.T) * bs_terminal_price(unit, s_max);
  GevreyCalibration cal;
  cal.headroom = headroom;
  cal.derivativeBounds = {f.bound, slope};
  cal.spec = GevreySpec{headroom * f.bound, slope / f.bound, 0.0};
  return cal;
}

// ---------------------------------------------------------------------------
// Sine test model: F(s, x) = A sin(c x + s), in G(A, c, 0) for every s.

inline Integrand make_sine_integrand(double amplitude, double frequency) {
  if (!(amplitude > 0) || !(frequency > 0)) throw PreconditionError("sine model needs A > 0 and c > 0");
  Integrand f;
  f.label = "sine";
  f.bound = amplitude;
  f.eval = [amplitude, frequency](double s, double x) { return amplitude * std::sin(frequency * x + s); };
  f.gevreyF = GevreySpec{amplitude, frequency, 0.0};
  return f;
}

/// Exact V^(m)(x) of the sine model over a discrete distribution.
inline double sine_value_derivative(const DiscreteDistribution& dist, double amplitude, double frequency, int m,
                                    double x) {
  const double shift = m * std::numbers::pi / 2.0;
  return amplitude * std::pow(frequency, m) *
         expectation(dist, [&](double s) { return std::sin(frequency * x + s + shift); });
}

}  // namespace qdiff
