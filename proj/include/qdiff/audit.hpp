#pragma once

// Numeric audits of the inequalities behind the stencil and schedule bounds.
// Each audit walks a grid and records every point where an inequality fails;
// worstMargin is the largest lhs/rhs ratio seen (<= 1 on a pass).

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/schedule.hpp"
#include "qdiff/stencil.hpp"

namespace qdiff {

enum class AuditSelector { lemma1, lemma2, lemma3, lemma5, lemma6, all };

inline std::string to_string(AuditSelector s) {
  switch (s) {
    case AuditSelector::lemma1: return "lemma1";
    case AuditSelector::lemma2: return "lemma2";
    case AuditSelector::lemma3: return "lemma3";
    case AuditSelector::lemma5: return "lemma5";
    case AuditSelector::lemma6: return "lemma6";
    case AuditSelector::all: return "all";
  }
  return "?";
}

inline AuditSelector parse_audit_selector(const std::string& s) {
  for (auto sel : {AuditSelector::lemma1, AuditSelector::lemma2, AuditSelector::lemma3, AuditSelector::lemma5,
                   AuditSelector::lemma6, AuditSelector::all}) {
    if (to_string(sel) == s) return sel;
  }
  throw PreconditionError("unknown audit selector '" + s + "'");
}

struct AuditGrid {
  int maxTwoN = 12;                                   ///< keys with 1 <= m <= 2n <= maxTwoN
  std::vector<double> xs{-1.3, -0.4, 0.0, 0.7, 2.1};
  std::vector<double> hs{0.5, 0.25, 0.125, 0.0625};
  std::vector<int> orders{1, 2, 3};                   ///< m for the schedule audit
  std::vector<double> epsList{1e-2, 1e-4, 1e-6, 1e-8};
  std::vector<double> scales{0.5, 1.0, 3.0};          ///< A values
  std::vector<double> rates{0.5, 1.0, 2.0};           ///< c values
  std::vector<double> exponents{0.5, 1.0, 2.0, std::numbers::e, 5.0};  ///< a values

  void validate() const {
    if (maxTwoN < 2 || xs.empty() || hs.empty() || orders.empty() || epsList.empty() || scales.empty() ||
        rates.empty() || exponents.empty()) {
      throw PreconditionError("audit grid must be nonempty in every dimension");
    }
  }

  std::string describe() const {
    std::ostringstream out;
    out << "2n<=" << maxTwoN << " x:" << xs.size() << " h:" << hs.size() << " m:" << orders.size()
        << " eps:" << epsList.size() << " A:" << scales.size() << " c:" << rates.size() << " a:" << exponents.size();
    return out.str();
  }
};

struct AuditReport {
  std::string lemma;
  std::string grid;
  std::vector<std::string> violations;
  double worstMargin = 0;
  long checks = 0;

  bool pass() const { return violations.empty(); }
};

namespace detail {

inline void record(AuditReport& rep, long double lhs, long double rhs, const std::string& where) {
  ++rep.checks;
  const long double ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? INFINITY : 0);
  rep.worstMargin = std::max(rep.worstMargin, static_cast<double>(ratio));
  if (!(lhs <= rhs)) {
    std::ostringstream msg;
    msg.precision(10);
    msg << where << ": " << static_cast<double>(lhs) << " > " << static_cast<double>(rhs);
    rep.violations.push_back(msg.str());
  }
}

inline long double sin_derivative(int k, long double x) {
  return std::sin(x + k * std::numbers::pi_v<long double> / 2.0L);
}

}  // namespace detail

/// |sin^(m)(x) - D_{n,m,h} sin(x)| <= residual_bound(1, key) h^(2n-m+1).
inline AuditReport audit_lemma1(const AuditGrid& grid) {
  grid.validate();
  AuditReport rep{"lemma1", grid.describe(), {}};
  for (int n = 1; 2 * n <= grid.maxTwoN; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      const Stencil st = compute_stencil({m, n});
      const double c = residual_bound(1.0, {m, n});
      for (double h : grid.hs) {
        const long double bound = c * std::pow(static_cast<long double>(h), 2 * n - m + 1);
        for (double x : grid.xs) {
          const long double approx = apply_stencil<long double>(
              st, [](long double y) { return std::sin(y); }, static_cast<long double>(x), static_cast<long double>(h));
          const long double err = std::abs(detail::sin_derivative(m, x) - approx);
          std::ostringstream at;
          at << "m=" << m << " n=" << n << " h=" << h << " x=" << x;
          detail::record(rep, err, bound, at.str());
        }
      }
    }
  }
  return rep;
}

/// D^(m)_n <= 2m [2 (1 + ln n)]^m.
inline AuditReport audit_lemma2(const AuditGrid& grid) {
  grid.validate();
  AuditReport rep{"lemma2", grid.describe(), {}};
  for (int n = 1; 2 * n <= grid.maxTwoN; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      const Stencil st = compute_stencil({m, n});
      std::ostringstream at;
      at << "m=" << m << " n=" << n;
      detail::record(rep, st.abs_sum_approx(), abs_sum_bound({m, n}), at.str());
    }
  }
  return rep;
}

/// Schedule audit on A sin(c y) and on A exp(c y) restricted to a window:
/// |f^(m)(x) - D f(x)| <= eps at (n_th, h_th), at a larger n and at a smaller
/// h. The truncation condition is also checked at (n_th, h_th) and at
/// (ceil(m/2), h_min), where h_min is too small for a floating-point check.
inline AuditReport audit_lemma3(const AuditGrid& grid) {
  grid.validate();
  AuditReport rep{"lemma3", grid.describe(), {}};
  for (int m : grid.orders) {
    for (double eps : grid.epsList) {
      for (double A : grid.scales) {
        for (double c : grid.rates) {
          for (int family = 0; family < 2; ++family) {
            for (double x : grid.xs) {
              // exp(c y) on |y - x| <= R is in G(A e^{c (x + R)}, c, 0); R is
              // grown until it covers the widest stencil tested.
              double reach = 10.0 / c;
              GevreySpec g{A, c, 0.0};
              int nt = 0;
              double ht = 0;
              bool admissible = true;
              for (int iter = 0; iter < 32; ++iter) {
                if (family == 1) g.A = A * std::exp(c * (x + reach));
                if (!check_eps_condition(g, m, eps_prime(g, m, eps))) {
                  admissible = false;
                  break;
                }
                nt = n_th(g, m, eps);
                ht = h_th(g, m, nt);
                if (family == 0 || (nt + 1) * ht <= reach) break;
                reach = 2.0 * (nt + 1) * ht;
              }
              if (!admissible) continue;
              const long double lc = c;
              const long double la = A;
              const long double exact =
                  family == 0 ? la * std::pow(lc, m) * detail::sin_derivative(m, lc * x)
                              : la * std::pow(lc, m) * std::exp(lc * x);
              const std::string name = family == 0 ? "sin" : "exp";
              for (const auto& [n, h] : std::vector<std::pair<int, double>>{{nt, ht}, {nt + 1, ht}, {nt, 0.5 * ht}}) {
                const Stencil st = compute_stencil({m, n});
                const long double approx = apply_stencil<long double>(
                    st,
                    [&](long double y) {
                      return family == 0 ? la * std::sin(lc * y) : la * std::exp(lc * y);
                    },
                    static_cast<long double>(x), static_cast<long double>(h));
                std::ostringstream at;
                at << name << " A=" << A << " c=" << c << " m=" << m << " eps=" << eps << " x=" << x << " n=" << n
                   << " h=" << h;
                detail::record(rep, std::abs(exact - approx), eps, at.str());
              }
              // The threshold pair and the minimal pair both satisfy the truncation condition.
              for (const auto& [n, h] :
                   std::vector<std::pair<int, double>>{{nt, ht}, {half_width_min(m), h_min(g, m, eps)}}) {
                ++rep.checks;
                if (!check_h_condition(g, m, n, h, eps)) {
                  std::ostringstream at;
                  at << name << " truncation condition fails at n=" << n << " h=" << h << " m=" << m << " eps=" << eps;
                  rep.violations.push_back(at.str());
                }
              }
            }
          }
        }
      }
    }
  }
  return rep;
}

/// x >= a ln x for x >= a^2.
inline AuditReport audit_lemma5(const AuditGrid& grid) {
  grid.validate();
  AuditReport rep{"lemma5", grid.describe(), {}};
  for (double a : grid.exponents) {
    const double x0 = std::max(a * a, 1e-9);
    for (int k = 0; k <= 400; ++k) {
      const double x = k <= 200 ? x0 * (1.0 + 0.01 * k) : x0 * std::pow(1.05, k - 200) * 3.0;
      std::ostringstream at;
      at << "a=" << a << " x=" << x;
      detail::record(rep, a * std::log(x), x, at.str());
    }
  }
  return rep;
}

/// x^a / 2^x <= eps for x >= x_tilde(a, eps), over (a, eps) admissible pairs.
inline AuditReport audit_lemma6(const AuditGrid& grid) {
  grid.validate();
  AuditReport rep{"lemma6", grid.describe(), {}};
  std::vector<double> as{0.0};
  as.insert(as.end(), grid.exponents.begin(), grid.exponents.end());
  for (double a : as) {
    for (double eps : grid.epsList) {
      if (eps > eps_prime_limit(a)) continue;
      const double x0 = x_tilde(a, eps);
      for (int k = 0; k <= 300; ++k) {
        const double x = x0 + 0.1 * k + (k > 200 ? std::pow(1.1, k - 200) : 0.0);
        // log2 of both sides avoids underflow of 2^-x.
        const long double lhs = (a == 0 ? 0.0L : a * std::log2(static_cast<long double>(x))) - x;
        std::ostringstream at;
        at << "a=" << a << " eps=" << eps << " x=" << x;
        ++rep.checks;
        const long double rhs = std::log2(static_cast<long double>(eps));
        rep.worstMargin = std::max(rep.worstMargin, static_cast<double>(std::exp2(lhs - rhs)));
        if (!(lhs <= rhs + kScheduleRelTol)) rep.violations.push_back(at.str());
      }
    }
  }
  return rep;
}

inline std::vector<AuditReport> audit_bounds(AuditSelector sel, const AuditGrid& grid = {}) {
  grid.validate();
  std::vector<AuditReport> out;
  if (sel == AuditSelector::lemma1 || sel == AuditSelector::all) out.push_back(audit_lemma1(grid));
  if (sel == AuditSelector::lemma2 || sel == AuditSelector::all) out.push_back(audit_lemma2(grid));
  if (sel == AuditSelector::lemma3 || sel == AuditSelector::all) out.push_back(audit_lemma3(grid));
  if (sel == AuditSelector::lemma5 || sel == AuditSelector::all) out.push_back(audit_lemma5(grid));
  if (sel == AuditSelector::lemma6 || sel == AuditSelector::all) out.push_back(audit_lemma6(grid));
  return out;
}

}  // namespace qdiff
