#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "qdiff/stencil.hpp"

using namespace qdiff;

namespace {

Rational r(long long num, long long den = 1) { return Rational(num, den); }

}  // namespace

TEST(Stencil, FirstDerivativeThreePoint) {
  const Stencil st = compute_stencil({1, 1});
  EXPECT_EQ(st.coeff(-1), r(-1, 2));
  EXPECT_EQ(st.coeff(0), r(0));
  EXPECT_EQ(st.coeff(1), r(1, 2));
}

TEST(Stencil, TextbookFivePointWeights) {
  const Stencil d1 = compute_stencil({1, 2});
  EXPECT_EQ(d1.coeff(-2), r(1, 12));
  EXPECT_EQ(d1.coeff(-1), r(-2, 3));
  EXPECT_EQ(d1.coeff(1), r(2, 3));
  EXPECT_EQ(d1.coeff(2), r(-1, 12));

  const Stencil d2 = compute_stencil({2, 2});
  EXPECT_EQ(d2.coeff(-2), r(-1, 12));
  EXPECT_EQ(d2.coeff(-1), r(4, 3));
  EXPECT_EQ(d2.coeff(0), r(-5, 2));

  const Stencil s2 = compute_stencil({2, 1});
  EXPECT_EQ(s2.coeff(-1), r(1));
  EXPECT_EQ(s2.coeff(0), r(-2));
  EXPECT_EQ(s2.coeff(1), r(1));
}

TEST(Stencil, MatchesVandermondeSolve) {
  for (int n = 1; n <= 6; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      EXPECT_EQ(compute_stencil({m, n}), vandermonde_stencil({m, n})) << "m=" << m << " n=" << n;
    }
  }
}

TEST(Stencil, MomentConditionsHoldExactly) {
  for (int n = 1; n <= 5; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      const Stencil st = compute_stencil({m, n});
      for (int k = 0; k <= 2 * n; ++k) {
        Rational moment = 0;
        for (int j = -n; j <= n; ++j) {
          BigInt p = 1;
          for (int e = 0; e < k; ++e) p *= j;
          moment += st.coeff(j) * p;
        }
        BigInt mf = 1;
        for (int i = 2; i <= m; ++i) mf *= i;
        EXPECT_EQ(moment, k == m ? Rational(mf) : Rational(0)) << "m=" << m << " n=" << n << " k=" << k;
      }
    }
  }
}

TEST(Stencil, ParityAndZeroCentre) {
  for (int n = 1; n <= 6; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      const Stencil st = compute_stencil({m, n});
      for (int j = 1; j <= n; ++j) {
        EXPECT_EQ(st.coeff(-j), m % 2 == 0 ? st.coeff(j) : Rational(-st.coeff(j)));
      }
      if (m % 2 == 1) {
        EXPECT_EQ(st.coeff(0), r(0));
      }
    }
  }
}

TEST(Stencil, NonzeroOffsetsAtSmallestWidth) {
  // Odd m at n = ceil(m/2) skips the centre: m + 1 evaluations.
  for (int m = 1; m <= 9; m += 2) {
    EXPECT_EQ(compute_stencil({m, (m + 1) / 2}).nonzero_offsets().size(), static_cast<std::size_t>(m + 1));
  }
  EXPECT_EQ(compute_stencil({2, 1}).nonzero_offsets().size(), 3u);
}

TEST(Stencil, DifferentiatesPolynomialsExactly) {
  // f(y) = y^k with k <= 2n: the stencil is exact up to rounding.
  for (int n = 1; n <= 4; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      const Stencil st = compute_stencil({m, n});
      for (int k = 0; k <= 2 * n; ++k) {
        const long double x = 0.37L;
        const long double h = 0.25L;
        const long double approx = apply_stencil<long double>(st, [k](long double y) { return std::pow(y, k); }, x, h);
        long double exact = 0;
        if (k >= m) {
          long double fall = 1;
          for (int i = 0; i < m; ++i) fall *= (k - i);
          exact = fall * std::pow(x, k - m);
        }
        EXPECT_NEAR(static_cast<double>(approx), static_cast<double>(exact), 1e-8) << m << " " << n << " " << k;
      }
    }
  }
}

TEST(Stencil, SampleMapOverloadNeedsEveryNonzeroOffset) {
  const Stencil st = compute_stencil({1, 1});
  std::map<int, double> samples{{-1, 1.0}, {1, 3.0}};
  EXPECT_DOUBLE_EQ(apply_stencil(st, samples, 0.5), 2.0);
  samples.erase(1);
  EXPECT_THROW(apply_stencil(st, samples, 0.5), PreconditionError);
  EXPECT_THROW(apply_stencil(st, std::map<int, double>{{-1, 1.0}, {1, 3.0}}, 0.0), PreconditionError);
}

TEST(Stencil, RejectsInvalidKeys) {
  EXPECT_THROW(compute_stencil({0, 1}), PreconditionError);
  EXPECT_THROW(compute_stencil({3, 1}), PreconditionError);
  EXPECT_THROW(compute_stencil({1, 0}), PreconditionError);
  EXPECT_THROW(compute_stencil({1, 10}, 8), PreconditionError);
  EXPECT_THROW(compute_stencil({1, 1}).coeff(2), PreconditionError);
}

TEST(Stencil, AbsSumWithinLogBound) {
  for (int n = 1; n <= 12; ++n) {
    for (int m = 1; m <= std::min(2 * n, 6); ++m) {
      const Stencil st = compute_stencil({m, n});
      EXPECT_LE(static_cast<double>(st.abs_sum_approx()), abs_sum_bound({m, n})) << m << " " << n;
    }
  }
  EXPECT_EQ(compute_stencil({1, 1}).abs_sum(), r(1));
  EXPECT_EQ(compute_stencil({2, 1}).abs_sum(), r(4));
}

TEST(Stencil, ResidualBoundValue) {
  EXPECT_NEAR(residual_bound(1.0, {1, 1}), std::pow(std::numbers::e / 2.0, 2), 1e-15);
  EXPECT_NEAR(residual_bound(2.0, {2, 2}), 2.0 * 2.0 * std::pow(std::numbers::e, 4), 1e-12);
  EXPECT_EQ(residual_bound(0.0, {1, 1}), 0.0);
  EXPECT_THROW(residual_bound(-1.0, {1, 1}), PreconditionError);
}

TEST(Stencil, ConvergenceOrderOnExp) {
  // Halving h divides the error by 2^order, where order is 2n-m+1 rounded up to
  // even: symmetric stencils cancel the odd error terms.
  for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 2}, {3, 2}}) {
    const Stencil st = compute_stencil({m, n});
    auto err = [&](long double h) {
      const long double approx =
          apply_stencil<long double>(st, [](long double y) { return std::exp(y); }, 0.0L, h);
      return std::abs(approx - 1.0L);
    };
    const double slope = static_cast<double>(std::log2(err(0.1L) / err(0.05L)));
    const int order = 2 * n - m + 1 + (2 * n - m + 1) % 2;
    EXPECT_NEAR(slope, order, 0.25) << "m=" << m << " n=" << n;
  }
}
