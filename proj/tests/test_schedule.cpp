#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qdiff/schedule.hpp"

using namespace qdiff;

TEST(Schedule, EpsPrimeClosedForm) {
  const GevreySpec g{2.0, 0.5, 0.0};
  const double e = std::numbers::e;
  EXPECT_NEAR(eps_prime(g, 1, 1e-3), e * 1e-3 / (2.0 * (e * 0.5) * 2.0), 1e-18);
  EXPECT_NEAR(eps_prime(g, 2, 1e-3), e * 1e-3 / (2.0 * std::pow(e * 0.5 * 2, 2) * 2.0), 1e-18);
}

TEST(Schedule, ThresholdStep) {
  const GevreySpec smooth{1.0, 2.0, 0.0};
  EXPECT_NEAR(h_th(smooth, 1, 5), 1.0 / (std::numbers::e * 2.0), 1e-15);
  const GevreySpec rough{1.0, 1.0, 1.5};
  EXPECT_NEAR(h_th(rough, 2, 3), 1.0 / (std::numbers::e * 2.0 * std::pow(7.0, 1.5)), 1e-15);
  // Negative sigma behaves like sigma = 0.
  EXPECT_DOUBLE_EQ(h_th(GevreySpec{1.0, 1.0, -1.0}, 1, 4), h_th(GevreySpec{1.0, 1.0, 0.0}, 1, 4));
  EXPECT_THROW(h_th(smooth, 3, 1), PreconditionError);
}

TEST(Schedule, ThresholdWidthGrowsLogarithmically) {
  const GevreySpec g{1.0, 1.0, 0.0};
  int prev = 0;
  for (double eps = 1e-2; eps >= 1e-12; eps /= 10) {
    const int n = n_th(g, 1, eps);
    EXPECT_GE(n, prev);
    EXPECT_GE(n, half_width_min(1));
    prev = n;
  }
  // About half a unit of n per bit of eps.
  EXPECT_NEAR(n_th(g, 1, 1e-12) - n_th(g, 1, 1e-6), 0.5 * 6 * std::log2(10.0), 2.0);
}

TEST(Schedule, BothPairsSatisfyTruncationCondition) {
  for (double sigma : {-0.5, 0.0, 0.5, 1.0}) {
    for (int m = 1; m <= 4; ++m) {
      for (double eps : {1e-3, 1e-6, 1e-9}) {
        const GevreySpec g{1.5, 0.7, sigma};
        const Schedule s = make_schedule(g, m, eps);
        if (!s.nTh) {
          // Only rough classes can leave eps' outside the admissible range.
          EXPECT_GT(sigma, 0.0);
          EXPECT_FALSE(s.thresholdDiagnostic.empty());
          continue;
        }
        EXPECT_TRUE(check_h_condition(g, m, *s.nTh, *s.hTh, eps));
        EXPECT_TRUE(check_h_condition(g, m, half_width_min(m), s.hMin, eps));
        // h_min saturates the condition.
        EXPECT_NEAR(truncation_bound(g, m, half_width_min(m), s.hMin) / eps, 1.0, 1e-9);
        EXPECT_FALSE(check_h_condition(g, m, half_width_min(m), s.hMin * 1.01, eps));
      }
    }
  }
}

TEST(Schedule, ChooseReturnsRequestedPair) {
  const Schedule s = make_schedule(GevreySpec{1.0, 1.0, 0.0}, 2, 1e-4);
  EXPECT_EQ(s.choose(ScheduleMode::minimal), std::make_pair(1, s.hMin));
  EXPECT_EQ(s.choose(ScheduleMode::threshold), std::make_pair(*s.nTh, *s.hTh));
}

TEST(Schedule, ThresholdUnavailableForLooseEps) {
  // Large sigma makes the admissible eps' bound tight; a loose eps fails it.
  const GevreySpec g{1e-3, 1e-3, 3.0};
  const Schedule s = make_schedule(g, 2, 10.0);
  EXPECT_FALSE(s.nTh.has_value());
  EXPECT_FALSE(s.thresholdDiagnostic.empty());
  EXPECT_THROW(s.choose(ScheduleMode::threshold), PreconditionError);
  EXPECT_NO_THROW(s.choose(ScheduleMode::minimal));
}

TEST(Schedule, EpsTildeAndQubits) {
  const Stencil st = compute_stencil({2, 1});  // D = 4
  EXPECT_NEAR(eps_tilde(st, 0.5, 1e-3), 0.25 * 1e-3 / 4.0, 1e-18);
  EXPECT_EQ(qubit_estimate(std::ldexp(1.0, -10), 1.0), 10);
  EXPECT_EQ(qubit_estimate(std::ldexp(1.0, -10), 1.0, 2.0), 100);
  EXPECT_EQ(qubit_estimate(3.0, 2.0), 0);
  EXPECT_THROW(qubit_estimate(0.0, 1.0), PreconditionError);
}

TEST(Schedule, XTilde) {
  EXPECT_NEAR(x_tilde(0.0, 1.0 / 1024), 10.0, 1e-12);
  const double a = 2.0;
  const double eps = 1e-6;
  const double x = x_tilde(a, eps);
  EXPECT_LE(a * std::log2(x) - x, std::log2(eps));
  EXPECT_THROW(x_tilde(-1.0, 1e-3), PreconditionError);
}

TEST(Schedule, GevreyBoundsAndValidation) {
  EXPECT_NEAR(gevrey_deriv_bound(GevreySpec{2.0, 3.0, 1.0}, 3), 2.0 * 27.0 * 6.0, 1e-9);
  EXPECT_THROW(gevrey_deriv_bound(GevreySpec{1.0, 1e10, 2.0}, 200), OutOfRangeError);
  EXPECT_THROW(GevreySpec({0.0, 1.0, 0.0}).validate(), PreconditionError);
  EXPECT_THROW(GevreySpec({1.0, -1.0, 0.0}).validate(), PreconditionError);
  EXPECT_THROW(make_schedule(GevreySpec{1.0, 1.0, 0.0}, 0, 1e-3), PreconditionError);
  EXPECT_THROW(make_schedule(GevreySpec{1.0, 1.0, 0.0}, 1, 0.0), PreconditionError);
}
