#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qdiff/distribution.hpp"

using namespace qdiff;

TEST(Distribution, NormalGridMoments) {
  const auto d = discretize_standard_normal(14, 6.0);
  EXPECT_EQ(d.size(), 1u << 14);
  EXPECT_NEAR(expectation(d, [](double) { return 1.0; }), 1.0, 1e-14);
  EXPECT_NEAR(expectation(d, [](double s) { return s; }), 0.0, 1e-14);
  EXPECT_NEAR(expectation(d, [](double s) { return s * s; }), 1.0, 1e-6);
  EXPECT_NEAR(expectation(d, [](double s) { return s * s * s * s; }), 3.0, 1e-5);
  // E cos(s) = e^{-1/2} for a standard normal.
  EXPECT_NEAR(expectation(d, [](double s) { return std::cos(s); }), std::exp(-0.5), 1e-8);
}

TEST(Distribution, GridIsSymmetricMidpoints) {
  const auto d = discretize_uniform(3, 1.0);
  ASSERT_EQ(d.size(), 8u);
  EXPECT_DOUBLE_EQ(d.points().front(), -0.875);
  EXPECT_DOUBLE_EQ(d.points().back(), 0.875);
  for (double p : d.probs()) EXPECT_DOUBLE_EQ(p, 0.125);
  EXPECT_DOUBLE_EQ(d.max_abs_point(), 0.875);
}

TEST(Distribution, RejectsBadInput) {
  EXPECT_THROW(DiscreteDistribution({0.0, 1.0}, {0.5, 0.4}), PreconditionError);
  EXPECT_THROW(DiscreteDistribution({1.0, 0.0}, {0.5, 0.5}), PreconditionError);
  EXPECT_THROW(DiscreteDistribution({0.0, 1.0}, {1.5, -0.5}), PreconditionError);
  EXPECT_THROW(DiscreteDistribution({}, {}), PreconditionError);
  EXPECT_THROW(discretize_standard_normal(0, 6.0), PreconditionError);
  EXPECT_THROW(discretize_standard_normal(4, -1.0), PreconditionError);
  const auto d = discretize_uniform(2, 1.0);
  EXPECT_THROW(expectation(d, [](double) { return NAN; }), PreconditionError);
}

TEST(Distribution, LoadsCsv) {
  const auto path = std::filesystem::temp_directory_path() / "qdiff_dist_test.csv";
  {
    std::ofstream out(path);
    out << "# point,prob\n-1,0.25\n\n0,0.5\n1,0.25\n";
  }
  const auto d = load_distribution_csv(path.string());
  EXPECT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(expectation(d, [](double s) { return s * s; }), 0.5);
  {
    std::ofstream out(path);
    out << "-1;0.5\n";
  }
  EXPECT_THROW(load_distribution_csv(path.string()), PreconditionError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_distribution_csv(path.string()), PreconditionError);
}

TEST(Distribution, CompensatedSumRecoversSmallTerms) {
  CompensatedSum acc;
  acc.add(1.0);
  for (int i = 0; i < 1000; ++i) acc.add(1e-17);
  acc.add(-1.0);
  EXPECT_NEAR(acc.value(), 1e-14, 1e-20);
}
