#include <gtest/gtest.h>

#include "qdiff/audit.hpp"

using namespace qdiff;

namespace {

AuditGrid small_grid() {
  AuditGrid g;
  g.maxTwoN = 8;
  g.xs = {-0.4, 0.7};
  g.hs = {0.5, 0.125};
  g.orders = {1, 2};
  g.epsList = {1e-3, 1e-7};
  g.scales = {1.0};
  g.rates = {0.5, 2.0};
  return g;
}

}  // namespace

TEST(Audit, EveryLemmaPassesOnASmallGrid) {
  for (const auto& rep : audit_bounds(AuditSelector::all, small_grid())) {
    EXPECT_TRUE(rep.pass()) << rep.lemma << ": " << (rep.violations.empty() ? "" : rep.violations.front());
    EXPECT_GT(rep.checks, 0) << rep.lemma;
    EXPECT_LE(rep.worstMargin, 1.0 + 1e-9) << rep.lemma;
  }
}

TEST(Audit, CoefficientSumGridFromTheDocs) {
  AuditGrid g;
  g.maxTwoN = 12;
  const auto rep = audit_lemma2(g);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.checks, 42);  // pairs 1 <= m <= 2n <= 12
}

TEST(Audit, SelectorPicksOneAudit) {
  const auto reps = audit_bounds(AuditSelector::lemma5, small_grid());
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0].lemma, "lemma5");
  EXPECT_EQ(parse_audit_selector("lemma6"), AuditSelector::lemma6);
  EXPECT_THROW(parse_audit_selector("lemma4"), PreconditionError);
}

TEST(Audit, EmptyGridIsRejected) {
  AuditGrid g;
  g.xs.clear();
  EXPECT_THROW(audit_bounds(AuditSelector::lemma1, g), PreconditionError);
  AuditGrid h;
  h.exponents.clear();
  EXPECT_THROW(audit_lemma5(h), PreconditionError);
}

TEST(Audit, ViolationsAreRecorded) {
  AuditReport rep{"probe", "-", {}};
  detail::record(rep, 2.0L, 1.0L, "here");
  detail::record(rep, 0.5L, 1.0L, "there");
  EXPECT_FALSE(rep.pass());
  EXPECT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.checks, 2);
  EXPECT_DOUBLE_EQ(rep.worstMargin, 2.0);
}
