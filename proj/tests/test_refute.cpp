#include <cmath>

#include <gtest/gtest.h>

#include "causalaid/refute.hpp"
#include "causalaid/scm.hpp"
#include "support.hpp"

namespace ca = causalaid;
using ca::testing::frame_from;

namespace {

ca::StudyFrame confounded(std::size_t n, std::uint64_t seed) {
  return frame_from(ca::sample(ca::benchmark("confounded-linear"), n, seed), "T", "Y", {"X1", "X2", "X3"});
}

ca::EstimatorSpec spec_for(ca::Method method) {
  ca::EstimatorSpec spec;
  spec.method = method;
  spec.base.forest.n_trees = 30;
  return spec;
}

}  // namespace

TEST(Refute, VerdictRule) {
  EXPECT_EQ(ca::verdict_for(0.049999), ca::Verdict::Fail);
  EXPECT_EQ(ca::verdict_for(0.05), ca::Verdict::Pass);
  EXPECT_EQ(ca::verdict_for(1.0), ca::Verdict::Pass);
  EXPECT_EQ(ca::to_string(ca::RefutationTest::RandomCommonCause), "RCC");
}

TEST(Refute, PlaceboOnConstantOutcome) {
  auto frame = confounded(200, 1).with_outcome(Eigen::VectorXd::Constant(200, 0.4));
  for (auto method : {ca::Method::LR, ca::Method::IPSW, ca::Method::Matching}) {
    auto r = ca::refute_placebo(spec_for(method), frame, {20, 5, 0.2});
    // Estimates are rounding noise around 0, so only the verdict is meaningful.
    EXPECT_NEAR(r.refuted_effect, 0.0, 1e-12);
    EXPECT_EQ(r.verdict, ca::Verdict::Pass);
    EXPECT_EQ(r.trials, 20u);
  }
}

TEST(Refute, PlaceboNearZeroOnWellSpecifiedStudy) {
  auto frame = confounded(1000, 2);
  auto r = ca::refute_placebo(spec_for(ca::Method::LR), frame, {100, 7, 0.2});
  EXPECT_LT(std::abs(r.refuted_effect), 2 * r.trial_sd);
  EXPECT_EQ(r.verdict, ca::Verdict::Pass);
}

TEST(Refute, ZeroCommonCauseReproducesOriginalExactly) {
  auto frame = confounded(300, 3);
  for (auto method : ca::kAllMethods) {
    const auto spec = spec_for(method);
    const ca::RefuteOptions options{20, 11, 0.2};
    auto r = ca::refute_random_common_cause(spec, frame, options, ca::CommonCause::Zero);
    EXPECT_EQ(r.refuted_effect, r.original_ate) << ca::to_string(method);
    EXPECT_EQ(r.trial_sd, 0.0) << ca::to_string(method);
    EXPECT_EQ(r.p_value, 1.0) << ca::to_string(method);
  }
}

TEST(Refute, RandomCommonCauseBarelyMovesLinear) {
  auto frame = confounded(20000, 4);
  auto r = ca::refute_random_common_cause(spec_for(ca::Method::LR), frame, {20, 3, 0.2});
  EXPECT_LT(std::abs(r.refuted_effect - r.original_ate), 5e-3);
  EXPECT_EQ(r.verdict, ca::Verdict::Pass);
}

TEST(Refute, SubsetRemoval) {
  auto frame = confounded(1000, 5);
  auto r = ca::refute_subset_removal(spec_for(ca::Method::LR), frame, {50, 9, 0.2});
  EXPECT_EQ(r.verdict, ca::Verdict::Pass);
  EXPECT_LT(std::abs(r.refuted_effect - r.original_ate), 0.1 * std::abs(r.original_ate));
  // Dropping no rows reproduces the original estimate in every trial.
  auto none = ca::refute_subset_removal(spec_for(ca::Method::IPSW), frame, {20, 9, 0.0});
  EXPECT_NEAR(none.refuted_effect, none.original_ate, 1e-12);
  EXPECT_EQ(none.p_value, 1.0);
}

TEST(Refute, Preconditions) {
  auto frame = confounded(200, 6);
  EXPECT_THROW(ca::refute_placebo(spec_for(ca::Method::LR), frame, {19, 1, 0.2}), ca::EstimationError);
  EXPECT_THROW(ca::refute_random_common_cause(spec_for(ca::Method::LR), frame, {10, 1, 0.2}), ca::EstimationError);
  EXPECT_THROW(ca::refute_subset_removal(spec_for(ca::Method::LR), frame, {20, 1, 0.5}), ca::EstimationError);
}

TEST(Refute, BitReproducible) {
  auto frame = confounded(300, 7);
  for (auto test : {ca::RefutationTest::Placebo, ca::RefutationTest::RandomCommonCause, ca::RefutationTest::SubsetRemoval}) {
    for (auto method : {ca::Method::IPSW, ca::Method::TLearner}) {
      const auto spec = spec_for(method);
      auto a = ca::refute(test, spec, frame, {20, 42, 0.2}, 1.0);
      auto b = ca::refute(test, spec, frame, {20, 42, 0.2}, 1.0);
      EXPECT_EQ(a.refuted_effect, b.refuted_effect);
      EXPECT_EQ(a.trial_sd, b.trial_sd);
      EXPECT_EQ(a.p_value, b.p_value);
      EXPECT_EQ(a.verdict, ca::verdict_for(a.p_value));
    }
  }
}

TEST(Refute, PlaceboCalibrationOnNullData) {
  // Y generated independently of T: the placebo should rarely fail.
  int failures = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    auto frame = frame_from(ca::sample(ca::benchmark("null"), 300, 100 + rep), "T", "Y", {"X1", "X2", "X3"});
    auto r = ca::refute_placebo(spec_for(ca::Method::LR), frame, {20, rep, 0.2});
    failures += r.verdict == ca::Verdict::Fail;
  }
  EXPECT_LE(failures, 5);
}
