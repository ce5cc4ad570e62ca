#pragma once

#include <cstdint>
#include <string_view>

#include "causalaid/estimators.hpp"

namespace causalaid {

enum class RefutationTest { Placebo, RandomCommonCause, SubsetRemoval };
enum class Verdict { Pass, Fail };

std::string_view to_string(RefutationTest test);
std::string_view to_string(Verdict verdict);

inline constexpr double kRefutationFailBelow = 0.05;

struct RefutationReport {
  RefutationTest test = RefutationTest::Placebo;
  double original_ate = 0.0;
  double refuted_effect = 0.0;  // mean of trial estimates
  double trial_sd = 0.0;
  double p_value = 1.0;
  std::size_t trials = 0;
  Verdict verdict = Verdict::Pass;
};

// Verdict is Fail iff p < 0.05.
Verdict verdict_for(double p_value);

struct RefuteOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  double subset_fraction = 0.2;  // subset removal only
};

// The p-value of every test is the two-sided normal test of
// (mean trial estimate - reference) / (sd of trial estimates), where the
// reference is 0 for the placebo and the original estimate otherwise.

// Permutes T each trial (arm sizes preserved) and re-estimates.
RefutationReport refute_placebo(const EstimatorSpec& spec, const StudyFrame& frame, const RefuteOptions& options);

enum class CommonCause { StandardNormal, Zero };

// Appends an independent covariate each trial and re-estimates.
RefutationReport refute_random_common_cause(const EstimatorSpec& spec, const StudyFrame& frame,
                                            const RefuteOptions& options,
                                            CommonCause kind = CommonCause::StandardNormal);

// Drops floor(fraction * n) uniformly chosen rows each trial. Draws that
// starve an arm are redrawn, up to 10 * trials in total.
RefutationReport refute_subset_removal(const EstimatorSpec& spec, const StudyFrame& frame,
                                       const RefuteOptions& options);

// Same tests with a precomputed original estimate (avoids refitting it).
RefutationReport refute(RefutationTest test, const EstimatorSpec& spec, const StudyFrame& frame,
                        const RefuteOptions& options, double original_ate);

}  // namespace causalaid
