#include "causalaid/refute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "causalaid/parallel.hpp"
#include "causalaid/rng.hpp"

namespace causalaid {

namespace {

RefutationReport summarize(RefutationTest test, double original, double reference,
                           const std::vector<double>& estimates) {
  RefutationReport report;
  report.test = test;
  report.original_ate = original;
  report.trials = estimates.size();
  const double n = static_cast<double>(estimates.size());
  // Moments about the first trial, so identical trials give that value and sd 0 exactly.
  const double shift = estimates.front();
  double sum = 0.0, ss = 0.0;
  for (double e : estimates) sum += e - shift;
  const double offset = sum / n;
  for (double e : estimates) ss += (e - shift - offset) * (e - shift - offset);
  report.refuted_effect = shift + offset;
  report.trial_sd = std::sqrt(ss / (n - 1.0));

  const double deviation = report.refuted_effect - reference;
  report.p_value = normal_two_sided_p(deviation, report.trial_sd);
  report.verdict = verdict_for(report.p_value);
  return report;
}

void check_trials(const RefuteOptions& options) {
  if (options.trials < 20) throw EstimationError("refutation needs at least 20 trials");
}

std::string_view label(RefutationTest test) {
  switch (test) {
    case RefutationTest::Placebo: return "refute-placebo";
    case RefutationTest::RandomCommonCause: return "refute-rcc";
    case RefutationTest::SubsetRemoval: return "refute-rsr";
  }
  return "refute";
}

RefutationReport run_placebo(const EstimatorSpec& spec, const StudyFrame& frame, const RefuteOptions& options,
                             double original) {
  check_trials(options);
  const auto trials = static_cast<std::size_t>(options.trials);
  std::vector<double> estimates(trials);
  parallel_for(trials, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, label(RefutationTest::Placebo), i));
    Eigen::VectorXd t = frame.treatment();
    rng.shuffle(std::span<double>(t.data(), static_cast<std::size_t>(t.size())));
    estimates[i] = estimate_ate(spec, frame.with_treatment(std::move(t)), derive_seed(options.seed, "placebo-fit", i));
  });
  return summarize(RefutationTest::Placebo, original, 0.0, estimates);
}

RefutationReport run_common_cause(const EstimatorSpec& spec, const StudyFrame& frame,
                                  const RefuteOptions& options, double original, CommonCause kind) {
  check_trials(options);
  const auto trials = static_cast<std::size_t>(options.trials);
  std::vector<double> estimates(trials);
  parallel_for(trials, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, label(RefutationTest::RandomCommonCause), i));
    Eigen::VectorXd w(static_cast<Eigen::Index>(frame.rows()));
    for (Eigen::Index r = 0; r < w.size(); ++r) w[r] = kind == CommonCause::Zero ? 0.0 : rng.normal();
    // The fit seed matches the original fit so only the added column differs.
    estimates[i] = estimate_ate(spec, frame.with_covariate("random_common_cause", w), derive_seed(options.seed, "point"));
  });
  return summarize(RefutationTest::RandomCommonCause, original, original, estimates);
}

RefutationReport run_subset_removal(const EstimatorSpec& spec, const StudyFrame& frame,
                                    const RefuteOptions& options, double original) {
  check_trials(options);
  if (!(options.subset_fraction >= 0.0 && options.subset_fraction < 0.5))
    throw EstimationError(fmt::format("subset fraction {} outside [0, 0.5)", options.subset_fraction));
  const auto trials = static_cast<std::size_t>(options.trials);
  const std::size_t n = frame.rows();
  const auto removed = static_cast<std::size_t>(std::floor(options.subset_fraction * static_cast<double>(n)));
  const std::size_t cap = 10 * trials;
  const std::size_t need = minimum_arm_size(spec);

  std::vector<double> estimates(trials);
  std::vector<std::size_t> draws(trials, 0);
  parallel_for(trials, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, label(RefutationTest::SubsetRemoval), i));
    std::vector<std::size_t> order(n);
    while (draws[i] < cap) {
      ++draws[i];
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Partial shuffle: the first `removed` positions are the dropped rows.
      for (std::size_t j = 0; j < removed; ++j) {
        const auto pick = j + static_cast<std::size_t>(rng.uniform_index(n - j));
        std::swap(order[j], order[pick]);
      }
      std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(removed), order.end());
      std::sort(kept.begin(), kept.end());
      std::size_t treated = 0;
      for (std::size_t r : kept) treated += frame.treatment()[static_cast<Eigen::Index>(r)] == 1.0;
      if (treated < need || kept.size() - treated < need) continue;
      estimates[i] = estimate_ate(spec, frame.subset(kept), derive_seed(options.seed, "point"));
      return;
    }
  });
  const std::size_t total = std::accumulate(draws.begin(), draws.end(), std::size_t{0});
  if (total > cap)
    throw InestimableError(fmt::format("subset removal needed {} draws for {} trials (cap {})", total, trials, cap));
  return summarize(RefutationTest::SubsetRemoval, original, original, estimates);
}

}  // namespace

std::string_view to_string(RefutationTest test) {
  switch (test) {
    case RefutationTest::Placebo: return "Placebo";
    case RefutationTest::RandomCommonCause: return "RCC";
    case RefutationTest::SubsetRemoval: return "RSR";
  }
  return "?";
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Pass ? "pass" : "fail"; }

Verdict verdict_for(double p_value) { return p_value < kRefutationFailBelow ? Verdict::Fail : Verdict::Pass; }

RefutationReport refute(RefutationTest test, const EstimatorSpec& spec, const StudyFrame& frame,
                        const RefuteOptions& options, double original_ate) {
  switch (test) {
    case RefutationTest::Placebo: return run_placebo(spec, frame, options, original_ate);
    case RefutationTest::RandomCommonCause:
      return run_common_cause(spec, frame, options, original_ate, CommonCause::StandardNormal);
    case RefutationTest::SubsetRemoval: return run_subset_removal(spec, frame, options, original_ate);
  }
  throw EstimationError("unknown refutation test");
}

RefutationReport refute_placebo(const EstimatorSpec& spec, const StudyFrame& frame, const RefuteOptions& options) {
  return run_placebo(spec, frame, options, estimate_ate(spec, frame, derive_seed(options.seed, "point")));
}

RefutationReport refute_random_common_cause(const EstimatorSpec& spec, const StudyFrame& frame,
                                            const RefuteOptions& options, CommonCause kind) {
  return run_common_cause(spec, frame, options, estimate_ate(spec, frame, derive_seed(options.seed, "point")), kind);
}

RefutationReport refute_subset_removal(const EstimatorSpec& spec, const StudyFrame& frame,
                                       const RefuteOptions& options) {
  return run_subset_removal(spec, frame, options, estimate_ate(spec, frame, derive_seed(options.seed, "point")));
}

}  // namespace causalaid
