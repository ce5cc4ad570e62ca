#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "causalaid/learners.hpp"
#include "causalaid/tabular.hpp"

namespace causalaid {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when bootstrap or refutation resampling cannot produce enough
// usable draws.
class InestimableError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

enum class Method { LR, Matching, IPSW, TLearner, XLearner };

inline constexpr Method kAllMethods[] = {Method::LR, Method::Matching, Method::IPSW, Method::TLearner,
                                         Method::XLearner};

// Report labels: LR, M, IPSW, T-L, X-L.
std::string_view to_string(Method method);
// Accepts report labels and long names (matching, tlearner, ...).
Method parse_method(std::string_view text);

enum class BaseLearnerKind { Linear, Forest };

struct BaseLearner {
  BaseLearnerKind kind = BaseLearnerKind::Forest;
  ForestParams forest;
};

struct EstimatorSpec {
  Method method = Method::LR;
  int k = 1;                // matching neighbours
  double clip_low = 0.01;   // propensity clipping (IPSW, X-learner)
  double clip_high = 0.99;
  BaseLearner base;         // meta-learner base model
};

// Difference of arm means, no adjustment.
double naive_difference(const StudyFrame& frame);

// Coefficient on T in the OLS fit of Y on [T, Z, 1].
double ate_linear(const StudyFrame& frame);

// k-nearest-neighbour matching with replacement on standardized covariates,
// over all units (ATE). Ties go to the lowest row index.
double ate_matching(const StudyFrame& frame, int k = 1);

// Self-normalized (Hajek) inverse propensity weighting with a logistic
// propensity model clipped to [clip_low, clip_high].
double ate_ipsw(const StudyFrame& frame, double clip_low = 0.01, double clip_high = 0.99);

// Separate outcome surfaces per arm, averaged over every row.
double ate_tlearner(const StudyFrame& frame, const BaseLearner& base);

// Kunzel et al. X-learner with the clipped propensity as combination weight.
double ate_xlearner(const StudyFrame& frame, const BaseLearner& base, double clip_low = 0.01,
                    double clip_high = 0.99);

// Dispatches on spec.method. Forest stages draw seeds from `seed`.
double estimate_ate(const EstimatorSpec& spec, const StudyFrame& frame, std::uint64_t seed);

// Smallest arm size the estimator accepts.
std::size_t minimum_arm_size(const EstimatorSpec& spec);

struct EffectEstimate {
  Method method = Method::LR;
  double ate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  double std_error = 0.0;  // bootstrap standard deviation
  double threshold_percentile = 0.0;
  std::size_t n_used = 0;
  std::size_t replicates = 0;
  std::size_t draws = 0;  // resamples drawn, including redrawn degenerate ones
};

struct BootstrapOptions {
  int replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

// Nonparametric bootstrap: B row resamples with replacement, each
// re-estimated. CI is the percentile interval [alpha/2, 1 - alpha/2]
// (widened if needed so it contains the point estimate); the p-value is the
// two-sided normal test of ATE = 0 with the bootstrap standard deviation.
// Resamples with an arm below minimum_arm_size are redrawn; more than
// 10 * B draws in total raises InestimableError.
EffectEstimate bootstrap_inference(const EstimatorSpec& spec, const StudyFrame& frame,
                                   const BootstrapOptions& options);

// Two-sided normal p-value of `deviation` given a standard deviation, with
// the degenerate rule sd == 0 -> 0 if deviation != 0 else 1.
double normal_two_sided_p(double deviation, double sd);

}  // namespace causalaid
