#include "causalaid/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "causalaid/parallel.hpp"
#include "causalaid/rng.hpp"

namespace causalaid {

namespace {

// Covariate columns that are not constant. A constant column is collinear
// with the intercept and carries no adjustment information.
Eigen::MatrixXd informative_covariates(const StudyFrame& frame) {
  const Eigen::MatrixXd& z = frame.covariates();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if ((z.col(j).array() != z(0, j)).any()) {
      keep.push_back(j);
    } else {
      spdlog::info("dropping constant covariate '{}'", frame.covariate_names()[static_cast<std::size_t>(j)]);
    }
  }
  if (keep.size() == static_cast<std::size_t>(z.cols())) return z;
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = z.col(keep[j]);
  return out;
}

struct ArmSplit {
  std::vector<Eigen::Index> treated;
  std::vector<Eigen::Index> control;
};

ArmSplit split_arms(const StudyFrame& frame) {
  ArmSplit s;
  for (Eigen::Index i = 0; i < frame.treatment().size(); ++i)
    (frame.treatment()[i] == 1.0 ? s.treated : s.control).push_back(i);
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

// A fitted regression surface from either base learner.
class Surface {
 public:
  Surface(const BaseLearner& base, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed)
      : kind_(base.kind) {
    if (X.cols() == 0) {
      // Nothing to split or regress on: the surface is the arm mean, without
      // the bagging noise a featureless forest would add.
      constant_ = y.mean();
    } else if (kind_ == BaseLearnerKind::Linear) {
      linear_ = fit_ols(X, y);
    } else {
      ForestParams params = base.forest;
      params.seed = seed;
      forest_ = fit_forest(X, y, params);
    }
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    if (X.cols() == 0) return Eigen::VectorXd::Constant(X.rows(), constant_);
    return kind_ == BaseLearnerKind::Linear ? linear_.predict(X) : forest_.predict(X);
  }

 private:
  BaseLearnerKind kind_;
  double constant_ = 0.0;
  LinearModel linear_;
  ForestModel forest_;
};

void check_meta_arms(const ArmSplit& arms, const BaseLearner& base, std::string_view who) {
  const std::size_t need = base.kind == BaseLearnerKind::Forest ? 2 * static_cast<std::size_t>(base.forest.min_leaf) : 2;
  if (arms.treated.size() < need || arms.control.size() < need)
    throw EstimationError(fmt::format("{}: each arm needs at least {} rows (treated {}, control {})", who,
                                      need, arms.treated.size(), arms.control.size()));
}

double ate_tlearner_seeded(const StudyFrame& frame, const BaseLearner& base, std::uint64_t seed) {
  const ArmSplit arms = split_arms(frame);
  check_meta_arms(arms, base, "T-learner");
  const Eigen::MatrixXd z = informative_covariates(frame);
  const Surface mu1(base, take_rows(z, arms.treated), take(frame.outcome(), arms.treated),
                    derive_seed(seed, "mu1"));
  const Surface mu0(base, take_rows(z, arms.control), take(frame.outcome(), arms.control),
                    derive_seed(seed, "mu0"));
  return (mu1.predict(z) - mu0.predict(z)).mean();
}

double ate_xlearner_seeded(const StudyFrame& frame, const BaseLearner& base, double clip_low, double clip_high,
                           std::uint64_t seed) {
  const ArmSplit arms = split_arms(frame);
  check_meta_arms(arms, base, "X-learner");
  const Eigen::MatrixXd z = informative_covariates(frame);
  const Eigen::MatrixXd z1 = take_rows(z, arms.treated);
  const Eigen::MatrixXd z0 = take_rows(z, arms.control);
  const Eigen::VectorXd y1 = take(frame.outcome(), arms.treated);
  const Eigen::VectorXd y0 = take(frame.outcome(), arms.control);

  const Surface mu1(base, z1, y1, derive_seed(seed, "mu1"));
  const Surface mu0(base, z0, y0, derive_seed(seed, "mu0"));

  // Imputed individual effects.
  const Eigen::VectorXd d1 = y1 - mu0.predict(z1);
  const Eigen::VectorXd d0 = mu1.predict(z0) - y0;
  const Surface tau1(base, z1, d1, derive_seed(seed, "tau1"));
  const Surface tau0(base, z0, d0, derive_seed(seed, "tau0"));

  const LogisticModel propensity = fit_logistic(z, frame.treatment());
  const Eigen::VectorXd g = propensity.predict_proba(z, clip_low, clip_high);
  const Eigen::VectorXd tau = g.cwiseProduct(tau0.predict(z)) + (1.0 - g.array()).matrix().cwiseProduct(tau1.predict(z));
  return tau.mean();
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::LR: return "LR";
    case Method::Matching: return "M";
    case Method::IPSW: return "IPSW";
    case Method::TLearner: return "T-L";
    case Method::XLearner: return "X-L";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string lower;
  for (char c : text) {
    if (c != ' ' && c != '_' && c != '-') lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "lr" || lower == "linear" || lower == "linearregression") return Method::LR;
  if (lower == "m" || lower == "matching") return Method::Matching;
  if (lower == "ipsw" || lower == "ipw") return Method::IPSW;
  if (lower == "tl" || lower == "tlearner") return Method::TLearner;
  if (lower == "xl" || lower == "xlearner") return Method::XLearner;
  throw EstimationError(fmt::format("unknown method '{}'", text));
}

double naive_difference(const StudyFrame& frame) {
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < frame.outcome().size(); ++i)
    (frame.treatment()[i] == 1.0 ? s1 : s0) += frame.outcome()[i];
  return s1 / static_cast<double>(frame.n_treated()) - s0 / static_cast<double>(frame.n_control());
}

double ate_linear(const StudyFrame& frame) {
  const Eigen::MatrixXd z = informative_covariates(frame);
  Eigen::MatrixXd X(z.rows(), z.cols() + 1);
  X.col(0) = frame.treatment();
  X.rightCols(z.cols()) = z;
  return fit_ols(X, frame.outcome()).coefficients[0];
}

double ate_matching(const StudyFrame& frame, int k) {
  if (k < 1) throw EstimationError("matching: k must be >= 1");
  const ArmSplit arms = split_arms(frame);
  const auto uk = static_cast<std::size_t>(k);
  if (uk > arms.treated.size() || uk > arms.control.size())
    throw EstimationError(fmt::format("matching: k={} exceeds an arm size (treated {}, control {})", k,
                                      arms.treated.size(), arms.control.size()));

  Eigen::MatrixXd z = informative_covariates(frame);
  if (z.cols() == 0) return naive_difference(frame);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  const Eigen::RowVectorXd sd = (z.colwise().squaredNorm() / static_cast<double>(z.rows() - 1)).cwiseSqrt();
  z = z.array().rowwise() / sd.array();

  const Eigen::VectorXd& y = frame.outcome();
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<double> effect(n);
  parallel_for(n, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    const bool treated = frame.treatment()[row] == 1.0;
    const auto& pool = treated ? arms.control : arms.treated;
    std::vector<std::pair<double, Eigen::Index>> dist(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) dist[j] = {(z.row(pool[j]) - z.row(row)).squaredNorm(), pool[j]};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(uk), dist.end());
    double counterfactual = 0.0;
    for (std::size_t j = 0; j < uk; ++j) counterfactual += y[dist[j].second];
    counterfactual /= static_cast<double>(uk);
    effect[i] = treated ? y[row] - counterfactual : counterfactual - y[row];
  });
  return std::accumulate(effect.begin(), effect.end(), 0.0) / static_cast<double>(n);
}

double ate_ipsw(const StudyFrame& frame, double clip_low, double clip_high) {
  if (!(clip_low > 0.0 && clip_low < clip_high && clip_high < 1.0))
    throw EstimationError(fmt::format("invalid propensity clip [{}, {}]", clip_low, clip_high));
  const Eigen::MatrixXd z = informative_covariates(frame);
  const LogisticModel model = fit_logistic(z, frame.treatment());
  const Eigen::VectorXd e = model.predict_proba(z, clip_low, clip_high);
  double treated_num = 0.0, treated_den = 0.0, control_num = 0.0, control_den = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double y = frame.outcome()[i];
    if (frame.treatment()[i] == 1.0) {
      treated_num += y / e[i];
      treated_den += 1.0 / e[i];
    } else {
      control_num += y / (1.0 - e[i]);
      control_den += 1.0 / (1.0 - e[i]);
    }
  }
  return treated_num / treated_den - control_num / control_den;
}

double ate_tlearner(const StudyFrame& frame, const BaseLearner& base) {
  return ate_tlearner_seeded(frame, base, base.forest.seed);
}

double ate_xlearner(const StudyFrame& frame, const BaseLearner& base, double clip_low, double clip_high) {
  return ate_xlearner_seeded(frame, base, clip_low, clip_high, base.forest.seed);
}

double estimate_ate(const EstimatorSpec& spec, const StudyFrame& frame, std::uint64_t seed) {
  switch (spec.method) {
    case Method::LR: return ate_linear(frame);
    case Method::Matching: return ate_matching(frame, spec.k);
    case Method::IPSW: return ate_ipsw(frame, spec.clip_low, spec.clip_high);
    case Method::TLearner: return ate_tlearner_seeded(frame, spec.base, seed);
    case Method::XLearner: return ate_xlearner_seeded(frame, spec.base, spec.clip_low, spec.clip_high, seed);
  }
  throw EstimationError("unknown method");
}

std::size_t minimum_arm_size(const EstimatorSpec& spec) {
  std::size_t need = 2;
  if (spec.method == Method::Matching) need = std::max<std::size_t>(need, static_cast<std::size_t>(spec.k));
  if ((spec.method == Method::TLearner || spec.method == Method::XLearner) &&
      spec.base.kind == BaseLearnerKind::Forest)
    need = std::max<std::size_t>(need, 2 * static_cast<std::size_t>(spec.base.forest.min_leaf));
  return need;
}

double normal_two_sided_p(double deviation, double sd) {
  if (!(sd > 0.0)) return deviation == 0.0 ? 1.0 : 0.0;
  return std::erfc(std::abs(deviation) / sd / std::sqrt(2.0));
}

EffectEstimate bootstrap_inference(const EstimatorSpec& spec, const StudyFrame& frame,
                                   const BootstrapOptions& options) {
  if (options.replicates < 100) throw EstimationError("bootstrap needs at least 100 replicates");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw EstimationError("alpha must be in (0, 1)");

  EffectEstimate result;
  result.method = spec.method;
  result.threshold_percentile = frame.info().threshold_percentile;
  result.n_used = frame.rows();
  result.ate = estimate_ate(spec, frame, derive_seed(options.seed, "point"));

  const auto replicates = static_cast<std::size_t>(options.replicates);
  const std::size_t cap = 10 * replicates;
  const std::size_t need = minimum_arm_size(spec);
  const std::size_t n = frame.rows();
  std::vector<double> estimates(replicates);
  std::vector<std::size_t> draws(replicates, 0);
  parallel_for(replicates, [&](std::size_t b) {
    Rng rng(derive_seed(options.seed, "bootstrap", b));
    while (draws[b] < cap) {
      ++draws[b];
      const std::vector<std::size_t> rows = rng.resample_indices(n);
      std::size_t treated = 0;
      for (std::size_t r : rows) treated += frame.treatment()[static_cast<Eigen::Index>(r)] == 1.0;
      if (treated < need || n - treated < need) continue;
      estimates[b] = estimate_ate(spec, frame.subset(rows), derive_seed(options.seed, "bootstrap-fit", b));
      return;
    }
  });
  result.draws = std::accumulate(draws.begin(), draws.end(), std::size_t{0});
  if (result.draws > cap)
    throw InestimableError(fmt::format("bootstrap needed {} draws for {} replicates (cap {})", result.draws,
                                       replicates, cap));
  result.replicates = replicates;

  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(replicates);
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  result.std_error = std::sqrt(ss / static_cast<double>(replicates - 1));
  result.ci_low = std::min(result.ate, percentile(estimates, 50.0 * options.alpha));
  result.ci_high = std::max(result.ate, percentile(estimates, 100.0 - 50.0 * options.alpha));
  result.p_value = normal_two_sided_p(result.ate, result.std_error);
  return result;
}

}  // namespace causalaid
