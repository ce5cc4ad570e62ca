#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace causalaid {

class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coefficients are ordered feature-by-feature with the intercept last.
struct LinearModel {
  Eigen::VectorXd coefficients;
  // Set when the design was rank deficient and a ridge fallback was used.
  std::optional<Eigen::Index> collinear_column;
  std::vector<std::string> warnings;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  double intercept() const { return coefficients[coefficients.size() - 1]; }
};

inline constexpr double kRidgeFallback = 1e-8;

// Least squares by column-pivoted Householder QR. A rank-deficient design is
// refit with a ridge penalty of kRidgeFallback and reported in the model.
LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct LogisticModel {
  Eigen::VectorXd coefficients;  // features..., intercept
  bool converged = false;
  int iterations = 0;
  // Log-likelihood after each accepted iteration (index 0 = starting point).
  std::vector<double> log_likelihood_trace;

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X, double clip_low, double clip_high) const;
};

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

// Maximum likelihood by iteratively reweighted least squares (Newton) with
// step halving, so the log-likelihood never decreases. Separable data stop
// at the iteration cap with converged = false.
LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LogisticOptions& options = {});

// Bernoulli log-likelihood and its gradient for coefficients laid out as in
// LogisticModel.
double logistic_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& coefficients);
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& coefficients);

struct ForestParams {
  int n_trees = 200;
  int max_depth = 8;
  int min_leaf = 5;
  double feature_fraction = 1.0 / 3.0;
  std::uint64_t seed = 0;
  bool bootstrap = true;  // false: every tree sees the training rows as-is
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int count = 0;
};

struct RegressionTree {
  // nodes[0] is the root; every split's children are adjacent (right == left + 1)
  // and a leaf's children are itself.
  std::vector<TreeNode> nodes;
  int depth = 0;  // deepest leaf

  double predict(const double* row, Eigen::Index stride) const;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;
  Eigen::Index n_features = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  // Diagnostic text dump of every node.
  std::string dump() const;
};

// Bagged regression trees: each tree is grown on a bootstrap sample with
// greedy variance-reduction splits over a random feature subset of size
// max(1, floor(feature_fraction * features)). Tree t draws from
// derive_seed(params.seed, "forest-tree", t), so fits are reproducible
// regardless of threading.
ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const ForestParams& params = {});

std::string dump(const LinearModel& model);
std::string dump(const LogisticModel& model);

}  // namespace causalaid
