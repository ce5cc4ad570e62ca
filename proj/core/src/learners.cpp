#include "causalaid/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "causalaid/parallel.hpp"
#include "causalaid/rng.hpp"

namespace causalaid {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd design(X.rows(), X.cols() + 1);
  design.leftCols(X.cols()) = X;
  design.col(X.cols()).setOnes();
  return design;
}

void require_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size())
    throw LearnerError(fmt::format("design has {} rows but target has {}", X.rows(), y.size()));
  if (!X.allFinite()) throw LearnerError("features contain missing or non-finite values");
  if (!y.allFinite()) throw LearnerError("target contains missing or non-finite values");
}

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  const Eigen::Index p = coefficients.size() - 1;
  if (X.cols() != p) throw LearnerError(fmt::format("model expects {} features, got {}", p, X.cols()));
  return (X * coefficients.head(p)).array() + coefficients[p];
}

LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require_finite(X, y);
  if (X.rows() < X.cols() + 1)
    throw LearnerError(fmt::format("OLS needs at least {} rows, got {}", X.cols() + 1, X.rows()));
  const Eigen::MatrixXd design = with_intercept(X);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  LinearModel model;
  if (qr.rank() == design.cols()) {
    model.coefficients = qr.solve(y);
    return model;
  }

  // The first pivoted column beyond the rank is a linear combination of the
  // columns before it.
  const Eigen::Index culprit = qr.colsPermutation().indices()[qr.rank()];
  model.collinear_column = culprit;
  const std::string label = culprit == X.cols() ? std::string("intercept") : fmt::format("feature {}", culprit);
  model.warnings.push_back(fmt::format(
      "rank-deficient design (rank {} of {}): {} is collinear; ridge fallback with penalty {}", qr.rank(),
      design.cols(), label, kRidgeFallback));
  spdlog::warn("fit_ols: {}", model.warnings.back());

  const Eigen::Index p = design.cols();
  Eigen::MatrixXd augmented(design.rows() + p, p);
  augmented.topRows(design.rows()) = design;
  augmented.bottomRows(p) = std::sqrt(kRidgeFallback) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(design.rows() + p);
  target.head(design.rows()) = y;
  model.coefficients = augmented.householderQr().solve(target);
  return model;
}

double logistic_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& coefficients) {
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd eta = (X * coefficients.head(p)).array() + coefficients[p];
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1p_exp(eta[i]);
  return ll;
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& coefficients) {
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd eta = (X * coefficients.head(p)).array() + coefficients[p];
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = y[i] - sigmoid(eta[i]);
  Eigen::VectorXd grad(p + 1);
  grad.head(p) = X.transpose() * residual;
  grad[p] = residual.sum();
  return grad;
}

Eigen::VectorXd LogisticModel::predict_proba(const Eigen::MatrixXd& X) const {
  const Eigen::Index p = coefficients.size() - 1;
  if (X.cols() != p) throw LearnerError(fmt::format("model expects {} features, got {}", p, X.cols()));
  Eigen::VectorXd eta = (X * coefficients.head(p)).array() + coefficients[p];
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = sigmoid(eta[i]);
  return eta;
}

Eigen::VectorXd LogisticModel::predict_proba(const Eigen::MatrixXd& X, double clip_low,
                                             double clip_high) const {
  return predict_proba(X).cwiseMax(clip_low).cwiseMin(clip_high);
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LogisticOptions& options) {
  require_finite(X, y);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw LearnerError("logistic target must be 0/1");
  const double positives = y.sum();
  if (positives == 0.0 || positives == static_cast<double>(y.size()))
    throw LearnerError("logistic target has a single class");

  const Eigen::MatrixXd design = with_intercept(X);
  const Eigen::Index p = design.cols();
  LogisticModel model;
  model.coefficients = Eigen::VectorXd::Zero(p);
  // Start from the intercept-only solution.
  const double mean = positives / static_cast<double>(y.size());
  model.coefficients[p - 1] = std::log(mean / (1.0 - mean));
  double ll = logistic_log_likelihood(X, y, model.coefficients);
  model.log_likelihood_trace.push_back(ll);

  Eigen::VectorXd prob(design.rows());
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd eta = design * model.coefficients;
    for (Eigen::Index i = 0; i < eta.size(); ++i) prob[i] = sigmoid(eta[i]);
    const Eigen::VectorXd gradient = design.transpose() * (y - prob);
    if (gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      model.converged = true;
      break;
    }

    const Eigen::VectorXd weights = (prob.array() * (1.0 - prob.array())).max(1e-12);
    const Eigen::MatrixXd hessian = design.transpose() * weights.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd step = ldlt.solve(gradient);
    if (!step.allFinite()) break;

    // Near the optimum the gain of a full step is below the rounding noise
    // of ll; only a real decrease triggers halving.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ll));
    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
      Eigen::VectorXd candidate = model.coefficients + scale * step;
      const double candidate_ll = logistic_log_likelihood(X, y, candidate);
      if (std::isfinite(candidate_ll) && candidate_ll >= ll - slack) {
        model.coefficients = std::move(candidate);
        ll = candidate_ll;
        accepted = true;
        break;
      }
    }
    ++model.iterations;
    if (!accepted) {
      // No ascent direction left at machine precision.
      model.converged = gradient.lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, std::abs(ll));
      break;
    }
    model.log_likelihood_trace.push_back(ll);
  }
  if (model.converged) {
    // A hyperplane that classifies every row means complete separation: the
    // gradient vanishes only because the coefficients ran off to infinity.
    const Eigen::VectorXd eta = design * model.coefficients;
    bool separated = true;
    for (Eigen::Index i = 0; i < eta.size() && separated; ++i) separated = (eta[i] > 0.0) == (y[i] == 1.0) && eta[i] != 0.0;
    model.converged = !separated;
  }
  if (!model.converged) {
    spdlog::debug("fit_logistic: no convergence after {} iterations (possible separation)", model.iterations);
  }
  return model;
}

namespace {

// x > threshold, computed from a sign bit so the compiler cannot turn the
// descent into a mispredicted branch. Exact because thresholds are never -0.
inline int goes_right(double x, double threshold) { return std::signbit(threshold - x); }

}  // namespace

double RegressionTree::predict(const double* row, Eigen::Index stride) const {
  const TreeNode* all = nodes.data();
  const TreeNode* node = all;
  while (node->feature >= 0) {
    // Children are adjacent; the comparison picks one without branching.
    node = all + node->left + goes_right(row[node->feature * stride], node->threshold);
  }
  return node->value;
}

namespace {

// A bootstrap sample is held as its distinct rows, each weighted by how many
// times it was drawn. Every node owns the same segment [begin, end) of each
// per-feature order, and each order is sorted by its feature inside every
// segment, so split search is a linear scan and a split is a stable partition
// of each order. Children are allocated as adjacent pairs (right == left + 1).
struct TreeScratch {
  std::vector<int> weight;
  std::vector<double> wy;
  std::vector<double> wyy;
  std::vector<std::vector<std::uint32_t>> orders;
  std::vector<std::uint32_t> spill;
  std::vector<char> goes_left;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params,
              const std::vector<double>& inverse, TreeScratch& scratch, Rng& rng)
      : X_(X), y_(y), params_(params), inverse_(inverse), s_(scratch), rng_(rng) {
    const auto p = static_cast<std::size_t>(X.cols());
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.feature_fraction * static_cast<double>(p))));
    mtry_ = std::min(mtry_, p);
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), 0);
  }

  // `presorted[f]` lists every training row ordered by feature f;
  // scratch.weight[r] is the number of times row r is in the sample.
  RegressionTree build(const std::vector<std::vector<std::uint32_t>>& presorted) {
    const auto n = static_cast<std::size_t>(y_.size());
    const int* weight = s_.weight.data();
    s_.wy.resize(n);
    s_.wyy.resize(n);
    std::size_t sample_size = 0;
    std::size_t distinct = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double value = y_[static_cast<Eigen::Index>(r)];
      s_.wy[r] = weight[r] * value;
      s_.wyy[r] = s_.wy[r] * value;
      sum += s_.wy[r];
      sum_sq += s_.wyy[r];
      sample_size += static_cast<std::size_t>(weight[r]);
      distinct += weight[r] > 0;
    }
    s_.orders.resize(presorted.size());
    for (std::size_t f = 0; f < presorted.size(); ++f) {
      auto& order = s_.orders[f];
      // One spare slot: the branch-free filter stores before deciding to keep.
      order.resize(distinct + 1);
      std::uint32_t* out = order.data();
      for (auto r : presorted[f]) {
        *out = r;
        out += weight[r] > 0;
      }
    }
    s_.spill.resize(distinct);
    s_.goes_left.resize(n);
    RegressionTree tree;
    tree.nodes.reserve(64);
    tree.nodes.emplace_back();
    grow(tree, 0, {0, distinct, sample_size, sum, sum_sq}, 0);
    return tree;
  }

 private:
  struct Segment {
    std::size_t begin;
    std::size_t end;
    std::size_t count;  // weighted
    double sum;
    double sum_sq;
  };

  void grow(RegressionTree& tree, std::size_t slot, const Segment& seg, int depth) {
    const auto [begin, end, count, sum, sum_sq] = seg;
    TreeNode& leaf = tree.nodes[slot];
    leaf.value = sum * inverse_[count];
    leaf.count = static_cast<int>(count);
    leaf.left = leaf.right = static_cast<int>(slot);
    leaf.threshold = std::numeric_limits<double>::infinity();
    tree.depth = std::max(tree.depth, depth);

    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    if (depth >= params_.max_depth || count < 2 * min_leaf || features_.empty()) return;
    const double parent_sse = sum_sq - sum * sum * inverse_[count];
    if (parent_sse <= 1e-12 * std::max(1.0, sum_sq)) return;

    // Partial Fisher-Yates: the first mtry entries become the candidates.
    for (std::size_t i = 0; i < mtry_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.uniform_index(features_.size() - i));
      std::swap(features_[i], features_[j]);
    }

    const int* weight = s_.weight.data();
    const double* wy = s_.wy.data();
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = sum * sum * inverse_[count];
    const double baseline = best_score;
    for (std::size_t f = 0; f < mtry_; ++f) {
      const Eigen::Index feature = features_[f];
      const double* x = X_.col(feature).data();
      const std::uint32_t* order = s_.orders[static_cast<std::size_t>(feature)].data();
      std::size_t left_count = 0;
      double left_sum = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t r = order[i];
        left_count += static_cast<std::size_t>(weight[r]);
        left_sum += wy[r];
        if (left_count < min_leaf) continue;
        if (count - left_count < min_leaf) break;
        const double here = x[r];
        const double next = x[order[i + 1]];
        if (here == next) continue;
        // Maximizing L^2/nl + R^2/nr minimizes the children's SSE.
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum * inverse_[left_count] + right_sum * right_sum * inverse_[count - left_count];
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(feature);
          best_threshold = 0.5 * (here + next);
          // Guard against the midpoint rounding onto the right value.
          if (best_threshold >= next) best_threshold = here;
        }
      }
    }
    if (best_feature < 0 || best_score - baseline <= 1e-12 * parent_sse) return;

    // Index 1 collects the left child, index 0 the right.
    const double* x = X_.col(best_feature).data();
    const std::uint32_t* rows = s_.orders[static_cast<std::size_t>(best_feature)].data();
    std::size_t side_count[2] = {0, 0};
    std::size_t side_distinct[2] = {0, 0};
    double side_sum[2] = {0.0, 0.0};
    double side_sq[2] = {0.0, 0.0};
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t r = rows[i];
      const int left = x[r] <= best_threshold;
      s_.goes_left[r] = static_cast<char>(left);
      side_count[left] += static_cast<std::size_t>(weight[r]);
      side_distinct[left] += 1;
      side_sum[left] += wy[r];
      side_sq[left] += s_.wyy[r];
    }
    for (auto& order : s_.orders) {
      std::size_t left_at = begin;
      std::size_t right_at = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t r = order[i];
        const std::size_t left = static_cast<unsigned char>(s_.goes_left[r]);
        order[left_at] = r;
        s_.spill[right_at] = r;
        left_at += left;
        right_at += 1 - left;
      }
      std::copy_n(s_.spill.begin(), right_at, order.begin() + static_cast<std::ptrdiff_t>(left_at));
    }

    const auto left_slot = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[slot];
    node.feature = best_feature;
    node.threshold = best_threshold + 0.0;  // -0 becomes +0
    node.left = static_cast<int>(left_slot);
    node.right = static_cast<int>(left_slot + 1);
    const std::size_t mid = begin + side_distinct[1];
    grow(tree, left_slot, {begin, mid, side_count[1], side_sum[1], side_sq[1]}, depth + 1);
    grow(tree, left_slot + 1, {mid, end, side_count[0], side_sum[0], side_sq[0]}, depth + 1);
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  const ForestParams& params_;
  const std::vector<double>& inverse_;
  TreeScratch& s_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<Eigen::Index> features_;
};

}  // namespace

ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params) {
  require_finite(X, y);
  if (y.size() == 0) throw LearnerError("forest: empty training data");
  if (params.n_trees < 1) throw LearnerError("forest: n_trees must be >= 1");
  if (params.min_leaf < 1) throw LearnerError("forest: min_leaf must be >= 1");
  if (params.max_depth < 0) throw LearnerError("forest: max_depth must be >= 0");
  if (!(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0))
    throw LearnerError("forest: feature_fraction must be in (0, 1]");
  if (static_cast<Eigen::Index>(params.min_leaf) > y.size())
    throw LearnerError(fmt::format("forest: min_leaf {} exceeds {} rows", params.min_leaf, y.size()));
  if (y.size() < 2 * static_cast<Eigen::Index>(params.min_leaf))
    throw LearnerError(fmt::format("forest: need at least {} rows, got {}", 2 * params.min_leaf, y.size()));

  ForestModel model;
  model.params = params;
  model.n_features = X.cols();
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  const auto n = static_cast<std::size_t>(y.size());
  if (n > std::numeric_limits<std::uint32_t>::max()) throw LearnerError("forest: too many rows");
  std::vector<std::vector<std::uint32_t>> presorted(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& order = presorted[static_cast<std::size_t>(f)];
    order.resize(n);
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
  }
  std::vector<double> inverse(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) inverse[k] = 1.0 / static_cast<double>(k);
  parallel_for(model.trees.size(), [&](std::size_t t) {
    thread_local TreeScratch scratch;
    Rng rng(derive_seed(params.seed, "forest-tree", t));
    scratch.weight.assign(n, params.bootstrap ? 0 : 1);
    if (params.bootstrap)
      for (std::size_t i = 0; i < n; ++i) ++scratch.weight[rng.uniform_index(n)];
    TreeBuilder builder(X, y, params, inverse, scratch, rng);
    model.trees[t] = builder.build(presorted);
  });
  return model;
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != n_features)
    throw LearnerError(fmt::format("forest expects {} features, got {}", n_features, X.cols()));
  if (!X.allFinite()) throw LearnerError("features contain missing or non-finite values");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = X;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  // Blocks of rows descend each tree together so their node loads overlap.
  // Leaves point at themselves, so every row can take tree.depth steps.
  constexpr Eigen::Index kLanes = 4;
  const Eigen::Index p = rows.cols();
  const Eigen::Index blocked = rows.rows() - rows.rows() % kLanes;
  for (const auto& tree : trees) {
    const TreeNode* all = tree.nodes.data();
    for (Eigen::Index start = 0; start < blocked; start += kLanes) {
      const double* a = rows.data() + start * p;
      const double* b = a + p;
      const double* c = b + p;
      const double* d = c + p;
      const TreeNode *na = all, *nb = all, *nc = all, *nd = all;
      for (int step = 0; step < tree.depth; ++step) {
        na = all + na->left + goes_right(a[std::max(na->feature, 0)], na->threshold);
        nb = all + nb->left + goes_right(b[std::max(nb->feature, 0)], nb->threshold);
        nc = all + nc->left + goes_right(c[std::max(nc->feature, 0)], nc->threshold);
        nd = all + nd->left + goes_right(d[std::max(nd->feature, 0)], nd->threshold);
      }
      out[start] += na->value;
      out[start + 1] += nb->value;
      out[start + 2] += nc->value;
      out[start + 3] += nd->value;
    }
    for (Eigen::Index i = blocked; i < rows.rows(); ++i) out[i] += tree.predict(rows.data() + i * p, 1);
  }
  return out / static_cast<double>(trees.size());
}

std::string ForestModel::dump() const {
  std::string out = fmt::format("forest trees={} max_depth={} min_leaf={} feature_fraction={} seed={}\n",
                                params.n_trees, params.max_depth, params.min_leaf,
                                params.feature_fraction, params.seed);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    out += fmt::format("tree {}\n", t);
    for (std::size_t i = 0; i < trees[t].nodes.size(); ++i) {
      const TreeNode& node = trees[t].nodes[i];
      if (node.feature < 0)
        out += fmt::format("  {} leaf value={} n={}\n", i, node.value, node.count);
      else
        out += fmt::format("  {} x{} <= {} ? {} : {}\n", i, node.feature, node.threshold, node.left, node.right);
    }
  }
  return out;
}

std::string dump(const LinearModel& model) {
  std::string out = "linear";
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) out += fmt::format(" {}", model.coefficients[i]);
  return out + "\n";
}

std::string dump(const LogisticModel& model) {
  std::string out = fmt::format("logistic converged={} iterations={}", model.converged, model.iterations);
  for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) out += fmt::format(" {}", model.coefficients[i]);
  return out + "\n";
}

}  // namespace causalaid
