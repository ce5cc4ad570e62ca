#include <benchmark/benchmark.h>

#include "causalaid/estimators.hpp"
#include "causalaid/graph.hpp"
#include "causalaid/learners.hpp"
#include "causalaid/parallel.hpp"
#include "causalaid/rng.hpp"
#include "causalaid/scm.hpp"

namespace ca = causalaid;

namespace {

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Data regression_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  ca::Rng rng(seed);
  Data d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      d.X(i, j) = rng.normal();
      s += (j + 1) * d.X(i, j);
    }
    d.y[i] = s + (d.X(i, 0) > 0 ? 1.0 : 0.0) + rng.normal();
  }
  return d;
}

ca::StudyFrame frame_from(const ca::Table& t, const std::string& treatment, const std::string& outcome,
                          const std::vector<std::string>& covariates) {
  const auto n = static_cast<Eigen::Index>(t.rows());
  Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j)
    Z.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(t.column(covariates[j]).numbers.data(), n);
  return ca::StudyFrame::create(Eigen::Map<const Eigen::VectorXd>(t.column(treatment).numbers.data(), n),
                                Eigen::Map<const Eigen::VectorXd>(t.column(outcome).numbers.data(), n), Z,
                                covariates);
}

void BM_ForestFit(benchmark::State& state) {
  ca::set_thread_count(1);
  const auto d = regression_data(state.range(0), 5, 1);
  ca::ForestParams params;
  for (auto _ : state) benchmark::DoNotOptimize(ca::fit_forest(d.X, d.y, params));
}
BENCHMARK(BM_ForestFit)->Arg(170)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ForestPredict(benchmark::State& state) {
  const auto d = regression_data(state.range(0), 5, 2);
  const auto model = ca::fit_forest(d.X, d.y, {});
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(d.X));
}
BENCHMARK(BM_ForestPredict)->Arg(340)->Unit(benchmark::kMillisecond);

void BM_Ols(benchmark::State& state) {
  const auto d = regression_data(state.range(0), 6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ca::fit_ols(d.X, d.y));
}
BENCHMARK(BM_Ols)->Arg(400)->Arg(20000);

void BM_Estimator(benchmark::State& state) {
  ca::set_thread_count(1);
  const auto table = ca::sample(ca::benchmark("confounded-linear"), static_cast<std::size_t>(state.range(1)), 7);
  const auto frame = frame_from(table, "T", "Y", {"X1", "X2", "X3"});
  ca::EstimatorSpec spec;
  spec.method = static_cast<ca::Method>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ca::estimate_ate(spec, frame, 11));
  state.SetLabel(std::string(ca::to_string(spec.method)));
}
BENCHMARK(BM_Estimator)
    ->ArgsProduct({{0, 1, 2, 3, 4}, {378}})
    ->Unit(benchmark::kMillisecond);

void BM_DSeparation(benchmark::State& state) {
  ca::Rng rng(5);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back("V" + std::to_string(i));
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) edges.emplace_back(nodes[i], nodes[j]);
  const auto dag = ca::CausalDag::create(nodes, edges, nodes.front(), nodes.back());
  const std::vector<ca::NodeId> z{1, 2};
  for (auto _ : state) benchmark::DoNotOptimize(ca::d_separated(dag, ca::NodeId{0}, n - 1, z));
}
BENCHMARK(BM_DSeparation)->Arg(8)->Arg(64);

void BM_BruteForceDSeparation(benchmark::State& state) {
  ca::Rng rng(5);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back("V" + std::to_string(i));
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) edges.emplace_back(nodes[i], nodes[j]);
  const auto dag = ca::CausalDag::create(nodes, edges, nodes.front(), nodes.back());
  const std::vector<ca::NodeId> z{1, 2};
  for (auto _ : state) benchmark::DoNotOptimize(ca::brute_force_d_separated(dag, ca::NodeId{0}, n - 1, z));
}
BENCHMARK(BM_BruteForceDSeparation)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
