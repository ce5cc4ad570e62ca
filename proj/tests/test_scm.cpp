#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "causalaid/graph.hpp"
#include "causalaid/scm.hpp"

namespace ca = causalaid;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Scm, ParseSerializeRoundTrip) {
  const std::string text =
      "treatment: T\noutcome: Y\n"
      "node X linear intercept=0.5 noise=1\n"
      "node T logistic X=0.8\n"
      "node M linear noise=0.5 T=1.5\n"
      "node Y linear noise=1 T=2 M=0.5 X=1 T*X=0.5\n";
  auto spec = ca::parse_scm(text);
  EXPECT_EQ(spec.dag().size(), 4u);
  EXPECT_EQ(ca::parse_scm(ca::serialize(spec)), spec);
  EXPECT_FALSE(spec.effect_is_linear());
}

TEST(Scm, ParseErrors) {
  EXPECT_THROW(ca::parse_scm("node X linear\n"), ca::ScmError);
  EXPECT_THROW(ca::parse_scm("treatment: T\noutcome: Y\nnode T linear\nnode Y cubic T=1\n"), ca::ScmError);
  EXPECT_THROW(ca::parse_scm("treatment: T\noutcome: Y\nnode T linear noise=-1\nnode Y linear T=1\n"), ca::ScmError);
  EXPECT_THROW(ca::parse_scm("treatment: T\noutcome: Y\nnode T linear\nnode Y linear T=x\n"), ca::ScmError);
}

TEST(Scm, ClosedFormPathRule) {
  auto direct = ca::parse_scm("treatment: T\noutcome: Y\nnode T linear noise=1\nnode Y linear noise=1 T=1.7\n");
  EXPECT_TRUE(ca::true_effect(direct, 10000, 1).closed_form);
  EXPECT_DOUBLE_EQ(ca::true_ate(direct, 10000, 1), 1.7);
  auto mediated = ca::parse_scm(
      "treatment: T\noutcome: Y\nnode T linear noise=1\nnode M linear noise=1 T=0.6\n"
      "node Y linear noise=1 M=-2 T=0.25\n");
  EXPECT_DOUBLE_EQ(ca::true_ate(mediated, 10000, 1), 0.6 * -2 + 0.25);
  // Shared-noise Monte Carlo agrees exactly for a constant-effect spec.
  auto mc = ca::monte_carlo_effect(mediated, 10000, 3);
  EXPECT_NEAR(mc.ate, 0.6 * -2 + 0.25, 1e-12);
  EXPECT_NEAR(mc.std_error, 0.0, 1e-12);
}

TEST(Scm, BenchmarkTruths) {
  EXPECT_DOUBLE_EQ(ca::true_ate(ca::benchmark("confounded-linear"), 10000, 1), 2.0);
  EXPECT_DOUBLE_EQ(ca::true_ate(ca::benchmark("null"), 10000, 1), 0.0);
  EXPECT_THROW(ca::benchmark("nope"), ca::ScmError);
  EXPECT_THROW(ca::monte_carlo_effect(ca::benchmark("heterogeneous"), 100, 1), ca::ScmError);
}

TEST(Scm, HeterogeneousMonteCarloConverges) {
  const auto& spec = ca::benchmark("heterogeneous");
  auto a = ca::true_effect(spec, 1000000, 1);
  auto b = ca::true_effect(spec, 2000000, 2);
  EXPECT_FALSE(a.closed_form);
  EXPECT_LT(a.std_error, 0.01);
  EXPECT_LT(std::abs(a.ate - b.ate), 3 * std::hypot(a.std_error, b.std_error) + 1e-3);
  // Effect is 1 + X1 with E[X1] = 0.5.
  EXPECT_NEAR(a.ate, 1.5, 0.01);
}

TEST(Scm, ZeroNoiseGivesTheFixedPoint) {
  auto spec = ca::parse_scm(
      "treatment: T\noutcome: Y\nnode A linear intercept=2\nnode T linear intercept=1 A=0.5\n"
      "node Y linear intercept=-1 T=3 A=2\n");
  auto t = ca::sample(spec, 25, 9);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    EXPECT_EQ(t.column("A").numbers[r], 2.0);
    EXPECT_EQ(t.column("T").numbers[r], 2.0);
    EXPECT_EQ(t.column("Y").numbers[r], -1 + 3 * 2.0 + 2 * 2.0);
  }
}

TEST(Scm, SamplingIsDeterministicAndPrefixStable) {
  const auto& spec = ca::benchmark("confounded-linear");
  auto a = ca::sample(spec, 500, 4);
  EXPECT_EQ(a, ca::sample(spec, 500, 4));
  auto prefix = ca::sample(spec, 100, 4);
  for (const auto& column : prefix.columns())
    for (std::size_t r = 0; r < 100; ++r) EXPECT_EQ(column.numbers[r], a.column(column.name).numbers[r]);
  EXPECT_NE(a, ca::sample(spec, 500, 5));
}

TEST(Scm, CorrelationSignsFollowCoefficients) {
  const auto& spec = ca::benchmark("somalia-shaped");
  auto t = ca::sample(spec, 10000, 5);
  const auto& dag = spec.dag();
  for (ca::NodeId v = 0; v < dag.size(); ++v) {
    const auto& m = spec.mechanism(v);
    // With one parent the marginal correlation carries the coefficient's sign.
    if (m.terms.size() != 1 || m.terms[0].factors.size() != 1) continue;
    const auto& term = m.terms[0];
    const double r = correlation(t.column(term.factors[0]).numbers, t.column(m.node).numbers);
    EXPECT_GT(std::abs(r), 0.05) << term.factors[0] << " -> " << m.node;
    EXPECT_EQ(r > 0, term.coefficient > 0) << term.factors[0] << " -> " << m.node;
  }
  const double r = correlation(t.column("ENSO").numbers, t.column("SPI").numbers);
  EXPECT_GT(r, 0.3);
}

TEST(Scm, TreatmentIsBinaryWithBothArms) {
  for (const auto& named : ca::benchmark_suite()) {
    if (named.name == "somalia-shaped") continue;
    auto t = ca::sample(named.spec, 100, 6);
    const auto& treatment = t.column(named.spec.dag().treatment_name()).numbers;
    int treated = 0;
    for (double x : treatment) {
      ASSERT_TRUE(x == 0.0 || x == 1.0) << named.name;
      treated += x == 1.0;
    }
    EXPECT_GT(treated, 0) << named.name;
    EXPECT_LT(treated, 100) << named.name;
  }
}

TEST(Scm, ParentSetIsValidForEverySuiteSpec) {
  const auto& suite = ca::benchmark_suite();
  ASSERT_GE(suite.size(), 4u);
  for (const auto& named : suite) {
    const auto& dag = named.spec.dag();
    EXPECT_TRUE(ca::backdoor_satisfied(dag, ca::parent_adjustment_set(dag).members)) << named.name;
  }
}

TEST(Scm, NaiveDifferenceIsBiasedOnConfoundedBenchmark) {
  auto t = ca::sample(ca::benchmark("confounded-linear"), 20000, 7);
  double s1 = 0, s0 = 0;
  int n1 = 0, n0 = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (t.column("T").numbers[r] == 1.0) {
      s1 += t.column("Y").numbers[r];
      ++n1;
    } else {
      s0 += t.column("Y").numbers[r];
      ++n0;
    }
  }
  EXPECT_GT(std::abs(s1 / n1 - s0 / n0 - 2.0), 0.3);
}

TEST(BruteForce, TextbookTriples) {
  auto chain = ca::parse_dag("A -> B\nB -> C\n", "A", "C");
  EXPECT_TRUE(ca::brute_force_d_separated(chain, "A", "C", {"B"}));
  EXPECT_FALSE(ca::brute_force_d_separated(chain, "A", "C", {}));
  auto fork = ca::parse_dag("B -> A\nB -> C\n", "A", "C");
  EXPECT_TRUE(ca::brute_force_d_separated(fork, "A", "C", {"B"}));
  EXPECT_FALSE(ca::brute_force_d_separated(fork, "A", "C", {}));
  auto collider = ca::parse_dag("A -> C\nB -> C\nC -> D\n", "A", "B");
  EXPECT_TRUE(ca::brute_force_d_separated(collider, "A", "B", {}));
  EXPECT_FALSE(ca::brute_force_d_separated(collider, "A", "B", {"C"}));
  EXPECT_FALSE(ca::brute_force_d_separated(collider, "A", "B", {"D"}));
}

TEST(BruteForce, DisconnectedAndBudget) {
  auto g = ca::parse_dag("node: A\nnode: B\nA -> C\n", "A", "C");
  EXPECT_TRUE(ca::brute_force_d_separated(g, "A", "B", {}));
  std::string text;
  for (int i = 0; i < 13; ++i) text += "N" + std::to_string(i) + " -> N" + std::to_string(i + 1) + "\n";
  auto big = ca::parse_dag(text, "N0", "N13");
  EXPECT_THROW(ca::brute_force_d_separated(big, "N0", "N13", {}), ca::ScmError);
}

TEST(Fixture, RegeneratesTheCommittedCsvs) {
  const auto dir = std::filesystem::temp_directory_path() / "causalaid-test-fixture";
  std::filesystem::remove_all(dir);
  ca::write_somalia_fixture(dir.string(), 20230);
  for (const char* name : {"gam.csv", "cash.csv", "market_prices.csv", "spi.csv", "sorghum.csv", "displacement.csv",
                           "fatalities.csv", "population.csv", "enso.csv"}) {
    std::ifstream a(dir / name, std::ios::binary), b(std::filesystem::path(CAUSALAID_DATA_DIR) / "somalia" / name, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_FALSE(sb.empty()) << name;
    EXPECT_EQ(sa, sb) << name;
  }
}
