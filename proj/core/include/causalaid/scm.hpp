#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "causalaid/graph.hpp"
#include "causalaid/tabular.hpp"

namespace causalaid {

class ScmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MechanismKind {
  Linear,     // intercept + terms + N(0, noise^2)
  Logistic,   // Bernoulli(sigmoid(intercept + terms)); exogenous noise is U(0,1)
  Threshold,  // 1[intercept + terms + N(0, noise^2) > 0]
};

// coefficient * product of the named parents' values.
struct Term {
  double coefficient = 0.0;
  std::vector<std::string> factors;

  friend bool operator==(const Term&, const Term&) = default;
};

struct Mechanism {
  std::string node;
  MechanismKind kind = MechanismKind::Linear;
  double intercept = 0.0;
  std::vector<Term> terms;
  double noise_sd = 0.0;

  friend bool operator==(const Mechanism&, const Mechanism&) = default;
};

// Structural causal model over a CausalDag: one mechanism per node whose
// factors are exactly the node's DAG parents.
class ScmSpec {
 public:
  static ScmSpec create(CausalDag dag, std::vector<Mechanism> mechanisms);
  // Derives the DAG from the mechanisms' factors, in mechanism order.
  static ScmSpec from_mechanisms(std::vector<Mechanism> mechanisms, std::string treatment, std::string outcome);

  const CausalDag& dag() const { return dag_; }
  const Mechanism& mechanism(NodeId id) const { return mechanisms_[id]; }
  const std::vector<NodeId>& order() const { return order_; }

  // Structural value of `node` given the values of all nodes (only parents
  // are read) and its exogenous draw: a standard normal for Linear and
  // Threshold nodes, a U(0,1) draw for Logistic nodes.
  double evaluate(NodeId node, std::span<const double> values, double exogenous) const;
  // Logistic nodes take a U(0,1) exogenous draw, the others N(0,1).
  bool uses_uniform_noise(NodeId node) const { return mechanisms_[node].kind == MechanismKind::Logistic; }

  // True when every node on a directed treatment -> outcome path is Linear
  // with first-degree terms only.
  bool effect_is_linear() const;

  friend bool operator==(const ScmSpec&, const ScmSpec&) = default;

 private:
  explicit ScmSpec(CausalDag dag) : dag_(std::move(dag)) {}

  CausalDag dag_;
  std::vector<Mechanism> mechanisms_;  // indexed by NodeId
  std::vector<NodeId> order_;          // topological
  std::vector<std::vector<std::vector<NodeId>>> factor_ids_;  // [node][term] -> parent ids
};

// Text format, one node per line in declaration order:
//
//   treatment: T
//   outcome: Y
//   node X linear intercept=0 noise=1
//   node T logistic X=0.8
//   node Y linear noise=1 T=2 X=1 T*X=0.5
ScmSpec parse_scm(std::string_view text);
std::string serialize(const ScmSpec& spec);

// Ancestral sampling in topological order. Row r draws node exogenous
// variables from derive_seed(seed, "scm-sample", r), so any prefix of rows
// is reproducible on its own.
Table sample(const ScmSpec& spec, std::size_t n, std::uint64_t seed);

struct TrueEffect {
  double ate = 0.0;
  double std_error = 0.0;  // 0 for the closed form
  bool closed_form = false;
  std::size_t n_mc = 0;
};

// Closed-form total effect (sum over directed paths of coefficient
// products) when effect_is_linear(); otherwise a Monte-Carlo do()
// contrast on shared exogenous noise. n_mc must be >= 10000 for the
// Monte-Carlo path.
TrueEffect true_effect(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed);
double true_ate(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed);

// Forces Monte-Carlo even for linear specs (used to cross-check the closed form).
TrueEffect monte_carlo_effect(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed);

inline constexpr std::size_t kBruteForceNodeLimit = 12;

// Path-enumeration d-separation: every simple undirected x-y path must be
// blocked by a non-collider in z or a collider with no (inclusive)
// descendant in z. Independent of the reachability implementation.
bool brute_force_d_separated(const CausalDag& dag, NodeId x, NodeId y, const std::vector<NodeId>& z);
bool brute_force_d_separated(const CausalDag& dag, std::string_view x, std::string_view y,
                             const std::vector<std::string>& z);

struct NamedScm {
  std::string name;
  ScmSpec spec;
};

// confounded-linear, null, heterogeneous, somalia-shaped.
const std::vector<NamedScm>& benchmark_suite();
const ScmSpec& benchmark(std::string_view name);

// Writes the multi-source synthetic Somalia dataset (one CSV per source
// schema) generated from the somalia-shaped model: 57 districts, monthly
// 2016-01..2022-12, with seasonal sorghum, static population, daily ENSO,
// weekly displacement, event-level fatalities and a fixed missingness mask
// that leaves 21 district-years without any GAM survey.
void write_somalia_fixture(const std::string& directory, std::uint64_t seed);

const std::vector<std::string>& somalia_districts();

}  // namespace causalaid
