#include "causalaid/scm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "causalaid/rng.hpp"

namespace causalaid {

namespace {

std::string_view kind_name(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::Linear: return "linear";
    case MechanismKind::Logistic: return "logistic";
    case MechanismKind::Threshold: return "threshold";
  }
  return "?";
}

double draw_exogenous(const ScmSpec& spec, NodeId node, Rng& rng) {
  return spec.uses_uniform_noise(node) ? rng.uniform() : rng.normal();
}

// Evaluates every node for one unit, optionally forcing the treatment.
void evaluate_unit(const ScmSpec& spec, std::span<const double> exogenous, std::span<double> values,
                   std::optional<double> forced_treatment) {
  const NodeId t = spec.dag().treatment();
  for (NodeId v : spec.order()) {
    if (forced_treatment && v == t)
      values[v] = *forced_treatment;
    else
      values[v] = spec.evaluate(v, values, exogenous[v]);
  }
}

}  // namespace

ScmSpec ScmSpec::create(CausalDag dag, std::vector<Mechanism> mechanisms) {
  ScmSpec spec(std::move(dag));
  const CausalDag& g = spec.dag_;
  spec.mechanisms_.resize(g.size());
  std::vector<bool> seen(g.size(), false);
  for (auto& m : mechanisms) {
    const NodeId id = g.id(m.node);
    if (seen[id]) throw ScmError(fmt::format("node '{}' has two mechanisms", m.node));
    seen[id] = true;
    if (!(m.noise_sd >= 0.0) || !std::isfinite(m.noise_sd))
      throw ScmError(fmt::format("node '{}': noise sd must be >= 0", m.node));
    spec.mechanisms_[id] = std::move(m);
  }
  spec.factor_ids_.resize(g.size());
  for (NodeId v = 0; v < g.size(); ++v) {
    if (!seen[v]) throw ScmError(fmt::format("node '{}' has no mechanism", g.name(v)));
    std::set<NodeId> used;
    for (const Term& term : spec.mechanisms_[v].terms) {
      if (term.factors.empty()) throw ScmError(fmt::format("node '{}': term without factors", g.name(v)));
      std::vector<NodeId> ids;
      for (const auto& f : term.factors) {
        ids.push_back(g.id(f));
        used.insert(ids.back());
      }
      spec.factor_ids_[v].push_back(std::move(ids));
    }
    const auto& parents = g.parents(v);
    if (!std::equal(used.begin(), used.end(), parents.begin(), parents.end()))
      throw ScmError(fmt::format("node '{}': mechanism factors do not match its DAG parents", g.name(v)));
  }
  spec.order_ = g.topological_order();
  return spec;
}

ScmSpec ScmSpec::from_mechanisms(std::vector<Mechanism> mechanisms, std::string treatment, std::string outcome) {
  std::vector<std::string> nodes;
  for (const auto& m : mechanisms) nodes.push_back(m.node);
  std::vector<std::pair<std::string, std::string>> edges;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& m : mechanisms) {
    for (const auto& term : m.terms) {
      for (const auto& f : term.factors) {
        if (seen.emplace(f, m.node).second) edges.emplace_back(f, m.node);
      }
    }
  }
  return create(CausalDag::create(std::move(nodes), std::move(edges), std::move(treatment), std::move(outcome)),
                std::move(mechanisms));
}

double ScmSpec::evaluate(NodeId node, std::span<const double> values, double exogenous) const {
  const Mechanism& m = mechanisms_[node];
  double linear = m.intercept;
  for (std::size_t i = 0; i < m.terms.size(); ++i) {
    double product = m.terms[i].coefficient;
    for (NodeId f : factor_ids_[node][i]) product *= values[f];
    linear += product;
  }
  switch (m.kind) {
    case MechanismKind::Linear: return linear + m.noise_sd * exogenous;
    case MechanismKind::Threshold: return linear + m.noise_sd * exogenous > 0.0 ? 1.0 : 0.0;
    case MechanismKind::Logistic: {
      const double p = linear >= 0 ? 1.0 / (1.0 + std::exp(-linear)) : std::exp(linear) / (1.0 + std::exp(linear));
      return exogenous < p ? 1.0 : 0.0;
    }
  }
  return linear;
}

bool ScmSpec::effect_is_linear() const {
  const NodeId t = dag_.treatment();
  const NodeId y = dag_.outcome();
  const auto below_t = dag_.descendants(t);
  auto above_y = dag_.ancestors(y);
  above_y[y] = true;
  for (NodeId v = 0; v < dag_.size(); ++v) {
    if (!(below_t[v] && above_y[v])) continue;
    const Mechanism& m = mechanisms_[v];
    if (m.kind != MechanismKind::Linear) return false;
    for (const Term& term : m.terms)
      if (term.factors.size() != 1) return false;
  }
  return true;
}

ScmSpec parse_scm(std::string_view text) {
  std::vector<Mechanism> mechanisms;
  std::string treatment, outcome;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string head;
    if (!(words >> head)) continue;
    if (head == "treatment:" || head == "outcome:") {
      std::string value;
      if (!(words >> value)) throw ScmError(fmt::format("line {}: missing value", line_no));
      (head == "treatment:" ? treatment : outcome) = value;
      continue;
    }
    if (head != "node") throw ScmError(fmt::format("line {}: expected 'node', got '{}'", line_no, head));
    Mechanism m;
    std::string kind;
    if (!(words >> m.node >> kind)) throw ScmError(fmt::format("line {}: expected 'node <name> <kind>'", line_no));
    if (kind == "linear") m.kind = MechanismKind::Linear;
    else if (kind == "logistic") m.kind = MechanismKind::Logistic;
    else if (kind == "threshold") m.kind = MechanismKind::Threshold;
    else throw ScmError(fmt::format("line {}: unknown mechanism kind '{}'", line_no, kind));
    for (std::string token; words >> token;) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw ScmError(fmt::format("line {}: expected key=value, got '{}'", line_no, token));
      const std::string key = token.substr(0, eq);
      auto value = parse_number(std::string_view(token).substr(eq + 1));
      if (!value) throw ScmError(fmt::format("line {}: bad number in '{}'", line_no, token));
      if (key == "intercept") {
        m.intercept = *value;
      } else if (key == "noise") {
        m.noise_sd = *value;
      } else {
        Term term{*value, {}};
        std::size_t start = 0;
        while (true) {
          const auto star = key.find('*', start);
          term.factors.push_back(key.substr(start, star - start));
          if (star == std::string::npos) break;
          start = star + 1;
        }
        m.terms.push_back(std::move(term));
      }
    }
    mechanisms.push_back(std::move(m));
  }
  if (treatment.empty() || outcome.empty()) throw ScmError("SCM text needs 'treatment:' and 'outcome:' lines");
  return ScmSpec::from_mechanisms(std::move(mechanisms), treatment, outcome);
}

std::string serialize(const ScmSpec& spec) {
  const CausalDag& g = spec.dag();
  std::string out = fmt::format("treatment: {}\noutcome: {}\n", g.treatment_name(), g.outcome_name());
  for (NodeId v = 0; v < g.size(); ++v) {
    const Mechanism& m = spec.mechanism(v);
    out += fmt::format("node {} {}", m.node, kind_name(m.kind));
    if (m.intercept != 0.0) out += fmt::format(" intercept={}", format_number(m.intercept));
    if (m.noise_sd != 0.0) out += fmt::format(" noise={}", format_number(m.noise_sd));
    for (const Term& term : m.terms) {
      out += ' ';
      for (std::size_t i = 0; i < term.factors.size(); ++i) out += (i ? "*" : "") + term.factors[i];
      out += '=' + format_number(term.coefficient);
    }
    out += '\n';
  }
  return out;
}

Table sample(const ScmSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ScmError("sample size must be >= 1");
  const CausalDag& g = spec.dag();
  std::vector<std::vector<double>> columns(g.size(), std::vector<double>(n));
  std::vector<double> exogenous(g.size()), values(g.size());
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng(derive_seed(seed, "scm-sample", r));
    for (NodeId v = 0; v < g.size(); ++v) exogenous[v] = draw_exogenous(spec, v, rng);
    evaluate_unit(spec, exogenous, values, std::nullopt);
    for (NodeId v = 0; v < g.size(); ++v) columns[v][r] = values[v];
  }
  std::vector<Column> out;
  for (NodeId v = 0; v < g.size(); ++v) out.push_back(Column::numeric(g.name(v), std::move(columns[v])));
  return Table(std::move(out));
}

TrueEffect monte_carlo_effect(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw ScmError("Monte-Carlo true effect needs n_mc >= 10000");
  const CausalDag& g = spec.dag();
  std::vector<double> exogenous(g.size()), treated(g.size()), control(g.size());
  double mean = 0.0, m2 = 0.0;
  for (std::size_t r = 0; r < n_mc; ++r) {
    Rng rng(derive_seed(seed, "scm-do", r));
    for (NodeId v = 0; v < g.size(); ++v) exogenous[v] = draw_exogenous(spec, v, rng);
    evaluate_unit(spec, exogenous, treated, 1.0);
    evaluate_unit(spec, exogenous, control, 0.0);
    const double diff = treated[g.outcome()] - control[g.outcome()];
    // Welford update.
    const double delta = diff - mean;
    mean += delta / static_cast<double>(r + 1);
    m2 += delta * (diff - mean);
  }
  TrueEffect effect;
  effect.ate = mean;
  effect.std_error = std::sqrt(m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc));
  effect.n_mc = n_mc;
  return effect;
}

TrueEffect true_effect(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed) {
  if (!spec.effect_is_linear()) return monte_carlo_effect(spec, n_mc, seed);
  // d(node)/d(treatment) propagated in topological order.
  const CausalDag& g = spec.dag();
  std::vector<double> derivative(g.size(), 0.0);
  derivative[g.treatment()] = 1.0;
  const auto below_t = g.descendants(g.treatment());
  for (NodeId v : spec.order()) {
    if (!below_t[v]) continue;
    const Mechanism& m = spec.mechanism(v);
    double d = 0.0;
    for (const Term& term : m.terms) d += term.coefficient * derivative[g.id(term.factors.front())];
    derivative[v] = d;
  }
  TrueEffect effect;
  effect.ate = derivative[g.outcome()];
  effect.closed_form = true;
  return effect;
}

double true_ate(const ScmSpec& spec, std::size_t n_mc, std::uint64_t seed) {
  return true_effect(spec, n_mc, seed).ate;
}

namespace {

class PathEnumerator {
 public:
  PathEnumerator(const CausalDag& dag, NodeId target, const std::vector<NodeId>& z) : dag_(dag), target_(target) {
    in_z_.assign(dag.size(), false);
    for (NodeId v : z) in_z_[v] = true;
    // A collider is open iff it or one of its descendants is in z.
    opens_collider_.assign(dag.size(), false);
    for (NodeId v = 0; v < dag.size(); ++v) {
      std::vector<bool> reached(dag.size(), false);
      std::vector<NodeId> stack{v};
      while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        if (reached[u]) continue;
        reached[u] = true;
        if (in_z_[u]) opens_collider_[v] = true;
        for (auto [from, to] : dag.edges())
          if (from == u) stack.push_back(to);
      }
    }
    on_path_.assign(dag.size(), false);
  }

  bool any_open_path(NodeId source) {
    path_ = {source};
    on_path_[source] = true;
    return extend();
  }

 private:
  bool edge(NodeId from, NodeId to) const {
    for (auto [f, t] : dag_.edges())
      if (f == from && t == to) return true;
    return false;
  }

  bool blocked(const std::vector<NodeId>& path) const {
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      const NodeId prev = path[i - 1], mid = path[i], next = path[i + 1];
      const bool collider = edge(prev, mid) && edge(next, mid);
      if (collider ? !opens_collider_[mid] : in_z_[mid]) return true;
    }
    return false;
  }

  bool extend() {
    const NodeId last = path_.back();
    if (last == target_) return !blocked(path_);
    for (NodeId next = 0; next < dag_.size(); ++next) {
      if (on_path_[next] || !(edge(last, next) || edge(next, last))) continue;
      path_.push_back(next);
      on_path_[next] = true;
      const bool open = extend();
      on_path_[next] = false;
      path_.pop_back();
      if (open) return true;
    }
    return false;
  }

  const CausalDag& dag_;
  NodeId target_;
  std::vector<bool> in_z_;
  std::vector<bool> opens_collider_;
  std::vector<bool> on_path_;
  std::vector<NodeId> path_;
};

}  // namespace

bool brute_force_d_separated(const CausalDag& dag, NodeId x, NodeId y, const std::vector<NodeId>& z) {
  if (dag.size() > kBruteForceNodeLimit)
    throw ScmError(fmt::format("brute-force d-separation supports at most {} nodes", kBruteForceNodeLimit));
  if (x >= dag.size() || y >= dag.size()) throw ScmError("node id out of range");
  for (NodeId v : z)
    if (v >= dag.size()) throw ScmError("node id out of range");
  PathEnumerator paths(dag, y, z);
  return !paths.any_open_path(x);
}

bool brute_force_d_separated(const CausalDag& dag, std::string_view x, std::string_view y,
                             const std::vector<std::string>& z) {
  std::vector<NodeId> ids;
  for (const auto& name : z) ids.push_back(dag.id(name));
  return brute_force_d_separated(dag, dag.id(x), dag.id(y), ids);
}

namespace {

constexpr std::string_view kConfoundedLinear = R"(treatment: T
outcome: Y
node X1 linear noise=1
node X2 linear noise=1
node X3 linear noise=1
node T logistic X1=0.6 X2=0.6 X3=0.6
node Y linear noise=1 T=2 X1=1 X2=1 X3=1
)";

constexpr std::string_view kNull = R"(treatment: T
outcome: Y
node X1 linear noise=1
node X2 linear noise=1
node X3 linear noise=1
node T logistic X1=0.6 X2=0.6 X3=0.6
node Y linear noise=1 X1=1 X2=1 X3=1
)";

constexpr std::string_view kHeterogeneous = R"(treatment: T
outcome: Y
node X1 linear intercept=0.5 noise=1
node X2 linear noise=1
node T logistic X1=0.5 X2=-0.5
node Y linear intercept=1 noise=1 T=1 X1=1 X2=0.5 T*X1=1 X2*X2=0.25
)";

// Monthly, district-level, per-capita scale. Treatment Cash is the share of
// the population receiving cash; GAM is the acutely malnourished share.
constexpr std::string_view kSomaliaShaped = R"(treatment: Cash
outcome: GAM
node ENSO linear noise=1
node SPI linear noise=0.8 ENSO=0.5
node Fatalities linear intercept=2e-05 noise=6e-06
node MarketPrices linear intercept=30 noise=3 SPI=-4 Fatalities=200000
node SorghumProduction linear intercept=0.01 noise=0.002 SPI=0.003
node Displacement linear intercept=0.002 noise=0.0005 SPI=-0.001 Fatalities=20
node Population linear intercept=150000 noise=60000
node Cash linear intercept=0.08 noise=0.03 MarketPrices=0.001 SorghumProduction=-1.5 Displacement=5 Fatalities=1000 Population=1e-07
node GAM linear intercept=0.12 noise=0.015 MarketPrices=0.002 SorghumProduction=-3 Displacement=10 Fatalities=500 Population=1e-07 Cash=-0.02
)";

std::vector<NamedScm> build_suite() {
  std::vector<NamedScm> suite;
  suite.push_back({"confounded-linear", parse_scm(kConfoundedLinear)});
  suite.push_back({"null", parse_scm(kNull)});
  suite.push_back({"heterogeneous", parse_scm(kHeterogeneous)});
  suite.push_back({"somalia-shaped", parse_scm(kSomaliaShaped)});
  return suite;
}

}  // namespace

const std::vector<NamedScm>& benchmark_suite() {
  static const std::vector<NamedScm> suite = build_suite();
  return suite;
}

const ScmSpec& benchmark(std::string_view name) {
  for (const auto& entry : benchmark_suite())
    if (entry.name == name) return entry.spec;
  throw ScmError(fmt::format("unknown benchmark SCM '{}'", name));
}

}  // namespace causalaid
