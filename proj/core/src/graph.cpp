#include "causalaid/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace causalaid {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '#' || c == ':' || c == ',';
  });
}

// Marks every node reachable through an active trail from `source` given the
// conditioning mask. Koller & Friedman's reachable procedure.
std::vector<bool> active_reachable(const CausalDag& dag, NodeId source,
                                   const std::vector<bool>& in_z) {
  const std::size_t n = dag.size();

  // Z together with its ancestors: a collider is open iff it is in this set.
  std::vector<bool> z_or_ancestor = in_z;
  std::vector<NodeId> stack;
  for (NodeId v = 0; v < n; ++v)
    if (in_z[v]) stack.push_back(v);
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    for (NodeId p : dag.parents(v)) {
      if (!z_or_ancestor[p]) {
        z_or_ancestor[p] = true;
        stack.push_back(p);
      }
    }
  }

  enum Direction : int { kUp = 0, kDown = 1 };  // up: arrived from a child
  std::vector<bool> visited(2 * n, false);
  std::vector<bool> reachable(n, false);
  std::vector<std::pair<NodeId, Direction>> frontier{{source, kUp}};
  while (!frontier.empty()) {
    auto [v, dir] = frontier.back();
    frontier.pop_back();
    if (visited[2 * v + dir]) continue;
    visited[2 * v + dir] = true;
    if (!in_z[v]) reachable[v] = true;

    if (dir == kUp && !in_z[v]) {
      for (NodeId p : dag.parents(v)) frontier.emplace_back(p, kUp);
      for (NodeId c : dag.children(v)) frontier.emplace_back(c, kDown);
    } else if (dir == kDown) {
      if (!in_z[v])
        for (NodeId c : dag.children(v)) frontier.emplace_back(c, kDown);
      if (z_or_ancestor[v])
        for (NodeId p : dag.parents(v)) frontier.emplace_back(p, kUp);
    }
  }
  return reachable;
}

std::vector<NodeId> ids_of(const CausalDag& dag, const std::vector<std::string>& names) {
  std::vector<NodeId> ids;
  ids.reserve(names.size());
  for (const auto& name : names) ids.push_back(dag.id(name));
  return ids;
}

bool backdoor_satisfied_ids(const CausalDag& dag, const CausalDag& severed,
                            const std::vector<bool>& treatment_descendants,
                            const std::vector<NodeId>& z) {
  for (NodeId v : z) {
    if (treatment_descendants[v]) return false;
  }
  return d_separated(severed, dag.treatment(), dag.outcome(), z);
}

// The graph with every edge out of the treatment removed.
CausalDag sever_treatment(const CausalDag& dag) {
  std::vector<std::pair<std::string, std::string>> kept;
  for (auto [from, to] : dag.edges()) {
    if (from != dag.treatment()) kept.emplace_back(dag.name(from), dag.name(to));
  }
  return CausalDag::create(dag.nodes(), std::move(kept), dag.treatment_name(),
                           dag.outcome_name());
}

bool is_acyclic(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  std::vector<std::vector<NodeId>> children(n);
  std::vector<std::size_t> indegree(n, 0);
  for (auto [f, t] : edges) {
    children[f].push_back(t);
    ++indegree[t];
  }
  std::vector<NodeId> ready;
  for (NodeId v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    NodeId v = ready.back();
    ready.pop_back();
    ++visited;
    for (NodeId c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  return visited == n;
}

}  // namespace

CausalDag CausalDag::create(std::vector<std::string> nodes,
                            std::vector<std::pair<std::string, std::string>> edges,
                            std::string treatment, std::string outcome) {
  CausalDag dag;
  std::unordered_map<std::string, NodeId> index;
  for (auto& name : nodes) {
    if (!valid_name(name)) throw DagError(fmt::format("invalid node name '{}'", name));
    if (!index.emplace(name, dag.nodes_.size()).second)
      throw DagError(fmt::format("duplicate node '{}'", name));
    dag.nodes_.push_back(std::move(name));
  }
  dag.parents_.resize(dag.nodes_.size());
  dag.children_.resize(dag.nodes_.size());

  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& [from, to] : edges) {
    auto f = index.find(from);
    auto t = index.find(to);
    if (f == index.end() || t == index.end())
      throw DagError(fmt::format("edge {} -> {} references an unknown node", from, to));
    if (f->second == t->second) throw DagError(fmt::format("self-edge {} -> {}", from, to));
    if (!seen.emplace(f->second, t->second).second)
      throw DagError(fmt::format("duplicate edge {} -> {}", from, to));
    dag.edges_.emplace_back(f->second, t->second);
    dag.parents_[t->second].push_back(f->second);
    dag.children_[f->second].push_back(t->second);
  }
  for (auto& p : dag.parents_) std::sort(p.begin(), p.end());
  for (auto& c : dag.children_) std::sort(c.begin(), c.end());

  if (!is_acyclic(dag.nodes_.size(), dag.edges_))
    throw DagError("graph contains a directed cycle");

  auto t = index.find(treatment);
  if (t == index.end()) throw DagError(fmt::format("unknown treatment '{}'", treatment));
  auto y = index.find(outcome);
  if (y == index.end()) throw DagError(fmt::format("unknown outcome '{}'", outcome));
  if (t->second == y->second) throw DagError("treatment and outcome must differ");
  dag.treatment_ = t->second;
  dag.outcome_ = y->second;
  return dag;
}

std::optional<NodeId> CausalDag::find(std::string_view name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) return std::nullopt;
  return static_cast<NodeId>(it - nodes_.begin());
}

NodeId CausalDag::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw DagError(fmt::format("unknown node '{}'", name));
}

std::vector<bool> CausalDag::descendants(NodeId id) const {
  std::vector<bool> mark(size(), false);
  std::vector<NodeId> stack(children_[id].begin(), children_[id].end());
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    if (mark[v]) continue;
    mark[v] = true;
    for (NodeId c : children_[v]) stack.push_back(c);
  }
  return mark;
}

std::vector<bool> CausalDag::ancestors(NodeId id) const {
  std::vector<bool> mark(size(), false);
  std::vector<NodeId> stack(parents_[id].begin(), parents_[id].end());
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    if (mark[v]) continue;
    mark[v] = true;
    for (NodeId p : parents_[v]) stack.push_back(p);
  }
  return mark;
}

std::vector<NodeId> CausalDag::topological_order() const {
  // Kahn's algorithm; the ready set is ordered so the result is deterministic.
  std::vector<std::size_t> indegree(size());
  for (NodeId v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
  std::set<NodeId> ready;
  for (NodeId v = 0; v < size(); ++v)
    if (indegree[v] == 0) ready.insert(v);
  std::vector<NodeId> order;
  while (!ready.empty()) {
    NodeId v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (NodeId c : children_[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  return order;
}

CausalDag CausalDag::with_roles(std::string_view treatment, std::string_view outcome) const {
  std::vector<std::pair<std::string, std::string>> named;
  for (auto [f, t] : edges_) named.emplace_back(nodes_[f], nodes_[t]);
  return create(nodes_, std::move(named), std::string(treatment), std::string(outcome));
}

CausalDag parse_dag(std::string_view text, std::optional<std::string> treatment,
                    std::optional<std::string> outcome) {
  std::vector<std::string> nodes;
  std::set<std::string, std::less<>> known;
  std::vector<std::pair<std::string, std::string>> edges;
  std::set<std::pair<std::string, std::string>> seen_edges;
  std::optional<std::string> header_treatment;
  std::optional<std::string> header_outcome;

  auto add_node = [&](std::string_view name, std::size_t line_no) {
    if (!valid_name(name))
      throw DagError(fmt::format("line {}: invalid node name '{}'", line_no, name));
    if (known.insert(std::string(name)).second) nodes.emplace_back(name);
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }

    if (auto arrow = line.find("->"); arrow != std::string_view::npos) {
      std::string_view from = trim(line.substr(0, arrow));
      std::string_view to = trim(line.substr(arrow + 2));
      if (from.empty() || to.empty() || to.find("->") != std::string_view::npos)
        throw DagError(fmt::format("line {}: malformed edge '{}'", line_no, line));
      add_node(from, line_no);
      add_node(to, line_no);
      if (from == to)
        throw DagError(fmt::format("line {}: self-edge {} -> {}", line_no, from, to));
      if (!seen_edges.emplace(std::string(from), std::string(to)).second)
        throw DagError(fmt::format("line {}: duplicate edge {} -> {}", line_no, from, to));
      edges.emplace_back(std::string(from), std::string(to));
    } else if (auto colon = line.find(':'); colon != std::string_view::npos) {
      std::string_view key = trim(line.substr(0, colon));
      std::string_view value = trim(line.substr(colon + 1));
      if (!valid_name(value))
        throw DagError(fmt::format("line {}: invalid value in '{}'", line_no, line));
      if (key == "treatment") {
        header_treatment = std::string(value);
      } else if (key == "outcome") {
        header_outcome = std::string(value);
      } else if (key == "node") {
        add_node(value, line_no);
      } else {
        throw DagError(fmt::format("line {}: unknown directive '{}'", line_no, key));
      }
    } else {
      throw DagError(fmt::format("line {}: malformed line '{}'", line_no, line));
    }
    if (end == text.size()) break;
  }

  std::string t = treatment ? *treatment : header_treatment.value_or("");
  std::string y = outcome ? *outcome : header_outcome.value_or("");
  if (t.empty()) throw DagError("no treatment given (use a 'treatment:' directive)");
  if (y.empty()) throw DagError("no outcome given (use an 'outcome:' directive)");

  // Name the edge that closes the first cycle, in file order.
  std::unordered_map<std::string, NodeId> index;
  for (NodeId v = 0; v < nodes.size(); ++v) index.emplace(nodes[v], v);
  std::vector<std::pair<NodeId, NodeId>> prefix;
  for (const auto& [from, to] : edges) {
    prefix.emplace_back(index.at(from), index.at(to));
    if (!is_acyclic(nodes.size(), prefix))
      throw DagError(fmt::format("cycle detected: edge {} -> {} closes a directed cycle", from, to));
  }
  return CausalDag::create(std::move(nodes), std::move(edges), t, y);
}

CausalDag load_dag(const std::string& path, std::optional<std::string> treatment,
                   std::optional<std::string> outcome) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DagError(fmt::format("cannot open DAG file '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dag(buffer.str(), std::move(treatment), std::move(outcome));
}

std::string serialize(const CausalDag& dag) {
  std::string out;
  out += fmt::format("treatment: {}\n", dag.treatment_name());
  out += fmt::format("outcome: {}\n", dag.outcome_name());
  // Edges alone reproduce node order only if first appearance in the edge
  // list matches it and no node is isolated; otherwise list nodes up front.
  std::vector<bool> seen(dag.size(), false);
  std::vector<NodeId> appearance;
  for (auto [f, t] : dag.edges()) {
    for (NodeId v : {f, t}) {
      if (!seen[v]) {
        seen[v] = true;
        appearance.push_back(v);
      }
    }
  }
  bool in_order = appearance.size() == dag.size();
  for (std::size_t i = 0; in_order && i < appearance.size(); ++i) in_order = appearance[i] == i;
  if (!in_order) {
    for (NodeId v = 0; v < dag.size(); ++v) out += fmt::format("node: {}\n", dag.name(v));
  }
  for (auto [f, t] : dag.edges()) out += fmt::format("{} -> {}\n", dag.name(f), dag.name(t));
  return out;
}

bool d_separated(const CausalDag& dag, NodeId x, NodeId y, const std::vector<NodeId>& z) {
  if (x >= dag.size() || y >= dag.size()) throw DagError("node id out of range");
  if (x == y) throw std::invalid_argument("d_separated: x and y must differ");
  std::vector<bool> in_z(dag.size(), false);
  for (NodeId v : z) {
    if (v >= dag.size()) throw DagError("node id out of range");
    in_z[v] = true;
  }
  if (in_z[x] || in_z[y])
    throw std::invalid_argument("d_separated: x and y must not be in the conditioning set");
  return !active_reachable(dag, x, in_z)[y];
}

bool d_separated(const CausalDag& dag, std::string_view x, std::string_view y,
                 const std::vector<std::string>& z) {
  return d_separated(dag, dag.id(x), dag.id(y), ids_of(dag, z));
}

bool backdoor_satisfied(const CausalDag& dag, const std::vector<std::string>& z) {
  auto ids = ids_of(dag, z);
  for (NodeId v : ids) {
    if (v == dag.treatment() || v == dag.outcome())
      throw std::invalid_argument("backdoor_satisfied: adjustment set contains treatment or outcome");
  }
  return backdoor_satisfied_ids(dag, sever_treatment(dag), dag.descendants(dag.treatment()), ids);
}

AdjustmentSet parent_adjustment_set(const CausalDag& dag) {
  AdjustmentSet set{.members = {}, .kind = AdjustmentKind::Parent};
  for (NodeId p : dag.parents(dag.treatment())) set.members.push_back(dag.name(p));
  return set;
}

std::vector<AdjustmentSet> minimal_backdoor_sets(const CausalDag& dag, std::size_t max_size) {
  const auto descendants = dag.descendants(dag.treatment());
  std::vector<NodeId> candidates;
  for (NodeId v = 0; v < dag.size(); ++v) {
    if (v != dag.treatment() && v != dag.outcome() && !descendants[v]) candidates.push_back(v);
  }
  const CausalDag severed = sever_treatment(dag);

  std::vector<std::vector<NodeId>> found;
  const std::size_t limit = std::min(max_size, candidates.size());
  for (std::size_t k = 0; k <= limit; ++k) {
    // Combinations of size k in lexicographic order of candidate positions.
    std::vector<std::size_t> pick(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      std::vector<NodeId> subset;
      subset.reserve(k);
      for (std::size_t i : pick) subset.push_back(candidates[i]);

      bool has_valid_subset = std::any_of(found.begin(), found.end(), [&](const auto& f) {
        return std::includes(subset.begin(), subset.end(), f.begin(), f.end());
      });
      if (!has_valid_subset && backdoor_satisfied_ids(dag, severed, descendants, subset))
        found.push_back(subset);

      // Advance to the next combination.
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == candidates.size() - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }

  std::vector<AdjustmentSet> result;
  for (const auto& ids : found) {
    AdjustmentSet set{.members = {}, .kind = AdjustmentKind::MinimalBackdoor};
    for (NodeId v : ids) set.members.push_back(dag.name(v));
    result.push_back(std::move(set));
  }
  return result;
}

}  // namespace causalaid
