#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace causalaid {

class DagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NodeId = std::size_t;

// Immutable causal DAG over named variables with designated treatment and
// outcome. Node order is first-appearance order; edge order is insertion
// order. Both are preserved by serialize().
class CausalDag {
 public:
  // Validates acyclicity, self-edges, duplicate edges and the
  // treatment/outcome designation.
  static CausalDag create(std::vector<std::string> nodes,
                          std::vector<std::pair<std::string, std::string>> edges,
                          std::string treatment, std::string outcome);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  NodeId treatment() const { return treatment_; }
  NodeId outcome() const { return outcome_; }
  const std::string& treatment_name() const { return nodes_[treatment_]; }
  const std::string& outcome_name() const { return nodes_[outcome_]; }

  const std::string& name(NodeId id) const { return nodes_.at(id); }
  // Throws DagError for unknown names.
  NodeId id(std::string_view name) const;
  std::optional<NodeId> find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  const std::vector<NodeId>& parents(NodeId id) const { return parents_[id]; }
  const std::vector<NodeId>& children(NodeId id) const { return children_[id]; }

  // Strict descendants / ancestors (the node itself excluded).
  std::vector<bool> descendants(NodeId id) const;
  std::vector<bool> ancestors(NodeId id) const;
  // Topological order, ties broken by node order.
  std::vector<NodeId> topological_order() const;

  // Same graph with a different treatment/outcome designation.
  CausalDag with_roles(std::string_view treatment, std::string_view outcome) const;

  friend bool operator==(const CausalDag&, const CausalDag&) = default;

 private:
  CausalDag() = default;

  std::vector<std::string> nodes_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> parents_;
  std::vector<std::vector<NodeId>> children_;
  NodeId treatment_ = 0;
  NodeId outcome_ = 0;
};

enum class AdjustmentKind { Parent, MinimalBackdoor };

struct AdjustmentSet {
  // Member names in DAG node order.
  std::vector<std::string> members;
  AdjustmentKind kind = AdjustmentKind::Parent;

  friend bool operator==(const AdjustmentSet&, const AdjustmentSet&) = default;
};

// Parses the edge-list format:
//
//   # comment
//   treatment: Cash
//   outcome: GAM
//   node: Isolated
//   A -> B
//
// Explicit treatment/outcome arguments take precedence over header
// directives. Errors name the offending line.
CausalDag parse_dag(std::string_view text,
                    std::optional<std::string> treatment = std::nullopt,
                    std::optional<std::string> outcome = std::nullopt);
CausalDag load_dag(const std::string& path,
                   std::optional<std::string> treatment = std::nullopt,
                   std::optional<std::string> outcome = std::nullopt);

// Inverse of parse_dag: header directives, `node:` lines for isolated
// nodes, then edges in insertion order.
std::string serialize(const CausalDag& dag);

// Reachability (Bayes-ball) d-separation test. x and y must differ and must
// not be members of z.
bool d_separated(const CausalDag& dag, std::string_view x, std::string_view y,
                 const std::vector<std::string>& z);
bool d_separated(const CausalDag& dag, NodeId x, NodeId y,
                 const std::vector<NodeId>& z);

// (a) no member of z descends from the treatment, and (b) z d-separates
// treatment and outcome once the treatment's outgoing edges are removed.
bool backdoor_satisfied(const CausalDag& dag, const std::vector<std::string>& z);

AdjustmentSet parent_adjustment_set(const CausalDag& dag);

// Inclusion-minimal backdoor sets of at most max_size members drawn from
// nodes \ {T, Y, descendants(T)}, ordered by size then by the
// lexicographic order of their (node-ordered) member lists.
std::vector<AdjustmentSet> minimal_backdoor_sets(const CausalDag& dag,
                                                 std::size_t max_size);

}  // namespace causalaid
