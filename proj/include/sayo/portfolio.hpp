#pragma once

// The nested portfolio model: a tree of weighted leaves (assets) and
// composites (sub-portfolios). The root composite has the empty id.
// Children are kept in id order and every sum over children runs in that
// order, so aggregates depend only on the tree, never on edit history.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sayo/distribution.hpp"
#include "sayo/sampling.hpp"

namespace sayo {

using LeafSource = std::variant<MarginalDistribution, std::shared_ptr<const PriceHistory>>;

struct PortfolioNode {
  std::string id;
  std::string parent;
  double weight = 1.0;
  bool composite = false;
  LeafSource source = dist::Constant{0.0};  // leaves only
  std::set<std::string> children;           // composites only
};

enum class Divisibility { completely_divisible, incompletely_divisible, nested };

std::string to_string(Divisibility d);

// Unordered pair of asset ids stored with first < second.
using AssetPair = std::pair<std::string, std::string>;
using CorrelationPairs = std::map<AssetPair, double>;

AssetPair make_pair_key(const std::string& a, const std::string& b);

class PortfolioTree {
 public:
  static inline const std::string kRoot{};

  PortfolioTree();

  bool contains(const std::string& id) const { return nodes_.count(id) != 0; }
  const PortfolioNode& node(const std::string& id) const;
  const std::map<std::string, PortfolioNode>& nodes() const { return nodes_; }

  void add_leaf(const std::string& id, const std::string& parent, double weight, LeafSource source);
  void add_composite(const std::string& id, const std::string& parent, double weight);
  // Removes the node and its subtree; returns the removed ids.
  std::vector<std::string> remove(const std::string& id);
  void set_weight(const std::string& id, double weight);
  void set_source(const std::string& id, LeafSource source);

  std::vector<std::string> leaves() const;
  // Children before parents; ends with the root.
  std::vector<std::string> post_order() const;
  std::vector<std::string> ancestors(const std::string& id) const;

  // M: number of leaves.
  std::size_t dimensionality() const;
  // m_i for each of the k top-level sub-problems (top-level children).
  std::vector<std::size_t> subproblem_sizes() const;

  // Multiplier applied to a child inside its parent; with `normalized` the
  // sibling weights are rescaled to sum to one (unless they sum to zero).
  double effective_weight(const std::string& id, bool normalized) const;

 private:
  PortfolioNode& mutable_node(const std::string& id);
  std::size_t leaves_under(const std::string& id) const;

  std::map<std::string, PortfolioNode> nodes_;
};

// Groups of leaves linked by non-zero correlations, each sorted by id.
std::vector<std::vector<std::string>> correlation_components(const std::vector<std::string>& leaves,
                                                             const CorrelationPairs& pairs);
CorrelationMatrix component_matrix(const std::vector<std::string>& component, const CorrelationPairs& pairs);

// Weighted elementwise sum below `node_id`, bottom-up through composites.
Vector aggregate(const PortfolioTree& tree, const std::string& node_id, const std::map<std::string, Vector>& leaf_values,
                 bool normalized = false);

Divisibility classify_divisibility(const PortfolioTree& tree, const CorrelationPairs& pairs);

}  // namespace sayo
