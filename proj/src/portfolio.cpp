#include "sayo/portfolio.hpp"

#include <cmath>
#include <functional>

#include "sayo/error.hpp"

namespace sayo {

std::string to_string(Divisibility d) {
  switch (d) {
    case Divisibility::completely_divisible: return "completely_divisible";
    case Divisibility::incompletely_divisible: return "incompletely_divisible";
    case Divisibility::nested: return "nested";
  }
  return "unknown";
}

AssetPair make_pair_key(const std::string& a, const std::string& b) { return a < b ? AssetPair{a, b} : AssetPair{b, a}; }

PortfolioTree::PortfolioTree() {
  PortfolioNode root;
  root.composite = true;
  nodes_.emplace(kRoot, std::move(root));
}

const PortfolioNode& PortfolioTree::node(const std::string& id) const {
  const auto it = nodes_.find(id);
  require(it != nodes_.end(), ErrorCode::not_found, "unknown node '" + id + "'");
  return it->second;
}

PortfolioNode& PortfolioTree::mutable_node(const std::string& id) {
  const auto it = nodes_.find(id);
  require(it != nodes_.end(), ErrorCode::not_found, "unknown node '" + id + "'");
  return it->second;
}

namespace {
void check_new_node(const PortfolioTree& tree, const std::string& id, const std::string& parent, double weight) {
  require(!id.empty(), ErrorCode::parameter, "node id must not be empty");
  require(!tree.contains(id), ErrorCode::parameter, "node '" + id + "' already exists");
  require(std::isfinite(weight), ErrorCode::parameter, "weight must be finite");
  require(tree.node(parent).composite, ErrorCode::parameter, "parent '" + parent + "' is not a composite");
}
}  // namespace

void PortfolioTree::add_leaf(const std::string& id, const std::string& parent, double weight, LeafSource source) {
  check_new_node(*this, id, parent, weight);
  PortfolioNode n;
  n.id = id;
  n.parent = parent;
  n.weight = weight;
  n.source = std::move(source);
  nodes_.emplace(id, std::move(n));
  mutable_node(parent).children.insert(id);
}

void PortfolioTree::add_composite(const std::string& id, const std::string& parent, double weight) {
  check_new_node(*this, id, parent, weight);
  PortfolioNode n;
  n.id = id;
  n.parent = parent;
  n.weight = weight;
  n.composite = true;
  nodes_.emplace(id, std::move(n));
  mutable_node(parent).children.insert(id);
}

std::vector<std::string> PortfolioTree::remove(const std::string& id) {
  require(id != kRoot, ErrorCode::parameter, "cannot remove the root");
  const PortfolioNode& n = node(id);
  std::vector<std::string> removed;
  std::function<void(const std::string&)> collect = [&](const std::string& x) {
    removed.push_back(x);
    for (const auto& c : nodes_.at(x).children) collect(c);
  };
  collect(id);
  mutable_node(n.parent).children.erase(id);
  for (const auto& x : removed) nodes_.erase(x);
  return removed;
}

void PortfolioTree::set_weight(const std::string& id, double weight) {
  require(id != kRoot, ErrorCode::parameter, "the root has no weight");
  require(std::isfinite(weight), ErrorCode::parameter, "weight must be finite");
  mutable_node(id).weight = weight;
}

void PortfolioTree::set_source(const std::string& id, LeafSource source) {
  PortfolioNode& n = mutable_node(id);
  require(!n.composite, ErrorCode::parameter, "'" + id + "' is a composite and has no source");
  n.source = std::move(source);
}

std::vector<std::string> PortfolioTree::leaves() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_)
    if (!n.composite) out.push_back(id);
  return out;
}

std::vector<std::string> PortfolioTree::post_order() const {
  std::vector<std::string> out;
  std::function<void(const std::string&)> visit = [&](const std::string& x) {
    for (const auto& c : nodes_.at(x).children) visit(c);
    out.push_back(x);
  };
  visit(kRoot);
  return out;
}

std::vector<std::string> PortfolioTree::ancestors(const std::string& id) const {
  std::vector<std::string> out;
  std::string cur = id;
  while (cur != kRoot) {
    cur = node(cur).parent;
    out.push_back(cur);
  }
  return out;
}

std::size_t PortfolioTree::leaves_under(const std::string& id) const {
  const auto& n = nodes_.at(id);
  if (!n.composite) return 1;
  std::size_t total = 0;
  for (const auto& c : n.children) total += leaves_under(c);
  return total;
}

std::size_t PortfolioTree::dimensionality() const { return leaves_under(kRoot); }

std::vector<std::size_t> PortfolioTree::subproblem_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& c : nodes_.at(kRoot).children) sizes.push_back(leaves_under(c));
  return sizes;
}

double PortfolioTree::effective_weight(const std::string& id, bool normalized) const {
  const PortfolioNode& n = node(id);
  if (id == kRoot) return 1.0;
  if (!normalized) return n.weight;
  double total = 0.0;
  for (const auto& s : nodes_.at(n.parent).children) total += nodes_.at(s).weight;
  return total == 0.0 ? n.weight : n.weight / total;
}

std::vector<std::vector<std::string>> correlation_components(const std::vector<std::string>& leaves,
                                                             const CorrelationPairs& pairs) {
  std::map<std::string, std::string> parent;
  for (const auto& l : leaves) parent[l] = l;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    std::string& p = parent.at(x);
    if (p != x) p = find(p);
    return p;
  };
  for (const auto& [key, rho] : pairs) {
    if (rho == 0.0 || !parent.count(key.first) || !parent.count(key.second)) continue;
    const auto a = find(key.first), b = find(key.second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& l : leaves) groups[find(l)].push_back(l);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

CorrelationMatrix component_matrix(const std::vector<std::string>& component, const CorrelationPairs& pairs) {
  const auto m = static_cast<Eigen::Index>(component.size());
  Matrix c = Matrix::Identity(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto it = pairs.find(make_pair_key(component[static_cast<std::size_t>(i)], component[static_cast<std::size_t>(j)]));
      if (it != pairs.end()) c(i, j) = c(j, i) = it->second;
    }
  }
  return CorrelationMatrix(std::move(c));
}

Vector aggregate(const PortfolioTree& tree, const std::string& node_id, const std::map<std::string, Vector>& leaf_values,
                 bool normalized) {
  const PortfolioNode& n = tree.node(node_id);
  if (!n.composite) {
    const auto it = leaf_values.find(node_id);
    require(it != leaf_values.end(), ErrorCode::not_found, "no tuple for leaf '" + node_id + "'");
    return it->second;
  }
  Eigen::Index len = -1;
  Vector sum;
  for (const auto& c : n.children) {
    const Vector child = aggregate(tree, c, leaf_values, normalized);
    if (len < 0) {
      len = child.size();
      sum = Vector::Zero(len);
    }
    require(child.size() == len, ErrorCode::shape, "tuple lengths differ under '" + node_id + "'");
    require(std::isfinite(tree.node(c).weight), ErrorCode::parameter, "weight of '" + c + "' is not finite");
    sum += tree.effective_weight(c, normalized) * child;
  }
  if (len < 0) {
    const Eigen::Index n_any = leaf_values.empty() ? 0 : leaf_values.begin()->second.size();
    return Vector::Zero(n_any);
  }
  return sum;
}

Divisibility classify_divisibility(const PortfolioTree& tree, const CorrelationPairs& pairs) {
  require(tree.dimensionality() > 0, ErrorCode::empty, "portfolio is empty");
  bool grouped = false;
  for (const auto& top : tree.node(PortfolioTree::kRoot).children) {
    const PortfolioNode& t = tree.node(top);
    if (!t.composite) continue;
    grouped = true;
    for (const auto& c : t.children)
      if (tree.node(c).composite) return Divisibility::nested;
  }
  const auto leaves = tree.leaves();
  bool correlated = false;
  for (const auto& group : correlation_components(leaves, pairs)) correlated |= group.size() > 1;
  return grouped || correlated ? Divisibility::incompletely_divisible : Divisibility::completely_divisible;
}

}  // namespace sayo
