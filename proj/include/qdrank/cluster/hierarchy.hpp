#pragma once

// Divisive hierarchical query clustering.
//
// Every internal node fits its own truncated SVD (k = branch) on its members only, rotates the
// members' latent coordinates with varimax, and sends each member to the child matching its
// highest-scoring rotated axis. Recursion stops at `depth`; leaves with fewer than `min_leaf`
// members are pruned. A node's fit depends only on its own members and a seed derived from its
// path, so sibling subtrees are independent of each other.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdrank/cluster/representation.hpp"
#include "qdrank/errors.hpp"
#include "qdrank/linalg/sparse_matrix.hpp"
#include "qdrank/linalg/truncated_svd.hpp"
#include "qdrank/linalg/varimax.hpp"
#include "qdrank/random.hpp"

namespace qdrank::cluster {

struct ClusterParams {
  std::size_t depth = 3;      // D
  std::size_t branch = 7;     // B
  std::size_t min_leaf = 50;  // E
  CountTransform transform = CountTransform::raw;
  linalg::SvdOptions svd;
  linalg::VarimaxOptions varimax;
  std::uint64_t seed = 0;

  friend bool operator==(const ClusterParams& a, const ClusterParams& b) {
    return a.depth == b.depth && a.branch == b.branch && a.min_leaf == b.min_leaf && a.transform == b.transform &&
           a.svd.oversample == b.svd.oversample && a.svd.power_iters == b.svd.power_iters &&
           a.varimax.max_iters == b.varimax.max_iters && a.varimax.tol == b.varimax.tol && a.seed == b.seed;
  }
};

/// Cluster paths use 1-based branch indices: {2, 1} is "2.1".
inline std::string path_name(const std::vector<int>& path) {
  std::string s;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(path[i]);
  }
  return s;
}

struct ClusterNode {
  std::vector<int> path;
  std::size_t depth = 0;
  std::optional<linalg::SubspaceModel> subspace;  // present on internal nodes only
  std::vector<ClusterNode> children;
  std::size_t member_count = 0;
  bool pruned = false;
  bool degenerate = false;  // members could not be subdivided (all-zero or too few active features)

  std::string name() const { return path_name(path); }
  bool is_leaf() const { return children.empty(); }
};

/// One cluster path per level reached, each extending the previous one: {"1", "1.1", "1.1.2"}.
using ClusterAssignment = std::vector<std::string>;

struct ClusterTree {
  ClusterParams params;
  std::size_t input_dim = 0;
  ClusterNode root;
};

namespace detail {

inline std::size_t argmax_first(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

inline void finish_leaf(ClusterNode& node, const ClusterParams& params) {
  node.children.clear();
  node.subspace.reset();
  node.pruned = node.member_count < params.min_leaf;
}

}  // namespace detail

/// Child slot (0-based) a vector is routed to at an internal node.
inline std::size_t route(const ClusterNode& node, const QueryVector& transformed) {
  return detail::argmax_first(linalg::project(*node.subspace, transformed));
}

/// Fits the subtree rooted at `path` from the given members (indices into `vectors`).
/// `assignments`, if non-null, receives the path of every non-pruned cluster each member lands in.
inline ClusterNode fit_node(const std::vector<QueryVector>& vectors, const std::vector<std::size_t>& members,
                            const std::vector<int>& path, const ClusterParams& params,
                            std::vector<ClusterAssignment>* assignments = nullptr) {
  ClusterNode node;
  node.path = path;
  node.depth = path.size();
  node.member_count = members.size();

  auto record = [&](const ClusterNode& n) {
    if (!assignments || n.pruned || n.path.empty()) return;
    for (auto m : members) (*assignments)[m].push_back(n.name());
  };

  if (node.depth >= params.depth || members.size() < params.branch) {
    detail::finish_leaf(node, params);
    record(node);
    return node;
  }

  std::vector<QueryVector> rows;
  rows.reserve(members.size());
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().dim;
  for (auto m : members) rows.push_back(apply_transform(vectors[m], params.transform));
  const auto x = linalg::SparseMatrix::from_rows(dim, rows);

  linalg::SubspaceModel model;
  try {
    if (dim < params.branch) throw DegenerateInputError("feature space narrower than branch count");
    model = linalg::truncated_svd(x, params.branch, params.svd, derive_seed(params.seed, "node:" + node.name()));
  } catch (const DegenerateInputError&) {
    node.degenerate = true;
    detail::finish_leaf(node, params);
    record(node);
    return node;
  }
  const auto rot = linalg::varimax(linalg::project_rows_unrotated(model, x), params.varimax);
  model.rotation = rot.rotation;
  node.subspace = std::move(model);
  record(node);

  std::vector<std::vector<std::size_t>> groups(params.branch);
  for (std::size_t r = 0; r < members.size(); ++r) groups[route(node, rows[r])].push_back(members[r]);

  for (std::size_t b = 0; b < params.branch; ++b) {
    auto child_path = path;
    child_path.push_back(static_cast<int>(b + 1));
    node.children.push_back(fit_node(vectors, groups[b], child_path, params, assignments));
  }
  return node;
}

inline void validate(const ClusterParams& p) {
  if (p.depth < 1) throw ConfigError("cluster depth must be >= 1");
  if (p.branch < 2) throw ConfigError("cluster branch must be >= 2");
  if (p.min_leaf < 1) throw ConfigError("cluster min_leaf must be >= 1");
}

struct FitResult {
  ClusterTree tree;
  std::vector<ClusterAssignment> assignments;  // aligned with the input vectors
};

inline FitResult fit_hierarchy(const std::vector<QueryVector>& vectors, const ClusterParams& params) {
  validate(params);
  if (vectors.empty()) throw DataError("fit_hierarchy: no query vectors");
  const std::size_t dim = vectors.front().dim;
  for (const auto& v : vectors)
    if (v.dim != dim) throw DimensionError("fit_hierarchy: query vectors differ in dimension");

  FitResult out;
  out.tree.params = params;
  out.tree.input_dim = dim;
  out.assignments.resize(vectors.size());
  std::vector<std::size_t> all(vectors.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  out.tree.root = fit_node(vectors, all, {}, params, &out.assignments);
  return out;
}

/// Walks root to leaf, descending into the child of the highest rotated coordinate
/// (ties to the smallest index); stops at leaves and before pruned nodes.
inline ClusterAssignment assign(const QueryVector& v, const ClusterTree& tree) {
  if (v.dim != tree.input_dim) throw DimensionError("assign: vector dimension does not match tree");
  const QueryVector x = apply_transform(v, tree.params.transform);
  ClusterAssignment out;
  const ClusterNode* node = &tree.root;
  while (!node->is_leaf()) {
    const ClusterNode& child = node->children[route(*node, x)];
    if (child.pruned) break;
    out.push_back(child.name());
    node = &child;
  }
  return out;
}

/// All non-pruned cluster paths below the root, breadth-first.
inline std::vector<std::string> cluster_paths(const ClusterTree& tree) {
  std::vector<std::string> out;
  std::deque<const ClusterNode*> queue{&tree.root};
  while (!queue.empty()) {
    const ClusterNode* n = queue.front();
    queue.pop_front();
    if (!n->path.empty() && !n->pruned) out.push_back(n->name());
    for (const auto& c : n->children) queue.push_back(&c);
  }
  return out;
}

inline const ClusterNode* find_node(const ClusterTree& tree, const std::string& name) {
  std::deque<const ClusterNode*> queue{&tree.root};
  while (!queue.empty()) {
    const ClusterNode* n = queue.front();
    queue.pop_front();
    if (n->name() == name) return n;
    for (const auto& c : n->children) queue.push_back(&c);
  }
  return nullptr;
}

inline std::size_t count_nodes(const ClusterNode& n) {
  std::size_t c = 1;
  for (const auto& ch : n.children) c += count_nodes(ch);
  return c;
}

}  // namespace qdrank::cluster
