#include "cbbm/gw_tree.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "cbbm/errors.hpp"
#include "cbbm/rng.hpp"

namespace cbbm {

GwTree sample_tree_impl(const OffspringDistribution& dist, double t, std::uint64_t seed,
                        std::size_t max_nodes) {
  GwTree tree;
  tree.horizon_ = t;
  tree.seed_ = seed;

  // Expected population e^{(mean - 1) t}; refuse before allocating when even
  // the mean would not fit.
  const double growth = dist.mean_children() - 1.0;
  const double log_expected = growth * t;
  if (log_expected > std::log(static_cast<double>(max_nodes))) {
    throw ResourceLimitError("projected population e^" + std::to_string(log_expected) +
                             " exceeds the node budget of " + std::to_string(max_nodes));
  }
  if (growth > 0.0) {
    const double expected_nodes = std::exp(log_expected) * (1.0 + 1.0 / growth);
    const auto reserve = static_cast<std::size_t>(
        std::min(expected_nodes * 1.25, static_cast<double>(max_nodes)));
    tree.parent_.reserve(reserve);
    tree.birth_.reserve(reserve);
    tree.split_.reserve(reserve);
    tree.first_child_.reserve(reserve);
    tree.child_count_.reserve(reserve);
  }

  auto push_node = [&](NodeId parent, double birth) {
    if (tree.parent_.size() >= max_nodes) {
      throw ResourceLimitError("tree exceeded the node budget of " + std::to_string(max_nodes) +
                               " nodes at horizon " + std::to_string(t));
    }
    tree.parent_.push_back(parent);
    tree.birth_.push_back(birth);
    tree.split_.push_back(t);
    tree.first_child_.push_back(0);
    tree.child_count_.push_back(0);
    return static_cast<NodeId>(tree.parent_.size() - 1);
  };

  std::vector<NodeId> stack;
  stack.push_back(push_node(kRootParent, 0.0));
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const auto bits = random_block(seed, Stream::tree, v);
    const double split = tree.birth_[v] - std::log(unit_open(bits[0]));
    if (split >= t) continue;  // alive at the horizon
    const int children = dist.sample(unit_open(bits[1]));
    tree.split_[v] = split;
    const auto first = static_cast<NodeId>(tree.parent_.size());
    for (int c = 0; c < children; ++c) push_node(v, split);
    tree.first_child_[v] = first;
    tree.child_count_[v] = static_cast<std::uint32_t>(children);
    for (int c = children - 1; c >= 0; --c) stack.push_back(first + static_cast<NodeId>(c));
  }
  tree.finish();
  return tree;
}

void GwTree::finish() {
  leaves_.clear();
  for (NodeId v = 0; v < parent_.size(); ++v) {
    if (child_count_[v] == 0) {
      leaves_.push_back(v);
      split_[v] = horizon_;
    }
  }
}

GwTree GwTree::from_nodes(double horizon, std::span<const NodeSpec> nodes, std::uint64_t seed) {
  if (nodes.empty()) throw ArgumentError("tree needs at least a root");
  if (!(horizon >= 0.0)) throw ArgumentError("horizon must be >= 0");
  GwTree tree;
  tree.horizon_ = horizon;
  tree.seed_ = seed;
  const std::size_t n = nodes.size();
  tree.parent_.resize(n);
  tree.birth_.resize(n);
  tree.split_.resize(n);
  tree.first_child_.assign(n, 0);
  tree.child_count_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = nodes[i];
    if (i == 0) {
      if (spec.parent != kRootParent || spec.birth != 0.0) {
        throw ArgumentError("node 0 must be the root with birth time 0");
      }
    } else {
      if (spec.parent == kRootParent || spec.parent >= i) {
        throw ArgumentError("node " + std::to_string(i) + " must have an earlier parent");
      }
      const NodeId p = spec.parent;
      if (tree.child_count_[p] == 0) {
        tree.first_child_[p] = static_cast<NodeId>(i);
      } else if (tree.first_child_[p] + tree.child_count_[p] != i) {
        throw ArgumentError("children of node " + std::to_string(p) + " are not contiguous");
      }
      ++tree.child_count_[p];
      if (spec.birth != nodes[p].split) {
        throw ArgumentError("child birth must equal the parent's split time");
      }
    }
    tree.parent_[i] = spec.parent;
    tree.birth_[i] = spec.birth;
    tree.split_[i] = spec.split;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.child_count_[i] > 0 &&
        !(tree.split_[i] > tree.birth_[i] && tree.split_[i] <= horizon)) {
      throw ArgumentError("internal node " + std::to_string(i) + " has an invalid split time");
    }
  }
  tree.finish();
  return tree;
}

NodeId GwTree::leaf_node(std::size_t k) const {
  if (k >= leaves_.size()) {
    throw ArgumentError("unknown leaf " + std::to_string(k) + " (tree has " +
                        std::to_string(leaves_.size()) + " leaves)");
  }
  return leaves_[k];
}

GwTree sample_tree(const OffspringDistribution& dist, double t, std::uint64_t seed,
                   const TreeOptions& options) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ArgumentError("horizon t must be finite and >= 0");
  return sample_tree_impl(dist, t, seed, options.max_nodes);
}

namespace {

double overlap_nodes(const GwTree& tree, NodeId a, NodeId b) {
  if (a == b) return tree.horizon();
  while (a != b) {
    if (a > b) {
      a = tree.parent(a);
    } else {
      b = tree.parent(b);
    }
  }
  return tree.split(a);
}

}  // namespace

double overlap(const GwTree& tree, std::size_t k, std::size_t l) {
  return overlap_nodes(tree, tree.leaf_node(k), tree.leaf_node(l));
}

OverlapMatrix::OverlapMatrix(std::size_t n, std::vector<double> values)
    : n_(n), q_(std::move(values)) {
  if (q_.size() != n_ * n_) throw ArgumentError("overlap matrix size mismatch");
}

OverlapMatrix overlap_matrix(const GwTree& tree, std::size_t max_leaves) {
  const std::size_t n = tree.leaf_count();
  if (n > max_leaves) {
    throw ResourceLimitError("overlap matrix over " + std::to_string(n) +
                             " leaves exceeds the pairwise cap of " +
                             std::to_string(max_leaves) + "; use per-pair overlap queries");
  }
  std::vector<double> q(n * n);
  const auto leaves = tree.leaves();
  for (std::size_t k = 0; k < n; ++k) {
    q[k * n + k] = tree.horizon();
    for (std::size_t l = k + 1; l < n; ++l) {
      const double d = overlap_nodes(tree, leaves[k], leaves[l]);
      q[k * n + l] = d;
      q[l * n + k] = d;
    }
  }
  return OverlapMatrix(n, std::move(q));
}

void write_tree_dump(std::ostream& out, const GwTree& tree) {
  out << "# horizon " << tree.horizon() << " seed " << tree.seed() << '\n';
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    const long long parent =
        tree.parent(v) == kRootParent ? -1LL : static_cast<long long>(tree.parent(v));
    out << v << ' ' << parent << ' ' << tree.birth(v) << ' ' << tree.split(v) << '\n';
  }
}

}  // namespace cbbm
