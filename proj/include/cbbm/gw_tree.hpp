#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "cbbm/offspring.hpp"

namespace cbbm {

using NodeId = std::uint32_t;
inline constexpr NodeId kRootParent = std::numeric_limits<NodeId>::max();

/// Continuous-time Galton-Watson genealogy up to a horizon t.
///
/// Node ids are assigned in creation order, so a parent id is always smaller
/// than its children's ids and siblings occupy a contiguous id range. Leaves
/// are the particles alive at the horizon; leaf index k refers to the k-th
/// leaf in increasing node-id order. Immutable once built.
class GwTree {
 public:
  /// One node for hand-assembled trees; `split` is ignored for leaves.
  struct NodeSpec {
    NodeId parent = kRootParent;
    double birth = 0.0;
    double split = 0.0;
  };

  /// Assemble a tree from explicit nodes (node 0 is the root). Children of a
  /// node must have contiguous ids larger than the parent. A node without
  /// children is a leaf and lives to the horizon.
  static GwTree from_nodes(double horizon, std::span<const NodeSpec> nodes,
                           std::uint64_t seed = 0);

  double horizon() const noexcept { return horizon_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t node_count() const noexcept { return parent_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }

  NodeId parent(NodeId v) const { return parent_[v]; }
  double birth(NodeId v) const { return birth_[v]; }
  /// Split time, or the horizon for a leaf.
  double split(NodeId v) const { return split_[v]; }
  bool is_leaf(NodeId v) const { return child_count_[v] == 0; }
  NodeId first_child(NodeId v) const { return first_child_[v]; }
  std::uint32_t child_count(NodeId v) const { return child_count_[v]; }

  std::span<const NodeId> leaves() const noexcept { return leaves_; }
  /// Node id of leaf index k; throws ArgumentError when out of range.
  NodeId leaf_node(std::size_t k) const;

 private:
  friend GwTree sample_tree_impl(const OffspringDistribution&, double, std::uint64_t,
                                 std::size_t);
  GwTree() = default;
  void finish();

  double horizon_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<NodeId> parent_;
  std::vector<double> birth_;
  std::vector<double> split_;
  std::vector<NodeId> first_child_;
  std::vector<std::uint32_t> child_count_;
  std::vector<NodeId> leaves_;
};

struct TreeOptions {
  /// Hard cap on stored nodes; exceeding it raises ResourceLimitError.
  std::size_t max_nodes = std::size_t{1} << 27;
};

/// Sample the genealogy with Exp(1) lifetimes and i.i.d. offspring counts.
/// Node v draws its lifetime and offspring count from tree-stream block v,
/// so the result is a pure function of (dist, t, seed).
GwTree sample_tree(const OffspringDistribution& dist, double t, std::uint64_t seed,
                   const TreeOptions& options = {});

/// Split time of the most recent common ancestor of leaves k and l (t if k == l).
double overlap(const GwTree& tree, std::size_t k, std::size_t l);

/// Symmetric matrix of pairwise overlaps, row-major over leaf indices.
class OverlapMatrix {
 public:
  OverlapMatrix(std::size_t n, std::vector<double> values);
  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t k, std::size_t l) const { return q_[k * n_ + l]; }
  std::span<const double> values() const noexcept { return q_; }

 private:
  std::size_t n_;
  std::vector<double> q_;
};

inline constexpr std::size_t kDefaultPairwiseCap = 4096;

/// All pairwise overlaps. Quadratic; refuses trees above `max_leaves`.
OverlapMatrix overlap_matrix(const GwTree& tree, std::size_t max_leaves = kDefaultPairwiseCap);

/// Debug dump: one line per node, "node_id parent_id birth split" (parent -1 for the root).
void write_tree_dump(std::ostream& out, const GwTree& tree);

}  // namespace cbbm
