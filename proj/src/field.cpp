#include "cbbm/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "cbbm/centering.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/rng.hpp"

namespace cbbm {

BbmField::BbmField(TreePtr tree, std::vector<double> leaf_positions,
                   std::vector<double> node_positions, std::optional<std::uint64_t> seed)
    : tree_(std::move(tree)),
      leaves_(std::move(leaf_positions)),
      nodes_(std::move(node_positions)),
      seed_(seed) {
  if (!tree_) throw ArgumentError("field needs a tree");
  if (leaves_.size() != tree_->leaf_count()) throw ArgumentError("one position per leaf required");
  if (!nodes_.empty() && nodes_.size() != tree_->node_count()) {
    throw ArgumentError("one path position per node required");
  }
}

BbmField BbmField::from_node_positions(TreePtr tree, std::vector<double> node_positions) {
  if (!tree) throw ArgumentError("field needs a tree");
  if (node_positions.size() != tree->node_count()) {
    throw ArgumentError("one position per node required");
  }
  std::vector<double> leaves;
  leaves.reserve(tree->leaf_count());
  for (const NodeId v : tree->leaves()) leaves.push_back(node_positions[v]);
  return BbmField(std::move(tree), std::move(leaves), std::move(node_positions));
}

CorrelatedField::CorrelatedField(BbmField x, std::vector<double> z, double rho)
    : x_(std::move(x)), z_(std::move(z)), rho_(rho) {
  if (!(std::abs(rho_) <= 1.0)) throw ArgumentError("rho must lie in [-1, 1]");
  const auto xs = x_.positions();
  y_.resize(xs.size());
  if (std::abs(rho_) == 1.0) {
    z_.clear();
    for (std::size_t k = 0; k < xs.size(); ++k) y_[k] = rho_ * xs[k];
    return;
  }
  if (z_.size() != xs.size()) throw ArgumentError("independent field size mismatch");
  const double w = std::sqrt(1.0 - rho_ * rho_);
  for (std::size_t k = 0; k < xs.size(); ++k) y_[k] = rho_ * xs[k] + w * z_[k];
}

namespace {

double edge_length(const GwTree& tree, NodeId v) { return tree.split(v) - tree.birth(v); }

// Walks nodes in id order (parents first) accumulating edge increments.
// Fills X node positions and, when `z_nodes` is non-null, Z node positions.
void accumulate(const GwTree& tree, std::uint64_t seed, std::vector<double>& x_nodes,
                std::vector<double>* z_nodes) {
  const std::size_t n = tree.node_count();
  x_nodes.resize(n);
  if (z_nodes) z_nodes->resize(n);
  for (NodeId v = 0; v < n; ++v) {
    const double scale = std::sqrt(edge_length(tree, v));
    const auto [gx, gz] = normal_pair(random_block(seed, Stream::field, v));
    const NodeId p = tree.parent(v);
    const double x0 = p == kRootParent ? 0.0 : x_nodes[p];
    x_nodes[v] = x0 + scale * gx;
    if (z_nodes) {
      const double z0 = p == kRootParent ? 0.0 : (*z_nodes)[p];
      (*z_nodes)[v] = z0 + scale * gz;
    }
  }
}

std::vector<double> gather_leaves(const GwTree& tree, const std::vector<double>& nodes) {
  std::vector<double> out;
  out.reserve(tree.leaf_count());
  for (const NodeId v : tree.leaves()) out.push_back(nodes[v]);
  return out;
}

}  // namespace

BbmField sample_field(TreePtr tree, std::uint64_t seed, bool keep_paths) {
  if (!tree) throw ArgumentError("field needs a tree");
  std::vector<double> nodes;
  accumulate(*tree, seed, nodes, nullptr);
  auto leaves = gather_leaves(*tree, nodes);
  if (!keep_paths) nodes = {};
  return BbmField(std::move(tree), std::move(leaves), std::move(nodes), seed);
}

CorrelatedField sample_correlated_pair(TreePtr tree, double rho, std::uint64_t seed,
                                       bool keep_paths) {
  if (!(std::abs(rho) <= 1.0)) throw ArgumentError("rho must lie in [-1, 1]");
  if (!tree) throw ArgumentError("field needs a tree");
  std::vector<double> x_nodes;
  std::vector<double> z_nodes;
  const bool independent = std::abs(rho) < 1.0;
  accumulate(*tree, seed, x_nodes, independent ? &z_nodes : nullptr);
  auto x_leaves = gather_leaves(*tree, x_nodes);
  std::vector<double> z_leaves;
  if (independent) z_leaves = gather_leaves(*tree, z_nodes);
  if (!keep_paths) x_nodes = {};
  BbmField x(tree, std::move(x_leaves), std::move(x_nodes), seed);
  return CorrelatedField(std::move(x), std::move(z_leaves), rho);
}

EnvelopeResult envelope_violations(const BbmField& field, const EnvelopeSpec& spec) {
  if (!field.has_paths()) {
    throw StateError("envelope check needs a field sampled with keep_paths");
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 0.5)) throw ArgumentError("gamma must lie in (0, 1/2)");
  if (!(spec.r >= 0.0)) throw ArgumentError("r must be >= 0");
  if (!(spec.grid_step > 0.0)) throw ArgumentError("grid step must be positive");
  const GwTree& tree = field.tree();
  const double t = tree.horizon();
  if (!(t > 2.0 * spec.r)) throw ArgumentError("envelope window [r, t - r] is empty (t <= 2r)");

  const double m = m_of_t(t);
  const double lo = spec.r;
  const double hi = t - spec.r;
  auto envelope = [&](double s) {
    return s / t * m + std::pow(std::min(s, t - s), spec.gamma);
  };
  auto exceeds = [&](double s, double x) { return s >= lo && s <= hi && x > envelope(s); };

  const auto nodes = field.node_positions();
  const auto fill_seed = field.seed();
  std::vector<std::uint8_t> violated(tree.node_count(), 0);
  for (NodeId v = 0; v < tree.node_count(); ++v) {
    const NodeId p = tree.parent(v);
    if (p != kRootParent && violated[p]) {
      violated[v] = 1;
      continue;
    }
    const double s0 = tree.birth(v);
    const double s1 = tree.split(v);
    const double x0 = p == kRootParent ? 0.0 : nodes[p];
    const double x1 = nodes[v];
    bool bad = exceeds(s0, x0) || exceeds(s1, x1);
    if (!bad && s1 > lo && s0 < hi) {
      // Interior grid points on the global lattice j * step.
      StreamRng rng(fill_seed.value_or(0), Stream::bridge_fill, std::uint64_t{v} << 24);
      double s_prev = s0;
      double x_prev = x0;
      for (double s = (std::floor(s0 / spec.grid_step) + 1.0) * spec.grid_step; s < s1 && !bad;
           s += spec.grid_step) {
        double x;
        if (fill_seed) {
          const double span = s1 - s_prev;
          const double mean = x_prev + (s - s_prev) / span * (x1 - x_prev);
          const double var = (s - s_prev) * (s1 - s) / span;
          x = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
        } else {
          x = x0 + (s - s0) / (s1 - s0) * (x1 - x0);
        }
        bad = exceeds(s, x);
        s_prev = s;
        x_prev = x;
      }
    }
    violated[v] = bad ? 1 : 0;
  }

  EnvelopeResult result;
  result.leaves = tree.leaf_count();
  result.grid_step = spec.grid_step;
  for (const NodeId v : tree.leaves()) result.violating_leaves += violated[v];
  return result;
}

MaxPosition max_position(std::span<const double> positions) {
  if (positions.empty()) throw ArgumentError("max of an empty field");
  MaxPosition best{positions[0], 0};
  for (std::size_t k = 1; k < positions.size(); ++k) {
    if (positions[k] > best.value) best = {positions[k], k};
  }
  return best;
}

namespace {

constexpr char kFieldMagic[8] = {'C', 'B', 'B', 'M', 'F', 'L', 'D', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ArgumentError("truncated field dump");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_field_binary(std::ostream& out, const CorrelatedField& field) {
  out.write(kFieldMagic, sizeof kFieldMagic);
  put_le(out, field.horizon());
  put_le(out, static_cast<std::uint64_t>(field.size()));
  put_le(out, field.rho());
  for (const double x : field.x()) put_le(out, x);
  for (const double y : field.y()) put_le(out, y);
}

FieldDump read_field_binary(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kFieldMagic, 8) != 0) {
    throw ArgumentError("not a field dump (bad magic)");
  }
  FieldDump dump;
  dump.t = get_le<double>(in);
  const auto n = get_le<std::uint64_t>(in);
  dump.rho = get_le<double>(in);
  dump.x.resize(n);
  dump.y.resize(n);
  for (auto& x : dump.x) x = get_le<double>(in);
  for (auto& y : dump.y) y = get_le<double>(in);
  return dump;
}

}  // namespace cbbm
