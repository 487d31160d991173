#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cbbm/gw_tree.hpp"

namespace cbbm {

using TreePtr = std::shared_ptr<const GwTree>;

/// Brownian positions on a GW tree.
///
/// Node v carries the increment sqrt(split(v) - birth(v)) * N_v over its edge,
/// with N_v drawn from field-stream block v. The first normal of the block
/// drives X, the second drives the independent field Z of a correlated pair,
/// so a single field and the X part of a pair built from the same seed agree.
class BbmField {
 public:
  BbmField(TreePtr tree, std::vector<double> leaf_positions,
           std::vector<double> node_positions = {}, std::optional<std::uint64_t> seed = {});

  /// Field from explicit end-of-edge positions for every node. Intra-edge
  /// paths of such a field are linear interpolations.
  static BbmField from_node_positions(TreePtr tree, std::vector<double> node_positions);

  const GwTree& tree() const noexcept { return *tree_; }
  const TreePtr& tree_ptr() const noexcept { return tree_; }
  double horizon() const noexcept { return tree_->horizon(); }
  std::size_t size() const noexcept { return leaves_.size(); }
  std::span<const double> positions() const noexcept { return leaves_; }

  bool has_paths() const noexcept { return !nodes_.empty(); }
  /// Position at the end of each node's edge (split time, or t for leaves).
  std::span<const double> node_positions() const noexcept { return nodes_; }
  /// Seed used for stochastic intra-edge fills; empty for pinned fields.
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

 private:
  TreePtr tree_;
  std::vector<double> leaves_;
  std::vector<double> nodes_;
  std::optional<std::uint64_t> seed_;
};

/// The pair (X, Y) with Y = rho X + sqrt(1 - rho^2) Z on one tree.
/// For |rho| = 1, Z is not sampled and Y = rho X exactly.
class CorrelatedField {
 public:
  CorrelatedField(BbmField x, std::vector<double> z, double rho);

  const BbmField& x_field() const noexcept { return x_; }
  const GwTree& tree() const noexcept { return x_.tree(); }
  double horizon() const noexcept { return x_.horizon(); }
  std::size_t size() const noexcept { return x_.size(); }
  double rho() const noexcept { return rho_; }

  std::span<const double> x() const noexcept { return x_.positions(); }
  std::span<const double> y() const noexcept { return y_; }
  /// Independent component; empty when |rho| = 1.
  std::span<const double> z() const noexcept { return z_; }
  bool has_independent_part() const noexcept { return !z_.empty(); }

 private:
  BbmField x_;
  std::vector<double> z_;
  std::vector<double> y_;
  double rho_;
};

BbmField sample_field(TreePtr tree, std::uint64_t seed, bool keep_paths = false);

CorrelatedField sample_correlated_pair(TreePtr tree, double rho, std::uint64_t seed,
                                       bool keep_paths = false);

/// Envelope U(s) = (s/t) m(t) + (min(s, t-s))^gamma checked on [r, t - r].
struct EnvelopeSpec {
  double gamma = 0.4;
  double r = 1.0;
  /// Spacing of intra-edge check points (edge endpoints are always checked).
  double grid_step = 0.05;
};

struct EnvelopeResult {
  std::size_t violating_leaves = 0;
  std::size_t leaves = 0;
  double grid_step = 0.0;
};

/// Count leaves whose ancestral path exceeds the envelope somewhere on the
/// check grid inside [r, t - r]. Sampled fields fill edges with Brownian
/// bridges from the bridge-fill stream; pinned fields interpolate linearly.
EnvelopeResult envelope_violations(const BbmField& field, const EnvelopeSpec& spec);
inline EnvelopeResult envelope_violations(const CorrelatedField& field,
                                          const EnvelopeSpec& spec) {
  return envelope_violations(field.x_field(), spec);
}

struct MaxPosition {
  double value = 0.0;
  std::size_t leaf = 0;
};

/// Exact maximum over leaves; ties go to the smallest leaf index.
MaxPosition max_position(std::span<const double> positions);
inline MaxPosition max_position(const BbmField& field) { return max_position(field.positions()); }
inline MaxPosition max_position(const CorrelatedField& field) { return max_position(field.x()); }

/// Binary dump of the leaf vectors: magic "CBBMFLD1", then little-endian
/// f64 t, u64 n, f64 rho, followed by n f64 x values and n f64 y values.
void write_field_binary(std::ostream& out, const CorrelatedField& field);

struct FieldDump {
  double t = 0.0;
  double rho = 0.0;
  std::vector<double> x;
  std::vector<double> y;
};
FieldDump read_field_binary(std::istream& in);

}  // namespace cbbm
