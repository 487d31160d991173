#include <cmath>
#include <sstream>

#include "doctest.h"

#include "cbbm/errors.hpp"
#include "cbbm/field.hpp"
#include "cbbm/oracles.hpp"
#include "cbbm/partition.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

using namespace cbbm;

namespace {

TreePtr share(GwTree tree) { return std::make_shared<const GwTree>(std::move(tree)); }

TreePtr cherry(double s, double t) {
  const GwTree::NodeSpec nodes[] = {{kRootParent, 0.0, s}, {0, s, 0.0}, {0, s, 0.0}};
  return share(GwTree::from_nodes(t, nodes));
}

// Four leaves: root splits at 1 into A and B; A splits at 2, B splits at 3.
TreePtr four_leaf_tree() {
  const GwTree::NodeSpec nodes[] = {{kRootParent, 0.0, 1.0}, {0, 1.0, 2.0}, {0, 1.0, 3.0},
                                    {1, 2.0, 0.0},           {1, 2.0, 0.0}, {2, 3.0, 0.0},
                                    {2, 3.0, 0.0}};
  return share(GwTree::from_nodes(4.0, nodes));
}

}  // namespace

TEST_CASE("zero horizon field sits at the origin") {
  const auto tree = share(sample_tree(OffspringDistribution::binary(), 0.0, 1));
  const auto field = sample_field(tree, 1);
  REQUIRE(field.size() == 1);
  CHECK(field.positions()[0] == 0.0);
  CHECK(max_position(field).value == 0.0);
}

TEST_CASE("single lineage variance equals t") {
  const auto dist = OffspringDistribution::single_child();
  RunningStats sq;
  RunningStats mean;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const auto seed = replica_seed(11, r);
    const auto field = sample_field(share(sample_tree(dist, 4.0, seed)), seed);
    const double x = field.positions()[0];
    mean.add(x);
    sq.add(x * x);
  }
  CHECK(std::abs(mean.mean()) <= 3.0 * mean.standard_error());
  CHECK(std::abs(sq.mean() - 4.0) <= 3.0 * sq.standard_error());
}

TEST_CASE("cherry covariance equals the split time") {
  const auto tree = cherry(1.5, 4.0);
  RunningStats prod;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const auto field = sample_field(tree, replica_seed(12, r));
    prod.add(field.positions()[0] * field.positions()[1]);
  }
  CHECK(std::abs(prod.mean() - 1.5) <= 3.0 * prod.standard_error());
}

TEST_CASE("conditional covariance matrix matches the overlap matrix") {
  const auto tree = four_leaf_tree();
  const auto q = overlap_matrix(*tree);
  const std::size_t n = q.size();
  std::vector<RunningStats> cov(n * n);
  for (std::uint64_t r = 0; r < 40000; ++r) {
    const auto field = sample_field(tree, replica_seed(13, r));
    const auto x = field.positions();
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k; l < n; ++l) cov[k * n + l].add(x[k] * x[l]);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k; l < n; ++l) {
      const auto& c = cov[k * n + l];
      CHECK(std::abs(c.mean() - q(k, l)) <= 3.0 * c.standard_error());
    }
  }
}

TEST_CASE("correlated pair construction") {
  const auto tree = share(sample_tree(OffspringDistribution::binary(), 3.0, 5));
  const auto one = sample_correlated_pair(tree, 1.0, 5);
  CHECK(!one.has_independent_part());
  for (std::size_t k = 0; k < one.size(); ++k) CHECK(one.y()[k] == one.x()[k]);
  const auto minus = sample_correlated_pair(tree, -1.0, 5);
  for (std::size_t k = 0; k < minus.size(); ++k) CHECK(minus.y()[k] == -minus.x()[k]);

  // The X part of a pair equals the single field from the same seed.
  const auto single = sample_field(tree, 5);
  const auto half = sample_correlated_pair(tree, 0.5, 5);
  for (std::size_t k = 0; k < half.size(); ++k) {
    CHECK(half.x()[k] == single.positions()[k]);
    CHECK(half.y()[k] == doctest::Approx(0.5 * half.x()[k] + std::sqrt(0.75) * half.z()[k]));
  }
  CHECK_THROWS_AS(sample_correlated_pair(tree, 1.01, 5), ArgumentError);
  CHECK_THROWS_AS(sample_correlated_pair(tree, -2.0, 5), ArgumentError);
}

TEST_CASE("correlation of the pair") {
  const auto dist = OffspringDistribution::single_child();
  RunningStats zero, signed_pos, signed_neg;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    const auto seed = replica_seed(14, r);
    const auto tree = share(sample_tree(dist, 5.0, seed));
    const auto p0 = sample_correlated_pair(tree, 0.0, seed);
    const auto p6 = sample_correlated_pair(tree, 0.6, seed);
    const auto m6 = sample_correlated_pair(tree, -0.6, seed);
    zero.add(p0.x()[0] * p0.y()[0]);
    signed_pos.add(p6.x()[0] * p6.y()[0]);
    signed_neg.add(m6.x()[0] * m6.y()[0]);
  }
  CHECK(std::abs(zero.mean()) <= 3.0 * zero.standard_error());
  CHECK(std::abs(signed_pos.mean() - 3.0) <= 3.0 * signed_pos.standard_error());
  CHECK(std::abs(signed_neg.mean() + 3.0) <= 3.0 * signed_neg.standard_error());
}

TEST_CASE("the Y field alone has the law of a fresh field") {
  const auto dist = OffspringDistribution::binary();
  std::vector<double> from_pair, fresh;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto seed = replica_seed(15, r);
    const auto tree = share(sample_tree(dist, 4.0, seed));
    const auto pair = sample_correlated_pair(tree, 0.3, seed);
    from_pair.push_back(max_position(pair.y()).value);
    const auto other = replica_seed(16, r);
    const auto tree2 = share(sample_tree(dist, 4.0, other));
    fresh.push_back(max_position(sample_field(tree2, other)).value);
  }
  CHECK(stats::ks_distance(from_pair, fresh) <= 0.02);
}

TEST_CASE("keep_paths does not change leaf values") {
  const auto tree = share(sample_tree(OffspringDistribution::binary(), 5.0, 21));
  const auto a = sample_correlated_pair(tree, 0.4, 21, false);
  const auto b = sample_correlated_pair(tree, 0.4, 21, true);
  CHECK(!a.x_field().has_paths());
  CHECK(b.x_field().has_paths());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.x()[k] == b.x()[k]);
    CHECK(a.y()[k] == b.y()[k]);
  }
}

TEST_CASE("max position and ties") {
  const std::vector<double> values{1.0, 3.0, -2.0, 3.0};
  const auto m = max_position(values);
  CHECK(m.value == 3.0);
  CHECK(m.leaf == 1);
  const std::vector<double> empty;
  CHECK_THROWS_AS(max_position(empty), ArgumentError);

  const auto tree = share(sample_tree(OffspringDistribution::single_child(), 3.0, 2));
  const auto field = sample_field(tree, 2);
  CHECK(max_position(field).value == field.positions()[0]);
}

TEST_CASE("envelope on a pinned lineage") {
  const GwTree::NodeSpec lineage[] = {{kRootParent, 0.0, 0.0}};
  const auto tree = share(GwTree::from_nodes(10.0, lineage));
  const auto pinned = BbmField::from_node_positions(tree, {0.0});
  const auto result = envelope_violations(pinned, EnvelopeSpec{0.4, 1.0, 0.05});
  CHECK(result.violating_leaves == 0);
  CHECK(result.leaves == 1);

  // A lineage ending far above m(t) violates near the end of the window.
  const auto high = BbmField::from_node_positions(tree, {20.0});
  CHECK(envelope_violations(high, EnvelopeSpec{0.4, 1.0, 0.05}).violating_leaves == 1);

  CHECK_THROWS_AS(envelope_violations(pinned, EnvelopeSpec{0.4, 5.0, 0.05}), ArgumentError);
  CHECK_THROWS_AS(envelope_violations(pinned, EnvelopeSpec{0.6, 1.0, 0.05}), ArgumentError);
  const auto no_paths = sample_field(tree, 3, false);
  CHECK_THROWS_AS(envelope_violations(no_paths, EnvelopeSpec{}), StateError);
}

TEST_CASE("envelope violations shrink as r grows") {
  const auto dist = OffspringDistribution::binary();
  const double rs[] = {0.5, 1.0, 2.0, 3.0};
  std::vector<double> fraction(4, 0.0);
  const int replicas = 100;
  for (int r = 0; r < replicas; ++r) {
    const auto seed = replica_seed(17, static_cast<std::uint64_t>(r));
    const auto tree = share(sample_tree(dist, 10.0, seed));
    const auto field = sample_field(tree, seed, true);
    for (int i = 0; i < 4; ++i) {
      const auto res = envelope_violations(field, EnvelopeSpec{0.4, rs[i], 0.05});
      if (res.violating_leaves > 0) fraction[i] += 1.0 / replicas;
    }
  }
  for (int i = 1; i < 4; ++i) CHECK(fraction[i] <= fraction[i - 1]);
  CHECK(fraction[3] < fraction[0]);
}

TEST_CASE("binary field dump round trip") {
  const auto tree = share(sample_tree(OffspringDistribution::binary(), 3.0, 8));
  const auto pair = sample_correlated_pair(tree, -0.25, 8);
  std::stringstream buf;
  write_field_binary(buf, pair);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "CBBMFLD1");
  CHECK(bytes.size() == 8 + 8 + 8 + 8 + 16 * pair.size());
  const auto dump = read_field_binary(buf);
  CHECK(dump.t == 3.0);
  CHECK(dump.rho == -0.25);
  REQUIRE(dump.x.size() == pair.size());
  for (std::size_t k = 0; k < pair.size(); ++k) {
    CHECK(dump.x[k] == pair.x()[k]);
    CHECK(dump.y[k] == pair.y()[k]);
  }
  std::stringstream junk("NOTAFIELD-------------------------");
  CHECK_THROWS_AS(read_field_binary(junk), ArgumentError);
}
