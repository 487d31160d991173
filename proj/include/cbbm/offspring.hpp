#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cbbm {

/// How strictly the mean number of children is validated.
enum class MeanPolicy {
  two,      // sum k p_k must equal 2 (the model normalisation)
  relaxed,  // any law with p_0 = 0; includes the pure single-child law
};

struct OffspringOptions {
  MeanPolicy mean_policy = MeanPolicy::two;
  std::size_t max_children = 16;
};

/// Reproduction law (p_1, ..., p_kmax) with p_0 = 0 and finite support.
class OffspringDistribution {
 public:
  /// `probabilities[k - 1]` is p_k.
  explicit OffspringDistribution(std::vector<double> probabilities,
                                 OffspringOptions options = {});

  /// Build from (k, p_k) pairs as they appear in configuration files.
  static OffspringDistribution from_pairs(std::span<const std::pair<int, double>> pairs,
                                          OffspringOptions options = {});

  /// p_2 = 1.
  static OffspringDistribution binary();
  /// p_1 = 1: no branching, a single lineage.
  static OffspringDistribution single_child();

  std::size_t max_children() const noexcept { return probabilities_.size(); }
  double probability(std::size_t k) const noexcept;
  double mean_children() const noexcept { return mean_; }
  /// K = sum k (k - 1) p_k.
  double second_factorial_moment() const noexcept { return factorial_moment_; }
  /// Support as (k, p_k) pairs with p_k > 0.
  std::vector<std::pair<int, double>> pairs() const;

  /// Inverse-CDF draw of the number of children from u in (0, 1).
  int sample(double u) const noexcept;

 private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
  double mean_ = 0.0;
  double factorial_moment_ = 0.0;
};

}  // namespace cbbm
