#include "cbbm/offspring.hpp"

#include <cmath>
#include <string>

#include "cbbm/errors.hpp"

namespace cbbm {

OffspringDistribution::OffspringDistribution(std::vector<double> probabilities,
                                             OffspringOptions options)
    : probabilities_(std::move(probabilities)) {
  while (!probabilities_.empty() && probabilities_.back() == 0.0) probabilities_.pop_back();
  if (probabilities_.empty()) throw ArgumentError("offspring law has no mass");
  if (probabilities_.size() > options.max_children) {
    throw ArgumentError("offspring support exceeds kmax = " +
                        std::to_string(options.max_children));
  }
  double total = 0.0;
  cumulative_.reserve(probabilities_.size());
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    const double p = probabilities_[i];
    if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("negative or non-finite p_k");
    const double k = static_cast<double>(i + 1);
    total += p;
    mean_ += k * p;
    factorial_moment_ += k * (k - 1.0) * p;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ArgumentError("offspring probabilities sum to " + std::to_string(total) +
                        ", expected 1");
  }
  cumulative_.back() = 1.0;
  if (options.mean_policy == MeanPolicy::two && std::abs(mean_ - 2.0) > 1e-9) {
    throw ArgumentError("mean number of children is " + std::to_string(mean_) +
                        ", expected 2 (use the relaxed policy for other means)");
  }
}

OffspringDistribution OffspringDistribution::from_pairs(
    std::span<const std::pair<int, double>> pairs, OffspringOptions options) {
  std::vector<double> probs;
  for (const auto& [k, p] : pairs) {
    if (k == 0 && p == 0.0) continue;
    if (k < 1) throw ArgumentError("offspring count k must be >= 1 (p_0 = 0)");
    if (static_cast<std::size_t>(k) > options.max_children) {
      throw ArgumentError("offspring count " + std::to_string(k) + " exceeds kmax");
    }
    if (probs.size() < static_cast<std::size_t>(k)) probs.resize(k, 0.0);
    if (probs[k - 1] != 0.0) throw ArgumentError("duplicate offspring count " + std::to_string(k));
    probs[k - 1] = p;
  }
  return OffspringDistribution(std::move(probs), options);
}

OffspringDistribution OffspringDistribution::binary() {
  return OffspringDistribution({0.0, 1.0});
}

OffspringDistribution OffspringDistribution::single_child() {
  return OffspringDistribution({1.0}, {.mean_policy = MeanPolicy::relaxed});
}

double OffspringDistribution::probability(std::size_t k) const noexcept {
  if (k == 0 || k > probabilities_.size()) return 0.0;
  return probabilities_[k - 1];
}

std::vector<std::pair<int, double>> OffspringDistribution::pairs() const {
  std::vector<std::pair<int, double>> out;
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    if (probabilities_[i] > 0.0) out.emplace_back(static_cast<int>(i + 1), probabilities_[i]);
  }
  return out;
}

int OffspringDistribution::sample(double u) const noexcept {
  std::size_t i = 0;
  while (i + 1 < cumulative_.size() && u >= cumulative_[i]) ++i;
  return static_cast<int>(i + 1);
}

}  // namespace cbbm
