#include "cbbm/extremal.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <istream>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "cbbm/csv.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/gw_tree.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

namespace cbbm {

ExtremalSample extremal_sample(const CorrelatedField& field, double tau) {
  const double t = field.horizon();
  const double m = m_of_t(t);
  const double rho = field.rho();
  const auto x = field.x();
  const auto z = field.z();
  const double w = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  ExtremalSample sample;
  sample.t = t;
  sample.rho = rho;
  sample.tau = tau;
  sample.leaves.resize(x.size());
  std::iota(sample.leaves.begin(), sample.leaves.end(), std::size_t{0});
  std::stable_sort(sample.leaves.begin(), sample.leaves.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  sample.points.reserve(x.size());
  sample.marks.reserve(x.size());
  for (const std::size_t k : sample.leaves) {
    sample.points.push_back(x[k] - m);
    const double zk = z.empty() ? 0.0 : z[k];
    sample.marks.push_back(std::polar(1.0, w * tau * zk - rho * tau * m));
  }
  return sample;
}

Complex phi_functional(std::span<const double> points, Complex beta, double A) {
  if (!(A > 0.0)) throw ArgumentError("truncation level A must be positive");
  CompensatedSum sum;
  for (const double p : points) {
    if (p > -A) sum.add(std::exp(beta * p));
  }
  return sum.value();
}

Complex phi_tilde_functional(const ExtremalSample& sample, ComplexTemperature beta, double rho,
                             double A) {
  if (!(A > 0.0)) throw ArgumentError("truncation level A must be positive");
  if (sample.points.size() != sample.marks.size()) {
    throw StateError("extremal sample has mismatched points and marks");
  }
  const Complex lambda = beta.lambda(rho);
  CompensatedSum sum;
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    const double p = sample.points[i];
    if (p > -A) sum.add(std::exp(lambda * p) * sample.marks[i]);
  }
  return sum.value();
}

namespace {

std::optional<Cluster> try_cluster(double t_cond, const OffspringDistribution& dist,
                                   std::uint64_t seed) {
  auto tree = std::make_shared<const GwTree>(sample_tree(dist, t_cond, seed));
  const auto field = sample_correlated_pair(tree, 0.0, seed);
  const auto x = field.x();
  const auto top = max_position(x);
  if (top.value < std::numbers::sqrt2 * t_cond) return std::nullopt;
  const auto z = field.z();
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  Cluster cluster;
  cluster.atoms.reserve(x.size());
  cluster.z_offsets.reserve(x.size());
  for (const std::size_t k : order) {
    cluster.atoms.push_back(x[k] - top.value);
    cluster.z_offsets.push_back(z[k] - z[top.leaf]);
  }
  return cluster;
}

}  // namespace

Cluster sample_cluster(double t_cond, const OffspringDistribution& dist, std::uint64_t seed,
                       std::size_t max_attempts, ClusterSamplingStats* stats) {
  if (!(t_cond > 0.0)) throw ArgumentError("conditioning time must be positive");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    auto cluster = try_cluster(t_cond, dist, replica_seed(seed, attempt));
    if (cluster) {
      if (stats) *stats = {t_cond, attempt + 1, 1};
      return std::move(*cluster);
    }
  }
  if (stats) *stats = {t_cond, max_attempts, 0};
  throw RejectionExhaustedError("no cluster accepted in " + std::to_string(max_attempts) +
                                    " attempts at t_cond = " + format_double(t_cond),
                                max_attempts);
}

ClusterBank build_cluster_bank(double t_cond, const OffspringDistribution& dist,
                               std::uint64_t seed, std::size_t count, std::size_t max_attempts) {
  if (!(t_cond > 0.0)) throw ArgumentError("conditioning time must be positive");
  ClusterBank bank;
  bank.t_cond = t_cond;
  bank.dist = dist.pairs();
  std::size_t attempt = 0;
  while (bank.clusters.size() < count) {
    if (attempt >= max_attempts) {
      throw RejectionExhaustedError("cluster bank reached " + std::to_string(bank.clusters.size()) +
                                        " of " + std::to_string(count) + " clusters in " +
                                        std::to_string(max_attempts) + " attempts",
                                    attempt);
    }
    auto cluster = try_cluster(t_cond, dist, replica_seed(seed, attempt));
    ++attempt;
    if (cluster) bank.clusters.push_back(std::move(*cluster));
  }
  bank.attempts = attempt;
  return bank;
}

void write_cluster_bank(std::ostream& out, const ClusterBank& bank) {
  out << "# cluster bank\n";
  out << "# t_cond " << format_double(bank.t_cond) << '\n';
  out << "# dist";
  for (const auto& [k, p] : bank.dist) out << ' ' << k << ':' << format_double(p);
  out << '\n';
  out << "# attempts " << bank.attempts << " accepted " << bank.clusters.size()
      << " acceptance_rate " << format_double(bank.acceptance_rate()) << '\n';
  for (const auto& c : bank.clusters) {
    for (std::size_t i = 0; i < c.atoms.size(); ++i) {
      if (i) out << ' ';
      out << format_double(c.atoms[i]);
    }
    if (!c.z_offsets.empty()) {
      out << " |";
      for (const double dz : c.z_offsets) out << ' ' << format_double(dz);
    }
    out << '\n';
  }
}

ClusterBank read_cluster_bank(std::istream& in) {
  ClusterBank bank;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "t_cond") {
        ls >> bank.t_cond;
      } else if (key == "dist") {
        std::string item;
        while (ls >> item) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) throw ArgumentError("bad dist entry in cluster bank");
          bank.dist.emplace_back(std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        }
      } else if (key == "attempts") {
        ls >> bank.attempts;
      }
      continue;
    }
    Cluster c;
    std::string token;
    bool offsets = false;
    while (ls >> token) {
      if (token == "|") {
        offsets = true;
        continue;
      }
      (offsets ? c.z_offsets : c.atoms).push_back(std::stod(token));
    }
    if (c.atoms.empty() || c.atoms.front() != 0.0) {
      throw ArgumentError("cluster line must start with the atom 0");
    }
    if (offsets && c.z_offsets.size() != c.atoms.size()) {
      throw ArgumentError("cluster z offsets are not aligned with atoms");
    }
    bank.clusters.push_back(std::move(c));
  }
  return bank;
}

std::vector<double> sample_cox_atoms(const LimitModel& model, double A, StreamRng& rng) {
  if (!(A >= 0.0)) throw ArgumentError("truncation level A must be >= 0");
  if (!(model.C > 0.0) || !(model.Z > 0.0)) throw ArgumentError("C and Z must be positive");
  constexpr double r2 = std::numbers::sqrt2;
  const double mean = model.C * model.Z * std::exp(r2 * A) / r2;
  const auto n = rng.poisson(mean);
  std::vector<double> atoms(n);
  for (auto& eta : atoms) eta = -A + rng.exponential() / r2;
  return atoms;
}

LimitDraw sample_limit_partition(const LimitModel& model, ComplexTemperature beta, double rho,
                                 double A, std::uint64_t seed) {
  if (!(A > 0.0)) throw ArgumentError("truncation level A must be positive");
  if (!(std::abs(rho) <= 1.0)) throw ArgumentError("rho must lie in [-1, 1]");
  if (!model.bank || model.bank->clusters.empty()) throw StateError("cluster bank is empty");
  const auto& clusters = model.bank->clusters;
  const bool full = std::abs(rho) == 1.0;
  const double w = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  if (!full && beta.tau != 0.0) {
    for (const auto& c : clusters) {
      if (c.z_offsets.size() != c.atoms.size()) {
        throw StateError("cluster bank lacks circle decorations needed for |rho| < 1");
      }
    }
  }

  StreamRng rng(seed, Stream::limit);
  const auto atoms = sample_cox_atoms(model, A, rng);
  const Complex lambda = beta.lambda(rho);
  CompensatedSum total;
  for (const double eta : atoms) {
    const Cluster& c = clusters[rng.below(clusters.size())];
    const Complex circle = full ? Complex{1.0, 0.0}
                                : std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
    CompensatedSum inner;
    for (std::size_t l = 0; l < c.atoms.size(); ++l) {
      const double point = eta + c.atoms[l];
      if (point < -A) break;  // atoms are sorted decreasing
      if (full) {
        inner.add(std::exp(lambda * point));
      } else {
        const double dz = c.z_offsets.empty() ? 0.0 : c.z_offsets[l];
        inner.add(std::polar(std::exp(beta.sigma * point), w * beta.tau * dz));
      }
    }
    total.add(circle * inner.value());
  }
  return {total.value(), atoms.size()};
}

CoxFit estimate_cox_constants(std::span<const double> max_samples,
                              std::span<const double> z_samples) {
  if (max_samples.size() < 500) throw ArgumentError("Cox constant fit needs at least 500 samples");
  std::vector<double> zs;
  for (const double z : z_samples) {
    if (z > 0.0 && std::isfinite(z)) zs.push_back(z);
  }
  if (zs.empty()) throw FitError("no positive derivative-martingale samples");
  std::vector<double> sorted(max_samples.begin(), max_samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = quantile(sorted, 0.02);
  const double hi = quantile(sorted, 0.98);
  if (!(hi > lo)) throw FitError("degenerate maximum samples");

  constexpr std::size_t kGrid = 50;
  std::vector<double> grid(kGrid);
  std::vector<double> ecdf(kGrid);
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < kGrid; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kGrid - 1);
    ecdf[i] = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), grid[i]) -
                                  sorted.begin()) / n;
  }
  auto misfit = [&](double log_c) {
    const double c = std::exp(log_c);
    double ss = 0.0;
    for (std::size_t i = 0; i < kGrid; ++i) {
      const double tail = c * std::exp(-std::numbers::sqrt2 * grid[i]);
      double model = 0.0;
      for (const double z : zs) model += std::exp(-tail * z);
      model /= static_cast<double>(zs.size());
      ss += (model - ecdf[i]) * (model - ecdf[i]);
    }
    return ss;
  };
  const auto [log_c, ss] = boost::math::tools::brent_find_minima(misfit, -15.0, 15.0, 40);
  return {std::exp(log_c), std::sqrt(ss / kGrid), kGrid};
}

}  // namespace cbbm
