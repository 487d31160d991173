#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cbbm/field.hpp"
#include "cbbm/offspring.hpp"
#include "cbbm/partition.hpp"
#include "cbbm/rng.hpp"

namespace cbbm {

/// Shifted leaf positions x_k(t) - m(t), sorted decreasing, with unit-circle
/// marks exp(i (sqrt(1 - rho^2) tau z_k - rho tau m(t))) aligned to them.
struct ExtremalSample {
  std::vector<double> points;
  std::vector<Complex> marks;
  std::vector<std::size_t> leaves;  // leaf index of each point
  double t = 0.0;
  double rho = 0.0;
  double tau = 0.0;
};

ExtremalSample extremal_sample(const CorrelatedField& field, double tau);

/// Sum over points p > -A of e^{beta p}.
Complex phi_functional(std::span<const double> points, Complex beta, double A);

/// Sum over points p > -A of e^{(sigma + i rho tau) p} * mark. Equals the
/// rotated-phase truncated partition times e^{-i rho tau m(t)}.
Complex phi_tilde_functional(const ExtremalSample& sample, ComplexTemperature beta, double rho,
                             double A);

/// One finite-t approximation of a cluster: all positions of an accepted run
/// minus its maximum (atoms <= 0, sorted decreasing, first atom exactly 0),
/// plus the independent-field offsets z_l - z_top used as circle decorations.
struct Cluster {
  std::vector<double> atoms;
  std::vector<double> z_offsets;  // aligned with atoms; may be empty
};

struct ClusterSamplingStats {
  double t_cond = 0.0;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const noexcept {
    return attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
  }
};

/// Rejection sampler: BBM runs to t_cond until max_k x_k >= sqrt2 t_cond.
/// Attempt j uses seed replica_seed(seed, j) and attempts are scanned in
/// order, so the first accepted attempt is deterministic. Throws
/// RejectionExhaustedError after `max_attempts` rejections.
Cluster sample_cluster(double t_cond, const OffspringDistribution& dist, std::uint64_t seed,
                       std::size_t max_attempts, ClusterSamplingStats* stats = nullptr);

/// A bank of clusters with the conditions that produced it.
struct ClusterBank {
  double t_cond = 0.0;
  std::vector<std::pair<int, double>> dist;
  std::size_t attempts = 0;
  std::vector<Cluster> clusters;
  double acceptance_rate() const noexcept {
    return attempts ? static_cast<double>(clusters.size()) / static_cast<double>(attempts) : 0.0;
  }
};

/// Collect `count` clusters scanning attempts 0, 1, 2, ... of one seed.
ClusterBank build_cluster_bank(double t_cond, const OffspringDistribution& dist,
                               std::uint64_t seed, std::size_t count, std::size_t max_attempts);

/// Text format: '#' header lines with t_cond, dist and acceptance rate; one
/// cluster per line as space-separated atoms, optionally followed by " | "
/// and the aligned z offsets.
void write_cluster_bank(std::ostream& out, const ClusterBank& bank);
ClusterBank read_cluster_bank(std::istream& in);

/// Parametric limit object: Cox process with intensity C Z e^{-sqrt2 y} dy
/// decorated by clusters drawn from a bank. Circle decorations for |rho| < 1
/// come from the cluster z offsets (an approximation of the exact law).
struct LimitModel {
  double C = 1.0;
  double Z = 1.0;
  const ClusterBank* bank = nullptr;
};

/// Atoms of the Cox process on [-A, inf): N ~ Poisson(C Z e^{sqrt2 A} / sqrt2),
/// then i.i.d. draws from the density proportional to e^{-sqrt2 y}.
std::vector<double> sample_cox_atoms(const LimitModel& model, double A, StreamRng& rng);

struct LimitDraw {
  Complex value;
  std::size_t cox_atoms = 0;
};

/// One draw of the truncated limit partition function. For |rho| = 1:
/// sum_{k,l} e^{beta (eta_k + Delta_l)}; for |rho| < 1:
/// sum_{k,l} e^{sigma (eta_k + Delta_l)} U_k W_l with U_k uniform on the
/// circle and W_l = e^{i sqrt(1 - rho^2) tau dz_l}. Only points with
/// eta_k + Delta_l >= -A contribute.
LimitDraw sample_limit_partition(const LimitModel& model, ComplexTemperature beta, double rho,
                                 double A, std::uint64_t seed);

struct CoxFit {
  double C_hat = 0.0;
  double residual = 0.0;  // RMS CDF misfit on the grid
  std::size_t grid_points = 0;
};

/// Least-squares fit of y -> mean_j exp(-C Z_j e^{-sqrt2 y}) to the empirical
/// CDF of max - m(t).
CoxFit estimate_cox_constants(std::span<const double> max_samples,
                              std::span<const double> z_samples);

}  // namespace cbbm
