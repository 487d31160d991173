#pragma once

#include <complex>
#include <cstdint>
#include <span>

#include "cbbm/gw_tree.hpp"

// Closed-form targets for the simulator. Everything here is exact or a
// documented bound; nothing consults simulation output except the explicitly
// Monte Carlo helpers at the bottom.

namespace cbbm::oracles {

/// e^{-x^2/2} / (sqrt(2 pi) x), an upper bound for the N(0,1) tail beyond x.
double gaussian_tail_bound(double x);

/// P{N(0,1) > x} via erfc, accurate to a few ulps.
double normal_tail(double x);

/// 2a / (t - 2a): bound for P{bridge(s) <= 0 for all s in [a, t - a]} for a
/// Brownian bridge from 0 to 0 over [0, t].
double bridge_barrier_bound(double a, double t);

/// The same probability evaluated exactly (reflection principle for the
/// inner bridge, one-dimensional Simpson quadrature for the endpoints).
double bridge_stay_below_exact(double a, double t);

struct SecondMomentParams {
  double sigma = 0.0;
  double tau = 0.0;
  double t = 0.0;
  double K = 2.0;
  /// Permit sigma^2 + tau^2 >= 1 (finite t only; the bound is then not uniform).
  bool relaxed = false;
};

struct SecondMomentParts {
  double diagonal;      // e^{a t}
  double off_diagonal;  // K (e^{a t} - 1) / a, K t when a = 0
  double total() const noexcept { return diagonal + off_diagonal; }
};

/// E|M_beta(t)|^2 split into the k = l and k != l contributions, with
/// a = sigma^2 + tau^2 - 1. Independent of rho.
SecondMomentParts martingale_second_moment_parts(const SecondMomentParams& p);
double martingale_second_moment(const SecondMomentParams& p);

/// K int_0^t e^{2t - q} e^{2 sigma^2 q + (sigma^2 - tau^2)(t - q)} dq in closed
/// form, sigma = Re lambda: the expected ordered-pair sum
/// E[sum_{k != l} e^{conj(lambda) x_l + lambda x_k} e^{-(1 - rho^2) tau^2 (t - q_kl)}].
double many_to_two_pair_moment(std::complex<double> lambda, double rho, double tau, double t,
                               double K);

/// (s/t) m(t) + min(s, t - s)^gamma for s in [0, t].
double envelope_curve(double s, double t, double gamma);

// --- Monte Carlo counterparts -------------------------------------------

/// The ordered-pair sum whose expectation many_to_two_pair_moment gives, for
/// one realisation: X positions `x` on a tree with overlap matrix `q`.
double pair_sum_statistic(std::span<const double> x, const OverlapMatrix& q,
                          std::complex<double> lambda, double rho, double tau);

struct BridgeEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  std::size_t paths = 0;
};

/// Fraction of discretised bridges (grid `step`) staying <= 0 on [a, t - a].
BridgeEstimate bridge_stay_below_mc(double a, double t, double step, std::size_t paths,
                                    std::uint64_t seed);

}  // namespace cbbm::oracles
