#include "cbbm/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cbbm/centering.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/rng.hpp"

namespace cbbm::oracles {

namespace {

// (e^{a t} - 1) / a with the a -> 0 limit t.
double growth_integral(double a, double t) {
  if (a == 0.0) return t;
  return std::expm1(a * t) / a;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double gaussian_tail_bound(double x) {
  if (!(x > 0.0)) throw ArgumentError("Gaussian tail bound needs x > 0");
  return std::exp(-0.5 * x * x) / (std::sqrt(2.0 * std::numbers::pi) * x);
}

double normal_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double bridge_barrier_bound(double a, double t) {
  if (!(a > 0.0) || !(2.0 * a < t)) throw ArgumentError("bridge bound needs 0 < 2a < t");
  return 2.0 * a / (t - 2.0 * a);
}

double bridge_stay_below_exact(double a, double t) {
  if (!(a > 0.0) || !(2.0 * a < t)) throw ArgumentError("bridge probability needs 0 < 2a < t");
  // (u, v) = (bridge(a), bridge(t - a)); in between, a bridge from u to v over L.
  const double var = a * (t - a) / t;
  const double cov = a * a / t;
  const double length = t - 2.0 * a;
  const double beta = cov / var;
  const double s2 = var - cov * cov / var;
  const double s = std::sqrt(s2);
  auto inner = [&](double u) {
    // E[1{v<0} (1 - e^{-c v})], v | u ~ N(beta u, s2), c = 2u / L.
    const double mu = beta * u;
    const double c = 2.0 * u / length;
    const double below = normal_cdf(-mu / s);
    const double weighted = std::exp(-c * mu + 0.5 * c * c * s2) * normal_cdf(-(mu - c * s2) / s);
    return below - weighted;
  };
  const double sd = std::sqrt(var);
  const double lo = -12.0 * sd;
  constexpr int kSteps = 4000;  // even
  const double h = -lo / kSteps;
  double sum = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double u = lo + h * i;
    const double density = std::exp(-0.5 * u * u / var) / (sd * std::sqrt(2.0 * std::numbers::pi));
    const double w = (i == 0 || i == kSteps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * density * inner(u);
  }
  return sum * h / 3.0;
}

SecondMomentParts martingale_second_moment_parts(const SecondMomentParams& p) {
  if (!(p.t >= 0.0)) throw ArgumentError("t must be >= 0");
  if (!(p.K >= 0.0)) throw ArgumentError("K must be >= 0");
  const double a = p.sigma * p.sigma + p.tau * p.tau - 1.0;
  if (a >= 0.0 && !p.relaxed) {
    throw ArgumentError("sigma^2 + tau^2 < 1 required (set relaxed for finite-t evaluation)");
  }
  return {std::exp(a * p.t), p.K * growth_integral(a, p.t)};
}

double martingale_second_moment(const SecondMomentParams& p) {
  return martingale_second_moment_parts(p).total();
}

double many_to_two_pair_moment(std::complex<double> lambda, double /*rho*/, double tau, double t,
                               double K) {
  if (!(t >= 0.0)) throw ArgumentError("t must be >= 0");
  // The z-average e^{-(1-rho^2) tau^2 (t-q)} cancels the rho dependence of
  // the x-moment, leaving e^{2 sigma^2 q + (sigma^2 - tau^2)(t - q)}.
  const double sigma = lambda.real();
  const double s2 = sigma * sigma;
  const double t2 = tau * tau;
  const double b = s2 + t2 - 1.0;
  return K * std::exp((2.0 + s2 - t2) * t) * growth_integral(b, t);
}

double envelope_curve(double s, double t, double gamma) {
  if (!(s >= 0.0 && s <= t)) throw ArgumentError("envelope needs 0 <= s <= t");
  return s / t * m_of_t(t) + std::pow(std::min(s, t - s), gamma);
}

double pair_sum_statistic(std::span<const double> x, const OverlapMatrix& q,
                          std::complex<double> lambda, double rho, double tau) {
  const std::size_t n = x.size();
  if (q.size() != n) throw ArgumentError("overlap matrix does not match the field");
  const double t = n ? q(0, 0) : 0.0;
  const double damp = (1.0 - rho * rho) * tau * tau;
  std::vector<std::complex<double>> e(n);
  for (std::size_t k = 0; k < n; ++k) e[k] = std::exp(lambda * x[k]);
  // Ordered pairs (k, l) and (l, k) are conjugate; sum over k < l and double.
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      total += 2.0 * (std::conj(e[l]) * e[k]).real() * std::exp(-damp * (t - q(k, l)));
    }
  }
  return total;
}

BridgeEstimate bridge_stay_below_mc(double a, double t, double step, std::size_t paths,
                                    std::uint64_t seed) {
  if (!(a > 0.0) || !(2.0 * a < t)) throw ArgumentError("bridge probability needs 0 < 2a < t");
  if (!(step > 0.0) || paths == 0) throw ArgumentError("bad bridge discretisation");
  const auto steps = static_cast<std::size_t>(std::llround(t / step));
  const double dt = t / static_cast<double>(steps);
  const double sq = std::sqrt(dt);
  std::vector<double> w(steps + 1);
  std::size_t stayed = 0;
  for (std::size_t p = 0; p < paths; ++p) {
    StreamRng rng(seed, Stream::sequential, static_cast<std::uint64_t>(p) << 32);
    w[0] = 0.0;
    for (std::size_t i = 1; i <= steps; ++i) w[i] = w[i - 1] + sq * rng.normal();
    bool below = true;
    for (std::size_t i = 0; i <= steps && below; ++i) {
      const double s = dt * static_cast<double>(i);
      if (s < a - 1e-12 || s > t - a + 1e-12) continue;
      below = w[i] - s / t * w[steps] <= 0.0;
    }
    stayed += below;
  }
  BridgeEstimate est;
  est.paths = paths;
  est.probability = static_cast<double>(stayed) / static_cast<double>(paths);
  est.standard_error =
      std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(paths));
  return est;
}

}  // namespace cbbm::oracles
