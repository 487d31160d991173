#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cbbm/errors.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

using namespace cbbm;
using namespace cbbm::stats;

namespace {

std::vector<double> pareto(double alpha, std::size_t n, std::uint64_t seed) {
  StreamRng rng(seed, Stream::synthetic);
  std::vector<double> out(n);
  for (auto& x : out) x = std::pow(rng.uniform(), -1.0 / alpha);
  return out;
}

// Rotationally invariant 1-stable: G / |N| with G standard complex Gaussian
// scaled so the characteristic function is exp(-|z|).
std::vector<std::complex<double>> isotropic_cauchy(std::size_t n, std::uint64_t seed) {
  StreamRng rng(seed, Stream::synthetic);
  std::vector<std::complex<double>> out(n);
  for (auto& y : out) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = std::abs(rng.normal());
    y = {a / c, b / c};
  }
  return out;
}

}  // namespace

TEST_CASE("running stats and quantiles") {
  RunningStats s;
  for (const double x : {1.0, 2.0, 3.0, 4.0}) s.add(x);
  CHECK(s.count() == 4);
  CHECK(s.mean() == 2.5);
  CHECK(s.variance() == doctest::Approx(5.0 / 3.0));
  CHECK(s.standard_error() == doctest::Approx(std::sqrt(5.0 / 12.0)));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK_THROWS_AS(quantile({}, 0.5), ArgumentError);
}

TEST_CASE("Hill estimator recovers Pareto indices") {
  for (const double alpha : {1.0, 2.0}) {
    const auto x = pareto(alpha, 100000, 40 + static_cast<std::uint64_t>(alpha));
    const auto fit = hill_estimator(x, 0.05);
    CHECK(fit.k_used == 5000);
    CHECK(fit.method == TailMethod::hill);
    CHECK(std::abs(fit.alpha_hat - alpha) <= 3.0 * fit.alpha_se);
    CHECK(fit.alpha_se == doctest::Approx(fit.alpha_hat / std::sqrt(5000.0)));
  }
}

TEST_CASE("Hill estimator is scale invariant") {
  const auto x = pareto(1.5, 5000, 43);
  auto scaled = x;
  for (auto& v : scaled) v *= 7.25;
  CHECK(hill_estimator(x).alpha_hat == doctest::Approx(hill_estimator(scaled).alpha_hat).epsilon(1e-12));
}

TEST_CASE("Hill estimator errors") {
  CHECK_THROWS_AS(hill_estimator(std::vector<double>(50, 1.0)), ArgumentError);
  auto x = pareto(1.0, 1000, 44);
  CHECK_THROWS_AS(hill_estimator(x, 0.0), ArgumentError);
  CHECK_THROWS_AS(hill_estimator(x, 0.5), ArgumentError);
  CHECK_THROWS_AS(hill_estimator(x, 0.005), ArgumentError);
  x[3] = -1.0;
  CHECK_THROWS_AS(hill_estimator(x), ArgumentError);
  CHECK_THROWS_AS(hill_estimator(std::vector<double>(1000, 2.0)), FitError);
}

TEST_CASE("empirical characteristic function") {
  const std::vector<std::complex<double>> single{{1.0, 0.0}};
  CHECK(std::abs(empirical_cf(single, 0.0) - 1.0) < 1e-15);
  const auto y = isotropic_cauchy(20000, 45);
  for (const double r : {0.0, 0.5, 1.0}) {
    const auto v = empirical_cf(y, std::complex<double>{r, 0.0});
    CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
  // Conjugate argument gives the conjugate value.
  const std::complex<double> z{0.3, -0.7};
  CHECK(std::abs(empirical_cf(y, z) - std::conj(empirical_cf(y, -z))) < 1e-12);
  // Isotropic 1-stable law: cf = exp(-|z|) in every direction.
  for (const double a : {0.0, 1.0, 2.5}) {
    const auto v = empirical_cf(y, std::polar(0.8, a));
    CHECK(std::abs(v - std::exp(-0.8)) < 4.0 / std::sqrt(20000.0));
  }
  CHECK_THROWS_AS(empirical_cf({}, 1.0), ArgumentError);
}

TEST_CASE("isotropy statistic") {
  const std::size_t n = 20000;
  const auto iso = isotropic_cauchy(n, 46);
  const auto radii = select_radii(iso);
  REQUIRE(!radii.empty());
  CHECK(radii.size() <= 4);
  CHECK(isotropy_statistic(iso, radii) <= 4.0 / std::sqrt(static_cast<double>(n)));

  // Real positive samples are far from isotropic.
  StreamRng rng(47, Stream::synthetic);
  std::vector<std::complex<double>> real(n);
  for (auto& v : real) v = {rng.exponential(), 0.0};
  CHECK(isotropy_statistic(real, select_radii(real)) >= 0.2);

  // A single point sample is a valid input.
  const std::vector<std::complex<double>> one{{1.0, 0.0}};
  CHECK(std::isfinite(isotropy_statistic(one, select_radii(one))));

  // Rotating every sample by the grid angle leaves the statistic unchanged.
  auto rotated = real;
  const auto phase = std::polar(1.0, 2.0 * std::numbers::pi / 16.0);
  for (auto& v : rotated) v *= phase;
  const std::vector<double> r{1.0};
  CHECK(isotropy_statistic(rotated, r) == doctest::Approx(isotropy_statistic(real, r)).epsilon(1e-9));
  CHECK_THROWS_AS(isotropy_statistic(real, r, 2), ArgumentError);
}

TEST_CASE("Kolmogorov-Smirnov distance") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{4.0, 5.0};
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(a, b) == 1.0);
  CHECK(ks_distance(a, b) == ks_distance(b, a));
  const std::vector<double> c{1.5, 2.5, 3.5};
  CHECK(ks_distance(a, c) == doctest::Approx(1.0 / 3.0));

  StreamRng rng(48, Stream::synthetic);
  std::vector<double> u(20000);
  for (auto& x : u) x = rng.uniform();
  const auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  CHECK(ks_distance(u, uniform_cdf) < 1.6 / std::sqrt(20000.0));
  const auto shifted = [](double x) { return std::clamp(x - 0.2, 0.0, 1.0); };
  CHECK(ks_distance(u, shifted) == doctest::Approx(0.2).epsilon(0.05));
  std::vector<double> v(20000);
  for (auto& x : v) x = rng.uniform();
  CHECK(ks_distance(u, v) <= ks_distance(u, uniform_cdf) + ks_distance(v, uniform_cdf) + 1e-12);
  CHECK_THROWS_AS(ks_distance(std::vector<double>{}, a), ArgumentError);
  CHECK_THROWS_AS(ks_distance(std::vector<double>{}, uniform_cdf), ArgumentError);
}

TEST_CASE("max tail exponent on synthetic laws") {
  StreamRng rng(49, Stream::synthetic);
  const double rate = std::numbers::sqrt2;
  std::vector<double> gumbel(20000), expo(20000);
  for (auto& x : gumbel) x = -std::log(rng.exponential()) / rate;
  for (auto& x : expo) x = rng.exponential() / rate;
  const double g = max_tail_exponent(gumbel, TailPrefactor::none);
  CHECK(g >= 1.25);
  CHECK(g <= 1.6);
  CHECK(std::abs(max_tail_exponent(expo, TailPrefactor::none) - rate) <= 0.1);

  CHECK_THROWS_AS(max_tail_exponent(std::vector<double>(1999, 0.0)), ArgumentError);
  CHECK_THROWS_AS(max_tail_exponent(std::vector<double>(5000, 1.0), TailPrefactor::none), FitError);
}
