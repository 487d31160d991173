#include "cbbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbbm/errors.hpp"
#include "cbbm/partition.hpp"

namespace cbbm {

double RunningStats::standard_error() const noexcept {
  return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

namespace stats {

StableFit hill_estimator(std::span<const double> moduli, double k_fraction) {
  if (moduli.size() < 100) throw ArgumentError("Hill estimator needs at least 100 samples");
  if (!(k_fraction > 0.0 && k_fraction <= 0.2)) {
    throw ArgumentError("k_fraction must lie in (0, 0.2]");
  }
  std::vector<double> sorted(moduli.begin(), moduli.end());
  for (const double x : sorted) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("Hill estimator needs positive moduli");
  }
  const auto n = sorted.size();
  auto k = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(n)));
  k = std::min(k, n - 1);
  if (k < 10) throw ArgumentError("Hill estimator needs at least 10 order statistics");
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                   std::greater<>());
  const double threshold = sorted[k];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(sorted[i] / threshold);
  const double mean_log = sum / static_cast<double>(k);
  if (!(mean_log > 0.0)) throw FitError("Hill estimator undefined: zero log-spacings");
  StableFit fit;
  fit.alpha_hat = 1.0 / mean_log;
  fit.alpha_se = fit.alpha_hat / std::sqrt(static_cast<double>(k));
  fit.k_used = k;
  fit.method = TailMethod::hill;
  return fit;
}

std::complex<double> empirical_cf(std::span<const std::complex<double>> samples,
                                  std::complex<double> z) {
  if (samples.empty()) throw ArgumentError("empirical CF of an empty sample");
  CompensatedSum sum;
  for (const auto& y : samples) {
    const double phase = z.real() * y.real() + z.imag() * y.imag();
    sum.add(std::complex<double>{std::cos(phase), std::sin(phase)});
  }
  return sum.value() / static_cast<double>(samples.size());
}

double isotropy_statistic(std::span<const std::complex<double>> samples,
                          std::span<const double> radii, int n_angles) {
  if (n_angles < 4) throw ArgumentError("isotropy statistic needs at least 4 angles");
  double worst = 0.0;
  std::vector<std::complex<double>> cf(static_cast<std::size_t>(n_angles));
  for (const double r : radii) {
    for (int j = 0; j < n_angles; ++j) {
      const double angle = 2.0 * std::numbers::pi * j / n_angles;
      cf[static_cast<std::size_t>(j)] = empirical_cf(samples, std::polar(r, angle));
    }
    for (std::size_t a = 0; a < cf.size(); ++a) {
      for (std::size_t b = a + 1; b < cf.size(); ++b) worst = std::max(worst, std::abs(cf[a] - cf[b]));
    }
  }
  return worst;
}

std::vector<double> select_radii(std::span<const std::complex<double>> samples, double lo,
                                 double hi, std::size_t count, int n_angles) {
  if (samples.empty()) throw ArgumentError("radius selection on an empty sample");
  std::vector<double> moduli;
  moduli.reserve(samples.size());
  for (const auto& y : samples) moduli.push_back(std::abs(y));
  double scale = median(moduli);
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<double> inside;
  double fallback = 1.0 / scale;
  double fallback_gap = 2.0;
  for (int step = -24; step <= 24; ++step) {
    const double r = std::pow(2.0, step / 4.0) / scale;
    double avg = 0.0;
    for (int j = 0; j < n_angles; ++j) {
      avg += std::abs(empirical_cf(samples, std::polar(r, 2.0 * std::numbers::pi * j / n_angles)));
    }
    avg /= n_angles;
    if (avg >= lo && avg <= hi) inside.push_back(r);
    const double gap = std::abs(avg - 0.5 * (lo + hi));
    if (gap < fallback_gap) {
      fallback_gap = gap;
      fallback = r;
    }
  }
  if (inside.empty()) return {fallback};
  if (inside.size() <= count) return inside;
  std::vector<double> picked;
  for (std::size_t i = 0; i < count; ++i) {
    picked.push_back(inside[i * (inside.size() - 1) / (count - 1 == 0 ? 1 : count - 1)]);
  }
  return picked;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("KS distance needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_distance(std::span<const double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw ArgumentError("KS distance needs a nonempty sample");
  std::vector<double> s(a.begin(), a.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double max_tail_exponent(std::span<const double> samples, TailPrefactor prefactor) {
  if (samples.size() < 2000) throw ArgumentError("tail exponent fit needs at least 2000 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t n = sorted.size();
  const std::size_t k = n / 10;
  // Weighted least squares of v = log S(y) [- log y] on y, weight i ~ 1/Var(log S).
  double sw = 0.0, sy = 0.0, sv = 0.0, syy = 0.0, syv = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double y = sorted[i];
    if (prefactor == TailPrefactor::linear && !(y > 0.0)) continue;
    const double survival = static_cast<double>(i + 1) / static_cast<double>(n);
    const double v = std::log(survival) - (prefactor == TailPrefactor::linear ? std::log(y) : 0.0);
    const double w = static_cast<double>(i + 1);
    sw += w;
    sy += w * y;
    sv += w * v;
    syy += w * y * y;
    syv += w * y * v;
    ++used;
  }
  if (used < 10) throw FitError("too little upper-tail mass for a tail fit");
  const double var_y = syy / sw - (sy / sw) * (sy / sw);
  if (!(var_y > 1e-12)) throw FitError("degenerate upper tail (constant samples)");
  const double slope = (syv / sw - (sy / sw) * (sv / sw)) / var_y;
  return std::abs(slope);
}

}  // namespace stats
}  // namespace cbbm
