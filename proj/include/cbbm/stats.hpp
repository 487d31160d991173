#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace cbbm {

/// Welford mean/variance accumulator.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double median(std::vector<double> values);
/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

namespace stats {

enum class TailMethod { hill, cf_regression };

struct StableFit {
  double alpha_hat = 0.0;
  double alpha_se = 0.0;
  std::size_t k_used = 0;
  TailMethod method = TailMethod::hill;
};

/// Hill estimator on the top ceil(k_fraction * n) order statistics, using the
/// next order statistic as threshold; standard error alpha_hat / sqrt(k).
StableFit hill_estimator(std::span<const double> moduli, double k_fraction = 0.05);

/// (1/n) sum_j exp(i Re(conj(z) Y_j)).
std::complex<double> empirical_cf(std::span<const std::complex<double>> samples,
                                  std::complex<double> z);

/// max over radii r and angle pairs of |cf(r e^{i a}) - cf(r e^{i b})| on an
/// angle grid a, b in {2 pi j / n_angles}.
double isotropy_statistic(std::span<const std::complex<double>> samples,
                          std::span<const double> radii, int n_angles = 16);

/// Radii where the angle-averaged |cf| lies in [lo, hi], at most `count` of
/// them (log-spaced search around the reciprocal median modulus). Falls back
/// to the single radius closest to (lo + hi) / 2.
std::vector<double> select_radii(std::span<const std::complex<double>> samples, double lo = 0.3,
                                 double hi = 0.7, std::size_t count = 4, int n_angles = 16);

/// Two-sample Kolmogorov-Smirnov sup-distance.
double ks_distance(std::span<const double> a, std::span<const double> b);
/// One-sample sup-distance to a continuous CDF.
double ks_distance(std::span<const double> a, const std::function<double(double)>& cdf);

/// Prefactor assumed in front of the exponential survival tail.
enum class TailPrefactor {
  none,    // S(y) ~ c e^{-a y}
  linear,  // S(y) ~ c y e^{-a y}, the BBM maximum
};

/// Weighted least-squares slope of log S(y) (minus log y for the linear
/// prefactor) against y over the upper decile; returns |slope|.
double max_tail_exponent(std::span<const double> shifted_max_samples,
                         TailPrefactor prefactor = TailPrefactor::linear);

}  // namespace stats
}  // namespace cbbm
