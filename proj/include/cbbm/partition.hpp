#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <string>

#include "cbbm/centering.hpp"
#include "cbbm/field.hpp"

namespace cbbm {

using Complex = std::complex<double>;

/// Inverse temperature beta = sigma + i tau.
struct ComplexTemperature {
  double sigma = 0.0;
  double tau = 0.0;

  Complex beta() const noexcept { return {sigma, tau}; }
  /// lambda = sigma + i rho tau.
  Complex lambda(double rho) const noexcept { return {sigma, rho * tau}; }
  ComplexTemperature conj() const noexcept { return {sigma, -tau}; }
};

/// Neumaier-compensated complex accumulator.
class CompensatedSum {
 public:
  void add(Complex value) noexcept {
    add_part(re_, re_c_, value.real());
    add_part(im_, im_c_, value.imag());
  }
  void add(double value) noexcept { add_part(re_, re_c_, value); }
  Complex value() const noexcept { return {re_ + re_c_, im_ + im_c_}; }
  double real() const noexcept { return re_ + re_c_; }

 private:
  static void add_part(double& sum, double& comp, double x) noexcept {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double re_ = 0.0, re_c_ = 0.0, im_ = 0.0, im_c_ = 0.0;
};

/// A complex number stored as e^{log_scale} * mantissa, so exponential sums
/// with exponents beyond the double range stay finite.
struct ScaledComplex {
  double log_scale = 0.0;
  Complex mantissa{0.0, 0.0};

  bool is_zero() const noexcept { return mantissa == Complex{0.0, 0.0}; }
  /// log |value|; -infinity for zero.
  double log_abs() const noexcept {
    return is_zero() ? -std::numeric_limits<double>::infinity()
                     : log_scale + std::log(std::abs(mantissa));
  }
  /// e^{shift} * value as an ordinary complex (may overflow only if the
  /// shifted value itself is out of range).
  Complex scaled(Complex shift) const noexcept {
    return std::exp(Complex{log_scale, 0.0} + shift) * mantissa;
  }
  Complex value() const noexcept { return scaled({0.0, 0.0}); }
};

/// Raw partition function sum_k exp(sigma x_k + i tau y_k), fixed leaf order.
ScaledComplex partition_function(const CorrelatedField& field, ComplexTemperature beta);

struct RescaledPartition {
  Complex full;  // e^{-beta m(t)} * raw, the |rho| = 1 normalisation
  Complex real;  // e^{-sigma m(t)} * raw, the |rho| < 1 normalisation
};
RescaledPartition rescaled_partition(const CorrelatedField& field, ComplexTemperature beta);

/// Phase attached to each term of the truncated sum.
enum class PhaseConvention {
  unrotated,  // e^{i tau y_k}
  rotated,    // e^{i tau (y_k - rho m(t))}: global rotation by e^{-i rho tau m(t)}
};

struct TruncatedPartition {
  Complex kept;       // leaves with x_k - m(t) >= -A
  Complex discarded;  // leaves with x_k - m(t) < -A
};
TruncatedPartition truncated_partition(const CorrelatedField& field, ComplexTemperature beta,
                                       double A,
                                       PhaseConvention phase = PhaseConvention::unrotated);

/// M_beta(t) = e^{-t(1 + sigma^2/2 - tau^2/2) - i sigma rho tau t} * raw; E M = 1.
Complex additive_martingale(const CorrelatedField& field, ComplexTemperature beta);

/// Z(t) = sum_k (sqrt2 t - x_k) e^{-sqrt2 (sqrt2 t - x_k)} over the X field.
double derivative_martingale(std::span<const double> x, double t);
inline double derivative_martingale(const CorrelatedField& field) {
  return derivative_martingale(field.x(), field.horizon());
}

/// p_t(beta) = (1/t) log |raw|; -infinity when raw is exactly zero.
double log_partition(const CorrelatedField& field, ComplexTemperature beta);

/// Everything above for one realisation.
struct PartitionStatistics {
  ScaledComplex raw;
  Complex rescaled_full;
  Complex rescaled_real;
  Complex martingale;
  double derivative_martingale = 0.0;
  double log_partition = 0.0;
  double t = 0.0;
  ComplexTemperature beta;
  double rho = 0.0;
  std::size_t n = 0;
};
PartitionStatistics partition_statistics(const CorrelatedField& field, ComplexTemperature beta);

/// CSV schema for one realisation per row.
std::string partition_csv_header();
std::string partition_csv_row(std::uint64_t seed, const PartitionStatistics& stats);

}  // namespace cbbm
