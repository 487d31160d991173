#include "cbbm/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbbm/csv.hpp"
#include "cbbm/errors.hpp"

namespace cbbm {

double m_of_t(double t) {
  if (!(t > 0.0)) throw ArgumentError("m(t) needs t > 0");
  return std::numbers::sqrt2 * t - 3.0 / (2.0 * std::numbers::sqrt2) * std::log(t);
}

ScaledComplex partition_function(const CorrelatedField& field, ComplexTemperature beta) {
  const auto x = field.x();
  const auto y = field.y();
  if (x.empty()) throw ArgumentError("partition function of an empty field");
  double top = -std::numeric_limits<double>::infinity();
  for (const double xk : x) top = std::max(top, beta.sigma * xk);
  CompensatedSum sum;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sum.add(std::polar(std::exp(beta.sigma * x[k] - top), beta.tau * y[k]));
  }
  return {top, sum.value()};
}

RescaledPartition rescaled_partition(const CorrelatedField& field, ComplexTemperature beta) {
  const double m = m_of_t(field.horizon());
  const ScaledComplex raw = partition_function(field, beta);
  return {raw.scaled(-beta.beta() * m), raw.scaled({-beta.sigma * m, 0.0})};
}

TruncatedPartition truncated_partition(const CorrelatedField& field, ComplexTemperature beta,
                                       double A, PhaseConvention phase) {
  if (!(A > 0.0)) throw ArgumentError("truncation level A must be positive");
  const double m = m_of_t(field.horizon());
  const double shift = phase == PhaseConvention::rotated ? field.rho() * m : 0.0;
  const auto x = field.x();
  const auto y = field.y();
  CompensatedSum kept;
  CompensatedSum discarded;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double depth = x[k] - m;
    const Complex term = std::polar(std::exp(beta.sigma * depth), beta.tau * (y[k] - shift));
    (depth >= -A ? kept : discarded).add(term);
  }
  return {kept.value(), discarded.value()};
}

Complex additive_martingale(const CorrelatedField& field, ComplexTemperature beta) {
  const double t = field.horizon();
  const double s = beta.sigma;
  const double tau = beta.tau;
  const Complex shift{-t * (1.0 + 0.5 * s * s - 0.5 * tau * tau), -s * field.rho() * tau * t};
  return partition_function(field, beta).scaled(shift);
}

double derivative_martingale(std::span<const double> x, double t) {
  constexpr double r2 = std::numbers::sqrt2;
  CompensatedSum sum;
  for (const double xk : x) {
    const double gap = r2 * t - xk;
    sum.add(gap * std::exp(-r2 * gap));
  }
  return sum.real();
}

double log_partition(const CorrelatedField& field, ComplexTemperature beta) {
  const double t = field.horizon();
  if (!(t > 0.0)) throw ArgumentError("log-partition needs t > 0");
  return partition_function(field, beta).log_abs() / t;
}

PartitionStatistics partition_statistics(const CorrelatedField& field, ComplexTemperature beta) {
  PartitionStatistics st;
  st.t = field.horizon();
  st.beta = beta;
  st.rho = field.rho();
  st.n = field.size();
  st.raw = partition_function(field, beta);
  const double m = m_of_t(st.t);
  st.rescaled_full = st.raw.scaled(-beta.beta() * m);
  st.rescaled_real = st.raw.scaled({-beta.sigma * m, 0.0});
  st.martingale = additive_martingale(field, beta);
  st.derivative_martingale = derivative_martingale(field);
  st.log_partition = st.raw.log_abs() / st.t;
  return st;
}

std::string partition_csv_header() {
  return "seed,t,rho,sigma,tau,n,re_raw,im_raw,re_rescaled_real,im_rescaled_real,re_M,im_M,Z,p_t";
}

std::string partition_csv_row(std::uint64_t seed, const PartitionStatistics& st) {
  const Complex raw = st.raw.value();
  return csv_join({std::to_string(seed), format_double(st.t), format_double(st.rho),
                   format_double(st.beta.sigma), format_double(st.beta.tau),
                   std::to_string(st.n), format_double(raw.real()), format_double(raw.imag()),
                   format_double(st.rescaled_real.real()), format_double(st.rescaled_real.imag()),
                   format_double(st.martingale.real()), format_double(st.martingale.imag()),
                   format_double(st.derivative_martingale), format_double(st.log_partition)});
}

}  // namespace cbbm
