#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cbbm/offspring.hpp"
#include "cbbm/partition.hpp"

namespace cbbm {

enum class PhaseTag { B1, B2, B3, boundary };

std::string_view to_string(PhaseTag tag);

struct PhaseRegion {
  PhaseTag tag = PhaseTag::B1;
  double boundary_tolerance = 1e-9;
};

/// Purely analytic classification; never looks at simulation output.
///   B2: 2 sigma^2 > 1 and |sigma| + |tau| > sqrt 2
///   B3: 2 sigma^2 < 1 and sigma^2 + tau^2 > 1
///   B1: complement of the closure of B2 u B3
/// A point within `tolerance` of a phase boundary is tagged boundary.
PhaseRegion classify(ComplexTemperature beta, double tolerance = 1e-9);

/// Case formulas of the limiting log-partition function.
double free_energy_b1(ComplexTemperature beta);  // 1 + (sigma^2 - tau^2)/2
double free_energy_b2(ComplexTemperature beta);  // sqrt 2 |sigma|
double free_energy_b3(ComplexTemperature beta);  // 1/2 + sigma^2

/// p(beta). On boundary points every applicable case formula is evaluated and
/// checked to agree before the common value is returned.
double limiting_free_energy(ComplexTemperature beta, double tolerance = 1e-9);

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t resolution = 2;  // points, inclusive of both ends
  double at(std::size_t i) const;
};

struct ScanSettings {
  GridAxis sigma;
  GridAxis tau;
  double t = 10.0;
  std::size_t replicas = 100;
  double rho = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ScanRow {
  ComplexTemperature beta;
  PhaseTag phase = PhaseTag::B1;
  double p_limit = 0.0;
  double p_hat = 0.0;     // mean of p_t over usable replicas
  double stderr_ = 0.0;   // standard error of that mean
  std::size_t replicas = 0;
  std::size_t failed = 0;  // replicas lost to budget errors or raw == 0
  double t = 0.0;
};

/// Scan a (sigma, tau) grid, row-major in sigma then tau. Replicas are
/// shared by all cells (common random numbers); a replica that breaks the
/// node budget is counted as failed in every cell and the scan continues.
std::vector<ScanRow> grid_scan(const ScanSettings& settings, const OffspringDistribution& dist);

std::string scan_csv_header();
std::string scan_csv_row(const ScanRow& row);

}  // namespace cbbm
