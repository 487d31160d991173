#include "cbbm/phase.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "cbbm/csv.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/gw_tree.hpp"
#include "cbbm/replicas.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

namespace cbbm {

std::string_view to_string(PhaseTag tag) {
  switch (tag) {
    case PhaseTag::B1:
      return "B1";
    case PhaseTag::B2:
      return "B2";
    case PhaseTag::B3:
      return "B3";
    case PhaseTag::boundary:
      return "BOUNDARY";
  }
  return "?";
}

namespace {

// Signed margins of the defining inequalities; positive means "holds strictly".
struct Margins {
  double glassy;     // 2 sigma^2 - 1
  double diagonal;   // |sigma| + |tau| - sqrt 2
  double disk;       // sigma^2 + tau^2 - 1
};

Margins margins(ComplexTemperature b) {
  return {2.0 * b.sigma * b.sigma - 1.0, std::abs(b.sigma) + std::abs(b.tau) - std::numbers::sqrt2,
          b.sigma * b.sigma + b.tau * b.tau - 1.0};
}

bool in_b2(const Margins& m, double slack) { return m.glassy > slack && m.diagonal > slack; }
bool in_b3(const Margins& m, double slack) { return -m.glassy > slack && m.disk > slack; }
// Inside the unit disk, or on the glassy side below the diagonal.
bool in_b1(const Margins& m, double slack) {
  return -m.disk > slack || (m.glassy > slack && -m.diagonal > slack);
}

}  // namespace

PhaseRegion classify(ComplexTemperature beta, double tolerance) {
  const Margins m = margins(beta);
  PhaseRegion region{PhaseTag::boundary, tolerance};
  if (in_b2(m, tolerance)) {
    region.tag = PhaseTag::B2;
  } else if (in_b3(m, tolerance)) {
    region.tag = PhaseTag::B3;
  } else if (!in_b2(m, -tolerance) && !in_b3(m, -tolerance)) {
    region.tag = PhaseTag::B1;
  }
  return region;
}

double free_energy_b1(ComplexTemperature b) {
  return 1.0 + 0.5 * (b.sigma * b.sigma - b.tau * b.tau);
}
double free_energy_b2(ComplexTemperature b) { return std::numbers::sqrt2 * std::abs(b.sigma); }
double free_energy_b3(ComplexTemperature b) { return 0.5 + b.sigma * b.sigma; }

double limiting_free_energy(ComplexTemperature beta, double tolerance) {
  switch (classify(beta, tolerance).tag) {
    case PhaseTag::B1:
      return free_energy_b1(beta);
    case PhaseTag::B2:
      return free_energy_b2(beta);
    case PhaseTag::B3:
      return free_energy_b3(beta);
    case PhaseTag::boundary:
      break;
  }
  // Closures of the regions touching this point, widened by the tolerance.
  const Margins m = margins(beta);
  std::vector<double> values;
  if (in_b2(m, -tolerance)) values.push_back(free_energy_b2(beta));
  if (in_b3(m, -tolerance)) values.push_back(free_energy_b3(beta));
  if (in_b1(m, -tolerance)) values.push_back(free_energy_b1(beta));
  // Within the band the case formulas differ by at most a few multiples of it.
  const double agree = 1e-9 + 8.0 * tolerance * (1.0 + std::abs(beta.sigma) + std::abs(beta.tau));
  for (const double v : values) {
    if (std::abs(v - values.front()) > agree) {
      throw std::logic_error("free-energy case formulas disagree on a phase boundary");
    }
  }
  return values.front();
}

double GridAxis::at(std::size_t i) const {
  if (resolution < 2) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

std::vector<ScanRow> grid_scan(const ScanSettings& settings, const OffspringDistribution& dist) {
  if (settings.sigma.resolution < 1 || settings.tau.resolution < 1) {
    throw ArgumentError("grid resolution must be positive");
  }
  std::vector<ComplexTemperature> cells;
  for (std::size_t i = 0; i < settings.sigma.resolution; ++i) {
    for (std::size_t j = 0; j < settings.tau.resolution; ++j) {
      cells.push_back({settings.sigma.at(i), settings.tau.at(j)});
    }
  }

  // p_t per replica per cell; nullopt marks a failed replica.
  using CellValues = std::optional<std::vector<double>>;
  const auto per_replica = run_replicas<CellValues>(
      settings.replicas, settings.threads, [&](std::size_t r) -> CellValues {
        const std::uint64_t seed = replica_seed(settings.seed, r);
        try {
          auto tree = std::make_shared<const GwTree>(sample_tree(dist, settings.t, seed));
          const auto field = sample_correlated_pair(tree, settings.rho, seed);
          std::vector<double> values;
          values.reserve(cells.size());
          for (const auto& beta : cells) values.push_back(log_partition(field, beta));
          return values;
        } catch (const ResourceLimitError&) {
          return std::nullopt;
        }
      });

  std::vector<ScanRow> rows;
  rows.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ScanRow row;
    row.beta = cells[c];
    row.phase = classify(cells[c]).tag;
    row.p_limit = limiting_free_energy(cells[c]);
    row.t = settings.t;
    RunningStats acc;
    for (const auto& values : per_replica) {
      if (!values || !std::isfinite((*values)[c])) {
        ++row.failed;
        continue;
      }
      acc.add((*values)[c]);
    }
    row.replicas = acc.count();
    if (row.replicas > 0) {
      row.p_hat = acc.mean();
      row.stderr_ = acc.standard_error();
    } else {
      row.p_hat = std::numeric_limits<double>::quiet_NaN();
      row.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

std::string scan_csv_header() { return "sigma,tau,phase,p_limit,p_hat,stderr,n_replicas,t"; }

std::string scan_csv_row(const ScanRow& row) {
  return csv_join({format_double(row.beta.sigma), format_double(row.beta.tau),
                   std::string(to_string(row.phase)), format_double(row.p_limit),
                   format_double(row.p_hat), format_double(row.stderr_),
                   std::to_string(row.replicas), format_double(row.t)});
}

}  // namespace cbbm
