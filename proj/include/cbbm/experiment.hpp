#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cbbm/partition.hpp"
#include "cbbm/phase.hpp"

namespace cbbm {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

enum class ExperimentKind {
  tree_moments,
  martingale,
  free_energy_scan,
  glassy_tail,
  isotropy,
  truncation,
  extremal_max,
  bridge_check,
  cluster_bank,
  limit_object,
};

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment(std::string_view name);
const std::vector<ExperimentKind>& all_experiments();

/// Invalid or incomplete configuration (CLI exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Declarative experiment configuration. Optional fields are required or
/// ignored depending on the experiment (see `required_fields`).
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::tree_moments;
  std::vector<std::pair<int, double>> dist{{2, 1.0}};
  std::optional<double> t;
  std::optional<std::size_t> replicas;
  std::optional<double> rho;
  std::optional<std::vector<ComplexTemperature>> beta_list;
  std::optional<std::vector<double>> A_list;
  std::uint64_t seed = 0;
  std::optional<double> gamma;
  std::optional<double> r;
  std::filesystem::path output_dir = "runs";
  unsigned threads = 0;

  // Experiment knobs.
  std::optional<double> delta;             // truncation: |discarded| threshold
  double epsilon = 0.05;                   // truncation: allowed P{|discarded| > delta}
  std::optional<GridAxis> sigma_range;     // free_energy_scan
  std::optional<GridAxis> tau_range;       // free_energy_scan
  double C = 1.0;                          // limit_object
  double Z = 1.0;                          // limit_object
  std::optional<std::filesystem::path> cluster_bank;  // limit_object input bank
  std::size_t bank_size = 200;             // limit_object: clusters when building a bank
  std::size_t max_attempts = 1'000'000;    // cluster sampling budget
  double k_fraction = 0.05;                // Hill estimator
  double grid_step = 0.05;                 // bridge_check / envelope grid
  std::size_t max_nodes = std::size_t{1} << 24;  // per-replica tree budget
  std::optional<std::size_t> only_replica;  // replay a single replica index

  nlohmann::json to_json() const;
  /// Parse a config document. Unknown keys and malformed values raise UsageError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

/// Field names an experiment needs beyond the defaults.
std::vector<std::string> required_fields(ExperimentKind kind);
/// Throws UsageError listing every missing or invalid field.
void validate(const ExperimentConfig& config);

struct RunManifest {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> artifacts;
  double wall_seconds = 0.0;
  std::vector<std::uint64_t> replica_seeds;
  std::size_t failed_replicas = 0;
  std::size_t total_replicas = 0;
  /// 0 on success, 1 when the experiment failed (e.g. > 10% failed replicas).
  int exit_code = 0;
};

/// Execute one experiment into a fresh subdirectory of `config.output_dir`.
/// Throws UsageError before touching the filesystem when the config is invalid.
RunManifest run(const ExperimentConfig& config);

/// Contour-ready grid file from a scan table (i, j, sigma, tau, p_limit, p_hat).
void emit_phase_figure_data(const std::vector<ScanRow>& rows, const std::filesystem::path& csv_path,
                            const std::filesystem::path& grid_path);

/// Lines of a CSV file that are not '#' comments.
std::string csv_body(const std::filesystem::path& path);

}  // namespace cbbm
