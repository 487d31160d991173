#include "cbbm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "cbbm/csv.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/extremal.hpp"
#include "cbbm/gw_tree.hpp"
#include "cbbm/oracles.hpp"
#include "cbbm/replicas.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

namespace cbbm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kNames[] = {
    {ExperimentKind::tree_moments, "tree_moments"},
    {ExperimentKind::martingale, "martingale"},
    {ExperimentKind::free_energy_scan, "free_energy_scan"},
    {ExperimentKind::glassy_tail, "glassy_tail"},
    {ExperimentKind::isotropy, "isotropy"},
    {ExperimentKind::truncation, "truncation"},
    {ExperimentKind::extremal_max, "extremal_max"},
    {ExperimentKind::bridge_check, "bridge_check"},
    {ExperimentKind::cluster_bank, "cluster_bank"},
    {ExperimentKind::limit_object, "limit_object"},
};

template <class T>
T read_value(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config field '") + key + "': " + e.what());
  }
}

ComplexTemperature parse_beta(const json& item) {
  if (item.is_number()) return {item.get<double>(), 0.0};
  if (item.is_array() && item.size() == 2) return {item[0].get<double>(), item[1].get<double>()};
  if (item.is_object()) {
    return {item.value("sigma", 0.0), item.value("tau", 0.0)};
  }
  throw UsageError("beta entries must be a number, [sigma, tau] or {\"sigma\", \"tau\"}");
}

GridAxis parse_axis(const json& item) {
  GridAxis axis;
  if (item.is_array() && item.size() == 3) {
    axis.lo = item[0].get<double>();
    axis.hi = item[1].get<double>();
    axis.resolution = item[2].get<std::size_t>();
  } else if (item.is_object()) {
    axis.lo = item.at("lo").get<double>();
    axis.hi = item.at("hi").get<double>();
    axis.resolution = item.at("resolution").get<std::size_t>();
  } else {
    throw UsageError("grid ranges must be [lo, hi, resolution] or {lo, hi, resolution}");
  }
  return axis;
}

json axis_json(const GridAxis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"resolution", a.resolution}}; }

bool has_field(const ExperimentConfig& c, std::string_view name) {
  if (name == "t") return c.t.has_value();
  if (name == "replicas") return c.replicas.has_value();
  if (name == "rho") return c.rho.has_value();
  if (name == "beta_list") return c.beta_list.has_value() && !c.beta_list->empty();
  if (name == "A_list") return c.A_list.has_value() && !c.A_list->empty();
  if (name == "r") return c.r.has_value();
  if (name == "delta") return c.delta.has_value();
  if (name == "sigma_range") return c.sigma_range.has_value();
  if (name == "tau_range") return c.tau_range.has_value();
  return true;
}

// ---------------------------------------------------------------------------
// Output plumbing

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path fresh_directory(const fs::path& root, std::string_view experiment) {
  fs::create_directories(root);
  const std::string base = std::string(experiment) + "-" + utc_stamp();
  for (int n = 0;; ++n) {
    fs::path candidate = root / (n == 0 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(candidate)) return candidate;
  }
}

class RunContext {
 public:
  RunContext(const ExperimentConfig& config, RunManifest& manifest)
      : config_(config), manifest_(manifest) {}

  const ExperimentConfig& config() const { return config_; }

  void write_csv(const std::string& name, const std::string& header,
                 const std::vector<std::string>& rows) {
    const fs::path path = manifest_.directory / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# experiment: " << to_string(config_.experiment) << '\n';
    out << "# library_version: " << kLibraryVersion << '\n';
    out << "# config: " << config_.to_json().dump() << '\n';
    out << header << '\n';
    for (const auto& row : rows) out << row << '\n';
    manifest_.artifacts.push_back(path);
  }

  void write_json(const std::string& name, const json& doc) {
    const fs::path path = manifest_.directory / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    manifest_.artifacts.push_back(path);
  }

  void add_artifact(const fs::path& path) { manifest_.artifacts.push_back(path); }
  const fs::path& directory() const { return manifest_.directory; }

  /// Replica indices this run executes: all of them, or the single replay index.
  std::vector<std::size_t> replica_indices() const {
    if (config_.only_replica) return {*config_.only_replica};
    std::vector<std::size_t> idx(*config_.replicas);
    for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r;
    return idx;
  }

  void record_replicas(const std::vector<std::size_t>& indices, std::size_t failed) {
    manifest_.replica_seeds.clear();
    for (const auto r : indices) manifest_.replica_seeds.push_back(replica_seed(config_.seed, r));
    manifest_.total_replicas = indices.size();
    manifest_.failed_replicas = failed;
  }

  void write_errors(const std::vector<std::string>& rows) {
    if (!rows.empty()) write_csv("errors.csv", "replica,seed,error", rows);
  }

 private:
  const ExperimentConfig& config_;
  RunManifest& manifest_;
};

OffspringDistribution make_dist(const ExperimentConfig& c) {
  return OffspringDistribution::from_pairs(c.dist);
}

std::string error_row(std::size_t r, std::uint64_t seed, const std::string& what) {
  std::string clean = what;
  std::replace(clean.begin(), clean.end(), ',', ';');
  std::replace(clean.begin(), clean.end(), '\n', ' ');
  return csv_join({std::to_string(r), std::to_string(seed), clean});
}

json mean_report(const RunningStats& s) {
  return {{"mean", s.mean()}, {"stderr", s.standard_error()}, {"n", s.count()}};
}

double z_score(double estimate, double target, double se) {
  if (se > 0.0) return (estimate - target) / se;
  return estimate == target ? 0.0 : std::numeric_limits<double>::infinity();
}

// One replica of the correlated field experiments. `failure` is set instead of
// throwing so that budget problems become error rows.
struct FieldReplica {
  std::optional<CorrelatedField> field;
  std::string failure;
};

FieldReplica field_replica(const ExperimentConfig& c, const OffspringDistribution& dist,
                           std::uint64_t seed, double rho) {
  FieldReplica out;
  try {
    TreeOptions options;
    options.max_nodes = c.max_nodes;
    auto tree = std::make_shared<const GwTree>(sample_tree(dist, *c.t, seed, options));
    out.field.emplace(sample_correlated_pair(std::move(tree), rho, seed));
  } catch (const ResourceLimitError& e) {
    out.failure = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

void run_tree_moments(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto dist = make_dist(c);
  const auto indices = ctx.replica_indices();
  struct Row {
    std::size_t n = 0, nodes = 0;
    std::string failure;
  };
  TreeOptions options;
  options.max_nodes = c.max_nodes;
  const auto results = run_replicas<Row>(indices.size(), c.threads, [&](std::size_t i) {
    Row row;
    try {
      const auto tree = sample_tree(dist, *c.t, replica_seed(c.seed, indices[i]), options);
      row.n = tree.leaf_count();
      row.nodes = tree.node_count();
    } catch (const ResourceLimitError& e) {
      row.failure = e.what();
    }
    return row;
  });

  std::vector<std::string> rows, errors;
  RunningStats acc;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto seed = replica_seed(c.seed, indices[i]);
    const auto& r = results[i];
    if (!r.failure.empty()) {
      ++failed;
      rows.push_back(csv_join({std::to_string(indices[i]), std::to_string(seed), "error", "", ""}));
      errors.push_back(error_row(indices[i], seed, r.failure));
      continue;
    }
    acc.add(static_cast<double>(r.n));
    rows.push_back(csv_join({std::to_string(indices[i]), std::to_string(seed), "ok",
                             std::to_string(r.n), std::to_string(r.nodes)}));
  }
  ctx.write_csv("tree_moments.csv", "replica,seed,status,n,nodes", rows);
  ctx.write_errors(errors);
  ctx.record_replicas(indices, failed);

  const double target = std::exp((dist.mean_children() - 1.0) * *c.t);
  const double z = z_score(acc.mean(), target, acc.standard_error());
  ctx.write_json("summary.json",
                 {{"estimator", "mean population size"},
                  {"parameters", {{"t", *c.t}}},
                  {"estimate", mean_report(acc)},
                  {"target", target},
                  {"z", z},
                  {"pass", std::abs(z) <= 3.0}});
}

void run_martingale(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto dist = make_dist(c);
  const auto indices = ctx.replica_indices();
  const auto& betas = *c.beta_list;
  struct Row {
    std::vector<PartitionStatistics> stats;
    std::string failure;
  };
  const auto results = run_replicas<Row>(indices.size(), c.threads, [&](std::size_t i) {
    Row row;
    auto rep = field_replica(c, dist, replica_seed(c.seed, indices[i]), *c.rho);
    if (!rep.field) {
      row.failure = rep.failure;
      return row;
    }
    for (const auto& b : betas) row.stats.push_back(partition_statistics(*rep.field, b));
    return row;
  });

  std::vector<std::string> rows, errors;
  std::vector<RunningStats> re(betas.size()), im(betas.size()), sq(betas.size());
  std::size_t failed = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto seed = replica_seed(c.seed, indices[i]);
    if (!results[i].failure.empty()) {
      ++failed;
      errors.push_back(error_row(indices[i], seed, results[i].failure));
      continue;
    }
    for (std::size_t b = 0; b < betas.size(); ++b) {
      const auto& st = results[i].stats[b];
      rows.push_back(std::to_string(indices[i]) + "," + partition_csv_row(seed, st));
      re[b].add(st.martingale.real());
      im[b].add(st.martingale.imag());
      sq[b].add(std::norm(st.martingale));
    }
  }
  ctx.write_csv("martingale.csv", "replica," + partition_csv_header(), rows);
  ctx.write_errors(errors);
  ctx.record_replicas(indices, failed);

  json reports = json::array();
  for (std::size_t b = 0; b < betas.size(); ++b) {
    const auto beta = betas[b];
    json report = {{"estimator", "additive martingale moments"},
                   {"parameters",
                    {{"sigma", beta.sigma}, {"tau", beta.tau}, {"rho", *c.rho}, {"t", *c.t}}},
                   {"re_M", mean_report(re[b])},
                   {"im_M", mean_report(im[b])},
                   {"abs_M_squared", mean_report(sq[b])}};
    const double zr = z_score(re[b].mean(), 1.0, re[b].standard_error());
    const double zi = z_score(im[b].mean(), 0.0, im[b].standard_error());
    bool pass = std::abs(zr) <= 3.0 && std::abs(zi) <= 3.0;
    oracles::SecondMomentParams p{beta.sigma, beta.tau, *c.t, dist.second_factorial_moment(), true};
    const double target = oracles::martingale_second_moment(p);
    const double z2 = z_score(sq[b].mean(), target, sq[b].standard_error());
    pass = pass && std::abs(z2) <= 3.0;
    report["second_moment_target"] = target;
    report["uniform_in_t"] = beta.sigma * beta.sigma + beta.tau * beta.tau < 1.0;
    report["z"] = {{"re_M", zr}, {"im_M", zi}, {"abs_M_squared", z2}};
    report["pass"] = pass;
    reports.push_back(std::move(report));
  }
  ctx.write_json("summary.json", reports);
}

void run_free_energy_scan(RunContext& ctx) {
  const auto& c = ctx.config();
  ScanSettings settings;
  settings.sigma = *c.sigma_range;
  settings.tau = *c.tau_range;
  settings.t = *c.t;
  settings.replicas = *c.replicas;
  settings.rho = *c.rho;
  settings.seed = c.seed;
  settings.threads = c.threads;
  const auto table = grid_scan(settings, make_dist(c));
  std::vector<std::string> rows;
  std::size_t failed = 0;
  for (const auto& row : table) {
    rows.push_back(scan_csv_row(row));
    failed = std::max(failed, row.failed);
  }
  ctx.write_csv("scan.csv", scan_csv_header(), rows);
  const fs::path grid = ctx.directory() / "grid.csv";
  const fs::path cells = ctx.directory() / "cells.csv";
  emit_phase_figure_data(table, cells, grid);
  ctx.add_artifact(cells);
  ctx.add_artifact(grid);
  std::vector<std::size_t> all(*c.replicas);
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  ctx.record_replicas(all, failed);

  json cells_json = json::array();
  for (const auto& row : table) {
    cells_json.push_back({{"sigma", row.beta.sigma},
                          {"tau", row.beta.tau},
                          {"phase", std::string(to_string(row.phase))},
                          {"p_limit", row.p_limit},
                          {"p_hat", row.p_hat},
                          {"stderr", row.stderr_},
                          {"abs_error", std::abs(row.p_hat - row.p_limit)}});
  }
  ctx.write_json("summary.json", {{"estimator", "replica mean of p_t"},
                                  {"parameters", {{"t", *c.t}, {"rho", *c.rho}}},
                                  {"cells", cells_json}});
}

// Sample of rescaled partition values: e^{-beta m} Z for |rho| = 1, otherwise
// e^{-sigma m} Z.
Complex rescaled_value(const PartitionStatistics& st) {
  return std::abs(st.rho) == 1.0 ? st.rescaled_full : st.rescaled_real;
}

std::vector<Complex> isotropised(std::span<const Complex> samples, std::uint64_t seed) {
  StreamRng rng(seed, Stream::synthetic);
  std::vector<Complex> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(std::polar(std::abs(s), 2.0 * std::numbers::pi * rng.uniform()));
  }
  return out;
}

void run_tail_family(RunContext& ctx, bool isotropy) {
  const auto& c = ctx.config();
  const auto dist = make_dist(c);
  const auto indices = ctx.replica_indices();
  std::vector<ComplexTemperature> betas = *c.beta_list;
  const std::size_t n_requested = betas.size();
  if (isotropy) {
    for (std::size_t b = 0; b < n_requested; ++b) betas.push_back({betas[b].sigma, 0.0});
  }
  struct Row {
    std::vector<PartitionStatistics> stats;
    std::string failure;
  };
  const auto results = run_replicas<Row>(indices.size(), c.threads, [&](std::size_t i) {
    Row row;
    auto rep = field_replica(c, dist, replica_seed(c.seed, indices[i]), *c.rho);
    if (!rep.field) {
      row.failure = rep.failure;
      return row;
    }
    for (const auto& b : betas) row.stats.push_back(partition_statistics(*rep.field, b));
    return row;
  });

  std::vector<std::string> rows, errors;
  std::vector<std::vector<Complex>> samples(betas.size());
  std::size_t failed = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto seed = replica_seed(c.seed, indices[i]);
    if (!results[i].failure.empty()) {
      ++failed;
      errors.push_back(error_row(indices[i], seed, results[i].failure));
      continue;
    }
    for (std::size_t b = 0; b < betas.size(); ++b) {
      const auto& st = results[i].stats[b];
      if (b < n_requested) {
        rows.push_back(std::to_string(indices[i]) + "," + partition_csv_row(seed, st));
      }
      samples[b].push_back(rescaled_value(st));
    }
  }
  ctx.write_csv(isotropy ? "isotropy.csv" : "glassy_tail.csv", "replica," + partition_csv_header(),
                rows);
  ctx.write_errors(errors);
  ctx.record_replicas(indices, failed);

  json reports = json::array();
  for (std::size_t b = 0; b < n_requested; ++b) {
    const auto beta = betas[b];
    json report = {{"parameters",
                    {{"sigma", beta.sigma}, {"tau", beta.tau}, {"rho", *c.rho}, {"t", *c.t}}},
                   {"phase", std::string(to_string(classify(beta).tag))},
                   {"samples", samples[b].size()}};
    if (!isotropy) {
      std::vector<double> moduli;
      for (const auto& s : samples[b]) moduli.push_back(std::abs(s));
      const double target = std::numbers::sqrt2 / std::abs(beta.sigma);
      report["estimator"] = "Hill";
      report["target_alpha"] = target;
      json fits = json::array();
      for (const double kf : {0.02, 0.05, 0.1}) {
        try {
          const auto fit = stats::hill_estimator(moduli, kf);
          fits.push_back({{"k_fraction", kf},
                          {"alpha_hat", fit.alpha_hat},
                          {"stderr", fit.alpha_se},
                          {"k", fit.k_used}});
        } catch (const std::exception& e) {
          fits.push_back({{"k_fraction", kf}, {"error", e.what()}});
        }
      }
      report["fits"] = fits;
      try {
        const auto fit = stats::hill_estimator(moduli, c.k_fraction);
        report["alpha_hat"] = fit.alpha_hat;
        report["stderr"] = fit.alpha_se;
        report["pass"] = std::abs(fit.alpha_hat - target) <= 0.15;
      } catch (const std::exception& e) {
        report["error"] = e.what();
        report["pass"] = false;
      }
    } else {
      const auto& main = samples[b];
      const auto& control = samples[n_requested + b];
      report["estimator"] = "CF isotropy statistic";
      try {
        const auto radii = stats::select_radii(main);
        const double stat = stats::isotropy_statistic(main, radii);
        const auto calib_samples = isotropised(main, c.seed ^ 0x150705ULL);
        const double calib = stats::isotropy_statistic(calib_samples, radii);
        const auto control_radii = stats::select_radii(control);
        const double control_stat = stats::isotropy_statistic(control, control_radii);
        const auto control_calib =
            stats::isotropy_statistic(isotropised(control, c.seed ^ 0x150705ULL), control_radii);
        report["radii"] = radii;
        report["statistic"] = stat;
        report["calibration"] = calib;
        report["control_statistic"] = control_stat;
        report["control_calibration"] = control_calib;
        report["pass"] = stat <= 3.0 * calib && control_stat > 3.0 * control_calib;
      } catch (const std::exception& e) {
        report["error"] = e.what();
        report["pass"] = false;
      }
    }
    reports.push_back(std::move(report));
  }
  ctx.write_json("summary.json", reports);
}

void run_truncation(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto dist = make_dist(c);
  const auto indices = ctx.replica_indices();
  const auto& betas = *c.beta_list;
  const auto& levels = *c.A_list;
  struct Row {
    std::vector<TruncatedPartition> parts;  // beta-major, then A
    std::string failure;
  };
  const auto results = run_replicas<Row>(indices.size(), c.threads, [&](std::size_t i) {
    Row row;
    auto rep = field_replica(c, dist, replica_seed(c.seed, indices[i]), *c.rho);
    if (!rep.field) {
      row.failure = rep.failure;
      return row;
    }
    for (const auto& b : betas) {
      for (const double A : levels) row.parts.push_back(truncated_partition(*rep.field, b, A));
    }
    return row;
  });

  std::vector<std::string> rows, errors;
  std::vector<std::size_t> exceed(betas.size() * levels.size(), 0);
  std::size_t failed = 0, usable = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto seed = replica_seed(c.seed, indices[i]);
    if (!results[i].failure.empty()) {
      ++failed;
      errors.push_back(error_row(indices[i], seed, results[i].failure));
      continue;
    }
    ++usable;
    for (std::size_t b = 0; b < betas.size(); ++b) {
      for (std::size_t a = 0; a < levels.size(); ++a) {
        const auto& part = results[i].parts[b * levels.size() + a];
        const double mag = std::abs(part.discarded);
        if (mag > *c.delta) ++exceed[b * levels.size() + a];
        rows.push_back(csv_join({std::to_string(indices[i]), std::to_string(seed),
                                 format_double(betas[b].sigma), format_double(betas[b].tau),
                                 format_double(levels[a]), format_double(part.kept.real()),
                                 format_double(part.kept.imag()),
                                 format_double(part.discarded.real()),
                                 format_double(part.discarded.imag()), format_double(mag)}));
      }
    }
  }
  ctx.write_csv("truncation.csv",
                "replica,seed,sigma,tau,A,re_kept,im_kept,re_discarded,im_discarded,abs_discarded",
                rows);
  ctx.write_errors(errors);
  ctx.record_replicas(indices, failed);

  json reports = json::array();
  for (std::size_t b = 0; b < betas.size(); ++b) {
    json per_a = json::array();
    bool monotone = true;
    double previous = 1.0, last = 1.0;
    for (std::size_t a = 0; a < levels.size(); ++a) {
      const double frac = usable ? static_cast<double>(exceed[b * levels.size() + a]) /
                                       static_cast<double>(usable)
                                 : std::numeric_limits<double>::quiet_NaN();
      const double se = usable ? std::sqrt(frac * (1.0 - frac) / static_cast<double>(usable)) : 0.0;
      if (a > 0 && frac > previous) monotone = false;
      previous = last = frac;
      per_a.push_back({{"A", levels[a]}, {"p_exceed", frac}, {"stderr", se}});
    }
    reports.push_back({{"estimator", "P{|discarded| > delta}"},
                       {"parameters",
                        {{"sigma", betas[b].sigma},
                         {"tau", betas[b].tau},
                         {"rho", *c.rho},
                         {"t", *c.t},
                         {"delta", *c.delta},
                         {"epsilon", c.epsilon}}},
                       {"levels", per_a},
                       {"nonincreasing", monotone},
                       {"pass", monotone && last <= c.epsilon}});
  }
  ctx.write_json("summary.json", reports);
}

void run_extremal_max(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto dist = make_dist(c);
  const auto indices = ctx.replica_indices();
  struct Row {
    std::size_t n = 0;
    double shifted = 0.0, Z = 0.0;
    std::string failure;
  };
  const double m = m_of_t(*c.t);
  TreeOptions options;
  options.max_nodes = c.max_nodes;
  const auto results = run_replicas<Row>(indices.size(), c.threads, [&](std::size_t i) {
    Row row;
    const auto seed = replica_seed(c.seed, indices[i]);
    try {
      auto tree = std::make_shared<const GwTree>(sample_tree(dist, *c.t, seed, options));
      const auto field = sample_field(tree, seed);
      row.n = field.positions().size();
      row.shifted = max_position(field).value - m;
      row.Z = derivative_martingale(field.positions(), *c.t);
    } catch (const ResourceLimitError& e) {
      row.failure = e.what();
    }
    return row;
  });

  std::vector<std::string> rows, errors;
  std::vector<double> maxima, zs;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto seed = replica_seed(c.seed, indices[i]);
    const auto& r = results[i];
    if (!r.failure.empty()) {
      ++failed;
      rows.push_back(csv_join({std::to_string(indices[i]), std::to_string(seed), "error", "", "", ""}));
      errors.push_back(error_row(indices[i], seed, r.failure));
      continue;
    }
    maxima.push_back(r.shifted);
    zs.push_back(r.Z);
    rows.push_back(csv_join({std::to_string(indices[i]), std::to_string(seed), "ok",
                             std::to_string(r.n), format_double(r.shifted), format_double(r.Z)}));
  }
  ctx.write_csv("extremal_max.csv", "replica,seed,status,n,max_shifted,Z", rows);
  ctx.write_errors(errors);
  ctx.record_replicas(indices, failed);

  json report = {{"estimator", "law of max - m(t)"},
                 {"parameters", {{"t", *c.t}}},
                 {"samples", maxima.size()}};
  if (!maxima.empty()) {
    report["median"] = median(maxima);
    report["q10"] = quantile(maxima, 0.1);
    report["q90"] = quantile(maxima, 0.9);
  }
  try {
    const double a = stats::max_tail_exponent(maxima);
    report["tail_exponent"] = a;
    report["tail_target"] = std::numbers::sqrt2;
    report["pass"] = a >= 1.25 && a <= 1.6;
  } catch (const std::exception& e) {
    report["tail_error"] = e.what();
    report["pass"] = false;
  }
  try {
    const auto fit = estimate_cox_constants(maxima, zs);
    report["cox_C_hat"] = fit.C_hat;
    report["cox_residual"] = fit.residual;
  } catch (const std::exception& e) {
    report["cox_error"] = e.what();
  }
  ctx.write_json("summary.json", report);
}

void run_bridge_check(RunContext& ctx) {
  const auto& c = ctx.config();
  std::vector<std::string> rows;
  bool dominates = true;
  for (int j = 1; j <= 100; ++j) {
    const double x = 0.1 * j;
    const double bound = oracles::gaussian_tail_bound(x);
    const double exact = oracles::normal_tail(x);
    const bool ok = bound >= exact;
    dominates = dominates && ok;
    rows.push_back(csv_join(
        {format_double(x), format_double(bound), format_double(exact), ok ? "1" : "0"}));
  }
  ctx.write_csv("gaussian_tail.csv", "x,bound,normal_tail,dominates", rows);

  const double a = *c.r;
  const auto est = oracles::bridge_stay_below_mc(a, *c.t, c.grid_step, *c.replicas, c.seed);
  const double bound = oracles::bridge_barrier_bound(a, *c.t);
  const double exact = oracles::bridge_stay_below_exact(a, *c.t);
  ctx.write_csv("bridge.csv", "a,t,step,paths,probability,stderr,bound,exact",
                {csv_join({format_double(a), format_double(*c.t), format_double(c.grid_step),
                           std::to_string(est.paths), format_double(est.probability),
                           format_double(est.standard_error), format_double(bound),
                           format_double(exact)})});
  ctx.record_replicas({}, 0);
  ctx.write_json("summary.json",
                 {{"estimator", "bridge stay-below probability"},
                  {"parameters", {{"a", a}, {"t", *c.t}, {"step", c.grid_step}}},
                  {"estimate", est.probability},
                  {"stderr", est.standard_error},
                  {"bound", bound},
                  {"exact", exact},
                  {"tail_bound_dominates", dominates},
                  {"pass", dominates && est.probability <= 1.1 * bound}});
}

void run_cluster_bank(RunContext& ctx) {
  const auto& c = ctx.config();
  const auto bank = build_cluster_bank(*c.t, make_dist(c), c.seed, *c.replicas, c.max_attempts);
  const fs::path path = ctx.directory() / "clusters.txt";
  {
    std::ofstream out(path, std::ios::binary);
    write_cluster_bank(out, bank);
  }
  ctx.add_artifact(path);
  std::vector<std::string> rows;
  for (std::size_t k = 0; k < bank.clusters.size(); ++k) {
    const auto& atoms = bank.clusters[k].atoms;
    const double gap = atoms.size() > 1 ? atoms[1] : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(csv_join({std::to_string(k), std::to_string(atoms.size()), format_double(gap)}));
  }
  ctx.write_csv("clusters.csv", "cluster,size,second_atom", rows);
  ctx.record_replicas({}, 0);
  ctx.write_json("summary.json", {{"estimator", "cluster rejection sampler"},
                                  {"parameters", {{"t_cond", *c.t}}},
                                  {"clusters", bank.clusters.size()},
                                  {"attempts", bank.attempts},
                                  {"acceptance_rate", bank.acceptance_rate()}});
}

void run_limit_object(RunContext& ctx) {
  const auto& c = ctx.config();
  ClusterBank bank;
  if (c.cluster_bank) {
    std::ifstream in(*c.cluster_bank);
    if (!in) throw UsageError("cannot open cluster bank " + c.cluster_bank->string());
    bank = read_cluster_bank(in);
  } else {
    bank = build_cluster_bank(*c.t, make_dist(c), c.seed, c.bank_size, c.max_attempts);
  }
  const LimitModel model{c.C, c.Z, &bank};
  const auto beta = c.beta_list->front();
  const double A = c.A_list->front();
  const auto indices = ctx.replica_indices();
  const auto draws = run_replicas<LimitDraw>(indices.size(), c.threads, [&](std::size_t i) {
    return sample_limit_partition(model, beta, *c.rho, A, replica_seed(c.seed, indices[i]));
  });
  std::vector<std::string> rows;
  std::vector<double> moduli;
  RunningStats counts;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& d = draws[i];
    moduli.push_back(std::abs(d.value));
    counts.add(static_cast<double>(d.cox_atoms));
    rows.push_back(csv_join({std::to_string(indices[i]),
                             std::to_string(replica_seed(c.seed, indices[i])),
                             format_double(d.value.real()), format_double(d.value.imag()),
                             format_double(std::abs(d.value)), std::to_string(d.cox_atoms)}));
  }
  ctx.write_csv("limit_object.csv", "replica,seed,re,im,abs,cox_atoms", rows);
  ctx.record_replicas(indices, 0);

  const double expected_atoms = c.C * c.Z * std::exp(std::numbers::sqrt2 * A) / std::numbers::sqrt2;
  const double dispersion = counts.mean() > 0.0 ? counts.variance() / counts.mean() : 0.0;
  const double target = std::numbers::sqrt2 / std::abs(beta.sigma);
  json report = {{"estimator", "Hill on |limit partition|"},
                 {"parameters",
                  {{"sigma", beta.sigma}, {"tau", beta.tau}, {"rho", *c.rho}, {"A", A},
                   {"C", c.C}, {"Z", c.Z}, {"bank_clusters", bank.clusters.size()},
                   {"t_cond", bank.t_cond}}},
                 {"target_alpha", target},
                 {"cox_atoms_mean", counts.mean()},
                 {"cox_atoms_expected", expected_atoms},
                 {"dispersion", dispersion}};
  try {
    const auto fit = stats::hill_estimator(moduli, c.k_fraction);
    report["alpha_hat"] = fit.alpha_hat;
    report["stderr"] = fit.alpha_se;
    report["pass"] = std::abs(fit.alpha_hat - target) <= 0.15 && dispersion >= 0.95 &&
                     dispersion <= 1.05;
  } catch (const std::exception& e) {
    report["error"] = e.what();
    report["pass"] = false;
  }
  ctx.write_json("summary.json", report);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

const std::vector<ExperimentKind>& all_experiments() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& entry : kNames) out.push_back(entry.first);
    return out;
  }();
  return kinds;
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["experiment"] = std::string(to_string(experiment));
  json d = json::array();
  for (const auto& [k, p] : dist) d.push_back({k, p});
  doc["dist"] = d;
  if (t) doc["t"] = *t;
  if (replicas) doc["replicas"] = *replicas;
  if (rho) doc["rho"] = *rho;
  if (beta_list) {
    json b = json::array();
    for (const auto& beta : *beta_list) b.push_back({beta.sigma, beta.tau});
    doc["beta_list"] = b;
  }
  if (A_list) doc["A_list"] = *A_list;
  doc["seed"] = seed;
  if (gamma) doc["gamma"] = *gamma;
  if (r) doc["r"] = *r;
  doc["output_dir"] = output_dir.string();
  doc["threads"] = threads;
  if (delta) doc["delta"] = *delta;
  doc["epsilon"] = epsilon;
  if (sigma_range) doc["sigma_range"] = axis_json(*sigma_range);
  if (tau_range) doc["tau_range"] = axis_json(*tau_range);
  doc["C"] = C;
  doc["Z"] = Z;
  if (cluster_bank) doc["cluster_bank"] = cluster_bank->string();
  doc["bank_size"] = bank_size;
  doc["max_attempts"] = max_attempts;
  doc["k_fraction"] = k_fraction;
  doc["grid_step"] = grid_step;
  doc["max_nodes"] = max_nodes;
  if (only_replica) doc["only_replica"] = *only_replica;
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "experiment", "dist",      "t",          "replicas",     "rho",        "beta_list",
      "A_list",     "seed",      "gamma",      "r",            "output_dir", "threads",
      "delta",      "epsilon",   "sigma_range", "tau_range",   "C",          "Z",
      "cluster_bank", "bank_size", "max_attempts", "k_fraction", "grid_step", "max_nodes",
      "only_replica"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config field '" + key + "'");
    }
  }
  ExperimentConfig c;
  if (!doc.contains("experiment")) throw UsageError("config field 'experiment' is required");
  const auto name = read_value<std::string>(doc, "experiment");
  const auto kind = parse_experiment(name);
  if (!kind) throw UsageError("unknown experiment '" + name + "'");
  c.experiment = *kind;
  try {
    if (doc.contains("dist")) {
      c.dist.clear();
      for (const auto& entry : doc.at("dist")) {
        if (!entry.is_array() || entry.size() != 2) {
          throw UsageError("dist entries must be [k, p_k]");
        }
        c.dist.emplace_back(entry[0].get<int>(), entry[1].get<double>());
      }
    }
    if (doc.contains("t")) c.t = doc.at("t").get<double>();
    if (doc.contains("replicas")) {
      const auto n = doc.at("replicas").get<long long>();
      if (n < 1) throw UsageError("replicas must be >= 1");
      c.replicas = static_cast<std::size_t>(n);
    }
    if (doc.contains("rho")) c.rho = doc.at("rho").get<double>();
    if (doc.contains("beta_list")) {
      std::vector<ComplexTemperature> betas;
      for (const auto& item : doc.at("beta_list")) betas.push_back(parse_beta(item));
      c.beta_list = betas;
    }
    if (doc.contains("A_list")) c.A_list = doc.at("A_list").get<std::vector<double>>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("gamma")) c.gamma = doc.at("gamma").get<double>();
    if (doc.contains("r")) c.r = doc.at("r").get<double>();
    if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("threads")) c.threads = doc.at("threads").get<unsigned>();
    if (doc.contains("delta")) c.delta = doc.at("delta").get<double>();
    if (doc.contains("epsilon")) c.epsilon = doc.at("epsilon").get<double>();
    if (doc.contains("sigma_range")) c.sigma_range = parse_axis(doc.at("sigma_range"));
    if (doc.contains("tau_range")) c.tau_range = parse_axis(doc.at("tau_range"));
    if (doc.contains("C")) c.C = doc.at("C").get<double>();
    if (doc.contains("Z")) c.Z = doc.at("Z").get<double>();
    if (doc.contains("cluster_bank")) c.cluster_bank = doc.at("cluster_bank").get<std::string>();
    if (doc.contains("bank_size")) c.bank_size = doc.at("bank_size").get<std::size_t>();
    if (doc.contains("max_attempts")) c.max_attempts = doc.at("max_attempts").get<std::size_t>();
    if (doc.contains("k_fraction")) c.k_fraction = doc.at("k_fraction").get<double>();
    if (doc.contains("grid_step")) c.grid_step = doc.at("grid_step").get<double>();
    if (doc.contains("max_nodes")) c.max_nodes = doc.at("max_nodes").get<std::size_t>();
    if (doc.contains("only_replica")) c.only_replica = doc.at("only_replica").get<std::size_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  return c;
}

std::vector<std::string> required_fields(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::tree_moments:
    case ExperimentKind::extremal_max:
    case ExperimentKind::cluster_bank:
      return {"t", "replicas"};
    case ExperimentKind::martingale:
    case ExperimentKind::glassy_tail:
    case ExperimentKind::isotropy:
      return {"t", "replicas", "rho", "beta_list"};
    case ExperimentKind::free_energy_scan:
      return {"t", "replicas", "rho", "sigma_range", "tau_range"};
    case ExperimentKind::truncation:
      return {"t", "replicas", "rho", "beta_list", "A_list", "delta"};
    case ExperimentKind::bridge_check:
      return {"t", "replicas", "r"};
    case ExperimentKind::limit_object:
      return {"replicas", "rho", "beta_list", "A_list"};
  }
  return {};
}

void validate(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  for (const auto& field : required_fields(c.experiment)) {
    if (!has_field(c, field)) problems.push_back("missing '" + field + "'");
  }
  if (c.replicas && *c.replicas < 1) problems.push_back("replicas must be >= 1");
  if (c.t && !(*c.t > 0.0)) problems.push_back("t must be positive");
  if (c.rho && !(std::abs(*c.rho) <= 1.0)) problems.push_back("rho must lie in [-1, 1]");
  if (c.delta && !(*c.delta > 0.0)) problems.push_back("delta must be positive");
  if (c.A_list) {
    for (const double A : *c.A_list) {
      if (!(A > 0.0)) problems.push_back("A_list entries must be positive");
    }
  }
  if (c.only_replica && c.replicas && *c.only_replica >= *c.replicas) {
    problems.push_back("only_replica must be below replicas");
  }
  if (c.experiment == ExperimentKind::limit_object && !c.cluster_bank && !c.t) {
    problems.push_back("limit_object needs 'cluster_bank' or 't' to build one");
  }
  if (c.experiment == ExperimentKind::bridge_check && c.r && c.t && !(2.0 * *c.r < *c.t)) {
    problems.push_back("bridge_check needs 2 r < t");
  }
  try {
    (void)OffspringDistribution::from_pairs(c.dist);
  } catch (const std::exception& e) {
    problems.push_back(std::string("dist: ") + e.what());
  }
  if (!problems.empty()) {
    std::string msg = std::string(to_string(c.experiment)) + ": ";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i) msg += "; ";
      msg += problems[i];
    }
    throw UsageError(msg);
  }
}

RunManifest run(const ExperimentConfig& config) {
  validate(config);
  RunManifest manifest;
  manifest.directory = fresh_directory(config.output_dir, to_string(config.experiment));
  const auto start = std::chrono::steady_clock::now();
  RunContext ctx(config, manifest);
  switch (config.experiment) {
    case ExperimentKind::tree_moments: run_tree_moments(ctx); break;
    case ExperimentKind::martingale: run_martingale(ctx); break;
    case ExperimentKind::free_energy_scan: run_free_energy_scan(ctx); break;
    case ExperimentKind::glassy_tail: run_tail_family(ctx, false); break;
    case ExperimentKind::isotropy: run_tail_family(ctx, true); break;
    case ExperimentKind::truncation: run_truncation(ctx); break;
    case ExperimentKind::extremal_max: run_extremal_max(ctx); break;
    case ExperimentKind::bridge_check: run_bridge_check(ctx); break;
    case ExperimentKind::cluster_bank: run_cluster_bank(ctx); break;
    case ExperimentKind::limit_object: run_limit_object(ctx); break;
  }
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (manifest.total_replicas > 0 &&
      10 * manifest.failed_replicas > manifest.total_replicas) {
    manifest.exit_code = 1;
  }

  json seeds = json::array();
  const auto indices = ctx.replica_indices();
  for (std::size_t i = 0; i < manifest.replica_seeds.size(); ++i) {
    seeds.push_back({{"replica", i < indices.size() ? indices[i] : i},
                     {"seed", manifest.replica_seeds[i]}});
  }
  json artifacts = json::array();
  for (const auto& p : manifest.artifacts) artifacts.push_back(p.filename().string());
  const json doc = {{"library_version", std::string(kLibraryVersion)},
                    {"config", config.to_json()},
                    {"artifacts", artifacts},
                    {"wall_seconds", manifest.wall_seconds},
                    {"replica_seeds", seeds},
                    {"total_replicas", manifest.total_replicas},
                    {"failed_replicas", manifest.failed_replicas},
                    {"exit_code", manifest.exit_code}};
  const fs::path path = manifest.directory / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << '\n';
  manifest.artifacts.push_back(path);
  return manifest;
}

void emit_phase_figure_data(const std::vector<ScanRow>& rows, const fs::path& csv_path,
                            const fs::path& grid_path) {
  if (rows.empty()) throw ArgumentError("empty scan table");
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << scan_csv_header() << '\n';
    for (const auto& row : rows) out << scan_csv_row(row) << '\n';
  }

  // Recover the grid layout: rows are sigma-major, so the tau axis length is
  // the run of rows sharing the first sigma.
  std::size_t n_tau = 1;
  while (n_tau < rows.size() && rows[n_tau].beta.sigma == rows[0].beta.sigma) ++n_tau;
  std::ofstream out(grid_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + grid_path.string());
  out << "# n_sigma " << rows.size() / n_tau << " n_tau " << n_tau << '\n';
  out << "i,j,sigma,tau,phase,p_limit,p_hat\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& row = rows[k];
    out << csv_join({std::to_string(k / n_tau), std::to_string(k % n_tau),
                     format_double(row.beta.sigma), format_double(row.beta.tau),
                     std::string(to_string(row.phase)), format_double(row.p_limit),
                     format_double(row.p_hat)})
        << '\n';
  }
}

std::string csv_body(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line, body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body += line;
    body += '\n';
  }
  return body;
}

}  // namespace cbbm
