#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "cbbm/experiment.hpp"
#include "cbbm/extremal.hpp"
#include "cbbm/field.hpp"
#include "cbbm/gw_tree.hpp"
#include "cbbm/oracles.hpp"
#include "cbbm/partition.hpp"
#include "cbbm/phase.hpp"
#include "cbbm/replicas.hpp"
#include "cbbm/rng.hpp"
#include "cbbm/stats.hpp"

using namespace cbbm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

TreePtr tree_for(const OffspringDistribution& dist, double t, std::uint64_t seed) {
  return std::make_shared<const GwTree>(sample_tree(dist, t, seed));
}

bool within(const RunningStats& s, double target, double k = 3.0) {
  return std::abs(s.mean() - target) <= k * s.standard_error();
}

const auto kBinary = OffspringDistribution::binary();

Verdict population_mean() {
  Verdict v{true, ""};
  for (const double t : {1.0, 4.0, 8.0}) {
    const auto counts = run_replicas<double>(2000, 0, [&](std::size_t r) {
      return static_cast<double>(sample_tree(kBinary, t, replica_seed(101, r)).leaf_count());
    });
    RunningStats s;
    for (const double n : counts) s.add(n);
    const double z = (s.mean() - std::exp(t)) / s.standard_error();
    v.pass = v.pass && std::abs(z) <= 3.0;
    v.detail += fmt("t=%g mean=%.2f target=%.2f z=%+.2f; ", t, s.mean(), std::exp(t), z);
  }
  return v;
}

Verdict martingale_moments() {
  Verdict v{true, ""};
  const ComplexTemperature betas[] = {{0.5, 0.0}, {0.4, 0.6}};
  for (const auto beta : betas) {
    const double target = oracles::martingale_second_moment({beta.sigma, beta.tau, 2.0, 2.0});
    RunningStats sq_by_rho[2];
    for (int k = 0; k < 2; ++k) {
      const double rho = k == 0 ? 0.0 : 0.8;
      struct Row {
        Complex m;
      };
      const auto rows = run_replicas<Row>(100000, 0, [&](std::size_t r) {
        const auto seed = replica_seed(200 + k, r);
        const auto pair = sample_correlated_pair(tree_for(kBinary, 2.0, seed), rho, seed);
        return Row{additive_martingale(pair, beta)};
      });
      RunningStats re, im, sq;
      for (const auto& row : rows) {
        re.add(row.m.real());
        im.add(row.m.imag());
        sq.add(std::norm(row.m));
      }
      const bool ok = within(re, 1.0) && within(im, 0.0) && within(sq, target);
      v.pass = v.pass && ok;
      v.detail += fmt("beta=%g%+gi rho=%g: M=(%.4f,%.4f) |M|^2=%.4f+-%.4f oracle=%.7f; ", beta.sigma,
                      beta.tau, rho, re.mean(), im.mean(), sq.mean(), sq.standard_error(), target);
      sq_by_rho[k] = sq;
    }
    const double combined = std::hypot(sq_by_rho[0].standard_error(), sq_by_rho[1].standard_error());
    const double gap = std::abs(sq_by_rho[0].mean() - sq_by_rho[1].mean());
    v.pass = v.pass && gap <= 3.0 * combined;
    v.detail += fmt("rho gap=%.4f (combined se %.4f); ", gap, combined);
  }
  return v;
}

Verdict many_to_two() {
  const double sigma = 0.5, tau = 0.3, rho = 0.4, t = 3.0;
  const Complex lambda{sigma, rho * tau};
  const auto sums = run_replicas<double>(50000, 0, [&](std::size_t r) {
    const auto seed = replica_seed(301, r);
    const auto tree = tree_for(kBinary, t, seed);
    const auto field = sample_field(tree, seed);
    return oracles::pair_sum_statistic(field.positions(), overlap_matrix(*tree), lambda, rho, tau);
  });
  RunningStats s;
  for (const double x : sums) s.add(x);
  const double target = oracles::many_to_two_pair_moment(lambda, rho, tau, t, 2.0);
  return {within(s, target),
          fmt("mean=%.3f+-%.3f oracle=%.3f", s.mean(), s.standard_error(), target)};
}

std::vector<Complex> isotropised(std::span<const Complex> samples, std::uint64_t seed) {
  StreamRng rng(seed, Stream::synthetic);
  std::vector<Complex> out;
  for (const auto& s : samples) {
    out.push_back(std::polar(std::abs(s), 2.0 * std::numbers::pi * rng.uniform()));
  }
  return out;
}

struct GlassyRun {
  std::vector<Complex> main;
  std::vector<Complex> control;
};

GlassyRun glassy_run() {
  const ComplexTemperature beta{1.2, 0.9};
  const ComplexTemperature control{1.2, 0.0};
  struct Row {
    Complex a, b;
  };
  const auto rows = run_replicas<Row>(4000, 0, [&](std::size_t r) {
    const auto seed = replica_seed(401, r);
    const auto pair = sample_correlated_pair(tree_for(kBinary, 12.0, seed), 0.5, seed);
    return Row{rescaled_partition(pair, beta).real, rescaled_partition(pair, control).real};
  });
  GlassyRun run;
  for (const auto& row : rows) {
    run.main.push_back(row.a);
    run.control.push_back(row.b);
  }
  return run;
}

Verdict glassy_tail(const GlassyRun& run) {
  const double target = std::numbers::sqrt2 / 1.2;
  std::vector<double> moduli;
  for (const auto& z : run.main) moduli.push_back(std::abs(z));
  Verdict v;
  const auto fit = stats::hill_estimator(moduli, 0.05);
  v.pass = std::abs(fit.alpha_hat - target) <= 0.15;
  v.detail = fmt("alpha_hat=%.4f+-%.4f target=%.4f; k sweep:", fit.alpha_hat, fit.alpha_se, target);
  for (const double kf : {0.02, 0.05, 0.1}) {
    const double a = stats::hill_estimator(moduli, kf).alpha_hat;
    v.pass = v.pass && std::abs(a - target) <= 0.2;
    v.detail += fmt(" %.2f->%.4f", kf, a);
  }
  return v;
}

Verdict isotropy(const GlassyRun& run) {
  const auto radii = stats::select_radii(run.main);
  const double stat = stats::isotropy_statistic(run.main, radii);
  const double calib = stats::isotropy_statistic(isotropised(run.main, 0x150705), radii);
  const auto control_radii = stats::select_radii(run.control);
  const double control = stats::isotropy_statistic(run.control, control_radii);
  const double control_calib =
      stats::isotropy_statistic(isotropised(run.control, 0x150706), control_radii);
  return {stat <= 3.0 * calib && control > 3.0 * control_calib,
          fmt("stat=%.4f calib=%.4f; control stat=%.4f calib=%.4f", stat, calib, control,
              control_calib)};
}

Verdict free_energy() {
  const ComplexTemperature betas[] = {{0.3, 0.3}, {2.0, 0.0}, {1.2, 0.9}, {0.5, 1.5}, {0.2, 1.2}};
  const double rho = 0.5;
  auto mean_p = [&](double t, std::uint64_t base) {
    const auto rows = run_replicas<std::vector<double>>(500, 0, [&](std::size_t r) {
      const auto seed = replica_seed(base, r);
      const auto pair = sample_correlated_pair(tree_for(kBinary, t, seed), rho, seed);
      std::vector<double> p;
      for (const auto b : betas) p.push_back(log_partition(pair, b));
      return p;
    });
    std::vector<double> means(std::size(betas), 0.0);
    for (const auto& row : rows) {
      for (std::size_t b = 0; b < row.size(); ++b) means[b] += row[b] / static_cast<double>(rows.size());
    }
    return means;
  };
  const auto at8 = mean_p(8.0, 601);
  const auto at12 = mean_p(12.0, 602);
  Verdict v{true, ""};
  int shrinking = 0;
  for (std::size_t b = 0; b < std::size(betas); ++b) {
    const double target = limiting_free_energy(betas[b]);
    const double d8 = std::abs(at8[b] - target);
    const double d12 = std::abs(at12[b] - target);
    v.pass = v.pass && d12 <= 0.3;
    if (d12 < d8) ++shrinking;
    v.detail += fmt("%g%+gi p=%.4f p8=%.4f p12=%.4f; ", betas[b].sigma, betas[b].tau, target, at8[b],
                    at12[b]);
  }
  v.pass = v.pass && shrinking >= 4;
  v.detail += fmt("shrinking in %d/5", shrinking);
  return v;
}

Verdict truncation() {
  const ComplexTemperature beta{1.5, 0.5};
  const double As[] = {2.0, 4.0, 6.0, 8.0};
  const auto rows = run_replicas<std::vector<double>>(2000, 0, [&](std::size_t r) {
    const auto seed = replica_seed(701, r);
    const auto pair = sample_correlated_pair(tree_for(kBinary, 12.0, seed), 1.0, seed);
    std::vector<double> d;
    for (const double A : As) d.push_back(std::abs(truncated_partition(pair, beta, A).discarded));
    return d;
  });
  std::vector<double> p(std::size(As), 0.0);
  for (const auto& row : rows) {
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (row[a] > 0.1) p[a] += 1.0 / static_cast<double>(rows.size());
    }
  }
  bool monotone = true;
  for (std::size_t a = 1; a < p.size(); ++a) monotone = monotone && p[a] <= p[a - 1];
  return {monotone && p.back() <= 0.05,
          fmt("P{|discarded|>0.1} at A=2,4,6,8: %.4f %.4f %.4f %.4f", p[0], p[1], p[2], p[3])};
}

Verdict max_centering() {
  auto shifted_max = [](double t, std::uint64_t base) {
    return run_replicas<double>(4000, 0, [&](std::size_t r) {
      const auto seed = replica_seed(base, r);
      return max_position(sample_field(tree_for(kBinary, t, seed), seed)).value - m_of_t(t);
    });
  };
  const auto a = shifted_max(10.0, 801);
  const auto b = shifted_max(13.0, 802);
  const double ks = stats::ks_distance(a, b);
  const double slope = stats::max_tail_exponent(b);
  const double slope10 = stats::max_tail_exponent(a);
  const double plain = stats::max_tail_exponent(b, stats::TailPrefactor::none);
  return {ks <= 0.05 && slope >= 1.25 && slope <= 1.6,
          fmt("KS(t=10,t=13)=%.4f medians %.4f %.4f; tail exponent t=13 %.4f (t=10 %.4f, "
              "no-prefactor fit %.4f)",
              ks, median(a), median(b), slope, slope10, plain)};
}

Verdict bridge_and_tail() {
  using hp = boost::multiprecision::cpp_bin_float_50;
  bool dominated = true;
  double worst = 1e300;
  const int n = 2000;
  for (int i = 0; i <= n; ++i) {
    const double x = 0.1 * std::pow(100.0, static_cast<double>(i) / n);
    const hp tail = boost::math::erfc(hp(x) / boost::multiprecision::sqrt(hp(2))) / 2;
    const double bound = oracles::gaussian_tail_bound(x);
    dominated = dominated && hp(bound) >= tail;
    worst = std::min(worst, static_cast<double>(hp(bound) / tail));
  }
  const auto est = oracles::bridge_stay_below_mc(1.0, 10.0, 0.01, 100000, 901);
  return {dominated && est.probability <= 0.25 * 1.1,
          fmt("bound/tail min ratio=%.6f over %d points; bridge P=%.4f+-%.4f exact=%.4f bound=0.25",
              worst, n + 1, est.probability, est.standard_error,
              oracles::bridge_stay_below_exact(1.0, 10.0))};
}

Verdict limit_object() {
  const auto bank = build_cluster_bank(6.0, kBinary, 1001, 200, 1'000'000);
  const LimitModel model{1.0, 1.0, &bank};
  const ComplexTemperature beta{1.5, 0.0};
  const double A = 8.0;
  const auto draws = run_replicas<LimitDraw>(5000, 0, [&](std::size_t r) {
    return sample_limit_partition(model, beta, 1.0, A, replica_seed(1002, r));
  });
  std::vector<double> moduli;
  RunningStats counts;
  for (const auto& d : draws) {
    moduli.push_back(std::abs(d.value));
    counts.add(static_cast<double>(d.cox_atoms));
  }
  const double target = std::numbers::sqrt2 / 1.5;
  const auto fit = stats::hill_estimator(moduli, 0.05);
  const double dispersion = counts.variance() / counts.mean();
  std::string sweep;
  for (const double kf : {0.02, 0.1}) {
    sweep += fmt(" %.2f->%.4f", kf, stats::hill_estimator(moduli, kf).alpha_hat);
  }
  return {std::abs(fit.alpha_hat - target) <= 0.15 && dispersion >= 0.95 && dispersion <= 1.05,
          fmt("bank %zu clusters (acceptance %.4f); alpha_hat=%.4f+-%.4f target=%.4f (k sweep%s); "
              "dispersion=%.4f (mean count %.1f, A=%g)",
              bank.clusters.size(), bank.acceptance_rate(), fit.alpha_hat, fit.alpha_se, target,
              sweep.c_str(), dispersion, counts.mean(), A)};
}

std::vector<ExperimentConfig> small_configs(const fs::path& out) {
  std::vector<ExperimentConfig> configs;
  auto base = [&](ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    c.t = 3.0;
    c.replicas = 40;
    c.seed = 1234;
    c.output_dir = out;
    return c;
  };
  configs.push_back(base(ExperimentKind::tree_moments));
  auto m = base(ExperimentKind::martingale);
  m.rho = 0.5;
  m.beta_list = std::vector<ComplexTemperature>{{0.5, 0.0}, {0.4, 0.6}};
  configs.push_back(m);
  auto f = base(ExperimentKind::free_energy_scan);
  f.rho = 0.5;
  f.sigma_range = GridAxis{0.0, 2.0, 3};
  f.tau_range = GridAxis{0.0, 2.0, 3};
  configs.push_back(f);
  auto g = base(ExperimentKind::glassy_tail);
  g.t = 5.0;
  g.replicas = 200;
  g.rho = 0.5;
  g.beta_list = std::vector<ComplexTemperature>{{1.2, 0.9}};
  configs.push_back(g);
  auto i = g;
  i.experiment = ExperimentKind::isotropy;
  configs.push_back(i);
  auto tr = base(ExperimentKind::truncation);
  tr.rho = 1.0;
  tr.beta_list = std::vector<ComplexTemperature>{{1.5, 0.5}};
  tr.A_list = std::vector<double>{2.0, 4.0};
  tr.delta = 0.1;
  configs.push_back(tr);
  configs.push_back(base(ExperimentKind::extremal_max));
  auto br = base(ExperimentKind::bridge_check);
  br.t = 6.0;
  br.r = 1.0;
  configs.push_back(br);
  auto cb = base(ExperimentKind::cluster_bank);
  cb.replicas = 10;
  configs.push_back(cb);
  auto lo = base(ExperimentKind::limit_object);
  lo.rho = 1.0;
  lo.beta_list = std::vector<ComplexTemperature>{{1.5, 0.0}};
  lo.A_list = std::vector<double>{3.0};
  lo.bank_size = 20;
  configs.push_back(lo);
  return configs;
}

Verdict determinism() {
  const fs::path out = fs::temp_directory_path() / "cbbm_acceptance_determinism";
  fs::remove_all(out);
  Verdict v{true, ""};
  int compared = 0;
  for (const auto& config : small_configs(out)) {
    const auto first = run(config);
    const auto second = run(config);
    for (const auto& artifact : first.artifacts) {
      if (artifact.extension() != ".csv") continue;
      const auto a = csv_body(first.directory / artifact.filename());
      const auto b = csv_body(second.directory / artifact.filename());
      ++compared;
      if (a != b || a.empty()) {
        v.pass = false;
        v.detail += "mismatch in " + std::string(to_string(config.experiment)) + "/" +
                    artifact.filename().string() + "; ";
      }
    }
  }
  v.detail += fmt("%d CSV bodies compared across %zu experiments", compared, all_experiments().size());
  fs::remove_all(out);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Verdict()> check;
  };
  GlassyRun glassy;
  double glassy_seconds = 0.0;
  auto timed_glassy = [&] {
    const auto start = std::chrono::steady_clock::now();
    glassy = glassy_run();
    glassy_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::vector<Criterion> criteria = {
      {1, "population mean", 60, population_mean},
      {2, "martingale moments", 120, martingale_moments},
      {3, "many-to-two identity", 300, many_to_two},
      {4, "glassy tail index", 1800,
       [&] {
         timed_glassy();
         return glassy_tail(glassy);
       }},
      {5, "isotropy", 1800, [&] { return isotropy(glassy); }},
      {6, "free energy", 1800, free_energy},
      {7, "truncation negligibility", 1200, truncation},
      {8, "max centering and tail", 1200, max_centering},
      {9, "bridge and tail oracles", 120, bridge_and_tail},
      {10, "limit object", 1800, limit_object},
      {11, "determinism", 60, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.id == 5) seconds += glassy_seconds;
    const bool on_time = seconds <= c.budget_seconds;
    const bool pass = v.pass && on_time;
    if (!pass) ++failures;
    std::printf("%s %2d %s: %s [%.1fs of %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), seconds, c.budget_seconds, on_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
