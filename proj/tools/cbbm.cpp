#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbbm/centering.hpp"
#include "cbbm/errors.hpp"
#include "cbbm/experiment.hpp"
#include "cbbm/oracles.hpp"
#include "cbbm/phase.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<double> t;
  std::optional<double> rho;
  std::optional<std::size_t> replay;
};

cbbm::ExperimentConfig build_config(cbbm::ExperimentKind kind, const Overrides& o) {
  nlohmann::json doc = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw cbbm::UsageError("cannot open config " + o.config_path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw cbbm::UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw cbbm::UsageError("config must be a JSON object");
  }
  doc["experiment"] = std::string(cbbm::to_string(kind));
  auto config = cbbm::ExperimentConfig::from_json(doc);
  if (o.seed) config.seed = *o.seed;
  if (o.replicas) {
    if (*o.replicas < 1) throw cbbm::UsageError("--replicas must be >= 1");
    config.replicas = *o.replicas;
  }
  if (o.out) config.output_dir = *o.out;
  if (o.threads) config.threads = *o.threads;
  if (o.t) config.t = *o.t;
  if (o.rho) config.rho = *o.rho;
  if (o.replay) config.only_replica = *o.replay;
  return config;
}

void add_oracle_commands(CLI::App& app, std::function<void()>& action) {
  auto* oracle = app.add_subcommand("oracle", "Evaluate closed-form targets");
  oracle->require_subcommand(1);

  auto* m = oracle->add_subcommand("m", "Centering m(t)");
  static double t_m = 0.0;
  m->add_option("t", t_m, "time")->required();
  m->callback([&] { action = [] { std::printf("%.10g\n", cbbm::m_of_t(t_m)); }; });

  auto* fe = oracle->add_subcommand("free-energy", "Phase and limiting free energy p(beta)");
  static double fe_sigma = 0.0, fe_tau = 0.0;
  fe->add_option("sigma", fe_sigma)->required();
  fe->add_option("tau", fe_tau)->required();
  fe->callback([&] {
    action = [] {
      const cbbm::ComplexTemperature beta{fe_sigma, fe_tau};
      std::printf("%s %.10g\n", std::string(cbbm::to_string(cbbm::classify(beta).tag)).c_str(),
                  cbbm::limiting_free_energy(beta));
    };
  });

  auto* sm = oracle->add_subcommand("second-moment", "E|M_beta(t)|^2");
  static double sm_sigma = 0.0, sm_tau = 0.0, sm_t = 0.0, sm_K = 2.0;
  sm->add_option("sigma", sm_sigma)->required();
  sm->add_option("tau", sm_tau)->required();
  sm->add_option("t", sm_t)->required();
  sm->add_option("--K", sm_K, "second factorial moment of the offspring law");
  sm->callback([&] {
    action = [] {
      cbbm::oracles::SecondMomentParams p{sm_sigma, sm_tau, sm_t, sm_K, true};
      std::printf("%.10g\n", cbbm::oracles::martingale_second_moment(p));
    };
  });

  auto* pm = oracle->add_subcommand("pair-moment", "Many-to-two ordered pair moment");
  static double pm_sigma = 0.0, pm_tau = 0.0, pm_rho = 0.0, pm_t = 0.0, pm_K = 2.0;
  pm->add_option("sigma", pm_sigma)->required();
  pm->add_option("tau", pm_tau)->required();
  pm->add_option("rho", pm_rho)->required();
  pm->add_option("t", pm_t)->required();
  pm->add_option("--K", pm_K);
  pm->callback([&] {
    action = [] {
      std::printf("%.10g\n", cbbm::oracles::many_to_two_pair_moment(
                                 {pm_sigma, pm_rho * pm_tau}, pm_rho, pm_tau, pm_t, pm_K));
    };
  });

  auto* tb = oracle->add_subcommand("tail-bound", "Gaussian tail bound and exact tail at x");
  static double tb_x = 0.0;
  tb->add_option("x", tb_x)->required();
  tb->callback([&] {
    action = [] {
      std::printf("%.10g %.10g\n", cbbm::oracles::gaussian_tail_bound(tb_x),
                  cbbm::oracles::normal_tail(tb_x));
    };
  });

  auto* br = oracle->add_subcommand("bridge", "Bridge barrier bound and exact probability");
  static double br_a = 0.0, br_t = 0.0;
  br->add_option("a", br_a)->required();
  br->add_option("t", br_t)->required();
  br->callback([&] {
    action = [] {
      std::printf("%.10g %.10g\n", cbbm::oracles::bridge_barrier_bound(br_a, br_t),
                  cbbm::oracles::bridge_stay_below_exact(br_a, br_t));
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-temperature branching Brownian motion experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cbbm::kLibraryVersion));

  Overrides overrides;
  std::optional<cbbm::ExperimentKind> chosen;
  std::function<void()> oracle_action;

  for (const auto kind : cbbm::all_experiments()) {
    const std::string name(cbbm::to_string(kind));
    auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    sub->add_option("--config", overrides.config_path, "JSON config file");
    sub->add_option("--seed", overrides.seed, "master seed");
    sub->add_option("--replicas", overrides.replicas, "number of replicas");
    sub->add_option("--out", overrides.out, "output root directory");
    sub->add_option("--threads", overrides.threads, "worker threads (0: all cores)");
    sub->add_option("--t", overrides.t, "time horizon");
    sub->add_option("--rho", overrides.rho, "correlation of the imaginary field");
    sub->add_option("--replay", overrides.replay, "run only this replica index");
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  add_oracle_commands(app, oracle_action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (oracle_action) {
      oracle_action();
      return 0;
    }
    const auto config = build_config(*chosen, overrides);
    const auto manifest = cbbm::run(config);
    std::cout << manifest.directory.string() << '\n';
    if (manifest.exit_code != 0) {
      std::cerr << "cbbm: " << manifest.failed_replicas << " of " << manifest.total_replicas
                << " replicas failed\n";
    }
    return manifest.exit_code;
  } catch (const cbbm::UsageError& e) {
    std::cerr << "cbbm: usage: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "cbbm: usage: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cbbm: " << e.what() << '\n';
    return 1;
  }
}
