// Command-line surface for the control-landscape library: certificate checks,
// single simulations and optimizations, the batch study, and landscape grids.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "landscape/certify.hpp"
#include "landscape/experiment.hpp"
#include "landscape/optimize.hpp"
#include "landscape/serialize.hpp"
#include "landscape/system.hpp"

namespace {

using landscape::json;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitCertificateFailure = 2;
constexpr int kExitRuntimeFailure = 3;

struct LoadedConfig {
  std::optional<landscape::SystemConfig> system;
  std::optional<Eigen::VectorXd> initial_state;
  std::optional<Eigen::VectorXd> goal;
  std::optional<landscape::ControlSignal> control;
  landscape::FlowConfig flow;
  std::optional<landscape::ProtocolConfig> protocol;
  json grid;  // null when absent
  std::uint64_t seed = 0;
};

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  json doc = json::parse(in);
  landscape::check_keys(
      doc, {"system", "initial_state", "goal", "control", "flow", "protocol", "grid", "seed"},
      "config");

  LoadedConfig config;
  if (doc.contains("system")) {
    config.system = landscape::system_config_from_json(doc.at("system"));
  }
  if (doc.contains("initial_state")) {
    config.initial_state = landscape::vector_from_json(doc.at("initial_state"), "initial_state");
  }
  if (doc.contains("goal")) {
    config.goal = landscape::vector_from_json(doc.at("goal"), "goal");
  }
  if (doc.contains("control")) {
    config.control = landscape::control_from_json(doc.at("control"));
  }
  if (doc.contains("flow")) {
    config.flow = landscape::flow_config_from_json(doc.at("flow"));
  }
  if (doc.contains("protocol")) {
    config.protocol = landscape::protocol_config_from_json(doc.at("protocol"), config.flow);
  }
  if (doc.contains("grid")) {
    config.grid = doc.at("grid");
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_integer()) {
      throw std::invalid_argument("config.seed: expected an integer");
    }
    config.seed = doc.at("seed").get<std::uint64_t>();
  }
  return config;
}

Eigen::VectorXd resolve_x0(const LoadedConfig& config) {
  if (config.initial_state) return *config.initial_state;
  if (config.system && config.system->x0) return *config.system->x0;
  return Eigen::Vector2d::Zero();
}

landscape::Goal resolve_goal(const LoadedConfig& config) {
  if (config.goal) return landscape::Goal{*config.goal};
  if (config.system && config.system->goal) return landscape::Goal{*config.system->goal};
  throw std::invalid_argument("config: a goal is required (top-level or in the system section)");
}

landscape::ControlSignal resolve_control(const LoadedConfig& config, int default_n) {
  if (config.control) return *config.control;
  const double t_final = config.system ? config.system->t_final : 1.0;
  return landscape::ControlSignal::constant(0.0, t_final, default_n);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

int cmd_check(const LoadedConfig& config, const std::filesystem::path& out_dir, int verbosity) {
  if (!config.system) throw std::invalid_argument("check: config needs a 'system' section");
  const landscape::CertificateReport report = landscape::certify(config.system->system);
  const json j = landscape::to_json(report);
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "certificates.json", j.dump(2) + "\n");

  std::cout << "controllable linear part : " << (report.controllable_linear_part ? "yes" : "no")
            << " (kalman rank " << report.kalman_rank << ")\n";
  if (report.nonlinear_bound) {
    std::cout << "sup ||f|| bound          : " << *report.nonlinear_bound << "\n";
  }
  if (report.df_bound && report.local_margin) {
    std::cout << "sup ||Df|| bound         : " << *report.df_bound << "\n"
              << "local margin             : " << *report.local_margin << "\n";
  }
  std::cout << "locally controllable     : "
            << (report.local_controllability_certified ? "yes" : "no") << "\n";
  if (verbosity > 0) std::cout << j.dump(2) << "\n";
  return report.all_passed() ? kExitOk : kExitCertificateFailure;
}

int cmd_simulate(const LoadedConfig& config, const std::filesystem::path& out_dir) {
  if (!config.system) throw std::invalid_argument("simulate: config needs a 'system' section");
  const landscape::NonlinearSystem sys = config.system->system.as_system();
  const Eigen::VectorXd x0 = resolve_x0(config);
  const landscape::ControlSignal w = resolve_control(config, 128);

  const landscape::EndpointResult result =
      landscape::endpoint_map(sys, x0, w, config.flow.inner_integrator);
  std::filesystem::create_directories(out_dir);
  landscape::write_trajectory_csv(out_dir / "trajectory.csv", result.trajectory);

  json j{{"x_final", landscape::to_json(result.x_final)}};
  if (config.goal || (config.system && config.system->goal)) {
    j["fidelity"] = landscape::fidelity(result.x_final, resolve_goal(config));
  }
  write_text(out_dir / "endpoint.json", j.dump(2) + "\n");
  std::cout << "x(T) = [" << result.x_final.transpose() << "]\n";
  return kExitOk;
}

int cmd_optimize(const LoadedConfig& config, const std::filesystem::path& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  if (!config.system) throw std::invalid_argument("optimize: config needs a 'system' section");
  const landscape::NonlinearSystem sys = config.system->system.as_system();
  const Eigen::VectorXd x0 = resolve_x0(config);
  const landscape::Goal goal = resolve_goal(config);
  const std::uint64_t seed = seed_override.value_or(config.seed);

  landscape::ControlSignal w0 = [&]() {
    if (config.control) return *config.control;
    landscape::Rng rng(landscape::derive_seed(seed, 0x57));
    return landscape::generate_initial_control(rng, 128, config.system->t_final);
  }();

  std::filesystem::create_directories(out_dir);
  landscape::RunRecord record;
  try {
    record = landscape::run_with_rescue(sys, x0, w0, goal, config.flow,
                                        /*max_rescue_cycles=*/5, /*hill_climb_tries=*/200, seed);
  } catch (const std::exception& e) {
    write_text(out_dir / "record.json",
               json{{"error", e.what()}, {"seed", seed}}.dump(2) + "\n");
    std::cerr << "optimization aborted: " << e.what() << "\n";
    return kExitRuntimeFailure;
  }

  write_text(out_dir / "record.json", landscape::to_json(record).dump(2) + "\n");
  landscape::write_fidelity_csv(out_dir / "fidelity.csv", record.fidelity_curve);
  const landscape::EndpointResult final_run = landscape::endpoint_map(
      sys, x0, record.control_final, config.flow.inner_integrator);
  landscape::write_trajectory_csv(out_dir / "trajectory.csv", final_run.trajectory);

  std::cout << "outcome        : " << landscape::to_string(record.outcome) << "\n"
            << "final distance : " << record.final_distance << "\n"
            << "s-steps        : " << record.wall_iterations << "\n";
  return kExitOk;
}

int cmd_batch(const LoadedConfig& config, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed_override, int jobs) {
  if (!config.protocol) throw std::invalid_argument("batch: config needs a 'protocol' section");
  landscape::ProtocolConfig protocol = *config.protocol;
  if (seed_override) protocol.master_seed = *seed_override;
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs <= 0) jobs = 1;

  const landscape::BatchResult result = landscape::run_batch(protocol, jobs);
  landscape::write_batch_outputs(out_dir, result);

  const landscape::BatchSummary& s = result.summary;
  std::printf("runs            : %lld\n", static_cast<long long>(s.total_runs));
  std::printf("converged       : %.2f%%\n", s.pct_converged);
  std::printf("timed out       : %.2f%%\n", s.pct_timed_out);
  std::printf("precision stall : %.2f%%\n", s.pct_precision_stall);
  std::printf("traps suspected : %d\n", s.n_trap_suspected);
  std::printf("stall rescues   : %d\n", s.stall_rescues);
  std::printf("timeout rescues : %d\n", s.timeout_rescues);
  std::printf("filter accept   : %.3f\n", s.generator_acceptance_rate);
  return s.n_trap_suspected == 0 ? kExitOk : kExitRuntimeFailure;
}

int cmd_landscape_grid(const LoadedConfig& config, const std::filesystem::path& out_dir,
                       std::optional<std::uint64_t> seed_override) {
  if (!config.system) throw std::invalid_argument("landscape-grid: config needs a 'system' section");
  const json grid_cfg = config.grid.is_null() ? json::object() : config.grid;
  landscape::check_keys(grid_cfg, {"a_min", "a_max", "b_min", "b_max", "resolution", "basis"},
                        "grid");
  const landscape::NonlinearSystem sys = config.system->system.as_system();
  const Eigen::VectorXd x0 = resolve_x0(config);
  const landscape::Goal goal = resolve_goal(config);
  const std::uint64_t seed = seed_override.value_or(config.seed);

  const double a_min = grid_cfg.value("a_min", -2.0);
  const double a_max = grid_cfg.value("a_max", 2.0);
  const double b_min = grid_cfg.value("b_min", -2.0);
  const double b_max = grid_cfg.value("b_max", 2.0);
  const int resolution = grid_cfg.value("resolution", 41);

  landscape::ControlSignal basis1 = landscape::ControlSignal::constant(0.0, 1.0, 2);
  landscape::ControlSignal basis2 = basis1;
  if (grid_cfg.contains("basis")) {
    const json& basis = grid_cfg.at("basis");
    if (!basis.is_array() || basis.size() != 2) {
      throw std::invalid_argument("grid.basis: expected exactly two control signals");
    }
    basis1 = landscape::control_from_json(basis.at(0));
    basis2 = landscape::control_from_json(basis.at(1));
  } else {
    landscape::Rng rng1(landscape::derive_seed(seed, 0xb1));
    landscape::Rng rng2(landscape::derive_seed(seed, 0xb2));
    basis1 = landscape::generate_initial_control(rng1, 128, config.system->t_final);
    basis2 = landscape::generate_initial_control(rng2, 128, config.system->t_final);
  }

  const landscape::LandscapeGrid grid =
      landscape::landscape_grid(sys, x0, goal, basis1, basis2, a_min, a_max, b_min, b_max,
                                resolution, config.flow.inner_integrator);
  std::filesystem::create_directories(out_dir / "grids");
  landscape::write_grid_csv(out_dir / "grids" / "grid.csv", grid);
  std::cout << "grid written (" << resolution << "x" << resolution << " cells)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-landscape explorer for planar nonlinear systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed_flag = -1;
  int jobs = 0;
  int verbosity = 0;

  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed_flag, "override the configured seed");
  app.add_option("--jobs", jobs, "worker threads for batch runs (0 = auto)");
  app.add_flag("-v,--verbose", verbosity, "more output");

  auto* check = app.add_subcommand("check", "evaluate the trap-freedom certificates");
  auto* simulate = app.add_subcommand("simulate", "integrate the system under a control");
  auto* optimize = app.add_subcommand("optimize", "run the homotopy gradient flow");
  auto* batch = app.add_subcommand("batch", "run the randomized batch study");
  auto* grid = app.add_subcommand("landscape-grid", "sample a two-control landscape slice");

  CLI11_PARSE(app, argc, argv);

  std::optional<std::uint64_t> seed_override;
  if (seed_flag >= 0) seed_override = static_cast<std::uint64_t>(seed_flag);

  try {
    const LoadedConfig config = load_config(config_path);
    const std::filesystem::path out(out_dir);
    if (check->parsed()) return cmd_check(config, out, verbosity);
    if (simulate->parsed()) return cmd_simulate(config, out);
    if (optimize->parsed()) return cmd_optimize(config, out, seed_override);
    if (batch->parsed()) return cmd_batch(config, out, seed_override, jobs);
    if (grid->parsed()) return cmd_landscape_grid(config, out, seed_override);
    return kExitInputError;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntimeFailure;
  }
}
