#include "landscape/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace landscape {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

double number_at(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number(), std::string("expected number for '") + key + "'");
  return j.at(key).get<double>();
}

std::int64_t integer_at(const json& j, const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number_integer(), std::string("expected integer for '") + key + "'");
  return j.at(key).get<std::int64_t>();
}

}  // namespace

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  require(j.is_object(), context + ": expected a JSON object");
  const std::set<std::string> allowed_set(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!allowed_set.count(item.key())) {
      throw std::invalid_argument(context + ": unknown key '" + item.key() + "'");
    }
  }
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols,
                                 const std::string& context) {
  require(j.is_array() && static_cast<int>(j.size()) == rows,
          context + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j.at(i);
    require(row.is_array() && static_cast<int>(row.size()) == cols,
            context + ": expected " + std::to_string(cols) + " columns");
    for (int c = 0; c < cols; ++c) {
      require(row.at(c).is_number(), context + ": non-numeric entry");
      m(i, c) = row.at(c).get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& context) {
  require(j.is_array() && !j.empty(), context + ": expected a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j.at(i).is_number(), context + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  }
  return v;
}

json to_json(const SystemConfig& config) {
  json j;
  j["A"] = to_json(Eigen::MatrixXd(config.system.A));
  j["B"] = to_json(Eigen::VectorXd(config.system.B));
  j["C1"] = to_json(Eigen::MatrixXd(config.system.C1));
  j["S1"] = to_json(Eigen::MatrixXd(config.system.S1));
  j["C2"] = to_json(Eigen::MatrixXd(config.system.C2));
  j["S2"] = to_json(Eigen::MatrixXd(config.system.S2));
  j["T"] = config.t_final;
  if (config.x0) j["x0"] = to_json(*config.x0);
  if (config.goal) j["goal"] = to_json(*config.goal);
  return j;
}

SystemConfig system_config_from_json(const json& j) {
  check_keys(j, {"A", "B", "C1", "S1", "C2", "S2", "T", "x0", "goal"}, "system");
  require(j.contains("A") && j.contains("B"), "system: 'A' and 'B' are required");
  SystemConfig config;
  config.system.A = matrix_from_json(j.at("A"), 2, 2, "system.A");
  const Eigen::VectorXd b = vector_from_json(j.at("B"), "system.B");
  require(b.size() == 2, "system.B: expected 2 entries");
  config.system.B = b;
  auto trig = [&](const char* key, Eigen::Matrix2d& target) {
    if (j.contains(key)) {
      target = matrix_from_json(j.at(key), 2, 2, std::string("system.") + key);
    }
  };
  trig("C1", config.system.C1);
  trig("S1", config.system.S1);
  trig("C2", config.system.C2);
  trig("S2", config.system.S2);
  config.t_final = number_at(j, "T", 1.0);
  require(config.t_final > 0.0, "system.T: must be > 0");
  if (j.contains("x0")) config.x0 = vector_from_json(j.at("x0"), "system.x0");
  if (j.contains("goal")) config.goal = vector_from_json(j.at("goal"), "system.goal");
  return config;
}

json to_json(const ControlSignal& w) {
  return json{{"T", w.t_final()}, {"samples", w.samples()}};
}

ControlSignal control_from_json(const json& j) {
  check_keys(j, {"T", "samples"}, "control");
  require(j.contains("T") && j.contains("samples"), "control: 'T' and 'samples' required");
  require(j.at("samples").is_array(), "control.samples: expected an array");
  std::vector<double> samples;
  for (const auto& s : j.at("samples")) {
    require(s.is_number(), "control.samples: non-numeric entry");
    samples.push_back(s.get<double>());
  }
  return ControlSignal(j.at("T").get<double>(), std::move(samples));
}

json to_json(const CertificateReport& report) {
  json j;
  j["kalman_rank"] = report.kalman_rank;
  j["controllable_linear_part"] = report.controllable_linear_part;
  if (report.nonlinear_bound) j["nonlinear_bound"] = *report.nonlinear_bound;
  if (report.df_bound) j["df_bound"] = *report.df_bound;
  if (report.local_margin) j["local_margin"] = *report.local_margin;
  j["local_controllability_certified"] = report.local_controllability_certified;
  if (report.trajectory_check) j["trajectory_check"] = *report.trajectory_check;
  j["matrix_norm"] = "spectral";
  return j;
}

json to_json(const IntegratorConfig& config) {
  return json{{"method", config.method == IntegratorMethod::FixedRk4 ? "fixed-rk4"
                                                                     : "adaptive-rk45"},
              {"rel_tol", config.rel_tol},
              {"abs_tol", config.abs_tol},
              {"initial_step", config.initial_step},
              {"max_steps", config.max_steps}};
}

IntegratorConfig integrator_config_from_json(const json& j) {
  check_keys(j, {"method", "rel_tol", "abs_tol", "initial_step", "max_steps"}, "integrator");
  IntegratorConfig config;
  if (j.contains("method")) {
    const std::string method = j.at("method").get<std::string>();
    if (method == "adaptive-rk45") {
      config.method = IntegratorMethod::AdaptiveRk45;
    } else if (method == "fixed-rk4") {
      config.method = IntegratorMethod::FixedRk4;
    } else {
      throw std::invalid_argument("integrator.method: unknown method '" + method + "'");
    }
  }
  config.rel_tol = number_at(j, "rel_tol", config.rel_tol);
  config.abs_tol = number_at(j, "abs_tol", config.abs_tol);
  config.initial_step = number_at(j, "initial_step", config.initial_step);
  config.max_steps = integer_at(j, "max_steps", config.max_steps);
  config.validate();
  return config;
}

json to_json(const FlowConfig& config) {
  return json{{"beta", config.beta},
              {"s_max", config.s_max},
              {"convergence_threshold", config.convergence_threshold},
              {"stall_window", config.stall_window},
              {"stall_tolerance", config.stall_tolerance},
              {"integrator", to_json(config.integrator)},
              {"inner_integrator", to_json(config.inner_integrator)}};
}

FlowConfig flow_config_from_json(const json& j) {
  check_keys(j,
             {"beta", "s_max", "convergence_threshold", "stall_window", "stall_tolerance",
              "integrator", "inner_integrator"},
             "flow");
  FlowConfig config;
  config.beta = number_at(j, "beta", config.beta);
  config.s_max = number_at(j, "s_max", config.s_max);
  config.convergence_threshold =
      number_at(j, "convergence_threshold", config.convergence_threshold);
  config.stall_window = static_cast<int>(integer_at(j, "stall_window", config.stall_window));
  config.stall_tolerance = number_at(j, "stall_tolerance", config.stall_tolerance);
  if (j.contains("integrator")) {
    config.integrator = integrator_config_from_json(j.at("integrator"));
  }
  if (j.contains("inner_integrator")) {
    config.inner_integrator = integrator_config_from_json(j.at("inner_integrator"));
  }
  config.validate();
  return config;
}

std::string run_outcome_name(RunOutcome outcome) { return to_string(outcome); }

json to_json(const RunRecord& record) {
  json curve = json::array();
  for (const auto& [s, phi] : record.fidelity_curve) {
    curve.push_back(json::array({s, phi}));
  }
  json rescues = json::array();
  for (const auto& rescue : record.rescues) {
    rescues.push_back(json{{"trigger", to_string(rescue.trigger)},
                           {"delta_fidelity", rescue.delta_fidelity}});
  }
  return json{{"seed", record.seed},
              {"outcome", to_string(record.outcome)},
              {"final_distance", record.final_distance},
              {"wall_iterations", record.wall_iterations},
              {"fidelity_curve", std::move(curve)},
              {"control_final", to_json(record.control_final)},
              {"rescues", std::move(rescues)}};
}

json to_json(const ProtocolConfig& config) {
  return json{{"n_systems", config.n_systems},
              {"n_goals", config.n_goals},
              {"n_controls", config.n_controls},
              {"ab_range", config.ab_range},
              {"trig_range", config.trig_range},
              {"goal_range", config.goal_range},
              {"master_seed", config.master_seed},
              {"control_grid_size", config.control_grid_size},
              {"t_final", config.t_final},
              {"x0", to_json(Eigen::VectorXd(config.x0))},
              {"noise", config.noise == NoiseKind::Uniform ? "uniform" : "gaussian"},
              {"max_rescue_cycles", config.max_rescue_cycles},
              {"hill_climb_tries", config.hill_climb_tries}};
}

ProtocolConfig protocol_config_from_json(const json& j, const FlowConfig& flow) {
  check_keys(j,
             {"n_systems", "n_goals", "n_controls", "ab_range", "trig_range", "goal_range",
              "master_seed", "control_grid_size", "t_final", "x0", "noise",
              "max_rescue_cycles", "hill_climb_tries"},
             "protocol");
  ProtocolConfig config;
  config.flow = flow;
  config.n_systems = static_cast<int>(integer_at(j, "n_systems", config.n_systems));
  config.n_goals = static_cast<int>(integer_at(j, "n_goals", config.n_goals));
  config.n_controls = static_cast<int>(integer_at(j, "n_controls", config.n_controls));
  config.ab_range = number_at(j, "ab_range", config.ab_range);
  config.trig_range = number_at(j, "trig_range", config.trig_range);
  config.goal_range = number_at(j, "goal_range", config.goal_range);
  config.master_seed =
      static_cast<std::uint64_t>(integer_at(j, "master_seed", 0));
  config.control_grid_size =
      static_cast<int>(integer_at(j, "control_grid_size", config.control_grid_size));
  config.t_final = number_at(j, "t_final", config.t_final);
  if (j.contains("x0")) {
    const Eigen::VectorXd x0 = vector_from_json(j.at("x0"), "protocol.x0");
    require(x0.size() == 2, "protocol.x0: expected 2 entries");
    config.x0 = x0;
  }
  if (j.contains("noise")) {
    const std::string noise = j.at("noise").get<std::string>();
    if (noise == "uniform") {
      config.noise = NoiseKind::Uniform;
    } else if (noise == "gaussian") {
      config.noise = NoiseKind::Gaussian;
    } else {
      throw std::invalid_argument("protocol.noise: unknown kind '" + noise + "'");
    }
  }
  config.max_rescue_cycles =
      static_cast<int>(integer_at(j, "max_rescue_cycles", config.max_rescue_cycles));
  config.hill_climb_tries =
      static_cast<int>(integer_at(j, "hill_climb_tries", config.hill_climb_tries));
  config.validate();
  return config;
}

json to_json(const BatchSummary& summary) {
  return json{{"total_runs", summary.total_runs},
              {"pct_converged", summary.pct_converged},
              {"pct_timed_out", summary.pct_timed_out},
              {"pct_precision_stall", summary.pct_precision_stall},
              {"n_trap_suspected", summary.n_trap_suspected},
              {"stall_rescues", summary.stall_rescues},
              {"timeout_rescues", summary.timeout_rescues},
              {"n_aborted", summary.n_aborted},
              {"generator_acceptance_rate", summary.generator_acceptance_rate}};
}

json to_json(const BatchRecord& record) {
  json j = to_json(record.record);
  j["system_index"] = record.system_index;
  j["goal_index"] = record.goal_index;
  j["control_index"] = record.control_index;
  if (record.error) j["error"] = *record.error;
  return j;
}

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_fidelity_csv(const std::filesystem::path& path,
                        const std::vector<std::pair<double, double>>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "s,phi\n";
  for (const auto& [s, phi] : curve) {
    out << format_double(s) << ',' << format_double(phi) << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const DenseOutput& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "t";
  for (Eigen::Index i = 0; i < traj.values().front().size(); ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.grid()[k]);
    for (Eigen::Index i = 0; i < traj.values()[k].size(); ++i) {
      out << ',' << format_double(traj.values()[k][i]);
    }
    out << '\n';
  }
}

void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "a,b,phi\n";
  for (std::size_t i = 0; i < grid.a_values.size(); ++i) {
    for (std::size_t j = 0; j < grid.b_values.size(); ++j) {
      out << format_double(grid.a_values[i]) << ',' << format_double(grid.b_values[j]) << ','
          << format_double(grid.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << '\n';
    }
  }
}

void write_batch_outputs(const std::filesystem::path& out_dir, const BatchResult& result) {
  std::filesystem::create_directories(out_dir / "curves");
  {
    std::ofstream out(out_dir / "summary.json");
    if (!out) throw std::runtime_error("cannot open summary.json");
    out << to_json(result.summary).dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir / "records.jsonl");
    if (!out) throw std::runtime_error("cannot open records.jsonl");
    for (const auto& record : result.records) {
      out << to_json(record).dump() << '\n';
    }
  }
  for (const auto& record : result.records) {
    const std::string name = "run_" + std::to_string(record.system_index) + "_" +
                             std::to_string(record.goal_index) + "_" +
                             std::to_string(record.control_index) + ".csv";
    write_fidelity_csv(out_dir / "curves" / name, record.record.fidelity_curve);
  }
}

}  // namespace landscape
