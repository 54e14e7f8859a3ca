#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "landscape/certify.hpp"
#include "landscape/experiment.hpp"
#include "landscape/optimize.hpp"
#include "landscape/system.hpp"

namespace landscape {

using nlohmann::json;

/// Rejects keys outside `allowed`; catches config typos early.
void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context);

// System files carry the dynamics together with the optional time horizon,
// initial state, and goal: {"A", "B", "C1", "S1", "C2", "S2", "T", "x0", "goal"}.
struct SystemConfig {
  TrigSystem system;
  double t_final = 1.0;
  std::optional<Eigen::VectorXd> x0;
  std::optional<Eigen::VectorXd> goal;
};

json to_json(const Eigen::MatrixXd& m);  // row-major nested arrays
json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols, const std::string& context);
Eigen::VectorXd vector_from_json(const json& j, const std::string& context);

json to_json(const SystemConfig& config);
SystemConfig system_config_from_json(const json& j);

json to_json(const ControlSignal& w);
ControlSignal control_from_json(const json& j);

json to_json(const CertificateReport& report);

json to_json(const IntegratorConfig& config);
IntegratorConfig integrator_config_from_json(const json& j);

json to_json(const FlowConfig& config);
FlowConfig flow_config_from_json(const json& j);

json to_json(const RunRecord& record);

json to_json(const ProtocolConfig& config);
ProtocolConfig protocol_config_from_json(const json& j, const FlowConfig& flow);

json to_json(const BatchSummary& summary);
json to_json(const BatchRecord& record);

std::string run_outcome_name(RunOutcome outcome);

// CSV emission ('.' decimal separator, header row, '\n' newlines).
void write_fidelity_csv(const std::filesystem::path& path,
                        const std::vector<std::pair<double, double>>& curve);
void write_trajectory_csv(const std::filesystem::path& path, const DenseOutput& traj);
void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid);

/// Writes summary.json, records.jsonl, and curves/run_<i>_<j>_<k>.csv under out_dir.
void write_batch_outputs(const std::filesystem::path& out_dir, const BatchResult& result);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace landscape
