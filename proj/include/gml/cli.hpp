#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gml/graphon.hpp"
#include "gml/grid.hpp"
#include "gml/jumpsim.hpp"
#include "gml/model.hpp"
#include "gml/nashgap.hpp"

namespace gml {

enum class Command { Simulate, SolveEquilibrium, NashGap, Rates, GraphonNorms, Validate };

std::string to_string(Command c);
std::optional<Command> command_from_string(std::string_view s);

// Exit statuses of `gml`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitNotConverged = 4;

struct ExperimentConfig {
  Command command = Command::Validate;
  std::uint64_t seed = 0;
  nlohmann::json model_doc;
  ModelSpec model;
  std::optional<Graphon> graphon;

  // grids
  int m = 8;
  int p = 1000;
  int K = 20;
  double T = 1.0;
  std::optional<StateGrid> state;
  int state_points = 101;

  // solver
  double damping = 1.0;
  double tol = 0.05;
  int max_iter = 20;
  int action_points = 41;
  bool refine = false;

  // experiment
  std::vector<int> n_list;
  SamplingMode sampling = SamplingMode::ExactWeights;
  int R = 32;
  LabelMode label_mode = LabelMode::RightEndpoint;
  std::vector<std::string> metrics;
  int n = 32;
  std::vector<int> probes;  // empty: probe_players(n)
  int nash_replications = 0;
  Coupling coupling = Coupling::Independent;
  std::optional<double> action;  // simulate: constant control, midpoint of A when unset
  int validation_probes = 1000;
  int resolution = 16;
  std::optional<Graphon> compare_to;
  int monotonicity_pairs = 0;

  std::string output;

  // Resolved configuration, defaults filled in.
  nlohmann::json echo() const;
};

// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc, Command command);

struct RunOptions {
  std::filesystem::path output;
  int threads = 0;
  bool require_converged = false;
};

// Executes the command and writes its artifacts plus manifest.json and
// config.json under options.output. Returns the exit status.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

int cli_main(int argc, char** argv);

}  // namespace gml
