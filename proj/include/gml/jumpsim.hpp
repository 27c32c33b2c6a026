#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gml/graphon.hpp"
#include "gml/grid.hpp"
#include "gml/law_family.hpp"
#include "gml/model.hpp"
#include "gml/policy.hpp"

namespace gml {

enum class Coupling { Independent, Canonical, CommonNoise };
enum class UnitAxis { Labels, Players };

std::string to_string(Coupling c);

struct JumpEvent {
  int step = 0;
  double mark = 0.0;  // uniform in (0,1), mapped through the label's quantile
  double thin = 0.0;  // uniform in (0,1); accepted iff thin·intensity < λ(u)
};

// Everything needed to replay one path: initial-state uniform, Brownian
// increments and candidate jump events from a Poisson clock of rate `intensity`.
struct PathDrivers {
  double init = 0.5;
  double intensity = 0.0;
  std::vector<double> dW;
  std::vector<JumpEvent> jumps;
};

struct SimContext;

class PathEnsemble {
 public:
  UnitAxis axis = UnitAxis::Labels;
  Coupling coupling = Coupling::Independent;
  std::uint64_t seed = 0;
  // Identifies the noise source; ensembles with equal keys are driven by the
  // same Brownian motions and Poisson clocks (path i of unit j ↔ path i of unit j).
  std::uint64_t noise_key = 0;
  TimeGrid grid;
  std::vector<double> labels;  // one per unit
  int particles = 0;
  std::vector<double> states;  // [unit][particle][time]
  std::vector<PathDrivers> drivers;  // [unit][particle]; empty if not replayable
  std::shared_ptr<const SimContext> context;

  int units() const { return static_cast<int>(labels.size()); }
  std::size_t path_index(int unit, int particle) const {
    return static_cast<std::size_t>(unit) * particles + particle;
  }
  std::span<const double> path(int unit, int particle) const {
    return {states.data() + path_index(unit, particle) * grid.points(),
            static_cast<std::size_t>(grid.points())};
  }
  double state(int unit, int particle, int k) const {
    return states[path_index(unit, particle) * grid.points() + k];
  }
  // Samples of one unit at time index k, in particle order (unsorted).
  std::vector<double> column(int unit, int k) const;
  bool has_drivers() const { return !drivers.empty(); }
};

// Inputs captured for deterministic replay.
struct SimContext {
  std::shared_ptr<const ModelSpec> spec;
  // Graphon runs.
  std::optional<Graphon> graphon;
  std::shared_ptr<const LawFamily> env;  // nullptr: self-consistent (Self) mode
  std::shared_ptr<const PolicyField> policy;
  // Finite runs.
  std::shared_ptr<const InteractionMatrix> interaction;
  std::vector<PolicySlice> player_policies;
};

struct GraphonRun {
  std::vector<double> labels;  // unit labels; label_grid(m) by default
  int particles = 0;
  TimeGrid grid;
  Coupling coupling = Coupling::Independent;
  std::uint64_t seed = 0;
  // Frozen environment on the same time grid, or nullptr for Self mode.
  std::shared_ptr<const LawFamily> env;
  // CommonNoise only: copy drivers from this ensemble (same units × particles).
  const PathEnsemble* drivers_from = nullptr;
};

PathEnsemble simulate_graphon(const ModelSpec& spec, const Graphon& g, const PolicyField& policy,
                              const GraphonRun& run);

// Finite n-player game; R replications live on the particle axis. When
// `coupling_to` is given its drivers are reused (player i ↔ unit i).
PathEnsemble simulate_finite(const ModelSpec& spec, const InteractionMatrix& zeta,
                             const std::vector<PolicySlice>& policies, const TimeGrid& grid,
                             int replications, std::uint64_t seed,
                             const PathEnsemble* coupling_to = nullptr);

// Re-integrates with recorded drivers under a new control.
PathEnsemble replay(const PathEnsemble& ensemble, const PolicyField& new_policy);
PathEnsemble replay(const PathEnsemble& ensemble, const std::vector<PolicySlice>& new_policies);

// Same noise on a grid with half the steps: Brownian increments summed in
// pairs, jump events moved to the enclosing coarse step. States are not
// integrated; pass the result to replay().
PathEnsemble coarsen(const PathEnsemble& fine);
// States at every `factor`-th time point; drivers dropped.
PathEnsemble subsample_times(const PathEnsemble& ensemble, int factor);

// Box [lo, hi] = extreme (mean ± 6 sd) over labels and times.
StateGrid pilot_state_box(const LawFamily& law, int points);

std::vector<PolicySlice> stitch_policies(std::shared_ptr<const PolicyField> field,
                                         const std::vector<double>& labels);

}  // namespace gml
