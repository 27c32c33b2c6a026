#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gml/bestresponse.hpp"
#include "gml/empirics.hpp"
#include "gml/equilibrium.hpp"
#include "gml/graphon.hpp"
#include "gml/model.hpp"
#include "gml/policy.hpp"

namespace gml {

enum class LabelMode { RightEndpoint, IntervalFree };

std::string to_string(LabelMode mode);
LabelMode label_mode_from_string(std::string_view s);

// Interior breakpoints of a step graphon; empty for analytic kernels.
std::vector<double> piece_boundaries(const Graphon& g);

// Player labels u_1..u_n. RightEndpoint gives i/n. IntervalFree draws u_i
// uniformly from ((i−1)/n, i/n] clipped to the right-closed piece that
// contains i/n, so a label never crosses a breakpoint.
std::vector<double> assign_labels(int n, LabelMode mode, std::uint64_t seed = 0,
                                  std::span<const double> breakpoints = {});

struct NashProbe {
  int player = 0;
  double label = 0.0;
  Estimate gap;        // paired J_dev − J_base
  Estimate base;
  Estimate deviation;
};

struct NashGapReport {
  int n = 0;
  std::vector<double> labels;
  std::vector<NashProbe> probes;
  Estimate max_gap;  // over probes, with the error of the maximizing probe
  Estimate avg_gap;
  std::string graphon;
  SamplingMode sampling = SamplingMode::ExactWeights;
  std::string method = "hjb_frozen";

  std::string to_csv() const;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// Deviation gains of the `probes` players under a fixed strategy profile.
// One base run with R replications; for each probe the deviation solves the
// HJB against the replication-averaged neighborhood measure of the base run
// and is evaluated by replaying the base drivers.
NashGapReport nash_gap(const ModelSpec& spec, const InteractionMatrix& zeta,
                       const std::vector<PolicySlice>& profile, const std::vector<int>& probes,
                       int replications, std::uint64_t seed, const BestResponseConfig& br);

// Profile α_j = eq.policy(·, u_j, ·); HJB grids and action settings from eq.
NashGapReport nash_gap(const ModelSpec& spec, const InteractionMatrix& zeta,
                       const EquilibriumResult& eq, const std::vector<double>& labels,
                       const std::vector<int>& probes, int replications, std::uint64_t seed);

// ⌈log₂ n⌉ players spread evenly over 0..n−1 (all of them when n is small).
std::vector<int> probe_players(int n);

struct RateConfig {
  std::vector<int> n_list;
  SamplingMode sampling = SamplingMode::ExactWeights;
  int replications = 32;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::RightEndpoint;
  // Subset of chaos_avg, chaos_max, neighborhood_test, nash_avg, nash_max;
  // empty selects the first three.
  std::vector<std::string> metrics;
  int nash_replications = 0;  // 0 reuses `replications`
  int bootstrap = 200;
  int min_fit_n = 32;
};

struct RateRow {
  int n = 0;
  std::string metric;
  double value = 0.0;
  double mc_error = 0.0;
  std::string failure;  // non-empty if the sub-run threw
};

struct SlopeFit {
  std::string metric;
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int points = 0;
};

struct RateTable {
  std::vector<RateRow> rows;
  std::vector<SlopeFit> slopes;
  std::vector<NashGapReport> nash_reports;

  std::vector<RateRow> metric_rows(std::string_view metric) const;
  const SlopeFit* slope(std::string_view metric) const;
  std::string to_csv() const;
  std::string slopes_csv() const;
};

const std::vector<std::string>& rate_metrics();

// Least-squares log-log slope over rows with n >= min_n and positive value;
// the interval is the 2.5–97.5% range of slopes refitted on values perturbed
// by their Monte Carlo errors.
SlopeFit fit_slope(const std::vector<RateRow>& rows, std::string_view metric, int min_n,
                   int resamples, std::uint64_t seed);

// Finite games for every n paired with graphon reference paths at the same
// labels (shared drivers), under the equilibrium policy and law of `eq`.
RateTable rate_experiment(const ModelSpec& spec, const Graphon& g, const EquilibriumResult& eq,
                          const RateConfig& cfg);

}  // namespace gml
