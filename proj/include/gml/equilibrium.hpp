#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gml/graphon.hpp"
#include "gml/grid.hpp"
#include "gml/law_family.hpp"
#include "gml/model.hpp"
#include "gml/policy.hpp"

namespace gml {

struct PicardConfig {
  int labels = 8;
  int particles = 1000;
  TimeGrid time;
  std::optional<StateGrid> state;  // HJB box; taken from the initial guess when unset
  int state_points = 101;
  int action_points = 41;
  bool refine = false;
  double damping = 1.0;
  double tol = 0.05;
  int max_iter = 20;
  std::uint64_t seed = 0;
  // Constant control of the initial guess; the midpoint of A when unset.
  std::optional<double> initial_action;

  nlohmann::json to_json() const;
};

struct ResidualRecord {
  int iteration = 0;
  double avg = 0.0;  // law_family_distance(μ, μ', Avg)
  double sup = 0.0;
  double objective = 0.0;  // J_G of the new policy against the current environment
  double objective_error = 0.0;
};

struct EquilibriumResult {
  LawFamily law;
  PolicyField policy;
  std::vector<ResidualRecord> residual_history;
  bool converged = false;
  // Bootstrap scale of the last residual if both iterates had the same law.
  double noise_floor = 0.0;
  nlohmann::json config;

  std::string residual_csv() const;
};

// Damped fixed-point iteration μ ← (1 − λ_d)μ + λ_d Φ(μ) on law families,
// where Φ(μ) is the law of the best response to μ simulated against μ.
// Non-convergence is reported through `converged`, not thrown.
EquilibriumResult picard_solve(const ModelSpec& spec, const Graphon& g, const PicardConfig& cfg);

// Each (label, time) marginal becomes p − round(λ_d·p) stratified order
// statistics of `old` followed by round(λ_d·p) of `fresh`.
LawFamily damped_update(const LawFamily& old, const LawFamily& fresh, double damping);

struct MonotonicityTerms {
  double g_term = 0.0;         // ∫ (g(x, Λμ̄₁(u)) − g(x, Λμ̄₂(u))) (μ̄₁ − μ̄₂)(du, dx) at T
  std::vector<double> f_terms;  // the running-reward analogue at t_0..t_{K−1}
};

// Label-grid quadrature of both monotonicity integrals. The two law families
// must share grids; actions are read from the matching policy at (t, u, x).
MonotonicityTerms monotonicity_terms(const ModelSpec& spec, const Graphon& g,
                                     const LawFamily& mu1, const PolicyField& alpha1,
                                     const LawFamily& mu2, const PolicyField& alpha2);

struct MonotonicityReport {
  int pairs = 0;
  int g_nonnegative = 0;  // pairs whose terminal integral is >= 0
  int f_nonnegative = 0;  // (pair, time) cells whose running integral is >= 0
  int f_cells = 0;
  double worst_g = 0.0;   // largest terminal integral seen
  double worst_f = 0.0;
  std::vector<double> g_terms;

  bool ok() const { return g_nonnegative == 0 && f_nonnegative == 0; }
  nlohmann::json to_json() const;
};

// Samples `pairs` couples of law families from simulations under random
// label-wise constant controls and evaluates both integrals on each.
MonotonicityReport check_monotonicity(const ModelSpec& spec, const Graphon& g, int pairs, int m,
                                      int p, const TimeGrid& grid, std::uint64_t seed);

struct UniquenessReport {
  double spread = 0.0;      // max pairwise law_family_distance (Avg)
  double noise = 0.0;       // largest pairwise bootstrap error
  std::vector<bool> converged;
  std::vector<EquilibriumResult> results;

  bool all_converged() const;
};

// Runs picard_solve from the uncontrolled, a_lo-frozen and a_hi-frozen initial
// guesses (further starts spread evenly over A), each on its own substream.
UniquenessReport uniqueness_probe(const ModelSpec& spec, const Graphon& g, int starts,
                                  const PicardConfig& cfg);

}  // namespace gml
