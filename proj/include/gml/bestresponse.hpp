#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gml/empirics.hpp"
#include "gml/graphon.hpp"
#include "gml/grid.hpp"
#include "gml/jumpsim.hpp"
#include "gml/law_family.hpp"
#include "gml/model.hpp"
#include "gml/policy.hpp"

namespace gml {

// The measure a single player faces at time index k (Λμ_{t_k}(u) for the
// graphon game, the replication-averaged neighborhood measure for a finite one).
using EnvironmentFn = std::function<WeightedSample(int k)>;

EnvironmentFn graphon_environment(const Graphon& g, double u, const LawFamily& law);
// Atoms X_j^r(t_k) with weights ζ_ij/(n·R): M_i averaged over replications.
EnvironmentFn neighborhood_environment(const PathEnsemble& ensemble, const InteractionMatrix& zeta,
                                       int i);

struct BestResponseConfig {
  TimeGrid time;
  StateGrid state;
  int action_points = 41;
  bool refine = false;  // golden-section polish around the discrete argmax
  int substeps = 0;     // per time step; 0 picks the smallest stable count
};

struct ValueGrid {
  TimeGrid time;
  StateGrid state;
  double label = 0.0;
  std::vector<double> values;  // [k][g]
  std::vector<double> policy;  // [k][g]; row K repeats row K−1
  std::uint64_t env_digest = 0;
  int substeps = 1;

  double V(int k, int g) const { return values[static_cast<std::size_t>(k) * state.points + g]; }
  double alpha(int k, int g) const { return policy[static_cast<std::size_t>(k) * state.points + g]; }
  // Linear interpolation of V(t_k, ·).
  double value_at(int k, double x) const;
  std::string to_csv() const;
};

ValueGrid solve_best_response(const ModelSpec& spec, const EnvironmentFn& env, double u,
                              const BestResponseConfig& cfg);
ValueGrid solve_best_response(const ModelSpec& spec, const Graphon& g, const LawFamily& mu,
                              double u, const BestResponseConfig& cfg);

// Copies α* into label slot `label` of a policy field on the same grids.
void write_policy(PolicyField& field, int label, const ValueGrid& v);
PolicyField single_label_policy(const ValueGrid& v, const ActionSet& actions);

// Jump part of the generator at node g for a value slice V (size = grid
// points): λ Σ_q w_q (V(x_g + ℓ(t, x_g, e_q, a)) − V(x_g)), linear
// interpolation inside the grid and linear extrapolation outside.
double jump_generator(const ModelSpec& spec, const Distribution& law, double lambda, double t,
                      const StateGrid& grid, std::span<const double> V, int g, double a);

struct ObjectiveReport {
  Estimate overall;
  std::vector<Estimate> per_label;
  std::vector<double> payoffs;  // per path, unit-major
};

// J_G by Monte Carlo over an ensemble simulated under (policy, μ frozen):
// left Riemann sum of f plus g, averaged over the unit labels.
ObjectiveReport evaluate_objective(const ModelSpec& spec, const Graphon& g,
                                   const PolicyField& policy, const LawFamily& mu,
                                   const PathEnsemble& ensemble);

// Per-replication payoffs of player i, rewards evaluated against M_i(t).
std::vector<double> player_payoffs(const ModelSpec& spec, const InteractionMatrix& zeta,
                                   const std::vector<PolicySlice>& policies, int i,
                                   const PathEnsemble& ensemble);
Estimate evaluate_player_objective(const ModelSpec& spec, const InteractionMatrix& zeta,
                                   const std::vector<PolicySlice>& policies, int i,
                                   const PathEnsemble& ensemble);

}  // namespace gml
