#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gml/distributions.hpp"
#include "gml/measure.hpp"

namespace gml {

struct ActionSet {
  double lo = 0.0;
  double hi = 0.0;

  double clamp(double a) const { return a < lo ? lo : (a > hi ? hi : a); }
  double midpoint() const { return 0.5 * (lo + hi); }
  // `points` equally spaced actions including both ends (one point if lo == hi).
  std::vector<double> grid(int points) const;
  double spacing(int points) const { return points > 1 ? (hi - lo) / (points - 1) : 0.0; }
};

// Fast path for interaction terms of the form Σ_atoms w·b(t,x,x',a) whose
// x'-dependence factors through a few features φ_f(x'): the simulators hand
// drift/diffusion the feature sums Σ w φ_f(x') instead of the atoms.
struct InteractionFeatures {
  int count = 0;
  std::function<void(double xp, std::span<double> out)> phi;
  std::function<double(double t, double x, double a, std::span<const double> sums)> drift;
  std::function<double(double t, double x, double a, std::span<const double> sums)> diffusion;
};

struct ModelSpec {
  using PairCoeff = std::function<double(double t, double x, double xp, double a)>;
  using JumpCoeff = std::function<double(double t, double x, double e, double a)>;
  using Running = std::function<double(double t, double x, const WeightedSample& m, double a)>;
  using Terminal = std::function<double(double x, const WeightedSample& m)>;

  std::string name;
  nlohmann::json params = nlohmann::json::object();

  PairCoeff drift;
  PairCoeff diffusion;
  JumpCoeff jump;
  Running running;
  Terminal terminal;

  ActionSet actions;
  CompensatorFamily compensator;
  InitialFamily initial;

  double lipschitz_bound = 1.0;
  double sigma_floor = 0.0;
  // Declared sup bound on |f| and |g|, if the model claims boundedness.
  std::optional<double> reward_bound;
  // Reward-boundedness is violated on purpose; results are only meaningful
  // against closed-form oracles.
  bool oracle_only = false;

  // Structural flags the numerical modules exploit.
  bool jump_action_free = false;  // ℓ does not depend on a
  bool jump_affine = false;       // ℓ affine in e, so E[ℓ] = ℓ(·, E[e], ·)
  std::optional<InteractionFeatures> features;

  // Aggregated coefficients B = Σ w·b(t,x,x_atom,a), S = Σ w·σ(...).
  double aggregate_drift(double t, double x, double a, const WeightedSample& m) const;
  double aggregate_diffusion(double t, double x, double a, const WeightedSample& m) const;
  // E[ℓ(t,x,e,a)] under the normalized jump law at label u (given its nodes).
  double mean_jump(double t, double x, double a, const Distribution& law) const;
};

// Built-in catalog: lq_graphon, bounded_sine, pure_jump, no_interaction.
// `params` overrides named scalar parameters of the family.
ModelSpec builtin_model(const std::string& name, const nlohmann::json& params = {});
std::vector<std::string> builtin_model_names();

// Full model block: {name, params, action_set, compensator, initial}.
ModelSpec model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const ModelSpec& spec);

struct Violation {
  std::string check;        // "lipschitz", "sigma_floor", "bounded"
  std::string coefficient;  // "b", "sigma", "l", "f", "g"
  std::string witness;
  double value = 0.0;
};

struct ValidationReport {
  int probes = 0;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(const std::string& check) const;
  nlohmann::json to_json() const;
};

ValidationReport validate_model(const ModelSpec& spec, int probes, std::uint64_t seed);

}  // namespace gml
