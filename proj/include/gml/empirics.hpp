#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gml/graphon.hpp"
#include "gml/jumpsim.hpp"
#include "gml/law_family.hpp"
#include "gml/measure.hpp"

namespace gml {

// Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

Estimate mean_estimate(std::span<const double> samples);

// 𝒲₂ between two empirical measures given as ascending samples. Equal sizes
// use the sorted matching; otherwise the quantile functions are compared on a
// 512-point midpoint grid.
double w2_1d(std::span<const double> a, std::span<const double> b);

struct WeightedW2 {
  double distance = 0.0;
  double mass_gap = 0.0;  // |mass(a) − mass(b)|; distance is between the normalized measures
};

WeightedW2 w2_weighted(const WeightedSample& a, const WeightedSample& b);

struct W2TBounds {
  double lower = 0.0;
  std::optional<double> upper;  // only when both runs share the noise source
};

W2TBounds w2T_bounds(const PathEnsemble& a, int unit_a, const PathEnsemble& b, int unit_b);

// M_i(t_k) = (1/n) Σ_j ζ_ij δ_{X_j(t_k)} in replication r.
WeightedSample neighborhood(const PathEnsemble& ensemble, const InteractionMatrix& zeta, int i,
                            int k, int replication = 0);

enum class LabelAggregate { Sup, Avg };

// Sup or average over labels of max over t of the marginal 𝒲₂.
double law_family_distance(const LawFamily& mu, const LawFamily& nu, LabelAggregate mode);

// Null-distribution scale of w2_1d(a, b) when both samples come from one law:
// root-mean-square of w2_1d over `resamples` pooled bootstrap splits.
double bootstrap_w2_error(std::span<const double> a, std::span<const double> b, int resamples,
                          std::uint64_t seed);

// Same idea for law_family_distance: every marginal pair is resampled from its
// pool and the distance recomputed; returns the RMS over resamples.
double bootstrap_law_distance_error(const LawFamily& mu, const LawFamily& nu, LabelAggregate mode,
                                    int resamples, std::uint64_t seed);

// Ordinary least squares slope of log(y) on log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace gml
