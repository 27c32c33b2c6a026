#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gml/law_family.hpp"
#include "gml/measure.hpp"

namespace gml {

enum class GraphonKind { Step, Constant, Min, Exp, Ranked };

// Symmetric measurable kernel G: [0,1]² → [0,1].
//
// Step graphons use right-closed blocks (b_{i-1}, b_i] with 0 assigned to the
// first block, so that a label i/n falls in the same block as ⌈nu⌉/n.
class Graphon {
 public:
  static Graphon constant(double p);
  static Graphon min_kernel();
  static Graphon exp_kernel(double c);
  static Graphon ranked();
  static Graphon step(std::vector<double> boundaries,
                      std::vector<std::vector<double>> values);
  // Analytic kernel by name: "constant" {p}, "min", "exp" {c}, "ranked".
  static Graphon analytic(std::string_view name, std::vector<double> params);

  double operator()(double u, double v) const;

  GraphonKind kind() const { return kind_; }
  bool is_step() const { return kind_ == GraphonKind::Step; }
  std::string name() const;
  const std::vector<double>& params() const { return params_; }

  // Step-only accessors.
  const std::vector<double>& boundaries() const { return boundaries_; }
  int blocks() const { return static_cast<int>(boundaries_.size()) - 1; }
  double block_value(int i, int j) const { return values_[i * blocks() + j]; }
  int block_of(double u) const;

  nlohmann::json to_json() const;
  static Graphon from_json(const nlohmann::json& doc);

 private:
  double raw(double u, double v) const;

  GraphonKind kind_ = GraphonKind::Constant;
  std::vector<double> params_;
  std::vector<double> boundaries_;
  std::vector<double> values_;  // row-major blocks × blocks
};

double eval(const Graphon& g, double u, double v);

// Quadrature approximation of Λμ_t(u) = ∫ G(u,v) δ_x μ_t(dv,dx): every particle
// of label v_j at time index k, weighted G(u, v_j)/(m·p).
WeightedSample lambda_measure(const Graphon& g, double u, const LawFamily& law, int k);

struct NormResult {
  double value = 0.0;
  bool lower_bound = false;  // true when computed by local search
};

// Kernel-level norms of a k×k step kernel `d` (row-major) with block widths w.
// Exact by subset enumeration for k <= 20, randomized local search above.
NormResult cut_norm(std::span<const double> d, std::span<const double> widths);
NormResult inf_to_one_norm(std::span<const double> d, std::span<const double> widths);
double inf_to_inf_norm(std::span<const double> d, std::span<const double> widths);

// Norms of G1 − G2 after projecting both onto the uniform `resolution`-block grid.
NormResult cut_norm_diff(const Graphon& g1, const Graphon& g2, int resolution);
NormResult inf_one_norm_diff(const Graphon& g1, const Graphon& g2, int resolution);
double inf_inf_norm_diff(const Graphon& g1, const Graphon& g2, int resolution);

// Uniform m-block step graphon with block values G evaluated at block midpoints.
Graphon step_projection(const Graphon& g, int m);

enum class SamplingMode { ExactWeights, Bernoulli, SampledWeights, SampledBernoulli };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(std::string_view s);

struct InteractionMatrix {
  int n = 0;
  std::vector<double> weights;  // row-major n × n
  SamplingMode mode = SamplingMode::ExactWeights;
  std::vector<double> label_assignment;
  std::uint64_t seed = 0;

  double operator()(int i, int j) const { return weights[static_cast<std::size_t>(i) * n + j]; }
  std::span<const double> row(int i) const {
    return {weights.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)};
  }

  static InteractionMatrix zeros(int n);
  static InteractionMatrix from_weights(int n, std::vector<double> weights);

  std::string to_csv() const;
  nlohmann::json metadata() const;
};

InteractionMatrix sample_interaction(const Graphon& g, int n, SamplingMode mode,
                                     std::uint64_t seed);

}  // namespace gml
