#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gml/label_expr.hpp"
#include "gml/measure.hpp"

namespace gml {

enum class DistKind { PointMass, TwoPoint, Uniform, TruncatedNormal, Normal };

// A concrete 1-D law.
//   point_mass{value}, two_point{low, high, p_low}, uniform{low, high},
//   truncated_normal{mean, sd, low, high}, normal{mean, sd}
struct Distribution {
  DistKind kind = DistKind::PointMass;
  std::vector<double> params;

  static Distribution point_mass(double value);
  static Distribution two_point(double low, double high, double p_low);
  static Distribution uniform(double low, double high);
  static Distribution truncated_normal(double mean, double sd, double low, double high);
  static Distribution normal(double mean, double sd);

  // Left-continuous inverse CDF; quantile(0) / quantile(1) are the essential
  // infimum / supremum.
  double quantile(double p) const;
  double mean() const { return mean_; }
  double second_moment() const { return second_; }
  bool is_discrete() const { return kind == DistKind::PointMass || kind == DistKind::TwoPoint; }

  // Quadrature rule for E[h(X)]: exact atoms for discrete laws, 32-node
  // Gauss–Legendre in the quantile variable for continuous laws.
  const std::vector<Atom>& nodes() const;

 private:
  void build_nodes();
  double compute_mean() const;
  double compute_second_moment() const;
  std::vector<Atom> nodes_;
  double mean_ = 0.0;
  double second_ = 0.0;
};

std::string to_string(DistKind kind);

// Named law whose parameters are label expressions.
class LabelDistribution {
 public:
  LabelDistribution() = default;
  LabelDistribution(DistKind kind, std::vector<LabelExpr> params);
  static LabelDistribution fixed(const Distribution& d);
  // {"family": name, "params": {name: number | "expr in u"}}; `where` prefixes
  // configuration error fields.
  static LabelDistribution from_json(const nlohmann::json& doc, const std::string& where);

  Distribution at(double u) const;
  DistKind kind() const { return kind_; }
  nlohmann::json to_json() const;

 private:
  DistKind kind_ = DistKind::PointMass;
  std::vector<LabelExpr> params_;
};

// Finite jump measure ν_u = λ(u) · law(u).
struct CompensatorFamily {
  LabelExpr mass{0.0};
  LabelDistribution law;

  double intensity(double u) const;
  Distribution jump_law(double u) const { return law.at(u); }
  double inverse_cdf(double u, double p) const;
};

double inverse_cdf(const CompensatorFamily& family, double u, double p);

struct InitialFamily {
  LabelDistribution law;
  Distribution at(double u) const { return law.at(u); }
  double sample(double u, double uniform01) const { return law.at(u).quantile(uniform01); }
};

}  // namespace gml
