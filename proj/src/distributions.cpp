#include "gml/distributions.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "gml/errors.hpp"

namespace gml {

namespace {

const boost::math::normal_distribution<double> standard_normal(0.0, 1.0);

double phi(double z) { return boost::math::pdf(standard_normal, z); }
double Phi(double z) { return boost::math::cdf(standard_normal, z); }
double Phi_inv(double p) { return boost::math::quantile(standard_normal, p); }

struct Family {
  const char* name;
  DistKind kind;
  std::vector<const char*> params;
};

const std::vector<Family>& families() {
  static const std::vector<Family> table = {
      {"point_mass", DistKind::PointMass, {"value"}},
      {"two_point", DistKind::TwoPoint, {"low", "high", "p_low"}},
      {"uniform", DistKind::Uniform, {"low", "high"}},
      {"truncated_normal", DistKind::TruncatedNormal, {"mean", "sd", "low", "high"}},
      {"normal", DistKind::Normal, {"mean", "sd"}},
  };
  return table;
}

const Family& family_of(DistKind kind) {
  for (const Family& f : families())
    if (f.kind == kind) return f;
  throw PreconditionError("unknown distribution kind");
}

}  // namespace

std::string to_string(DistKind kind) { return family_of(kind).name; }

Distribution Distribution::point_mass(double value) {
  if (!std::isfinite(value)) throw DomainError("point_mass: value must be finite");
  Distribution d;
  d.kind = DistKind::PointMass;
  d.params = {value};
  d.build_nodes();
  return d;
}

Distribution Distribution::two_point(double low, double high, double p_low) {
  if (!(low <= high)) throw DomainError("two_point: need low <= high");
  if (!(p_low >= 0.0 && p_low <= 1.0)) throw DomainError("two_point: p_low outside [0,1]");
  Distribution d;
  d.kind = DistKind::TwoPoint;
  d.params = {low, high, p_low};
  d.build_nodes();
  return d;
}

Distribution Distribution::uniform(double low, double high) {
  if (!(low < high)) throw DomainError("uniform: need low < high");
  Distribution d;
  d.kind = DistKind::Uniform;
  d.params = {low, high};
  d.build_nodes();
  return d;
}

Distribution Distribution::truncated_normal(double mean, double sd, double low, double high) {
  if (!(sd > 0.0)) throw DomainError("truncated_normal: sd must be > 0");
  if (!(low < high)) throw DomainError("truncated_normal: need low < high");
  Distribution d;
  d.kind = DistKind::TruncatedNormal;
  d.params = {mean, sd, low, high};
  if (!(Phi((high - mean) / sd) - Phi((low - mean) / sd) > 0.0))
    throw DomainError("truncated_normal: interval carries no mass");
  d.build_nodes();
  return d;
}

Distribution Distribution::normal(double mean, double sd) {
  if (!(sd >= 0.0)) throw DomainError("normal: sd must be >= 0");
  if (sd == 0.0) return point_mass(mean);
  Distribution d;
  d.kind = DistKind::Normal;
  d.params = {mean, sd};
  d.build_nodes();
  return d;
}

double Distribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(fmt::format("quantile: p = {} outside [0,1]", p));
  const auto& q = params;
  switch (kind) {
    case DistKind::PointMass:
      return q[0];
    case DistKind::TwoPoint:
      if (q[2] == 0.0) return q[1];
      return p <= q[2] ? q[0] : q[1];
    case DistKind::Uniform:
      return q[0] + p * (q[1] - q[0]);
    case DistKind::TruncatedNormal: {
      if (p == 0.0) return q[2];
      if (p == 1.0) return q[3];
      const double a = Phi((q[2] - q[0]) / q[1]);
      const double b = Phi((q[3] - q[0]) / q[1]);
      const double x = q[0] + q[1] * Phi_inv(a + p * (b - a));
      return std::clamp(x, q[2], q[3]);
    }
    case DistKind::Normal:
      if (p == 0.0) return -std::numeric_limits<double>::infinity();
      if (p == 1.0) return std::numeric_limits<double>::infinity();
      return q[0] + q[1] * Phi_inv(p);
  }
  return 0.0;
}

double Distribution::compute_mean() const {
  const auto& q = params;
  switch (kind) {
    case DistKind::PointMass:
      return q[0];
    case DistKind::TwoPoint:
      return q[2] * q[0] + (1.0 - q[2]) * q[1];
    case DistKind::Uniform:
      return 0.5 * (q[0] + q[1]);
    case DistKind::TruncatedNormal: {
      const double a = (q[2] - q[0]) / q[1], b = (q[3] - q[0]) / q[1];
      return q[0] + q[1] * (phi(a) - phi(b)) / (Phi(b) - Phi(a));
    }
    case DistKind::Normal:
      return q[0];
  }
  return 0.0;
}

double Distribution::compute_second_moment() const {
  const auto& q = params;
  const double mu = compute_mean();
  switch (kind) {
    case DistKind::PointMass:
      return q[0] * q[0];
    case DistKind::TwoPoint:
      return q[2] * q[0] * q[0] + (1.0 - q[2]) * q[1] * q[1];
    case DistKind::Uniform:
      return mu * mu + (q[1] - q[0]) * (q[1] - q[0]) / 12.0;
    case DistKind::TruncatedNormal: {
      const double a = (q[2] - q[0]) / q[1], b = (q[3] - q[0]) / q[1];
      const double z = Phi(b) - Phi(a);
      const double r = (phi(a) - phi(b)) / z;
      const double var = q[1] * q[1] * (1.0 + (a * phi(a) - b * phi(b)) / z - r * r);
      return var + mu * mu;
    }
    case DistKind::Normal:
      return q[0] * q[0] + q[1] * q[1];
  }
  return 0.0;
}

const std::vector<Atom>& Distribution::nodes() const { return nodes_; }

void Distribution::build_nodes() {
  mean_ = compute_mean();
  second_ = compute_second_moment();
  nodes_.clear();
  if (kind == DistKind::PointMass) {
    nodes_.push_back({params[0], 1.0});
    return;
  }
  if (kind == DistKind::TwoPoint) {
    if (params[2] > 0.0) nodes_.push_back({params[0], params[2]});
    if (params[2] < 1.0) nodes_.push_back({params[1], 1.0 - params[2]});
    return;
  }
  using rule = boost::math::quadrature::gauss<double, 32>;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double sign : {-1.0, 1.0}) {
      const double p = 0.5 * (1.0 + sign * x[i]);
      nodes_.push_back({quantile(p), 0.5 * w[i]});
    }
  }
}

LabelDistribution::LabelDistribution(DistKind kind, std::vector<LabelExpr> params)
    : kind_(kind), params_(std::move(params)) {
  if (params_.size() != family_of(kind).params.size())
    throw PreconditionError(fmt::format("{}: wrong parameter count", to_string(kind)));
}

LabelDistribution LabelDistribution::fixed(const Distribution& d) {
  std::vector<LabelExpr> p;
  for (double v : d.params) p.emplace_back(v);
  return LabelDistribution(d.kind, std::move(p));
}

LabelDistribution LabelDistribution::from_json(const nlohmann::json& doc, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where, "expected an object");
  if (!doc.contains("family")) throw ConfigError(where + ".family", "missing");
  const std::string name = doc.at("family").is_string() ? doc.at("family").get<std::string>() : "";
  const Family* fam = nullptr;
  for (const Family& f : families())
    if (name == f.name) fam = &f;
  if (!fam) throw ConfigError(where + ".family", fmt::format("unknown family '{}'", name));
  const nlohmann::json params = doc.value("params", nlohmann::json::object());
  if (!params.is_object()) throw ConfigError(where + ".params", "expected an object");
  std::vector<LabelExpr> exprs;
  for (const char* key : fam->params) {
    const std::string field = where + ".params." + key;
    if (!params.contains(key)) throw ConfigError(field, "missing");
    const auto& v = params.at(key);
    try {
      if (v.is_number()) {
        exprs.emplace_back(v.get<double>());
      } else if (v.is_string()) {
        exprs.push_back(LabelExpr::parse(v.get<std::string>()));
      } else {
        throw ConfigError(field, "expected a number or a label expression");
      }
    } catch (const PreconditionError& e) {
      throw ConfigError(field, e.what());
    }
  }
  for (const auto& [key, _] : params.items()) {
    bool known = false;
    for (const char* k : fam->params) known = known || key == k;
    if (!known) throw ConfigError(where + ".params." + key, "unknown parameter");
  }
  LabelDistribution out(fam->kind, std::move(exprs));
  try {
    for (double u : {0.0, 0.5, 1.0}) out.at(u);
  } catch (const std::exception& e) {
    throw ConfigError(where + ".params", e.what());
  }
  return out;
}

Distribution LabelDistribution::at(double u) const {
  std::vector<double> v(params_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = params_[i](u);
  switch (kind_) {
    case DistKind::PointMass:
      return Distribution::point_mass(v[0]);
    case DistKind::TwoPoint:
      return Distribution::two_point(v[0], v[1], v[2]);
    case DistKind::Uniform:
      return Distribution::uniform(v[0], v[1]);
    case DistKind::TruncatedNormal:
      return Distribution::truncated_normal(v[0], v[1], v[2], v[3]);
    case DistKind::Normal:
      return Distribution::normal(v[0], v[1]);
  }
  return {};
}

nlohmann::json LabelDistribution::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  const Family& fam = family_of(kind_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].is_constant())
      params[fam.params[i]] = params_[i](0.0);
    else
      params[fam.params[i]] = params_[i].text();
  }
  return {{"family", fam.name}, {"params", params}};
}

double CompensatorFamily::intensity(double u) const {
  const double lam = mass(u);
  if (!(lam >= 0.0) || !std::isfinite(lam))
    throw DomainError(fmt::format("compensator intensity {} at label {} is not a finite nonnegative value", lam, u));
  return lam;
}

double CompensatorFamily::inverse_cdf(double u, double p) const {
  return jump_law(u).quantile(p);
}

double inverse_cdf(const CompensatorFamily& family, double u, double p) {
  return family.inverse_cdf(u, p);
}

}  // namespace gml
