#include "gml/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "gml/errors.hpp"
#include "gml/random.hpp"

namespace gml {

std::vector<double> ActionSet::grid(int points) const {
  if (points < 1) throw PreconditionError("ActionSet::grid: need at least one point");
  if (lo == hi || points == 1) return {lo};
  std::vector<double> a(points);
  for (int i = 0; i < points; ++i) a[i] = lo + (hi - lo) * i / (points - 1);
  a.back() = hi;
  return a;
}

double ModelSpec::aggregate_drift(double t, double x, double a, const WeightedSample& m) const {
  double s = 0.0;
  for (const Atom& at : m.atoms()) s += at.weight * drift(t, x, at.location, a);
  return s;
}

double ModelSpec::aggregate_diffusion(double t, double x, double a, const WeightedSample& m) const {
  double s = 0.0;
  for (const Atom& at : m.atoms()) s += at.weight * diffusion(t, x, at.location, a);
  return s;
}

double ModelSpec::mean_jump(double t, double x, double a, const Distribution& law) const {
  if (jump_affine) return jump(t, x, law.mean(), a);
  double s = 0.0;
  for (const Atom& node : law.nodes()) s += node.weight * jump(t, x, node.location, a);
  return s;
}

namespace {

using Params = std::map<std::string, double>;

Params merge_params(const std::string& model, Params defaults, const nlohmann::json& given) {
  if (given.is_null()) return defaults;
  if (!given.is_object()) throw ConfigError("model.params", "expected an object");
  for (const auto& [key, value] : given.items()) {
    auto it = defaults.find(key);
    if (it == defaults.end())
      throw ConfigError("model.params." + key, fmt::format("not a parameter of {}", model));
    if (!value.is_number()) throw ConfigError("model.params." + key, "expected a number");
    it->second = value.get<double>();
  }
  return defaults;
}

nlohmann::json params_json(const Params& p) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [k, v] : p) doc[k] = v;
  return doc;
}

InteractionFeatures unit_feature(std::function<double(double, double, double)> drift,
                                 std::function<double(double, double, double)> diffusion) {
  InteractionFeatures f;
  f.count = 1;
  f.phi = [](double, std::span<double> out) { out[0] = 1.0; };
  f.drift = [drift](double t, double x, double a, std::span<const double> s) {
    return s[0] * drift(t, x, a);
  };
  f.diffusion = [diffusion](double t, double x, double a, std::span<const double> s) {
    return s[0] * diffusion(t, x, a);
  };
  return f;
}

ModelSpec lq_graphon(const nlohmann::json& given) {
  const Params p = merge_params("lq_graphon", {{"theta", -0.5}, {"c", 0.5}, {"s", 0.4}}, given);
  const double theta = p.at("theta"), c = p.at("c"), s = p.at("s");
  ModelSpec m;
  m.name = "lq_graphon";
  m.params = params_json(p);
  m.drift = [](double, double, double, double a) { return a; };
  m.diffusion = [s](double, double, double, double) { return s; };
  m.jump = [](double, double, double, double) { return 0.0; };
  m.running = [theta](double, double x, const WeightedSample& mu, double a) {
    const double d = x - theta * mu.first_moment();
    return -0.5 * a * a - 0.5 * d * d;
  };
  m.terminal = [c](double x, const WeightedSample&) { return -0.5 * c * x * x; };
  m.actions = {-4.0, 4.0};
  m.compensator.mass = LabelExpr(0.0);
  m.compensator.law = LabelDistribution::fixed(Distribution::point_mass(0.0));
  m.initial.law = LabelDistribution::fixed(Distribution::normal(1.0, 0.3));
  m.lipschitz_bound = 10.0;
  m.sigma_floor = s;
  m.oracle_only = true;
  m.jump_action_free = true;
  m.jump_affine = true;
  m.features = unit_feature([](double, double, double a) { return a; },
                            [s](double, double, double) { return s; });
  return m;
}

ModelSpec bounded_sine(const nlohmann::json& given) {
  const Params p = merge_params("bounded_sine", {{"jump_scale", 0.1}, {"vol_mod", 0.1}}, given);
  const double k = p.at("jump_scale"), v = p.at("vol_mod");
  if (!(std::abs(v) < 1.0)) throw ConfigError("model.params.vol_mod", "must lie in (-1,1)");
  ModelSpec m;
  m.name = "bounded_sine";
  m.params = params_json(p);
  m.drift = [](double, double x, double xp, double a) { return std::sin(x - xp) + a; };
  m.diffusion = [v](double, double x, double, double) { return 1.0 + v * std::cos(x); };
  m.jump = [k](double, double, double e, double) { return k * e; };
  m.running = [](double, double x, const WeightedSample& mu, double a) {
    const double th = std::tanh(x - mu.first_moment());
    return -a * a - th * th;
  };
  m.terminal = [](double x, const WeightedSample& mu) {
    const double th = std::tanh(x - mu.first_moment());
    return -th * th;
  };
  m.actions = {-1.0, 1.0};
  m.compensator.mass = LabelExpr(1.0);
  m.compensator.law = LabelDistribution::fixed(Distribution::truncated_normal(0.0, 1.0, -2.0, 2.0));
  m.initial.law = LabelDistribution::fixed(Distribution::normal(0.0, 0.5));
  m.lipschitz_bound = 3.0;
  m.sigma_floor = 1.0 - std::abs(v);
  m.reward_bound = 2.0;
  m.jump_action_free = true;
  m.jump_affine = true;
  InteractionFeatures f;
  f.count = 3;
  f.phi = [](double xp, std::span<double> out) {
    out[0] = 1.0;
    out[1] = std::cos(xp);
    out[2] = std::sin(xp);
  };
  // sin(x - x') = sin x cos x' - cos x sin x'
  f.drift = [](double, double x, double a, std::span<const double> s) {
    return std::sin(x) * s[1] - std::cos(x) * s[2] + a * s[0];
  };
  f.diffusion = [v](double, double x, double, std::span<const double> s) {
    return s[0] * (1.0 + v * std::cos(x));
  };
  m.features = std::move(f);
  return m;
}

ModelSpec pure_jump(const nlohmann::json& given) {
  const Params p = merge_params("pure_jump", {{"sigma", 0.1}}, given);
  const double s = p.at("sigma");
  ModelSpec m;
  m.name = "pure_jump";
  m.params = params_json(p);
  m.drift = [](double, double, double, double) { return 0.0; };
  m.diffusion = [s](double, double, double, double) { return s; };
  m.jump = [](double, double, double e, double) { return e; };
  m.running = [](double, double, const WeightedSample&, double a) { return -0.5 * a * a; };
  m.terminal = [](double, const WeightedSample&) { return 0.0; };
  m.actions = {-1.0, 1.0};
  m.compensator.mass = LabelExpr(2.0);
  m.compensator.law = LabelDistribution::fixed(Distribution::uniform(0.0, 1.0));
  m.initial.law = LabelDistribution::fixed(Distribution::point_mass(0.0));
  m.lipschitz_bound = 1.5;
  m.sigma_floor = s;
  m.reward_bound = 0.5;
  m.jump_action_free = true;
  m.jump_affine = true;
  m.features = unit_feature([](double, double, double) { return 0.0; },
                            [s](double, double, double) { return s; });
  return m;
}

ModelSpec no_interaction(const nlohmann::json& given) {
  const Params p = merge_params("no_interaction", {{"sigma", 0.5}, {"jump_scale", 0.1}}, given);
  const double s = p.at("sigma"), k = p.at("jump_scale");
  ModelSpec m;
  m.name = "no_interaction";
  m.params = params_json(p);
  m.drift = [](double, double, double, double a) { return a; };
  m.diffusion = [s](double, double, double, double) { return s; };
  m.jump = [k](double, double, double e, double) { return k * e; };
  m.running = [](double, double x, const WeightedSample&, double a) {
    const double th = std::tanh(x);
    return -0.5 * a * a - 0.5 * th * th;
  };
  m.terminal = [](double x, const WeightedSample&) {
    const double th = std::tanh(x);
    return -0.5 * th * th;
  };
  m.actions = {-1.0, 1.0};
  m.compensator.mass = LabelExpr(1.0);
  m.compensator.law = LabelDistribution::fixed(Distribution::uniform(-1.0, 1.0));
  m.initial.law = LabelDistribution::fixed(Distribution::normal(0.0, 0.5));
  m.lipschitz_bound = 1.5;
  m.sigma_floor = s;
  m.reward_bound = 1.0;
  m.jump_action_free = true;
  m.jump_affine = true;
  m.features = unit_feature([](double, double, double a) { return a; },
                            [s](double, double, double) { return s; });
  return m;
}

}  // namespace

std::vector<std::string> builtin_model_names() {
  return {"lq_graphon", "bounded_sine", "pure_jump", "no_interaction"};
}

ModelSpec builtin_model(const std::string& name, const nlohmann::json& params) {
  if (name == "lq_graphon") return lq_graphon(params);
  if (name == "bounded_sine") return bounded_sine(params);
  if (name == "pure_jump") return pure_jump(params);
  if (name == "no_interaction") return no_interaction(params);
  throw ConfigError("model.name", fmt::format("unknown model '{}'", name));
}

ModelSpec model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("model", "expected an object");
  if (!doc.contains("name") || !doc.at("name").is_string())
    throw ConfigError("model.name", "missing");
  ModelSpec m = builtin_model(doc.at("name").get<std::string>(),
                              doc.value("params", nlohmann::json::object()));
  if (doc.contains("action_set")) {
    const auto& a = doc.at("action_set");
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
      throw ConfigError("model.action_set", "expected [lo, hi]");
    m.actions = {a[0].get<double>(), a[1].get<double>()};
    if (!(m.actions.lo <= m.actions.hi)) throw ConfigError("model.action_set", "need lo <= hi");
  }
  if (doc.contains("compensator")) {
    const auto& c = doc.at("compensator");
    LabelDistribution law = LabelDistribution::from_json(c, "model.compensator");
    if (law.kind() == DistKind::Normal)
      throw ConfigError("model.compensator.family", "jump laws must have bounded support");
    m.compensator.law = std::move(law);
    if (c.contains("lambda")) {
      const auto& lam = c.at("lambda");
      try {
        if (lam.is_number())
          m.compensator.mass = LabelExpr(lam.get<double>());
        else if (lam.is_string())
          m.compensator.mass = LabelExpr::parse(lam.get<std::string>());
        else
          throw ConfigError("model.compensator.lambda", "expected a number or label expression");
        for (double u : {0.0, 0.25, 0.5, 0.75, 1.0}) m.compensator.intensity(u);
      } catch (const PreconditionError& e) {
        throw ConfigError("model.compensator.lambda", e.what());
      } catch (const DomainError& e) {
        throw ConfigError("model.compensator.lambda", e.what());
      }
    }
  }
  if (doc.contains("initial"))
    m.initial.law = LabelDistribution::from_json(doc.at("initial"), "model.initial");
  return m;
}

nlohmann::json model_to_json(const ModelSpec& spec) {
  nlohmann::json comp = spec.compensator.law.to_json();
  comp["lambda"] = spec.compensator.mass.is_constant()
                       ? nlohmann::json(spec.compensator.mass(0.0))
                       : nlohmann::json(spec.compensator.mass.text());
  return {{"name", spec.name},
          {"params", spec.params},
          {"action_set", {spec.actions.lo, spec.actions.hi}},
          {"compensator", comp},
          {"initial", spec.initial.law.to_json()}};
}

std::size_t ValidationReport::count(const std::string& check) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(), [&](const Violation& v) { return v.check == check; }));
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const Violation& v : violations)
    list.push_back({{"check", v.check}, {"coefficient", v.coefficient}, {"witness", v.witness},
                    {"value", v.value}});
  return {{"probes", probes}, {"violation_count", violations.size()}, {"violations", list}};
}

namespace {

constexpr double kProbeBox = 3.0;
constexpr std::size_t kMaxWitnesses = 5;

WeightedSample random_measure(Substream& rng, double shift = 0.0) {
  const double mass = rng.uniform();
  std::vector<Atom> atoms(8);
  for (Atom& a : atoms) a = {kProbeBox * (2.0 * rng.uniform() - 1.0) + shift, mass / 8.0};
  return WeightedSample(std::move(atoms));
}

WeightedSample shifted(const WeightedSample& m, double delta) {
  std::vector<Atom> atoms(m.atoms().begin(), m.atoms().end());
  for (Atom& a : atoms) a.location += delta;
  return WeightedSample(std::move(atoms));
}

class Recorder {
 public:
  explicit Recorder(ValidationReport& r) : report_(r) {}
  void add(const std::string& check, const std::string& coeff, std::string witness, double value) {
    auto& n = seen_[check + coeff];
    ++n;
    if (n <= kMaxWitnesses) report_.violations.push_back({check, coeff, std::move(witness), value});
  }

 private:
  ValidationReport& report_;
  std::map<std::string, std::size_t> seen_;
};

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, int probes, std::uint64_t seed) {
  if (probes < 1) throw PreconditionError("validate_model: probes must be >= 1");
  ValidationReport report;
  report.probes = probes;
  Recorder rec(report);
  const double L = spec.lipschitz_bound;
  const ActionSet& A = spec.actions;

  for (int k = 0; k < probes; ++k) {
    Substream rng(seed, {static_cast<std::uint64_t>(k)});
    auto box = [&] { return kProbeBox * (2.0 * rng.uniform() - 1.0); };
    auto action = [&] { return A.lo + (A.hi - A.lo) * rng.uniform(); };
    auto step = [&] { return 0.5 * (2.0 * rng.uniform() - 1.0); };
    const double t = rng.uniform();
    const double u = rng.uniform();
    const Distribution law = spec.compensator.jump_law(u);
    const double x = box(), xp = box(), a = action();
    const double e = law.quantile(rng.uniform());
    const double dx = step(), dxp = step();
    const double a2 = action();
    const double e2 = law.quantile(rng.uniform());
    const double da = a2 - a, de = e2 - e;

    auto ratio = [](double dv, double dist) { return dist > 1e-12 ? std::abs(dv) / dist : 0.0; };
    auto where = [&](double xx, double yy, double aa) {
      return fmt::format("t={:.4g} x={:.4g} x'={:.4g} a={:.4g}", t, xx, yy, aa);
    };

    const double dpair = std::sqrt(dx * dx + dxp * dxp + da * da);
    const double rb = ratio(spec.drift(t, x + dx, xp + dxp, a2) - spec.drift(t, x, xp, a), dpair);
    if (rb > L) rec.add("lipschitz", "b", where(x, xp, a), rb);
    const double rs =
        ratio(spec.diffusion(t, x + dx, xp + dxp, a2) - spec.diffusion(t, x, xp, a), dpair);
    if (rs > L) rec.add("lipschitz", "sigma", where(x, xp, a), rs);

    const double djump = std::sqrt(dx * dx + de * de + da * da);
    const double rl = ratio(spec.jump(t, x + dx, e2, a2) - spec.jump(t, x, e, a), djump);
    if (rl > L) rec.add("lipschitz", "l", fmt::format("t={:.4g} x={:.4g} e={:.4g} a={:.4g}", t, x, e, a), rl);

    const WeightedSample mu = random_measure(rng);
    const double dm = step();
    const WeightedSample mu2 = shifted(mu, dm);
    const double dreward = std::sqrt(dx * dx + da * da + dm * dm);
    const double f1 = spec.running(t, x, mu, a);
    const double rf = ratio(spec.running(t, x + dx, mu2, a2) - f1, dreward);
    if (rf > L) rec.add("lipschitz", "f", where(x, mu.normalized_mean(), a), rf);
    const double g1 = spec.terminal(x, mu);
    const double rg = ratio(spec.terminal(x + dx, mu2) - g1, std::sqrt(dx * dx + dm * dm));
    if (rg > L) rec.add("lipschitz", "g", where(x, mu.normalized_mean(), a), rg);

    const double sig = spec.diffusion(t, x, xp, a);
    if (sig * sig < spec.sigma_floor * spec.sigma_floor * (1.0 - 1e-12))
      rec.add("sigma_floor", "sigma", where(x, xp, a), sig);

    if (spec.reward_bound) {
      if (std::abs(f1) > *spec.reward_bound) rec.add("bounded", "f", where(x, xp, a), f1);
      if (std::abs(g1) > *spec.reward_bound) rec.add("bounded", "g", where(x, xp, a), g1);
    }
    for (double v : {rb, rs, rl, rf, rg, f1, g1})
      if (!std::isfinite(v)) rec.add("finite", "coefficients", where(x, xp, a), v);
  }

  // Growth scan along x = 10^j: rewards that keep growing cannot be bounded.
  Substream rng(seed, {0xB0B0ULL});
  const WeightedSample mu = random_measure(rng);
  const double a = A.midpoint();
  auto grows = [](const std::vector<double>& v) {
    return v.back() > 10.0 * v[v.size() - 2] && v.back() > 1.0;
  };
  std::vector<double> fs, gs;
  for (int j = 1; j <= 4; ++j) {
    const double x = std::pow(10.0, j);
    fs.push_back(std::max(std::abs(spec.running(0.0, x, mu, a)), std::abs(spec.running(0.0, -x, mu, a))));
    gs.push_back(std::max(std::abs(spec.terminal(x, mu)), std::abs(spec.terminal(-x, mu))));
  }
  if (grows(fs) || (spec.reward_bound && fs.back() > *spec.reward_bound))
    rec.add("bounded", "f", "x=1e4", fs.back());
  if (grows(gs) || (spec.reward_bound && gs.back() > *spec.reward_bound))
    rec.add("bounded", "g", "x=1e4", gs.back());
  return report;
}

}  // namespace gml
