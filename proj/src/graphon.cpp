#include "gml/graphon.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gml/errors.hpp"
#include "gml/random.hpp"

namespace gml {

namespace {

void check_label(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError(fmt::format("graphon label {} outside [0,1]", u));
}

}  // namespace

Graphon Graphon::constant(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Constant graphon: p must lie in [0,1]");
  Graphon g;
  g.kind_ = GraphonKind::Constant;
  g.params_ = {p};
  return g;
}

Graphon Graphon::min_kernel() {
  Graphon g;
  g.kind_ = GraphonKind::Min;
  return g;
}

Graphon Graphon::exp_kernel(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("Exp graphon: c must be >= 0");
  Graphon g;
  g.kind_ = GraphonKind::Exp;
  g.params_ = {c};
  return g;
}

Graphon Graphon::ranked() {
  Graphon g;
  g.kind_ = GraphonKind::Ranked;
  return g;
}

Graphon Graphon::step(std::vector<double> boundaries, std::vector<std::vector<double>> values) {
  const std::size_t k = boundaries.size() >= 1 ? boundaries.size() - 1 : 0;
  if (k == 0) throw PreconditionError("Step graphon: need at least two boundaries");
  if (boundaries.front() != 0.0 || boundaries.back() != 1.0)
    throw PreconditionError("Step graphon: boundaries must start at 0 and end at 1");
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (!(boundaries[i] > boundaries[i - 1]))
      throw PreconditionError("Step graphon: boundaries must be strictly increasing");
  if (values.size() != k) throw PreconditionError("Step graphon: values must be k x k");
  Graphon g;
  g.kind_ = GraphonKind::Step;
  g.boundaries_ = std::move(boundaries);
  g.values_.resize(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    if (values[i].size() != k) throw PreconditionError("Step graphon: values must be k x k");
    for (std::size_t j = 0; j < k; ++j) {
      const double w = values[i][j];
      if (!(w >= 0.0 && w <= 1.0)) throw DomainError("Step graphon: values must lie in [0,1]");
      g.values_[i * k + j] = w;
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (g.values_[i * k + j] != g.values_[j * k + i])
        throw PreconditionError("Step graphon: values must be symmetric");
  return g;
}

Graphon Graphon::analytic(std::string_view name, std::vector<double> params) {
  auto need = [&](std::size_t count) {
    if (params.size() != count)
      throw PreconditionError(fmt::format("graphon '{}' takes {} parameter(s)", name, count));
  };
  if (name == "constant") {
    need(1);
    return constant(params[0]);
  }
  if (name == "min") {
    need(0);
    return min_kernel();
  }
  if (name == "exp") {
    need(1);
    return exp_kernel(params[0]);
  }
  if (name == "ranked") {
    need(0);
    return ranked();
  }
  throw PreconditionError(fmt::format("unknown graphon '{}'", name));
}

int Graphon::block_of(double u) const {
  if (!is_step()) throw PreconditionError("block_of: not a step graphon");
  // First boundary b_i (i >= 1) with u <= b_i; block index i - 1.
  auto it = std::lower_bound(boundaries_.begin() + 1, boundaries_.end(), u);
  if (it == boundaries_.end()) --it;
  return static_cast<int>(it - boundaries_.begin()) - 1;
}

double Graphon::raw(double u, double v) const {
  switch (kind_) {
    case GraphonKind::Constant:
      return params_[0];
    case GraphonKind::Min:
      return std::min(u, v);
    case GraphonKind::Exp:
      return std::exp(-params_[0] * std::abs(u - v));
    case GraphonKind::Ranked:
      return 1.0 - std::max(u, v);
    case GraphonKind::Step:
      return values_[block_of(u) * blocks() + block_of(v)];
  }
  return 0.0;
}

double Graphon::operator()(double u, double v) const {
  check_label(u);
  check_label(v);
  return raw(u, v);
}

double eval(const Graphon& g, double u, double v) { return g(u, v); }

std::string Graphon::name() const {
  switch (kind_) {
    case GraphonKind::Constant:
      return "constant";
    case GraphonKind::Min:
      return "min";
    case GraphonKind::Exp:
      return "exp";
    case GraphonKind::Ranked:
      return "ranked";
    case GraphonKind::Step:
      return "step";
  }
  return "";
}

nlohmann::json Graphon::to_json() const {
  nlohmann::json doc;
  if (is_step()) {
    doc["kind"] = "step";
    doc["boundaries"] = boundaries_;
    const int k = blocks();
    std::vector<std::vector<double>> rows(k, std::vector<double>(k));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) rows[i][j] = block_value(i, j);
    doc["values"] = rows;
  } else {
    doc["kind"] = "analytic";
    doc["name"] = name();
    doc["params"] = params_;
  }
  return doc;
}

Graphon Graphon::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("graphon", "expected an object");
  const std::string kind = doc.value("kind", std::string{});
  try {
    if (kind == "step") {
      if (!doc.contains("boundaries")) throw ConfigError("graphon.boundaries", "missing");
      if (!doc.contains("values")) throw ConfigError("graphon.values", "missing");
      return step(doc.at("boundaries").get<std::vector<double>>(),
                  doc.at("values").get<std::vector<std::vector<double>>>());
    }
    if (kind == "analytic") {
      if (!doc.contains("name")) throw ConfigError("graphon.name", "missing");
      return analytic(doc.at("name").get<std::string>(),
                      doc.value("params", std::vector<double>{}));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("graphon", e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("graphon", e.what());
  }
  throw ConfigError("graphon.kind", "expected 'step' or 'analytic'");
}

WeightedSample lambda_measure(const Graphon& g, double u, const LawFamily& law, int k) {
  if (law.empty()) throw PreconditionError("lambda_measure: empty law family");
  if (k < 0 || k > law.grid().steps) throw PreconditionError("lambda_measure: time index out of range");
  const int m = law.label_count();
  const int p = law.particles();
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(m) * p);
  for (int j = 0; j < m; ++j) {
    const double w = g(u, law.labels()[j]) / (static_cast<double>(m) * p);
    if (w == 0.0) continue;
    for (double x : law.marginal(j, k)) atoms.push_back({x, w});
  }
  return WeightedSample(std::move(atoms));
}

// ---------------------------------------------------------------------------
// Norms

namespace {

constexpr int kExactLimit = 20;
constexpr int kRestarts = 20;

struct Kernel {
  int k;
  std::vector<double> a;  // a_ij = w_i w_j D_ij
};

Kernel weighted(std::span<const double> d, std::span<const double> widths) {
  const std::size_t k = widths.size();
  if (k == 0) throw PreconditionError("norm: zero blocks");
  if (d.size() != k * k) throw PreconditionError("norm: kernel must be k x k");
  Kernel out{static_cast<int>(k), std::vector<double>(k * k)};
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out.a[i * k + j] = widths[i] * widths[j] * d[i * k + j];
  return out;
}

// Enumerates row vectors s over {0,1}^k (cut) or {-1,+1}^k (signed) in Gray
// order, maintaining c_j = Σ_i s_i a_ij, and scores each by `score(c)`.
template <class Score>
double gray_enumerate(const Kernel& ker, bool signed_rows, Score score) {
  const int k = ker.k;
  std::vector<double> c(k, 0.0);
  std::vector<int> s(k, signed_rows ? 1 : 0);
  if (signed_rows)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) c[j] += ker.a[i * k + j];
  double best = score(c);
  const std::uint64_t total = std::uint64_t{1} << k;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int i = std::countr_zero(step);
    const double delta = signed_rows ? -2.0 * s[i] : (s[i] ? -1.0 : 1.0);
    s[i] = signed_rows ? -s[i] : 1 - s[i];
    for (int j = 0; j < k; ++j) c[j] += delta * ker.a[i * k + j];
    best = std::max(best, score(c));
  }
  return best;
}

double cut_score(const std::vector<double>& c) {
  double pos = 0.0, neg = 0.0;
  for (double x : c) (x > 0.0 ? pos : neg) += x;
  return std::max(pos, -neg);
}

double signed_score(const std::vector<double>& c) {
  double s = 0.0;
  for (double x : c) s += std::abs(x);
  return s;
}

// Steepest single-flip ascent of Σ_{i,j} r_i a_ij q_j over r, q in the given
// alphabet, from random starts; returns the best local optimum found.
double local_search(const Kernel& ker, bool signed_vars, double sign) {
  const int k = ker.k;
  Substream rng(0x5EEDC0DEULL, {static_cast<std::uint64_t>(k), signed_vars ? 1ULL : 0ULL,
                                sign > 0 ? 1ULL : 0ULL});
  double best = 0.0;
  std::vector<double> r(k), q(k), rowq(k), colr(k);
  for (int rep = 0; rep < kRestarts; ++rep) {
    for (int i = 0; i < k; ++i) {
      const bool bit = rng.uniform() < 0.5;
      r[i] = signed_vars ? (bit ? 1.0 : -1.0) : (bit ? 1.0 : 0.0);
    }
    for (int j = 0; j < k; ++j) {
      const bool bit = rng.uniform() < 0.5;
      q[j] = signed_vars ? (bit ? 1.0 : -1.0) : (bit ? 1.0 : 0.0);
    }
    for (int i = 0; i < k; ++i) {
      rowq[i] = 0.0;
      for (int j = 0; j < k; ++j) rowq[i] += sign * ker.a[i * k + j] * q[j];
    }
    for (int j = 0; j < k; ++j) {
      colr[j] = 0.0;
      for (int i = 0; i < k; ++i) colr[j] += sign * ker.a[i * k + j] * r[i];
    }
    double value = 0.0;
    for (int i = 0; i < k; ++i) value += r[i] * rowq[i];
    for (;;) {
      double gain = 1e-15;
      int which = -1;
      for (int i = 0; i < 2 * k; ++i) {
        const double cur = i < k ? r[i] : q[i - k];
        const double next = signed_vars ? -cur : 1.0 - cur;
        const double g = (next - cur) * (i < k ? rowq[i] : colr[i - k]);
        if (g > gain) {
          gain = g;
          which = i;
        }
      }
      if (which < 0) break;
      value += gain;
      if (which < k) {
        const double delta = (signed_vars ? -2.0 * r[which] : 1.0 - 2.0 * r[which]);
        r[which] += delta;
        for (int j = 0; j < k; ++j) colr[j] += sign * ker.a[which * k + j] * delta;
      } else {
        const int j = which - k;
        const double delta = (signed_vars ? -2.0 * q[j] : 1.0 - 2.0 * q[j]);
        q[j] += delta;
        for (int i = 0; i < k; ++i) rowq[i] += sign * ker.a[i * k + j] * delta;
      }
    }
    best = std::max(best, value);
  }
  return best;
}

std::vector<double> uniform_widths(int k) { return std::vector<double>(k, 1.0 / k); }

std::vector<double> projected_difference(const Graphon& g1, const Graphon& g2, int resolution) {
  if (resolution < 1) throw PreconditionError("norm: resolution must be >= 1");
  const Graphon p1 = step_projection(g1, resolution);
  const Graphon p2 = step_projection(g2, resolution);
  std::vector<double> d(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j)
      d[i * resolution + j] = p1.block_value(i, j) - p2.block_value(i, j);
  return d;
}

}  // namespace

NormResult cut_norm(std::span<const double> d, std::span<const double> widths) {
  const Kernel ker = weighted(d, widths);
  if (ker.k <= kExactLimit) return {gray_enumerate(ker, false, cut_score), false};
  return {std::max(local_search(ker, false, 1.0), local_search(ker, false, -1.0)), true};
}

NormResult inf_to_one_norm(std::span<const double> d, std::span<const double> widths) {
  const Kernel ker = weighted(d, widths);
  if (ker.k <= kExactLimit) return {gray_enumerate(ker, true, signed_score), false};
  return {local_search(ker, true, 1.0), true};
}

double inf_to_inf_norm(std::span<const double> d, std::span<const double> widths) {
  const std::size_t k = widths.size();
  if (k == 0) throw PreconditionError("norm: zero blocks");
  if (d.size() != k * k) throw PreconditionError("norm: kernel must be k x k");
  double best = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += widths[j] * std::abs(d[i * k + j]);
    best = std::max(best, row);
  }
  return best;
}

NormResult cut_norm_diff(const Graphon& g1, const Graphon& g2, int resolution) {
  const auto d = projected_difference(g1, g2, resolution);
  return cut_norm(d, uniform_widths(resolution));
}

NormResult inf_one_norm_diff(const Graphon& g1, const Graphon& g2, int resolution) {
  const auto d = projected_difference(g1, g2, resolution);
  return inf_to_one_norm(d, uniform_widths(resolution));
}

double inf_inf_norm_diff(const Graphon& g1, const Graphon& g2, int resolution) {
  const auto d = projected_difference(g1, g2, resolution);
  return inf_to_inf_norm(d, uniform_widths(resolution));
}

Graphon step_projection(const Graphon& g, int m) {
  if (m < 1) throw PreconditionError("step_projection: m must be >= 1");
  std::vector<double> b(m + 1);
  for (int i = 0; i <= m; ++i) b[i] = static_cast<double>(i) / m;
  b[m] = 1.0;
  std::vector<std::vector<double>> v(m, std::vector<double>(m));
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) v[i][j] = v[j][i] = g((i + 0.5) / m, (j + 0.5) / m);
  return Graphon::step(std::move(b), std::move(v));
}

// ---------------------------------------------------------------------------
// Interaction matrices

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::ExactWeights:
      return "exact_weights";
    case SamplingMode::Bernoulli:
      return "bernoulli";
    case SamplingMode::SampledWeights:
      return "sampled_weights";
    case SamplingMode::SampledBernoulli:
      return "sampled_bernoulli";
  }
  return "";
}

SamplingMode sampling_mode_from_string(std::string_view s) {
  if (s == "exact_weights") return SamplingMode::ExactWeights;
  if (s == "bernoulli") return SamplingMode::Bernoulli;
  if (s == "sampled_weights") return SamplingMode::SampledWeights;
  if (s == "sampled_bernoulli") return SamplingMode::SampledBernoulli;
  throw PreconditionError(fmt::format("unknown sampling mode '{}'", s));
}

InteractionMatrix InteractionMatrix::zeros(int n) {
  return from_weights(n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
}

InteractionMatrix InteractionMatrix::from_weights(int n, std::vector<double> weights) {
  if (n < 1) throw PreconditionError("InteractionMatrix: n must be >= 1");
  if (weights.size() != static_cast<std::size_t>(n) * n)
    throw PreconditionError("InteractionMatrix: weights must be n x n");
  InteractionMatrix z;
  z.n = n;
  z.weights = std::move(weights);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!(z(i, j) >= 0.0)) throw PreconditionError("InteractionMatrix: negative weight");
      if (z(i, j) != z(j, i)) throw PreconditionError("InteractionMatrix: weights must be symmetric");
    }
  }
  z.label_assignment.resize(n);
  for (int i = 0; i < n; ++i) z.label_assignment[i] = static_cast<double>(i + 1) / n;
  return z;
}

std::string InteractionMatrix::to_csv() const {
  std::string out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out += ',';
      out += fmt::format("{}", (*this)(i, j));
    }
    out += '\n';
  }
  return out;
}

nlohmann::json InteractionMatrix::metadata() const {
  return {{"n", n}, {"mode", to_string(mode)}, {"seed", seed}, {"label_assignment", label_assignment}};
}

InteractionMatrix sample_interaction(const Graphon& g, int n, SamplingMode mode,
                                     std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_interaction: n must be >= 1");
  InteractionMatrix z;
  z.n = n;
  z.mode = mode;
  z.seed = seed;
  z.label_assignment.resize(n);
  const bool sampled_labels =
      mode == SamplingMode::SampledWeights || mode == SamplingMode::SampledBernoulli;
  if (sampled_labels) {
    Substream rng(seed, {0});
    for (double& u : z.label_assignment) u = rng.uniform();
    std::sort(z.label_assignment.begin(), z.label_assignment.end());
  } else {
    for (int i = 0; i < n; ++i) z.label_assignment[i] = static_cast<double>(i + 1) / n;
  }
  const bool bernoulli = mode == SamplingMode::Bernoulli || mode == SamplingMode::SampledBernoulli;
  z.weights.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    Substream rng(seed, {1, static_cast<std::uint64_t>(i)});
    for (int j = i; j < n; ++j) {
      const double w = g(z.label_assignment[i], z.label_assignment[j]);
      const double value = bernoulli ? (rng.uniform() < w ? 1.0 : 0.0) : w;
      z.weights[static_cast<std::size_t>(i) * n + j] = value;
      z.weights[static_cast<std::size_t>(j) * n + i] = value;
    }
  }
  return z;
}

}  // namespace gml
