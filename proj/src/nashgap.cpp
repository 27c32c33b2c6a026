#include "gml/nashgap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>

#include "gml/errors.hpp"
#include "gml/jumpsim.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

namespace gml {

std::string to_string(LabelMode mode) {
  return mode == LabelMode::RightEndpoint ? "right_endpoint" : "interval_free";
}

LabelMode label_mode_from_string(std::string_view s) {
  if (s == "right_endpoint") return LabelMode::RightEndpoint;
  if (s == "interval_free") return LabelMode::IntervalFree;
  throw PreconditionError(fmt::format("unknown label mode '{}'", s));
}

std::vector<double> piece_boundaries(const Graphon& g) {
  if (!g.is_step()) return {};
  const auto& b = g.boundaries();
  return {b.begin() + 1, b.end() - 1};
}

std::vector<double> assign_labels(int n, LabelMode mode, std::uint64_t seed,
                                  std::span<const double> breakpoints) {
  if (n < 1) throw PreconditionError("assign_labels: n must be >= 1");
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) {
    const double hi = static_cast<double>(i + 1) / n;
    if (mode == LabelMode::RightEndpoint) {
      u[i] = hi;
      continue;
    }
    // Lower border of the right-closed piece (b, b'] holding i/n.
    double lo = static_cast<double>(i) / n;
    for (double b : breakpoints)
      if (b < hi) lo = std::max(lo, b);
    Substream rng(seed, {static_cast<std::uint64_t>(i)});
    u[i] = hi - (hi - lo) * rng.uniform();
  }
  return u;
}

std::vector<int> probe_players(int n) {
  if (n < 1) throw PreconditionError("probe_players: n must be >= 1");
  const int count = std::min(n, std::max(1, static_cast<int>(std::ceil(std::log2(n)))));
  std::vector<int> out(count);
  for (int q = 0; q < count; ++q) out[q] = static_cast<int>((q + 0.5) * n / count);
  return out;
}

std::string NashGapReport::to_csv() const {
  std::string out = "player,label,epsilon,mc_error,base,deviation\n";
  for (const NashProbe& p : probes)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.player, p.label, p.gap.value,
                       p.gap.std_error, p.base.value, p.deviation.value);
  return out;
}

std::string NashGapReport::to_text() const {
  std::string out = fmt::format("n = {}\ngraphon = {}\nsampling = {}\nmethod = {}\nprobes = {}\n", n,
                                graphon, to_string(sampling), method, probes.size());
  out += fmt::format("max gap = {:.6g} ± {:.2g}\navg gap = {:.6g} ± {:.2g}\n", max_gap.value,
                     max_gap.std_error, avg_gap.value, avg_gap.std_error);
  for (const NashProbe& p : probes)
    out += fmt::format("  player {:>5} (u = {:.4f}): {:.6g} ± {:.2g}\n", p.player, p.label, p.gap.value,
                       p.gap.std_error);
  return out;
}

nlohmann::json NashGapReport::to_json() const {
  nlohmann::json players = nlohmann::json::array();
  for (const NashProbe& p : probes)
    players.push_back({{"player", p.player}, {"label", p.label}, {"epsilon", p.gap.value},
                       {"mc_error", p.gap.std_error}});
  return {{"n", n},
          {"graphon", graphon},
          {"sampling", to_string(sampling)},
          {"method", method},
          {"max_gap", max_gap.value},
          {"max_gap_error", max_gap.std_error},
          {"avg_gap", avg_gap.value},
          {"avg_gap_error", avg_gap.std_error},
          {"labels", labels},
          {"probes", players}};
}

NashGapReport nash_gap(const ModelSpec& spec, const InteractionMatrix& zeta,
                       const std::vector<PolicySlice>& profile, const std::vector<int>& probes,
                       int replications, std::uint64_t seed, const BestResponseConfig& br) {
  if (profile.size() != static_cast<std::size_t>(zeta.n))
    throw PreconditionError("nash_gap: one policy per player required");
  if (probes.empty()) throw PreconditionError("nash_gap: no probe players");
  for (int i : probes)
    if (i < 0 || i >= zeta.n) throw PreconditionError("nash_gap: probe player out of range");

  NashGapReport rep;
  rep.n = zeta.n;
  rep.sampling = zeta.mode;
  for (const PolicySlice& s : profile) rep.labels.push_back(s.label);

  const PathEnsemble base = simulate_finite(spec, zeta, profile, br.time, replications, seed);
  rep.probes.resize(probes.size());
  parallel_for(probes.size(), [&](std::size_t q) {
    const int i = probes[q];
    const std::vector<double> pay_base = player_payoffs(spec, zeta, profile, i, base);
    const ValueGrid v = solve_best_response(spec, neighborhood_environment(base, zeta, i), profile[i].label, br);
    std::vector<PolicySlice> deviated = profile;
    deviated[i] = {std::make_shared<const PolicyField>(single_label_policy(v, spec.actions)), profile[i].label};
    const PathEnsemble dev = replay(base, deviated);
    const std::vector<double> pay_dev = player_payoffs(spec, zeta, deviated, i, dev);
    std::vector<double> diff(pay_base.size());
    for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = pay_dev[r] - pay_base[r];
    rep.probes[q] = {i, profile[i].label, mean_estimate(diff), mean_estimate(pay_base), mean_estimate(pay_dev)};
  });

  double sum = 0.0, var = 0.0;
  rep.max_gap.value = -std::numeric_limits<double>::infinity();
  for (const NashProbe& p : rep.probes) {
    sum += p.gap.value;
    var += p.gap.std_error * p.gap.std_error;
    if (p.gap.value > rep.max_gap.value) rep.max_gap = p.gap;
  }
  const double count = static_cast<double>(rep.probes.size());
  rep.avg_gap = {sum / count, std::sqrt(var) / count};
  return rep;
}

NashGapReport nash_gap(const ModelSpec& spec, const InteractionMatrix& zeta,
                       const EquilibriumResult& eq, const std::vector<double>& labels,
                       const std::vector<int>& probes, int replications, std::uint64_t seed) {
  if (!eq.converged) throw PreconditionError("nash_gap: equilibrium did not converge");
  if (labels.size() != static_cast<std::size_t>(zeta.n))
    throw PreconditionError("nash_gap: one label per player required");
  BestResponseConfig br;
  br.time = eq.policy.time();
  br.state = eq.policy.state();
  br.action_points = eq.config.value("action_points", 41);
  br.refine = eq.config.value("refine", false);
  const auto field = std::make_shared<const PolicyField>(eq.policy);
  return nash_gap(spec, zeta, stitch_policies(field, labels), probes, replications, seed, br);
}

const std::vector<std::string>& rate_metrics() {
  static const std::vector<std::string> names = {"chaos_avg", "chaos_max", "neighborhood_test", "nash_avg",
                                                 "nash_max"};
  return names;
}

std::vector<RateRow> RateTable::metric_rows(std::string_view metric) const {
  std::vector<RateRow> out;
  for (const RateRow& r : rows)
    if (r.metric == metric) out.push_back(r);
  return out;
}

const SlopeFit* RateTable::slope(std::string_view metric) const {
  for (const SlopeFit& s : slopes)
    if (s.metric == metric) return &s;
  return nullptr;
}

std::string RateTable::to_csv() const {
  std::string out = "n,metric,value,mc_error\n";
  for (const RateRow& r : rows)
    out += fmt::format("{},{},{:.17g},{:.17g}\n", r.n, r.metric, r.value, r.mc_error);
  return out;
}

std::string RateTable::slopes_csv() const {
  std::string out = "metric,slope,ci_lo,ci_hi,points\n";
  for (const SlopeFit& s : slopes)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", s.metric, s.slope, s.ci_lo, s.ci_hi, s.points);
  return out;
}

SlopeFit fit_slope(const std::vector<RateRow>& rows, std::string_view metric, int min_n, int resamples,
                   std::uint64_t seed) {
  SlopeFit fit;
  fit.metric = std::string(metric);
  std::vector<double> n, y, err;
  for (const RateRow& r : rows)
    if (r.metric == metric && r.failure.empty() && r.n >= min_n && r.value > 0.0 && std::isfinite(r.value)) {
      n.push_back(r.n);
      y.push_back(r.value);
      err.push_back(r.mc_error);
    }
  fit.points = static_cast<int>(n.size());
  if (n.size() < 2) {
    fit.slope = fit.ci_lo = fit.ci_hi = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  fit.slope = loglog_slope(n, y);
  std::vector<double> draws;
  std::vector<double> yb(y.size());
  for (int b = 0; b < resamples; ++b) {
    Substream rng(seed, {static_cast<std::uint64_t>(b)});
    for (std::size_t i = 0; i < y.size(); ++i) yb[i] = std::max(y[i] + err[i] * rng.normal(), 0.01 * y[i]);
    draws.push_back(loglog_slope(n, yb));
  }
  if (draws.empty()) {
    fit.ci_lo = fit.ci_hi = fit.slope;
    return fit;
  }
  std::sort(draws.begin(), draws.end());
  const auto pick = [&](double q) { return draws[static_cast<std::size_t>(q * (draws.size() - 1) + 0.5)]; };
  fit.ci_lo = pick(0.025);
  fit.ci_hi = pick(0.975);
  return fit;
}

namespace {

struct RowMetrics {
  Estimate chaos_avg, chaos_max, neighborhood;
};

RowMetrics coupled_metrics(const Graphon& g, const LawFamily& law, const InteractionMatrix& zeta,
                           const PathEnsemble& reference, const PathEnsemble& finite) {
  const int n = zeta.n, R = finite.particles, K = finite.grid.steps;
  // sup_t |X_i − X_{u_i}|² per (player, replication).
  std::vector<double> sup(static_cast<std::size_t>(n) * R);
  std::vector<double> neigh(static_cast<std::size_t>(n) * R);
  parallel_for(n, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    const double target = lambda_measure(g, reference.labels[i], law, K).integrate([](double x) { return std::tanh(x); });
    for (int r = 0; r < R; ++r) {
      const auto a = finite.path(i, r), b = reference.path(i, r);
      double worst = 0.0;
      for (int k = 0; k <= K; ++k) worst = std::max(worst, (a[k] - b[k]) * (a[k] - b[k]));
      sup[ii * R + r] = worst;
      double h = 0.0;
      for (int j = 0; j < n; ++j) h += zeta(i, j) * std::tanh(finite.state(j, r, K));
      const double d = h / n - target;
      neigh[ii * R + r] = d * d;
    }
  });
  RowMetrics out;
  std::vector<double> avg_chaos(R, 0.0), avg_neigh(R, 0.0);
  for (int r = 0; r < R; ++r)
    for (int i = 0; i < n; ++i) {
      avg_chaos[r] += sup[static_cast<std::size_t>(i) * R + r] / n;
      avg_neigh[r] += neigh[static_cast<std::size_t>(i) * R + r] / n;
    }
  out.chaos_avg = mean_estimate(avg_chaos);
  out.neighborhood = mean_estimate(avg_neigh);
  out.chaos_max.value = -1.0;
  for (int i = 0; i < n; ++i) {
    const Estimate e = mean_estimate(std::span<const double>(sup).subspan(static_cast<std::size_t>(i) * R, R));
    if (e.value > out.chaos_max.value) out.chaos_max = e;
  }
  return out;
}

}  // namespace

RateTable rate_experiment(const ModelSpec& spec, const Graphon& g, const EquilibriumResult& eq,
                          const RateConfig& cfg) {
  if (cfg.n_list.size() < 3) throw PreconditionError("rate_experiment: need at least 3 values of n");
  for (std::size_t i = 1; i < cfg.n_list.size(); ++i)
    if (cfg.n_list[i] <= cfg.n_list[i - 1]) throw PreconditionError("rate_experiment: n_list must be ascending");
  if (cfg.n_list.front() < 1) throw PreconditionError("rate_experiment: n must be >= 1");
  if (cfg.replications < 2) throw PreconditionError("rate_experiment: replications must be >= 2");
  std::vector<std::string> metrics = cfg.metrics;
  if (metrics.empty()) metrics = {"chaos_avg", "chaos_max", "neighborhood_test"};
  for (const std::string& m : metrics)
    if (std::find(rate_metrics().begin(), rate_metrics().end(), m) == rate_metrics().end())
      throw PreconditionError(fmt::format("rate_experiment: unknown metric '{}'", m));
  const auto wants = [&](std::string_view m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
  const bool nash = wants("nash_avg") || wants("nash_max");
  if (nash && !eq.converged) throw PreconditionError("rate_experiment: nash metrics need a converged equilibrium");

  RateTable table;
  const auto field = std::make_shared<const PolicyField>(eq.policy);
  const auto env = std::make_shared<const LawFamily>(eq.law);
  const std::vector<double> breaks = piece_boundaries(g);
  for (int n : cfg.n_list) {
    const auto id = static_cast<std::uint64_t>(n);
    std::vector<RateRow> rows;
    try {
      const InteractionMatrix zeta = sample_interaction(g, n, cfg.sampling, stream_key(cfg.seed, {id, 0}));
      const std::vector<double> labels = assign_labels(n, cfg.label_mode, stream_key(cfg.seed, {id, 1}), breaks);
      GraphonRun run;
      run.labels = labels;
      run.particles = cfg.replications;
      run.grid = eq.law.grid();
      run.seed = stream_key(cfg.seed, {id, 2});
      run.env = env;
      const PathEnsemble reference = simulate_graphon(spec, g, eq.policy, run);
      const auto profile = stitch_policies(field, labels);
      const PathEnsemble finite =
          simulate_finite(spec, zeta, profile, run.grid, cfg.replications, stream_key(cfg.seed, {id, 3}), &reference);
      const RowMetrics rm = coupled_metrics(g, eq.law, zeta, reference, finite);
      if (wants("chaos_avg")) rows.push_back({n, "chaos_avg", rm.chaos_avg.value, rm.chaos_avg.std_error, {}});
      if (wants("chaos_max")) rows.push_back({n, "chaos_max", rm.chaos_max.value, rm.chaos_max.std_error, {}});
      if (wants("neighborhood_test"))
        rows.push_back({n, "neighborhood_test", rm.neighborhood.value, rm.neighborhood.std_error, {}});
      if (nash) {
        const int R = cfg.nash_replications > 0 ? cfg.nash_replications : cfg.replications;
        NashGapReport rep = nash_gap(spec, zeta, eq, labels, probe_players(n), R, stream_key(cfg.seed, {id, 4}));
        rep.graphon = g.name();
        if (wants("nash_avg")) rows.push_back({n, "nash_avg", rep.avg_gap.value, rep.avg_gap.std_error, {}});
        if (wants("nash_max")) rows.push_back({n, "nash_max", rep.max_gap.value, rep.max_gap.std_error, {}});
        table.nash_reports.push_back(std::move(rep));
      }
    } catch (const std::exception& e) {
      rows.clear();
      for (const std::string& m : metrics)
        rows.push_back({n, m, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), e.what()});
    }
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  for (std::size_t q = 0; q < metrics.size(); ++q)
    table.slopes.push_back(fit_slope(table.rows, metrics[q], cfg.min_fit_n, cfg.bootstrap,
                                     stream_key(cfg.seed, {0x5107, static_cast<std::uint64_t>(q)})));
  return table;
}

}  // namespace gml
