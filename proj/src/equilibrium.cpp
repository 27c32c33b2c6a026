#include "gml/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>

#include "gml/bestresponse.hpp"
#include "gml/empirics.hpp"
#include "gml/errors.hpp"
#include "gml/jumpsim.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

namespace gml {

namespace {

PathEnsemble frozen_run(const ModelSpec& spec, const Graphon& g, const PolicyField& policy,
                        const PicardConfig& cfg, std::shared_ptr<const LawFamily> env,
                        std::uint64_t seed) {
  GraphonRun run;
  run.labels = label_grid(cfg.labels);
  run.particles = cfg.particles;
  run.grid = cfg.time;
  run.seed = seed;
  run.env = std::move(env);
  return simulate_graphon(spec, g, policy, run);
}

void check_config(const ModelSpec& spec, const PicardConfig& cfg) {
  if (cfg.labels < 1) throw PreconditionError("picard_solve: labels must be >= 1");
  if (cfg.particles < 2) throw PreconditionError("picard_solve: particles must be >= 2");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw PreconditionError("picard_solve: damping must lie in (0, 1]");
  if (!(cfg.tol > 0.0)) throw PreconditionError("picard_solve: tol must be > 0");
  if (cfg.max_iter < 1) throw PreconditionError("picard_solve: max_iter must be >= 1");
  if (cfg.action_points < 1) throw PreconditionError("picard_solve: action_points must be >= 1");
  if (cfg.initial_action && (*cfg.initial_action < spec.actions.lo || *cfg.initial_action > spec.actions.hi))
    throw PreconditionError("picard_solve: initial action outside A");
}

}  // namespace

nlohmann::json PicardConfig::to_json() const {
  nlohmann::json doc = {{"labels", labels},           {"particles", particles},
                        {"horizon", time.horizon},    {"steps", time.steps},
                        {"state_points", state_points}, {"action_points", action_points},
                        {"refine", refine},           {"damping", damping},
                        {"tol", tol},                 {"max_iter", max_iter},
                        {"seed", seed}};
  if (state) doc["state_box"] = {state->lo, state->hi, state->points};
  if (initial_action) doc["initial_action"] = *initial_action;
  return doc;
}

std::string EquilibriumResult::residual_csv() const {
  std::string out = "iteration,avg,sup,objective,objective_error\n";
  for (const ResidualRecord& r : residual_history)
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.iteration, r.avg, r.sup,
                       r.objective, r.objective_error);
  return out;
}

LawFamily damped_update(const LawFamily& old, const LawFamily& fresh, double damping) {
  if (!old.same_grids(fresh)) throw PreconditionError("damped_update: grid mismatch");
  if (!(damping > 0.0 && damping <= 1.0)) throw PreconditionError("damped_update: damping must lie in (0, 1]");
  const int m = old.label_count(), T = old.grid().points(), p = old.particles();
  const int take_new = static_cast<int>(std::lround(damping * p));
  const int take_old = p - take_new;
  std::vector<double> samples(static_cast<std::size_t>(m) * T * p);
  auto stratified = [](std::span<const double> sorted, int count, double* out) {
    const double n = static_cast<double>(sorted.size());
    for (int i = 0; i < count; ++i)
      out[i] = sorted[static_cast<std::size_t>((i + 0.5) * n / count)];
  };
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < T; ++k) {
      double* dst = samples.data() + (static_cast<std::size_t>(j) * T + k) * p;
      stratified(old.marginal(j, k), take_old, dst);
      stratified(fresh.marginal(j, k), take_new, dst + take_old);
    }
  LawFamily out(old.labels(), old.grid(), p, std::move(samples));
  out.seed = fresh.seed;
  out.ensemble_id = fresh.ensemble_id;
  return out;
}

EquilibriumResult picard_solve(const ModelSpec& spec, const Graphon& g, const PicardConfig& cfg) {
  check_config(spec, cfg);
  const std::vector<double> labels = label_grid(cfg.labels);
  const double a0 = cfg.initial_action.value_or(spec.actions.midpoint());

  EquilibriumResult res;
  res.config = cfg.to_json();

  // Initial guess: every player frozen at a0, interacting through its own law.
  const PolicyField start = PolicyField::constant(cfg.time, labels, StateGrid(-1.0, 1.0, 3), spec.actions, a0);
  GraphonRun pilot;
  pilot.labels = labels;
  pilot.particles = cfg.particles;
  pilot.grid = cfg.time;
  pilot.seed = stream_key(cfg.seed, {0});
  auto mu = std::make_shared<const LawFamily>(LawFamily::from_ensemble(simulate_graphon(spec, g, start, pilot)));

  const StateGrid box = cfg.state ? *cfg.state : pilot_state_box(*mu, cfg.state_points);
  res.config["state_box"] = {box.lo, box.hi, box.points};
  BestResponseConfig br;
  br.time = cfg.time;
  br.state = box;
  br.action_points = cfg.action_points;
  br.refine = cfg.refine;

  PolicyField policy(cfg.time, labels, box, spec.actions);
  LawFamily candidate;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    try {
      std::vector<ValueGrid> solved(labels.size());
      parallel_for(labels.size(), [&](std::size_t j) {
        solved[j] = solve_best_response(spec, g, *mu, labels[j], br);
      });
      for (std::size_t j = 0; j < labels.size(); ++j) write_policy(policy, static_cast<int>(j), solved[j]);

      const PathEnsemble e = frozen_run(spec, g, policy, cfg, mu, stream_key(cfg.seed, {static_cast<std::uint64_t>(it)}));
      candidate = LawFamily::from_ensemble(e);
      const ObjectiveReport obj = evaluate_objective(spec, g, policy, *mu, e);

      ResidualRecord rec;
      rec.iteration = it;
      rec.avg = law_family_distance(*mu, candidate, LabelAggregate::Avg);
      rec.sup = law_family_distance(*mu, candidate, LabelAggregate::Sup);
      rec.objective = obj.overall.value;
      rec.objective_error = obj.overall.std_error;
      res.residual_history.push_back(rec);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("picard iteration {}: {}", it, e.what()));
    }

    const bool done = res.residual_history.back().avg < cfg.tol;
    if (done || it == cfg.max_iter) {
      res.noise_floor = bootstrap_law_distance_error(*mu, candidate, LabelAggregate::Avg, 16,
                                                     stream_key(cfg.seed, {0xB007, static_cast<std::uint64_t>(it)}));
      res.converged = done;
    }
    mu = std::make_shared<const LawFamily>(damped_update(*mu, candidate, cfg.damping));
    if (done) break;
  }
  res.law = *mu;
  res.policy = std::move(policy);
  return res;
}

MonotonicityTerms monotonicity_terms(const ModelSpec& spec, const Graphon& g,
                                     const LawFamily& mu1, const PolicyField& alpha1,
                                     const LawFamily& mu2, const PolicyField& alpha2) {
  if (mu1.labels() != mu2.labels() || !(mu1.grid() == mu2.grid()) || mu1.empty() || mu2.empty())
    throw PreconditionError("monotonicity_terms: law families must share grids");
  const int m = mu1.label_count(), K = mu1.grid().steps;
  MonotonicityTerms out;
  out.f_terms.assign(K, 0.0);
  std::vector<double> g_parts(m, 0.0);
  std::vector<double> f_parts(static_cast<std::size_t>(m) * K, 0.0);
  // Difference of the integrand under both environments, integrated against
  // one law family's marginal.
  auto average = [](std::span<const double> xs, auto&& h) {
    double s = 0.0;
    for (double x : xs) s += h(x);
    return s / static_cast<double>(xs.size());
  };
  parallel_for(m, [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    const double u = mu1.labels()[j];
    for (int k = 0; k <= K; ++k) {
      const WeightedSample l1 = lambda_measure(g, u, mu1, k), l2 = lambda_measure(g, u, mu2, k);
      if (k == K) {
        auto dg = [&](double x) { return spec.terminal(x, l1) - spec.terminal(x, l2); };
        g_parts[j] = average(mu1.marginal(j, k), dg) - average(mu2.marginal(j, k), dg);
      } else {
        const double t = mu1.grid().t(k);
        auto df = [&](const PolicyField& pol) {
          return [&, t](double x) {
            const double a = pol(t, u, x);
            return spec.running(t, x, l1, a) - spec.running(t, x, l2, a);
          };
        };
        f_parts[jj * K + k] = average(mu1.marginal(j, k), df(alpha1)) - average(mu2.marginal(j, k), df(alpha2));
      }
    }
  });
  for (int j = 0; j < m; ++j) {
    out.g_term += g_parts[j] / m;
    for (int k = 0; k < K; ++k) out.f_terms[k] += f_parts[static_cast<std::size_t>(j) * K + k] / m;
  }
  return out;
}

nlohmann::json MonotonicityReport::to_json() const {
  return {{"pairs", pairs},       {"g_nonnegative", g_nonnegative}, {"f_nonnegative", f_nonnegative},
          {"f_cells", f_cells},   {"worst_g", worst_g},             {"worst_f", worst_f},
          {"g_terms", g_terms},   {"ok", ok()}};
}

MonotonicityReport check_monotonicity(const ModelSpec& spec, const Graphon& g, int pairs, int m,
                                      int p, const TimeGrid& grid, std::uint64_t seed) {
  if (pairs < 1) throw PreconditionError("check_monotonicity: pairs must be >= 1");
  const std::vector<double> labels = label_grid(m);
  MonotonicityReport rep;
  rep.pairs = pairs;
  rep.worst_g = -std::numeric_limits<double>::infinity();
  rep.worst_f = -std::numeric_limits<double>::infinity();
  auto snapshot = [&](int pair, int side) {
    Substream rng(seed, {static_cast<std::uint64_t>(pair), static_cast<std::uint64_t>(side), 0});
    auto pol = std::make_shared<PolicyField>(grid, labels, StateGrid(-1.0, 1.0, 3), spec.actions);
    for (int j = 0; j < m; ++j) {
      const double a = spec.actions.lo + (spec.actions.hi - spec.actions.lo) * rng.uniform();
      for (int k = 0; k < grid.points(); ++k)
        for (int q = 0; q < 3; ++q) pol->at(k, j, q) = a;
    }
    GraphonRun run;
    run.labels = labels;
    run.particles = p;
    run.grid = grid;
    run.seed = stream_key(seed, {static_cast<std::uint64_t>(pair), static_cast<std::uint64_t>(side), 1});
    return std::make_pair(LawFamily::from_ensemble(simulate_graphon(spec, g, *pol, run)), pol);
  };
  for (int r = 0; r < pairs; ++r) {
    const auto [mu1, a1] = snapshot(r, 0);
    const auto [mu2, a2] = snapshot(r, 1);
    const MonotonicityTerms t = monotonicity_terms(spec, g, mu1, *a1, mu2, *a2);
    rep.g_terms.push_back(t.g_term);
    rep.worst_g = std::max(rep.worst_g, t.g_term);
    if (t.g_term >= 0.0) ++rep.g_nonnegative;
    for (double f : t.f_terms) {
      ++rep.f_cells;
      rep.worst_f = std::max(rep.worst_f, f);
      if (f >= 0.0) ++rep.f_nonnegative;
    }
  }
  return rep;
}

bool UniquenessReport::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

UniquenessReport uniqueness_probe(const ModelSpec& spec, const Graphon& g, int starts,
                                  const PicardConfig& cfg) {
  if (starts < 2) throw PreconditionError("uniqueness_probe: starts must be >= 2");
  const double lo = spec.actions.lo, hi = spec.actions.hi;
  UniquenessReport rep;
  for (int s = 0; s < starts; ++s) {
    PicardConfig c = cfg;
    c.seed = stream_key(cfg.seed, {static_cast<std::uint64_t>(s)});
    if (s == 0)
      c.initial_action = spec.actions.midpoint();
    else if (s == 1)
      c.initial_action = lo;
    else if (s == 2)
      c.initial_action = hi;
    else
      c.initial_action = lo + (hi - lo) * (s - 2) / static_cast<double>(starts - 2);
    rep.results.push_back(picard_solve(spec, g, c));
    rep.converged.push_back(rep.results.back().converged);
  }
  for (int a = 0; a < starts; ++a)
    for (int b = a + 1; b < starts; ++b) {
      const LawFamily& x = rep.results[a].law;
      const LawFamily& y = rep.results[b].law;
      rep.spread = std::max(rep.spread, law_family_distance(x, y, LabelAggregate::Avg));
      rep.noise = std::max(rep.noise, bootstrap_law_distance_error(
                                          x, y, LabelAggregate::Avg, 16,
                                          stream_key(cfg.seed, {0xB007, static_cast<std::uint64_t>(a),
                                                                static_cast<std::uint64_t>(b)})));
    }
  return rep;
}

}  // namespace gml
