#include "gml/jumpsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gml/errors.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

namespace gml {

std::string to_string(Coupling c) {
  switch (c) {
    case Coupling::Independent:
      return "independent";
    case Coupling::Canonical:
      return "canonical";
    case Coupling::CommonNoise:
      return "common_noise";
  }
  return "";
}

std::vector<double> PathEnsemble::column(int unit, int k) const {
  std::vector<double> out(particles);
  for (int i = 0; i < particles; ++i) out[i] = state(unit, i, k);
  return out;
}

LawFamily LawFamily::from_ensemble(const PathEnsemble& e) {
  const int units = e.units(), p = e.particles, T = e.grid.points();
  std::vector<double> samples(static_cast<std::size_t>(units) * T * p);
  for (int j = 0; j < units; ++j)
    for (int i = 0; i < p; ++i) {
      auto path = e.path(j, i);
      for (int k = 0; k < T; ++k)
        samples[(static_cast<std::size_t>(j) * T + k) * p + i] = path[k];
    }
  LawFamily law(e.labels, e.grid, p, std::move(samples));
  law.seed = e.seed;
  law.ensemble_id = e.noise_key;
  return law;
}

namespace {

constexpr int kMaxJumpsPerStep = 64;

enum StreamTag : std::uint64_t { kLabelPath = 1, kCanonicalPath = 2, kPlayerPath = 3 };

PathDrivers make_drivers(Substream& rng, double intensity, const TimeGrid& grid) {
  PathDrivers d;
  d.init = rng.uniform();
  d.intensity = intensity;
  d.dW.resize(grid.steps);
  const double sdt = std::sqrt(grid.dt());
  for (int k = 0; k < grid.steps; ++k) {
    d.dW[k] = sdt * rng.normal();
    const int count = rng.poisson(intensity * grid.dt());
    if (count > kMaxJumpsPerStep)
      throw NumericalError(fmt::format(
          "more than {} jumps in one time step (intensity·dt = {}); refine the time grid",
          kMaxJumpsPerStep, intensity * grid.dt()));
    for (int c = 0; c < count; ++c) {
      const double mark = rng.uniform();
      const double thin = rng.uniform();
      d.jumps.push_back({k, mark, thin});
    }
  }
  return d;
}

struct Setup {
  const ModelSpec* spec = nullptr;
  TimeGrid grid;
  std::vector<double> labels;
  int particles = 0;
  const Graphon* graphon = nullptr;
  const LawFamily* env = nullptr;  // graphon mode; nullptr = Self
  const PolicyField* policy = nullptr;
  const InteractionMatrix* zeta = nullptr;  // finite mode
  const std::vector<PolicySlice>* players = nullptr;
};

void check_drivers(const Setup& s, const std::vector<PathDrivers>& drivers) {
  const std::size_t paths = s.labels.size() * static_cast<std::size_t>(s.particles);
  if (drivers.size() != paths) throw PreconditionError("driver records do not match the run size");
  for (std::size_t p = 0; p < paths; ++p) {
    const PathDrivers& d = drivers[p];
    if (d.dW.size() != static_cast<std::size_t>(s.grid.steps))
      throw PreconditionError("driver records do not match the time grid");
    const double lam = s.spec->compensator.intensity(s.labels[p / s.particles]);
    if (d.intensity < lam * (1.0 - 1e-12))
      throw PreconditionError("driver jump clock is slower than the label's jump intensity");
  }
}

std::vector<double> integrate(const Setup& s, const std::vector<PathDrivers>& drivers) {
  check_drivers(s, drivers);
  const ModelSpec& spec = *s.spec;
  const int units = static_cast<int>(s.labels.size());
  const int P = s.particles;
  const int T = s.grid.points();
  const double dt = s.grid.dt();
  const std::size_t paths = static_cast<std::size_t>(units) * P;
  const bool finite = s.zeta != nullptr;
  const bool fast = spec.features.has_value();
  const int F = fast ? spec.features->count : 0;

  std::vector<double> lambda(units);
  std::vector<Distribution> jump_law(units), init_law(units);
  for (int j = 0; j < units; ++j) {
    lambda[j] = spec.compensator.intensity(s.labels[j]);
    jump_law[j] = spec.compensator.jump_law(s.labels[j]);
    init_law[j] = spec.initial.at(s.labels[j]);
  }

  // Graphon weights G(u_j, v_l)/m_env for the environment labels.
  std::vector<double> env_labels;
  std::vector<double> weight;
  if (!finite) {
    env_labels = s.env ? s.env->labels() : s.labels;
    const int me = static_cast<int>(env_labels.size());
    weight.resize(static_cast<std::size_t>(units) * me);
    for (int j = 0; j < units; ++j)
      for (int l = 0; l < me; ++l) weight[j * me + l] = (*s.graphon)(s.labels[j], env_labels[l]) / me;
  }

  std::vector<double> states(paths * T);
  std::vector<double> x(paths);
  std::vector<std::size_t> cursor(paths, 0);
  for (int j = 0; j < units; ++j)
    for (int i = 0; i < P; ++i) {
      const std::size_t p = static_cast<std::size_t>(j) * P + i;
      x[p] = init_law[j].quantile(drivers[p].init);
      states[p * T] = x[p];
    }

  std::vector<double> sums;      // graphon: [unit][F]; finite: [unit][particle][F]
  std::vector<double> phi;       // per-source features
  std::vector<WeightedSample> measures;  // generic graphon path
  std::vector<double> scratch(static_cast<std::size_t>(std::max(F, 1)));

  for (int k = 0; k < s.grid.steps; ++k) {
    const double t = s.grid.t(k);

    // Interaction summaries at t_k.
    if (!finite && fast) {
      const int me = static_cast<int>(env_labels.size());
      const int src_p = s.env ? s.env->particles() : P;
      phi.assign(static_cast<std::size_t>(me) * F, 0.0);
      for (int l = 0; l < me; ++l) {
        double* out = phi.data() + static_cast<std::size_t>(l) * F;
        for (int i = 0; i < src_p; ++i) {
          const double xs = s.env ? s.env->marginal(l, k)[i] : x[static_cast<std::size_t>(l) * P + i];
          spec.features->phi(xs, scratch);
          for (int f = 0; f < F; ++f) out[f] += scratch[f];
        }
        for (int f = 0; f < F; ++f) out[f] /= src_p;
      }
      sums.assign(static_cast<std::size_t>(units) * F, 0.0);
      for (int j = 0; j < units; ++j)
        for (int l = 0; l < me; ++l) {
          const double w = weight[j * me + l];
          for (int f = 0; f < F; ++f) sums[j * F + f] += w * phi[l * F + f];
        }
    } else if (!finite) {
      const int me = static_cast<int>(env_labels.size());
      const int src_p = s.env ? s.env->particles() : P;
      measures.assign(units, WeightedSample{});
      for (int j = 0; j < units; ++j) {
        std::vector<Atom> atoms;
        for (int l = 0; l < me; ++l) {
          const double w = weight[j * me + l] / src_p;
          if (w == 0.0) continue;
          for (int i = 0; i < src_p; ++i)
            atoms.push_back({s.env ? s.env->marginal(l, k)[i] : x[static_cast<std::size_t>(l) * P + i], w});
        }
        measures[j] = WeightedSample(std::move(atoms));
      }
    } else if (fast) {
      const int n = units;
      phi.assign(paths * F, 0.0);
      for (std::size_t p = 0; p < paths; ++p)
        spec.features->phi(x[p], std::span<double>(phi.data() + p * F, F));
      sums.assign(paths * F, 0.0);
      for (int i = 0; i < n; ++i) {
        auto row = s.zeta->row(i);
        for (int j = 0; j < n; ++j) {
          const double w = row[j] / n;
          if (w == 0.0) continue;
          for (int r = 0; r < P; ++r) {
            double* out = sums.data() + (static_cast<std::size_t>(i) * P + r) * F;
            const double* src = phi.data() + (static_cast<std::size_t>(j) * P + r) * F;
            for (int f = 0; f < F; ++f) out[f] += w * src[f];
          }
        }
      }
    }

    std::vector<double> next(paths);
    parallel_for(paths, [&](std::size_t p) {
      const int j = static_cast<int>(p / P);
      const int r = static_cast<int>(p % P);
      const double xp = x[p];
      const double a = finite ? (*s.players)[j](t, xp) : (*s.policy)(t, s.labels[j], xp);
      double B = 0.0, S = 0.0;
      if (fast) {
        std::span<const double> sm = finite
                                         ? std::span<const double>(sums.data() + p * F, F)
                                         : std::span<const double>(sums.data() + static_cast<std::size_t>(j) * F, F);
        B = spec.features->drift(t, xp, a, sm);
        S = spec.features->diffusion(t, xp, a, sm);
      } else if (!finite) {
        B = spec.aggregate_drift(t, xp, a, measures[j]);
        S = spec.aggregate_diffusion(t, xp, a, measures[j]);
      } else {
        const int n = units;
        auto row = s.zeta->row(j);
        for (int q = 0; q < n; ++q) {
          const double w = row[q] / n;
          if (w == 0.0) continue;
          const double xq = x[static_cast<std::size_t>(q) * P + r];
          B += w * spec.drift(t, xp, xq, a);
          S += w * spec.diffusion(t, xp, xq, a);
        }
      }
      double comp = 0.0;
      if (lambda[j] > 0.0) comp = lambda[j] * spec.mean_jump(t, xp, a, jump_law[j]);
      double jumps = 0.0;
      const PathDrivers& d = drivers[p];
      std::size_t c = cursor[p];
      while (c < d.jumps.size() && d.jumps[c].step == k) {
        const JumpEvent& ev = d.jumps[c];
        if (ev.thin * d.intensity < lambda[j])
          jumps += spec.jump(t, xp, jump_law[j].quantile(ev.mark), a);
        ++c;
      }
      cursor[p] = c;
      const double xn = xp + (B - comp) * dt + S * d.dW[k] + jumps;
      if (!std::isfinite(xn))
        throw NumericalError(fmt::format("non-finite state at step {}, unit {}, particle {}", k + 1, j, r));
      next[p] = xn;
    });
    x.swap(next);
    for (std::size_t p = 0; p < paths; ++p) states[p * T + k + 1] = x[p];
  }
  return states;
}

std::vector<PathDrivers> fresh_drivers(const ModelSpec& spec, const std::vector<double>& labels,
                                       int P, const TimeGrid& grid, Coupling coupling,
                                       std::uint64_t seed, bool players) {
  const int units = static_cast<int>(labels.size());
  std::vector<PathDrivers> drivers(static_cast<std::size_t>(units) * P);
  if (coupling == Coupling::Canonical) {
    double lam_max = 0.0;
    for (double u : labels) lam_max = std::max(lam_max, spec.compensator.intensity(u));
    std::vector<PathDrivers> shared(P);
    parallel_for(P, [&](std::size_t i) {
      Substream rng(seed, {kCanonicalPath, i});
      shared[i] = make_drivers(rng, lam_max, grid);
    });
    for (int j = 0; j < units; ++j)
      for (int i = 0; i < P; ++i) drivers[static_cast<std::size_t>(j) * P + i] = shared[i];
    return drivers;
  }
  const std::uint64_t tag = players ? kPlayerPath : kLabelPath;
  parallel_for(drivers.size(), [&](std::size_t p) {
    const std::size_t j = p / P, i = p % P;
    Substream rng(seed, {tag, j, i});
    drivers[p] = make_drivers(rng, spec.compensator.intensity(labels[j]), grid);
  });
  return drivers;
}

void check_env(const LawFamily* env, const TimeGrid& grid) {
  if (!env) return;
  if (env->empty()) throw PreconditionError("environment law family is empty");
  if (!(env->grid() == grid))
    throw PreconditionError(fmt::format("environment time grid (K={}, T={}) does not match run (K={}, T={})",
                                        env->grid().steps, env->grid().horizon, grid.steps, grid.horizon));
}

}  // namespace

PathEnsemble simulate_graphon(const ModelSpec& spec, const Graphon& g, const PolicyField& policy,
                              const GraphonRun& run) {
  if (run.labels.empty()) throw PreconditionError("simulate_graphon: no labels");
  if (run.particles < 1) throw PreconditionError("simulate_graphon: particles must be >= 1");
  check_env(run.env.get(), run.grid);

  PathEnsemble e;
  e.axis = UnitAxis::Labels;
  e.coupling = run.coupling;
  e.seed = run.seed;
  e.grid = run.grid;
  e.labels = run.labels;
  e.particles = run.particles;
  if (run.coupling == Coupling::CommonNoise) {
    if (!run.drivers_from || !run.drivers_from->has_drivers())
      throw PreconditionError("simulate_graphon: common-noise run needs a driver source");
    const PathEnsemble& src = *run.drivers_from;
    if (src.units() != e.units() || src.particles != e.particles || !(src.grid == e.grid))
      throw PreconditionError("simulate_graphon: driver source has a different shape");
    e.drivers = src.drivers;
    e.noise_key = src.noise_key;
  } else {
    e.drivers = fresh_drivers(spec, e.labels, e.particles, e.grid, run.coupling, run.seed, false);
    e.noise_key = stream_key(run.seed, {run.coupling == Coupling::Canonical ? 2ULL : 1ULL});
  }

  auto ctx = std::make_shared<SimContext>();
  ctx->spec = std::make_shared<const ModelSpec>(spec);
  ctx->graphon = g;
  ctx->env = run.env;
  ctx->policy = std::make_shared<const PolicyField>(policy);
  e.context = ctx;

  Setup s;
  s.spec = ctx->spec.get();
  s.grid = e.grid;
  s.labels = e.labels;
  s.particles = e.particles;
  s.graphon = &*ctx->graphon;
  s.env = ctx->env.get();
  s.policy = ctx->policy.get();
  e.states = integrate(s, e.drivers);
  return e;
}

PathEnsemble simulate_finite(const ModelSpec& spec, const InteractionMatrix& zeta,
                             const std::vector<PolicySlice>& policies, const TimeGrid& grid,
                             int replications, std::uint64_t seed, const PathEnsemble* coupling_to) {
  if (zeta.n != static_cast<int>(policies.size()))
    throw PreconditionError(fmt::format("simulate_finite: {} players but {} policies", zeta.n, policies.size()));
  if (replications < 1) throw PreconditionError("simulate_finite: replications must be >= 1");
  for (const PolicySlice& p : policies)
    if (!p.field) throw PreconditionError("simulate_finite: missing player policy");

  PathEnsemble e;
  e.axis = UnitAxis::Players;
  e.seed = seed;
  e.grid = grid;
  e.particles = replications;
  for (const PolicySlice& p : policies) e.labels.push_back(p.label);
  if (coupling_to) {
    const PathEnsemble& src = *coupling_to;
    if (!src.has_drivers()) throw PreconditionError("simulate_finite: coupling source has no drivers");
    if (src.units() != zeta.n || src.particles != replications || !(src.grid == grid))
      throw PreconditionError("simulate_finite: coupling source does not match (players, replications, grid)");
    e.coupling = Coupling::CommonNoise;
    e.drivers = src.drivers;
    e.noise_key = src.noise_key;
  } else {
    e.coupling = Coupling::Independent;
    e.drivers = fresh_drivers(spec, e.labels, replications, grid, Coupling::Independent, seed, true);
    e.noise_key = stream_key(seed, {3ULL});
  }

  auto ctx = std::make_shared<SimContext>();
  ctx->spec = std::make_shared<const ModelSpec>(spec);
  ctx->interaction = std::make_shared<const InteractionMatrix>(zeta);
  ctx->player_policies = policies;
  e.context = ctx;

  Setup s;
  s.spec = ctx->spec.get();
  s.grid = grid;
  s.labels = e.labels;
  s.particles = replications;
  s.zeta = ctx->interaction.get();
  s.players = &ctx->player_policies;
  e.states = integrate(s, e.drivers);
  return e;
}

PathEnsemble replay(const PathEnsemble& ensemble, const PolicyField& new_policy) {
  if (!ensemble.has_drivers() || !ensemble.context)
    throw PreconditionError("replay: ensemble carries no driver records");
  const SimContext& old = *ensemble.context;
  if (!old.graphon) throw PreconditionError("replay: not a graphon ensemble");
  check_env(old.env.get(), ensemble.grid);
  PathEnsemble e = ensemble;
  auto ctx = std::make_shared<SimContext>(old);
  ctx->policy = std::make_shared<const PolicyField>(new_policy);
  e.context = ctx;
  Setup s;
  s.spec = ctx->spec.get();
  s.grid = e.grid;
  s.labels = e.labels;
  s.particles = e.particles;
  s.graphon = &*ctx->graphon;
  s.env = ctx->env.get();
  s.policy = ctx->policy.get();
  e.states = integrate(s, e.drivers);
  return e;
}

PathEnsemble replay(const PathEnsemble& ensemble, const std::vector<PolicySlice>& new_policies) {
  if (!ensemble.has_drivers() || !ensemble.context)
    throw PreconditionError("replay: ensemble carries no driver records");
  const SimContext& old = *ensemble.context;
  if (!old.interaction) throw PreconditionError("replay: not a finite-game ensemble");
  if (new_policies.size() != static_cast<std::size_t>(ensemble.units()))
    throw PreconditionError("replay: policy count does not match players");
  PathEnsemble e = ensemble;
  auto ctx = std::make_shared<SimContext>(old);
  ctx->player_policies = new_policies;
  e.context = ctx;
  Setup s;
  s.spec = ctx->spec.get();
  s.grid = e.grid;
  s.labels = e.labels;
  s.particles = e.particles;
  s.zeta = ctx->interaction.get();
  s.players = &ctx->player_policies;
  e.states = integrate(s, e.drivers);
  return e;
}

PathEnsemble coarsen(const PathEnsemble& fine) {
  if (!fine.has_drivers()) throw PreconditionError("coarsen: ensemble carries no driver records");
  if (fine.grid.steps % 2 != 0) throw PreconditionError("coarsen: step count must be even");
  PathEnsemble e = fine;
  e.grid = TimeGrid(fine.grid.horizon, fine.grid.steps / 2);
  e.states.assign(fine.states.size() / fine.grid.points() * e.grid.points(), 0.0);
  for (PathDrivers& d : e.drivers) {
    std::vector<double> dW(e.grid.steps);
    for (int k = 0; k < e.grid.steps; ++k) dW[k] = d.dW[2 * k] + d.dW[2 * k + 1];
    d.dW = std::move(dW);
    for (JumpEvent& ev : d.jumps) ev.step /= 2;
  }
  return e;
}

PathEnsemble subsample_times(const PathEnsemble& ensemble, int factor) {
  if (factor < 1 || ensemble.grid.steps % factor != 0)
    throw PreconditionError("subsample_times: factor must divide the step count");
  PathEnsemble e;
  e.axis = ensemble.axis;
  e.coupling = ensemble.coupling;
  e.seed = ensemble.seed;
  e.noise_key = ensemble.noise_key;
  e.grid = TimeGrid(ensemble.grid.horizon, ensemble.grid.steps / factor);
  e.labels = ensemble.labels;
  e.particles = ensemble.particles;
  const int T = e.grid.points();
  e.states.resize(static_cast<std::size_t>(e.units()) * e.particles * T);
  for (int j = 0; j < e.units(); ++j)
    for (int i = 0; i < e.particles; ++i) {
      auto src = ensemble.path(j, i);
      for (int k = 0; k < T; ++k) e.states[e.path_index(j, i) * T + k] = src[k * factor];
    }
  return e;
}

StateGrid pilot_state_box(const LawFamily& law, int points) {
  if (law.empty()) throw PreconditionError("pilot_state_box: empty law family");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int j = 0; j < law.label_count(); ++j)
    for (int k = 0; k < law.grid().points(); ++k) {
      const double m = law.mean(j, k), sd = std::sqrt(law.variance(j, k));
      lo = std::min(lo, m - 6.0 * sd);
      hi = std::max(hi, m + 6.0 * sd);
    }
  if (!(hi - lo > 1e-6)) {
    lo -= 1.0;
    hi += 1.0;
  }
  return StateGrid(lo, hi, points);
}

std::vector<PolicySlice> stitch_policies(std::shared_ptr<const PolicyField> field,
                                         const std::vector<double>& labels) {
  std::vector<PolicySlice> out;
  out.reserve(labels.size());
  for (double u : labels) out.push_back({field, u});
  return out;
}

}  // namespace gml
