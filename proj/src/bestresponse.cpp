#include "gml/bestresponse.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "gml/errors.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

namespace gml {

EnvironmentFn graphon_environment(const Graphon& g, double u, const LawFamily& law) {
  return [g, u, &law](int k) { return lambda_measure(g, u, law, k); };
}

EnvironmentFn neighborhood_environment(const PathEnsemble& ensemble, const InteractionMatrix& zeta,
                                       int i) {
  if (i < 0 || i >= zeta.n) throw PreconditionError("neighborhood_environment: player out of range");
  if (ensemble.units() != zeta.n) throw PreconditionError("neighborhood_environment: size mismatch");
  return [&ensemble, &zeta, i](int k) {
    const int n = zeta.n, R = ensemble.particles;
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(n) * R);
    for (int j = 0; j < n; ++j) {
      const double w = zeta(i, j) / (static_cast<double>(n) * R);
      if (w == 0.0) continue;
      for (int r = 0; r < R; ++r) atoms.push_back({ensemble.state(j, r, k), w});
    }
    return WeightedSample(std::move(atoms));
  };
}

double ValueGrid::value_at(int k, double x) const {
  const double pos = (x - state.lo) / state.h();
  int g = static_cast<int>(std::floor(pos));
  g = std::clamp(g, 0, state.points - 2);
  const double w = pos - g;
  return (1.0 - w) * V(k, g) + w * V(k, g + 1);
}

std::string ValueGrid::to_csv() const {
  std::string out = "t,x,V,alpha_star\n";
  for (int k = 0; k < time.points(); ++k)
    for (int g = 0; g < state.points; ++g)
      out += fmt::format("{},{},{},{}\n", time.t(k), state.x(g), V(k, g), alpha(k, g));
  return out;
}

namespace {

// Linear interpolation/extrapolation of a grid function.
struct Interp {
  int g = 0;
  double w = 0.0;
};

Interp locate(const StateGrid& grid, double y) {
  const double pos = (y - grid.lo) / grid.h();
  int g = static_cast<int>(std::floor(pos));
  g = std::clamp(g, 0, grid.points - 2);
  return {g, pos - g};
}

double interp(std::span<const double> V, const Interp& at) {
  return (1.0 - at.w) * V[at.g] + at.w * V[at.g + 1];
}

std::uint64_t digest_measure(std::uint64_t d, const WeightedSample& m) {
  for (const Atom& a : m.atoms()) {
    d = mix64(d ^ std::bit_cast<std::uint64_t>(a.location));
    d = mix64(d ^ std::bit_cast<std::uint64_t>(a.weight));
  }
  return d;
}

struct Coefficients {
  const ModelSpec& spec;
  std::vector<double> sums;
  const WeightedSample* measure = nullptr;
  double t = 0.0;

  double drift(double x, double a) const {
    return spec.features ? spec.features->drift(t, x, a, sums)
                         : spec.aggregate_drift(t, x, a, *measure);
  }
  double diffusion(double x, double a) const {
    return spec.features ? spec.features->diffusion(t, x, a, sums)
                         : spec.aggregate_diffusion(t, x, a, *measure);
  }
};

}  // namespace

double jump_generator(const ModelSpec& spec, const Distribution& law, double lambda, double t,
                      const StateGrid& grid, std::span<const double> V, int g, double a) {
  if (lambda == 0.0) return 0.0;
  const double x = grid.x(g);
  double s = 0.0;
  for (const Atom& node : law.nodes())
    s += node.weight * (interp(V, locate(grid, x + spec.jump(t, x, node.location, a))) - V[g]);
  return lambda * s;
}

ValueGrid solve_best_response(const ModelSpec& spec, const EnvironmentFn& env, double u,
                              const BestResponseConfig& cfg) {
  const StateGrid& grid = cfg.state;
  const TimeGrid& time = cfg.time;
  const int N = grid.points, K = time.steps;
  const double h = grid.h(), dt = time.dt();
  const std::vector<double> acts = spec.actions.grid(cfg.action_points);
  const int Q = static_cast<int>(acts.size());
  const double lambda = spec.compensator.intensity(u);
  const Distribution law = spec.compensator.jump_law(u);
  const int F = spec.features ? spec.features->count : 0;

  ValueGrid out;
  out.time = time;
  out.state = grid;
  out.label = u;
  out.values.assign(static_cast<std::size_t>(time.points()) * N, 0.0);
  out.policy.assign(static_cast<std::size_t>(time.points()) * N, acts.front());
  std::uint64_t digest = 0x243F6A8885A308D3ULL;

  std::vector<double> cur(N), next(N);
  {
    const WeightedSample mK = env(K);
    digest = digest_measure(digest, mK);
    for (int g = 0; g < N; ++g) cur[g] = spec.terminal(grid.x(g), mK);
  }
  std::copy(cur.begin(), cur.end(), out.values.begin() + static_cast<std::size_t>(K) * N);

  std::vector<double> Bt(static_cast<std::size_t>(N) * Q), Dt(Bt.size()), Ft(Bt.size());
  const int J = static_cast<int>(law.nodes().size());
  std::vector<Interp> targets;  // action-free jumps: [g][node]
  std::vector<int> best(N, 0);
  std::vector<double> best_a(N, acts.front());
  int max_substeps = 1;

  for (int k = K - 1; k >= 0; --k) {
    const double t = time.t(k);
    const WeightedSample m = env(k);
    digest = digest_measure(digest, m);
    Coefficients coef{spec, {}, &m, t};
    if (spec.features) {
      coef.sums.assign(F, 0.0);
      std::vector<double> phi(F);
      for (const Atom& at : m.atoms()) {
        spec.features->phi(at.location, phi);
        for (int f = 0; f < F; ++f) coef.sums[f] += at.weight * phi[f];
      }
    }

    double rate = 0.0;
    parallel_for(N, [&](std::size_t g) {
      const double x = grid.x(static_cast<int>(g));
      for (int q = 0; q < Q; ++q) {
        const double a = acts[q];
        const double comp = lambda > 0.0 ? lambda * spec.mean_jump(t, x, a, law) : 0.0;
        const double S = coef.diffusion(x, a);
        Bt[g * Q + q] = coef.drift(x, a) - comp;
        Dt[g * Q + q] = 0.5 * S * S;
        Ft[g * Q + q] = spec.running(t, x, m, a);
      }
    });
    for (std::size_t i = 0; i < Bt.size(); ++i) {
      const double r = 2.0 * Dt[i] / (h * h) + std::abs(Bt[i]) / h + lambda;
      if (!std::isfinite(r)) throw NumericalError(fmt::format("non-finite coefficients at t={}", t));
      rate = std::max(rate, r);
    }
    int M = cfg.substeps;
    if (M <= 0) {
      M = std::max(1, static_cast<int>(std::ceil(dt * rate * (1.0 + 1e-12))));
    } else if (dt / M * rate > 1.0 + 1e-12) {
      throw NumericalError(fmt::format(
          "CFL violated at t={}: dt·(S²/h² + |B|/h + λ) = {} > 1 with {} substeps", t, dt / M * rate, M));
    }
    max_substeps = std::max(max_substeps, M);
    const double ds = dt / M;

    if (spec.jump_action_free && lambda > 0.0) {
      targets.resize(static_cast<std::size_t>(N) * J);
      for (int g = 0; g < N; ++g) {
        const double x = grid.x(g);
        for (int n = 0; n < J; ++n)
          targets[g * J + n] = locate(grid, x + spec.jump(t, x, law.nodes()[n].location, acts[0]));
      }
    }

    auto hamiltonian_parts = [&](std::span<const double> V, int g, double& dplus, double& dminus,
                                 double& d2) {
      if (g == 0) {
        dplus = dminus = (V[1] - V[0]) / h;
        d2 = 0.0;
      } else if (g == N - 1) {
        dplus = dminus = (V[N - 1] - V[N - 2]) / h;
        d2 = 0.0;
      } else {
        dplus = (V[g + 1] - V[g]) / h;
        dminus = (V[g] - V[g - 1]) / h;
        d2 = (V[g + 1] - 2.0 * V[g] + V[g - 1]) / (h * h);
      }
    };

    for (int s = 0; s < M; ++s) {
      std::span<const double> V(cur);
      parallel_for(N, [&](std::size_t gi) {
        const int g = static_cast<int>(gi);
        double dp, dm, d2;
        hamiltonian_parts(V, g, dp, dm, d2);
        double jump_free = 0.0;
        if (spec.jump_action_free && lambda > 0.0) {
          for (int n = 0; n < J; ++n)
            jump_free += law.nodes()[n].weight * (interp(V, targets[g * J + n]) - V[g]);
          jump_free *= lambda;
        }
        auto value = [&](double B, double D, double f, double jump) {
          // Central differences while they keep the scheme monotone, upwind otherwise.
          const double adv = std::abs(B) * h <= 2.0 * D ? B * 0.5 * (dp + dm) : (B > 0.0 ? B * dp : B * dm);
          return V[g] + ds * (f + adv + D * d2 + jump);
        };
        double top = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int q = 0; q < Q; ++q) {
          const std::size_t i = static_cast<std::size_t>(g) * Q + q;
          const double jump = (spec.jump_action_free || lambda == 0.0)
                                  ? jump_free
                                  : jump_generator(spec, law, lambda, t, grid, V, g, acts[q]);
          const double v = value(Bt[i], Dt[i], Ft[i], jump);
          if (v > top) {
            top = v;
            arg = q;
          }
        }
        double a_best = acts[arg];
        if (cfg.refine && Q > 1) {
          const double x = grid.x(g);
          auto objective = [&](double a) {
            const double comp = lambda > 0.0 ? lambda * spec.mean_jump(t, x, a, law) : 0.0;
            const double S = coef.diffusion(x, a);
            const double jump = (spec.jump_action_free || lambda == 0.0)
                                    ? jump_free
                                    : jump_generator(spec, law, lambda, t, grid, V, g, a);
            return value(coef.drift(x, a) - comp, 0.5 * S * S, spec.running(t, x, m, a), jump);
          };
          double lo = acts[std::max(arg - 1, 0)], hi = acts[std::min(arg + 1, Q - 1)];
          const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
          double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
          double fc = objective(c), fd = objective(d);
          for (int it = 0; it < 40 && hi - lo > 1e-10; ++it) {
            if (fc >= fd) {
              hi = d;
              d = c;
              fd = fc;
              c = hi - ratio * (hi - lo);
              fc = objective(c);
            } else {
              lo = c;
              c = d;
              fc = fd;
              d = lo + ratio * (hi - lo);
              fd = objective(d);
            }
          }
          const double cand = 0.5 * (lo + hi);
          const double fcand = objective(cand);
          if (fcand > top) {
            top = fcand;
            a_best = cand;
          }
        }
        next[g] = top;
        best_a[g] = a_best;
      });
      for (int g = 0; g < N; ++g)
        if (!std::isfinite(next[g]))
          throw NumericalError(fmt::format("non-finite value at t={}, x={}", t, grid.x(g)));
      cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), out.values.begin() + static_cast<std::size_t>(k) * N);
    std::copy(best_a.begin(), best_a.end(), out.policy.begin() + static_cast<std::size_t>(k) * N);
  }
  std::copy(out.policy.begin() + static_cast<std::size_t>(K - 1) * N,
            out.policy.begin() + static_cast<std::size_t>(K) * N,
            out.policy.begin() + static_cast<std::size_t>(K) * N);
  out.env_digest = digest;
  out.substeps = max_substeps;
  return out;
}

ValueGrid solve_best_response(const ModelSpec& spec, const Graphon& g, const LawFamily& mu,
                              double u, const BestResponseConfig& cfg) {
  if (mu.empty()) throw PreconditionError("solve_best_response: empty environment");
  if (!(mu.grid() == cfg.time)) throw PreconditionError("solve_best_response: environment time grid mismatch");
  return solve_best_response(spec, graphon_environment(g, u, mu), u, cfg);
}

void write_policy(PolicyField& field, int label, const ValueGrid& v) {
  if (!(field.time() == v.time) || !(field.state() == v.state))
    throw PreconditionError("write_policy: grid mismatch");
  std::vector<double> slice(v.state.points);
  for (int k = 0; k < v.time.points(); ++k) {
    for (int g = 0; g < v.state.points; ++g) slice[g] = v.alpha(k, g);
    field.set_slice(k, label, slice);
  }
}

PolicyField single_label_policy(const ValueGrid& v, const ActionSet& actions) {
  PolicyField field(v.time, {v.label}, v.state, actions);
  write_policy(field, 0, v);
  return field;
}

ObjectiveReport evaluate_objective(const ModelSpec& spec, const Graphon& g,
                                   const PolicyField& policy, const LawFamily& mu,
                                   const PathEnsemble& ensemble) {
  if (mu.empty()) throw PreconditionError("evaluate_objective: empty environment");
  if (!(mu.grid() == ensemble.grid)) throw PreconditionError("evaluate_objective: time grid mismatch");
  const int units = ensemble.units(), P = ensemble.particles, K = ensemble.grid.steps;
  const double dt = ensemble.grid.dt();
  ObjectiveReport rep;
  rep.payoffs.assign(static_cast<std::size_t>(units) * P, 0.0);
  for (int j = 0; j < units; ++j) {
    const double u = ensemble.labels[j];
    for (int k = 0; k <= K; ++k) {
      const WeightedSample m = lambda_measure(g, u, mu, k);
      const double t = ensemble.grid.t(k);
      parallel_for(P, [&](std::size_t i) {
        const double x = ensemble.state(j, static_cast<int>(i), k);
        double& acc = rep.payoffs[static_cast<std::size_t>(j) * P + i];
        if (k < K)
          acc += spec.running(t, x, m, policy(t, u, x)) * dt;
        else
          acc += spec.terminal(x, m);
      });
    }
  }
  double total = 0.0, var = 0.0;
  for (int j = 0; j < units; ++j) {
    const Estimate e = mean_estimate(std::span<const double>(rep.payoffs).subspan(static_cast<std::size_t>(j) * P, P));
    rep.per_label.push_back(e);
    total += e.value;
    var += e.std_error * e.std_error;
  }
  rep.overall = {total / units, std::sqrt(var) / units};
  return rep;
}

std::vector<double> player_payoffs(const ModelSpec& spec, const InteractionMatrix& zeta,
                                   const std::vector<PolicySlice>& policies, int i,
                                   const PathEnsemble& ensemble) {
  if (i < 0 || i >= zeta.n) throw PreconditionError("player_payoffs: player out of range");
  if (ensemble.units() != zeta.n || policies.size() != static_cast<std::size_t>(zeta.n))
    throw PreconditionError("player_payoffs: size mismatch");
  const int R = ensemble.particles, K = ensemble.grid.steps;
  const double dt = ensemble.grid.dt();
  std::vector<double> pay(R, 0.0);
  parallel_for(R, [&](std::size_t r) {
    double acc = 0.0;
    for (int k = 0; k <= K; ++k) {
      const WeightedSample m = neighborhood(ensemble, zeta, i, k, static_cast<int>(r));
      const double t = ensemble.grid.t(k);
      const double x = ensemble.state(i, static_cast<int>(r), k);
      if (k < K)
        acc += spec.running(t, x, m, policies[i](t, x)) * dt;
      else
        acc += spec.terminal(x, m);
    }
    pay[r] = acc;
  });
  return pay;
}

Estimate evaluate_player_objective(const ModelSpec& spec, const InteractionMatrix& zeta,
                                   const std::vector<PolicySlice>& policies, int i,
                                   const PathEnsemble& ensemble) {
  return mean_estimate(player_payoffs(spec, zeta, policies, i, ensemble));
}

}  // namespace gml
