#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gml/bestresponse.hpp"
#include "gml/errors.hpp"
#include "lq_oracle.hpp"
#include "test_support.hpp"

using namespace gml;
using namespace gml::testing;

namespace {

// Environment with constant unnormalized mean `mbar` and unit mass.
EnvironmentFn constant_mean_env(double mbar) {
  return [mbar](int) { return WeightedSample({{mbar - 0.5, 0.5}, {mbar + 0.5, 0.5}}); };
}

BestResponseConfig config(int N, double lo, double hi, int K, double T = 1.0, int actions = 41) {
  BestResponseConfig c;
  c.time = TimeGrid(T, K);
  c.state = StateGrid(lo, hi, N);
  c.action_points = actions;
  return c;
}

}  // namespace

TEST_CASE("pointwise maximization when the action only enters f") {
  ModelSpec spec = zero_model();
  spec.diffusion = [](double, double, double, double) { return 0.3; };
  for (double a0 : {0.5, 3.0, -2.0}) {
    spec.running = [a0](double, double x, const WeightedSample&, double a) { return -(a - a0) * (a - a0) + 0.1 * x; };
    const ValueGrid v = solve_best_response(spec, constant_mean_env(0.0), 0.5, config(21, -2, 2, 20));
    for (int k = 0; k <= 20; ++k)
      for (int g = 0; g < 21; ++g) CHECK(v.alpha(k, g) == doctest::Approx(std::clamp(a0, -1.0, 1.0)));
  }
}

TEST_CASE("constant terminal reward") {
  ModelSpec spec = zero_model();
  spec.terminal = [](double, const WeightedSample&) { return 2.5; };
  const ValueGrid v = solve_best_response(spec, constant_mean_env(0.0), 0.5, config(21, -2, 2, 10));
  for (double V : v.values) CHECK(V == 2.5);
  for (double a : v.policy) CHECK(a == spec.actions.lo);
}

TEST_CASE("LQ best response matches the Riccati solution") {
  const double theta = -0.5, c = 0.5, s = 0.4, mbar = 0.6;
  const ModelSpec spec = builtin_model("lq_graphon");
  const ValueGrid v = solve_best_response(spec, constant_mean_env(mbar), 0.5, config(201, -3, 3, 400));
  const LqValue oracle = lq_value(1.0, c, theta, s, [&](double) { return mbar; });
  const double spacing = spec.actions.spacing(41);
  double errV = 0.0, errA = 0.0;
  for (int k = 0; k <= 400; ++k)
    for (int g = 0; g < 201; ++g) {
      const double x = v.state.x(g);
      if (std::abs(x) > 2.0 + 1e-12) continue;
      const double t = v.time.t(k);
      errV = std::max(errV, std::abs(v.V(k, g) - oracle.V(t, x)));
      if (k < 400) errA = std::max(errA, std::abs(v.alpha(k, g) - oracle.alpha(t, x)));
    }
  CHECK(errV < 1e-2);
  CHECK(errA <= spacing);
  MESSAGE("LQ HJB: sup|V - V*| = " << errV << ", sup|a - a*| = " << errA);

  // Concavity of V(t, ·) at every time step.
  for (int k = 0; k <= 400; ++k)
    for (int g = 1; g < 200; ++g) CHECK(v.V(k, g + 1) - 2 * v.V(k, g) + v.V(k, g - 1) <= 1e-8);
}

TEST_CASE("value is affine in the running reward") {
  ModelSpec spec = builtin_model("bounded_sine");
  const auto env = constant_mean_env(0.2);
  const auto cfg = config(61, -3, 3, 40);
  const ValueGrid base = solve_best_response(spec, env, 0.5, cfg);
  ModelSpec shifted = spec;
  shifted.running = [f = spec.running](double t, double x, const WeightedSample& m, double a) { return f(t, x, m, a) + 0.75; };
  const ValueGrid plus = solve_best_response(shifted, env, 0.5, cfg);
  for (int g = 0; g < 61; ++g) CHECK(plus.V(0, g) - base.V(0, g) == doctest::Approx(0.75).epsilon(1e-10));

  for (double beta : {2.0, 0.5}) {
    ModelSpec scaled = spec;
    scaled.running = [f = spec.running, beta](double t, double x, const WeightedSample& m, double a) { return beta * f(t, x, m, a); };
    scaled.terminal = [g = spec.terminal, beta](double x, const WeightedSample& m) { return beta * g(x, m); };
    const ValueGrid v = solve_best_response(scaled, env, 0.5, cfg);
    CHECK(v.policy == base.policy);
  }
}

TEST_CASE("jump generator on a quadratic") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const Distribution law = spec.compensator.jump_law(0.3);
  const StateGrid grid(-3.0, 3.0, 4001);
  std::vector<double> V(grid.points);
  for (int g = 0; g < grid.points; ++g) {
    const double x = grid.x(g);
    V[g] = 1.0 + 0.7 * x - 1.3 * x * x;
  }
  const double El = 0.1 * law.mean(), El2 = 0.01 * law.second_moment();
  for (int g : {500, 2000, 3400}) {
    const double x = grid.x(g);
    const double closed = 1.0 * (El * (0.7 - 2.6 * x) + 0.5 * El2 * (-2.6));
    CHECK(jump_generator(spec, law, 1.0, 0.0, grid, V, g, 0.0) == doctest::Approx(closed).epsilon(1e-4));
  }
  // Asymmetric law so the first-order term matters too.
  ModelSpec shifted = spec;
  shifted.compensator.law = LabelDistribution::fixed(Distribution::uniform(0.0, 2.0));
  const Distribution u = shifted.compensator.jump_law(0.3);
  for (int g : {500, 2000}) {
    const double x = grid.x(g);
    const double closed = 2.0 * (0.1 * u.mean() * (0.7 - 2.6 * x) + 0.5 * 0.01 * u.second_moment() * (-2.6));
    CHECK(jump_generator(shifted, u, 2.0, 0.0, grid, V, g, 0.0) == doctest::Approx(closed).epsilon(1e-4));
  }
}

TEST_CASE("CFL guard") {
  const ModelSpec spec = builtin_model("bounded_sine");
  auto cfg = config(201, -3, 3, 10);
  cfg.substeps = 1;
  CHECK_THROWS_AS(solve_best_response(spec, constant_mean_env(0.0), 0.5, cfg), NumericalError);
  cfg.substeps = 0;
  const ValueGrid v = solve_best_response(spec, constant_mean_env(0.0), 0.5, cfg);
  CHECK(v.substeps > 1);
}

TEST_CASE("objective evaluation") {
  const TimeGrid grid(2.0, 20);
  const auto run = run_of(3, 100, grid, 1);
  ModelSpec spec = builtin_model("bounded_sine");
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.0);
  const PathEnsemble e = simulate_graphon(spec, Graphon::constant(1.0), pol, run);
  const LawFamily mu = LawFamily::from_ensemble(e);

  ModelSpec flat = spec;
  flat.running = [](double, double, const WeightedSample&, double) { return 0.7; };
  flat.terminal = [](double, const WeightedSample&) { return 0.0; };
  CHECK(evaluate_objective(flat, Graphon::constant(1.0), pol, mu, e).overall.value == doctest::Approx(1.4));
  flat.running = [](double, double, const WeightedSample&, double) { return 0.0; };
  flat.terminal = [](double, const WeightedSample&) { return 1.0; };
  const auto one = evaluate_objective(flat, Graphon::constant(1.0), pol, mu, e);
  CHECK(one.overall.value == 1.0);
  CHECK(one.overall.std_error == 0.0);
}

TEST_CASE("objective matches the second-moment oracle") {
  // θ = 0, a ≡ 0, s = 1, ξ = δ₀: E[X_t²] = t, so
  // J = −½∫₀ᵀ t dt − ½c·T = −T²/4 − cT/2 (left Riemann sum: −½Σ t_k dt).
  const double T = 1.0, c = 1.0;
  ModelSpec spec = builtin_model("lq_graphon", {{"theta", 0.0}, {"s", 1.0}, {"c", c}});
  spec.initial.law = LabelDistribution::fixed(Distribution::point_mass(0.0));
  const TimeGrid grid(T, 50);
  const auto run = run_of(2, 20000, grid, 2);
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.0);
  const PathEnsemble e = simulate_graphon(spec, Graphon::constant(1.0), pol, run);
  const auto rep = evaluate_objective(spec, Graphon::constant(1.0), pol, LawFamily::from_ensemble(e), e);
  double riemann = 0.0;
  for (int k = 0; k < grid.steps; ++k) riemann += grid.t(k) * grid.dt();
  const double expected = -0.5 * riemann - 0.5 * c * T;
  CHECK(std::abs(rep.overall.value - expected) < 3.0 * rep.overall.std_error);
}

TEST_CASE("dynamic programming value agrees with simulation") {
  ModelSpec spec = builtin_model("bounded_sine");
  const double x0 = 0.3;
  spec.initial.law = LabelDistribution::fixed(Distribution::point_mass(x0));
  const TimeGrid grid(1.0, 40);
  const Graphon g = Graphon::constant(0.8);
  auto run = run_of(4, 2000, grid, 3);
  const PathEnsemble pilot = simulate_graphon(spec, g, constant_policy(spec, grid, run.labels, 0.0), run);
  const auto mu = std::make_shared<const LawFamily>(LawFamily::from_ensemble(pilot));

  BestResponseConfig cfg = config(121, -5, 5, 40);
  const double u = run.labels[1];
  const ValueGrid v = solve_best_response(spec, g, *mu, u, cfg);
  const PolicyField pol = single_label_policy(v, spec.actions);

  GraphonRun one;
  one.labels = {u};
  one.particles = 20000;
  one.grid = grid;
  one.seed = 4;
  one.env = mu;
  const PathEnsemble e = simulate_graphon(spec, g, pol, one);
  const auto rep = evaluate_objective(spec, g, pol, *mu, e);
  const double h = cfg.state.h();
  const double budget = 3.0 * (rep.overall.std_error + h * h + grid.dt());
  CHECK(std::abs(v.value_at(0, x0) - rep.overall.value) < budget);
  MESSAGE("DP " << v.value_at(0, x0) << " vs MC " << rep.overall.value << " ± " << rep.overall.std_error);
}

TEST_CASE("player objective") {
  const TimeGrid grid(1.0, 10);
  ModelSpec spec = builtin_model("no_interaction");
  spec.running = [](double, double, const WeightedSample&, double) { return 0.0; };
  spec.terminal = [](double, const WeightedSample&) { return 1.0; };
  const auto field = std::make_shared<PolicyField>(constant_policy(spec, grid, label_grid(1), 0.0));
  const auto pols = stitch_policies(field, {0.5, 1.0});
  const InteractionMatrix z = InteractionMatrix::from_weights(2, {1.0, 1.0, 1.0, 1.0});
  const PathEnsemble e = simulate_finite(spec, z, pols, grid, 50, 1);
  const Estimate one = evaluate_player_objective(spec, z, pols, 0, e);
  CHECK(one.value == 1.0);
  CHECK(one.std_error == 0.0);

  // Exchangeable two-player game with symmetric policies.
  const ModelSpec bs = builtin_model("bounded_sine");
  const auto sym = stitch_policies(field, {1.0, 1.0});
  const PathEnsemble f = simulate_finite(bs, z, sym, grid, 4000, 2);
  const Estimate j1 = evaluate_player_objective(bs, z, sym, 0, f);
  const Estimate j2 = evaluate_player_objective(bs, z, sym, 1, f);
  CHECK(std::abs(j1.value - j2.value) < 3.0 * std::hypot(j1.std_error, j2.std_error));
}
