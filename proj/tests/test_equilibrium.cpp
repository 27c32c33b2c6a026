#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gml/bestresponse.hpp"
#include "gml/empirics.hpp"
#include "gml/equilibrium.hpp"
#include "gml/random.hpp"
#include "lq_oracle.hpp"
#include "test_support.hpp"

using namespace gml;
using namespace gml::testing;

namespace {

PicardConfig small_config(int m, int p, int K, std::uint64_t seed) {
  PicardConfig c;
  c.labels = m;
  c.particles = p;
  c.time = TimeGrid(1.0, K);
  c.state_points = 81;
  c.seed = seed;
  return c;
}

LawFamily shifted(const LawFamily& mu, double delta) {
  std::vector<double> s;
  for (int j = 0; j < mu.label_count(); ++j)
    for (int k = 0; k < mu.grid().points(); ++k)
      for (double x : mu.marginal(j, k)) s.push_back(x + delta);
  return LawFamily(mu.labels(), mu.grid(), mu.particles(), std::move(s));
}

LawFamily gaussian_family(int m, int p, const TimeGrid& grid, std::uint64_t seed) {
  std::vector<double> s;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < grid.points(); ++k) {
      Substream rng(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)});
      for (int i = 0; i < p; ++i) s.push_back(0.3 * j + rng.normal());
    }
  return LawFamily(label_grid(m), grid, p, std::move(s));
}

}  // namespace

TEST_CASE("damped update mixes stratified subsamples") {
  const TimeGrid grid(1.0, 2);
  const LawFamily a = gaussian_family(2, 1000, grid, 1);
  const LawFamily b = shifted(gaussian_family(2, 1000, grid, 2), 4.0);
  const LawFamily full = damped_update(a, b, 1.0);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k <= 2; ++k) CHECK(std::ranges::equal(full.marginal(j, k), b.marginal(j, k)));
  const LawFamily half = damped_update(a, b, 0.5);
  CHECK(half.particles() == 1000);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k <= 2; ++k) {
      CHECK(half.mean(j, k) == doctest::Approx(0.5 * (a.mean(j, k) + b.mean(j, k))).epsilon(0.01));
      CHECK(half.quantile(j, k, 0.25) == doctest::Approx(a.quantile(j, k, 0.5)).epsilon(0.05));
    }
  CHECK_THROWS_AS(damped_update(a, b, 0.0), PreconditionError);
}

TEST_CASE("decoupled model reaches its fixed point in one step") {
  const ModelSpec spec = builtin_model("no_interaction");
  PicardConfig c = small_config(2, 2000, 20, 3);
  c.tol = 1e-9;
  c.max_iter = 3;
  const EquilibriumResult r = picard_solve(spec, Graphon::constant(1.0), c);
  REQUIRE(r.residual_history.size() == 3);
  CHECK_FALSE(r.converged);
  CHECK(r.residual_history[1].avg < 3.0 * r.noise_floor);
  CHECK(r.residual_history[2].avg < 3.0 * r.noise_floor);
  CHECK(r.config.at("tol") == 1e-9);
}

TEST_CASE("constant graphon gives label-independent equilibria") {
  const ModelSpec spec = builtin_model("bounded_sine");
  PicardConfig c = small_config(4, 1500, 20, 4);
  c.tol = 0.08;
  c.max_iter = 4;
  const EquilibriumResult r = picard_solve(spec, Graphon::constant(0.5), c);
  const int K = c.time.steps;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const double w = w2_1d(r.law.marginal(a, K), r.law.marginal(b, K));
      const double err = bootstrap_w2_error(r.law.marginal(a, K), r.law.marginal(b, K), 40, 9);
      CHECK(w < 3.0 * err);
    }
  // The per-label solves see the same environment, so the policies coincide.
  for (int k = 0; k <= K; ++k)
    for (int g = 0; g < c.state_points; ++g) CHECK(r.policy.at(k, 0, g) == r.policy.at(k, 3, g));
}

TEST_CASE("LQ equilibrium matches the coupled Riccati/mean oracle") {
  const ModelSpec spec = builtin_model("lq_graphon");
  PicardConfig c = small_config(4, 5000, 50, 5);
  c.state_points = 101;
  c.refine = true;
  c.tol = 0.03;
  c.max_iter = 10;
  const EquilibriumResult r = picard_solve(spec, Graphon::constant(1.0), c);
  REQUIRE(r.converged);
  CHECK(r.residual_history.back().avg < r.residual_history.front().avg / 2);

  const LqEquilibrium o = lq_equilibrium(1.0, 0.5, -0.5, 1.0);
  double err = 0.0;
  for (int k = 0; k <= c.time.steps; ++k) {
    double mean = 0.0;
    for (int j = 0; j < 4; ++j) mean += 0.25 * r.law.mean(j, k);
    err = std::max(err, std::abs(mean - o.mean_at(c.time.t(k))));
  }
  CHECK(err < 1e-2);
  MESSAGE("LQ equilibrium mean error " << err);

  // Feedback gains: slope and intercept of the policy near the bulk.
  const StateGrid& s = r.policy.state();
  const int g0 = static_cast<int>(std::lround((0.5 - s.lo) / s.h()));
  const int g1 = static_cast<int>(std::lround((1.5 - s.lo) / s.h()));
  for (int k : {0, 25, 49}) {
    const double t = c.time.t(k);
    const double P = o.P[static_cast<std::size_t>(t * o.steps)];
    const double slope = (r.policy.at(k, 0, g1) - r.policy.at(k, 0, g0)) / (s.x(g1) - s.x(g0));
    CHECK(std::abs(slope + P) < 0.05);
  }

  // Re-solving against the equilibrium law reproduces the policy.
  BestResponseConfig br;
  br.time = c.time;
  br.state = s;
  br.action_points = c.action_points;
  br.refine = true;
  const double spacing = spec.actions.spacing(c.action_points);
  int close = 0, total = 0;
  for (int j = 0; j < 4; ++j) {
    const ValueGrid v = solve_best_response(spec, Graphon::constant(1.0), r.law, r.law.labels()[j], br);
    for (int k = 0; k <= c.time.steps; ++k)
      for (int g = 0; g < s.points; ++g, ++total)
        if (std::abs(v.alpha(k, g) - r.policy.at(k, j, g)) < spacing + 1e-12) ++close;
  }
  CHECK(close >= 0.95 * total);
}

TEST_CASE("damping does not move the LQ equilibrium") {
  const ModelSpec spec = builtin_model("lq_graphon");
  PicardConfig c = small_config(2, 2000, 40, 6);
  c.tol = 0.045;
  c.max_iter = 12;
  const EquilibriumResult full = picard_solve(spec, Graphon::constant(1.0), c);
  c.damping = 0.5;
  c.seed = 7;
  const EquilibriumResult half = picard_solve(spec, Graphon::constant(1.0), c);
  CHECK(full.converged);
  CHECK(half.converged);
  const double d = law_family_distance(full.law, half.law, LabelAggregate::Avg);
  const double err = bootstrap_law_distance_error(full.law, half.law, LabelAggregate::Avg, 16, 8);
  CHECK(d < 5.0 * err);
}

TEST_CASE("equilibrium policy beats frozen alternatives") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const Graphon g = Graphon::step({0.0, 0.5, 1.0}, {{0.8, 0.2}, {0.2, 0.6}});
  PicardConfig c = small_config(2, 1000, 20, 9);
  c.tol = 0.1;
  c.max_iter = 4;
  const EquilibriumResult r = picard_solve(spec, g, c);
  auto mu = std::make_shared<const LawFamily>(r.law);
  GraphonRun run = run_of(2, 4000, c.time, 10);
  run.env = mu;
  const auto value = [&](const PolicyField& pol) {
    return evaluate_objective(spec, g, pol, *mu, simulate_graphon(spec, g, pol, run)).overall;
  };
  const Estimate star = value(r.policy);
  PolicyField random(c.time, r.law.labels(), r.policy.state(), spec.actions);
  Substream rng(11, {});
  for (int k = 0; k <= c.time.steps; ++k)
    for (int j = 0; j < 2; ++j)
      for (int q = 0; q < c.state_points; ++q) random.at(k, j, q) = 2.0 * rng.uniform() - 1.0;
  for (const PolicyField& alt :
       {constant_policy(spec, c.time, r.law.labels(), -1.0), constant_policy(spec, c.time, r.law.labels(), 1.0), random}) {
    const Estimate e = value(alt);
    CHECK(star.value >= e.value - 3.0 * std::hypot(star.std_error, e.std_error));
  }
}

TEST_CASE("monotonicity integrals") {
  const TimeGrid grid(1.0, 4);
  const LawFamily mu = gaussian_family(3, 500, grid, 12);
  const ModelSpec base = builtin_model("lq_graphon");
  const PolicyField pol = constant_policy(base, grid, mu.labels(), 0.0);
  const Graphon one = Graphon::constant(1.0);

  const MonotonicityTerms same = monotonicity_terms(base, one, mu, pol, mu, pol);
  CHECK(same.g_term == 0.0);
  for (double f : same.f_terms) CHECK(f == 0.0);

  const double delta = 0.4;
  const LawFamily nu = shifted(mu, delta);
  ModelSpec toy = base;
  toy.terminal = [](double x, const WeightedSample& m) { return -x * m.first_moment(); };
  CHECK(monotonicity_terms(toy, one, mu, pol, nu, pol).g_term == doctest::Approx(-delta * delta).epsilon(1e-9));
  toy.terminal = [](double x, const WeightedSample& m) { return x * m.first_moment(); };
  CHECK(monotonicity_terms(toy, one, mu, pol, nu, pol).g_term == doctest::Approx(delta * delta).epsilon(1e-9));

  // The same toy through the sampling driver.
  const MonotonicityReport anti = check_monotonicity(toy, one, 3, 2, 200, grid, 13);
  CHECK(anti.pairs == 3);
  CHECK(anti.g_nonnegative == 3);
  CHECK_FALSE(anti.ok());
  toy.terminal = [](double x, const WeightedSample& m) { return -x * m.first_moment(); };
  toy.running = [](double, double x, const WeightedSample& m, double a) { return -0.5 * a * a - x * m.first_moment(); };
  const MonotonicityReport mono = check_monotonicity(toy, one, 3, 2, 200, grid, 13);
  CHECK(mono.g_nonnegative == 0);
  CHECK(mono.f_cells == 12);
  CHECK(mono.worst_g < 0.0);
  CHECK(mono.to_json().at("pairs") == 3);
}

TEST_CASE("uniqueness probe on the decoupled model") {
  const ModelSpec spec = builtin_model("no_interaction");
  PicardConfig c = small_config(2, 1000, 10, 14);
  c.tol = 0.15;
  c.max_iter = 4;
  const UniquenessReport rep = uniqueness_probe(spec, Graphon::constant(1.0), 2, c);
  CHECK(rep.results.size() == 2);
  CHECK(rep.all_converged());
  CHECK(rep.spread < 3.0 * rep.noise);
  CHECK_THROWS_AS(uniqueness_probe(spec, Graphon::constant(1.0), 1, c), PreconditionError);
}
