#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gml/empirics.hpp"
#include "gml/errors.hpp"
#include "gml/jumpsim.hpp"
#include "gml/parallel.hpp"
#include "test_support.hpp"

using namespace gml;
using namespace gml::testing;

TEST_CASE("frozen dynamics keep the initial state") {
  const ModelSpec spec = zero_model();
  const TimeGrid grid(1.0, 10);
  const auto run = run_of(3, 20, grid, 1);
  const PathEnsemble e = simulate_graphon(spec, Graphon::constant(1.0),
                                          constant_policy(spec, grid, run.labels, 0.3), run);
  for (int j = 0; j < e.units(); ++j)
    for (int i = 0; i < e.particles; ++i)
      for (int k = 0; k <= grid.steps; ++k) CHECK(e.state(j, i, k) == e.state(j, i, 0));
}

TEST_CASE("deterministic drift is integrated exactly") {
  ModelSpec spec = builtin_model("lq_graphon", {{"s", 0.0}});
  const TimeGrid grid(1.0, 50);
  for (bool generic : {false, true}) {
    ModelSpec s = spec;
    if (generic) s.features.reset();
    const auto run = run_of(4, generic ? 8 : 200, grid, 2);
    const PathEnsemble e = simulate_graphon(s, Graphon::constant(1.0),
                                            constant_policy(s, grid, run.labels, 1.0), run);
    for (int j = 0; j < e.units(); ++j)
      for (int i = 0; i < e.particles; ++i)
        for (int k = 0; k <= grid.steps; ++k)
          CHECK(std::abs(e.state(j, i, k) - (e.state(j, i, 0) + k * grid.dt())) < 1e-12);
  }
}

TEST_CASE("compensated pure-jump increments have mean zero") {
  const ModelSpec spec = builtin_model("pure_jump");
  const TimeGrid grid(1.0, 50);
  const auto run = run_of(1, 10000, grid, 3);
  const PathEnsemble e =
      simulate_graphon(spec, Graphon::constant(1.0), constant_policy(spec, grid, run.labels, 0.0), run);
  std::vector<double> inc(e.particles);
  for (int i = 0; i < e.particles; ++i) inc[i] = e.state(0, i, grid.steps) - e.state(0, i, 0);
  const Estimate est = mean_estimate(inc);
  CHECK(std::abs(est.value) < 3.0 * est.std_error);
  // Jumps actually happened: variance ≈ λ E[e²] T + σ² T.
  CHECK(est.std_error * est.std_error * e.particles == doctest::Approx(2.0 / 3.0 + 0.01).epsilon(0.1));
}

TEST_CASE("replay") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  const auto run = run_of(3, 50, grid, 4);
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.2);
  const PathEnsemble e = simulate_graphon(spec, Graphon::constant(0.7), pol, run);
  CHECK(replay(e, pol).states == e.states);
  CHECK(replay(e, constant_policy(spec, grid, run.labels, -0.5)).states != e.states);

  const ModelSpec zero = zero_model();
  const PathEnsemble z = simulate_graphon(zero, Graphon::constant(1.0), pol, run);
  CHECK(replay(z, constant_policy(zero, grid, run.labels, 0.9)).states == z.states);

  const ModelSpec lq = builtin_model("lq_graphon", {{"s", 0.0}});
  const PathEnsemble a0 = simulate_graphon(lq, Graphon::constant(1.0), constant_policy(lq, grid, run.labels, 0.0), run);
  const PathEnsemble a1 = replay(a0, constant_policy(lq, grid, run.labels, 1.0));
  for (int j = 0; j < a0.units(); ++j)
    for (int i = 0; i < a0.particles; ++i)
      for (int k = 0; k <= grid.steps; ++k)
        CHECK(a1.state(j, i, k) - a0.state(j, i, k) == doctest::Approx(grid.t(k)).epsilon(1e-12));

  PathEnsemble bare = e;
  bare.drivers.clear();
  CHECK_THROWS_AS(replay(bare, pol), PreconditionError);
}

TEST_CASE("results do not depend on the worker count") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  const auto run = run_of(4, 300, grid, 5, Coupling::Canonical);
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.1);
  set_max_threads(1);
  const PathEnsemble one = simulate_graphon(spec, Graphon::min_kernel(), pol, run);
  set_max_threads(4);
  const PathEnsemble four = simulate_graphon(spec, Graphon::min_kernel(), pol, run);
  set_max_threads(0);
  CHECK(one.states == four.states);
}

TEST_CASE("environment grid mismatch is rejected") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  auto run = run_of(2, 10, grid, 6);
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.0);
  const PathEnsemble e = simulate_graphon(spec, Graphon::constant(1.0), pol, run_of(2, 10, TimeGrid(1.0, 10), 6));
  run.env = std::make_shared<LawFamily>(LawFamily::from_ensemble(e));
  CHECK_THROWS_AS(simulate_graphon(spec, Graphon::constant(1.0), pol, run), PreconditionError);
}

TEST_CASE("canonical coupling leaves per-label laws unchanged") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  const Graphon g = Graphon::min_kernel();
  const auto ind = run_of(4, 1500, grid, 7, Coupling::Independent);
  const auto can = run_of(4, 1500, grid, 8, Coupling::Canonical);
  const PolicyField pol = constant_policy(spec, grid, ind.labels, 0.2);
  const LawFamily a = LawFamily::from_ensemble(simulate_graphon(spec, g, pol, ind));
  const LawFamily b = LawFamily::from_ensemble(simulate_graphon(spec, g, pol, can));
  for (int j = 0; j < 4; ++j) {
    const double d = w2_1d(a.marginal(j, grid.steps), b.marginal(j, grid.steps));
    const double err = bootstrap_w2_error(a.marginal(j, grid.steps), b.marginal(j, grid.steps), 50, 9 + j);
    CHECK(d < 3.0 * err);
  }
}

TEST_CASE("constant graphon makes labels exchangeable") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  const auto run = run_of(4, 1500, grid, 10);
  const PolicyField pol = constant_policy(spec, grid, run.labels, 0.0);
  const LawFamily law = LawFamily::from_ensemble(simulate_graphon(spec, Graphon::constant(0.6), pol, run));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const auto a = law.marginal(i, grid.steps), b = law.marginal(j, grid.steps);
      CHECK(w2_1d(a, b) < 3.0 * bootstrap_w2_error(a, b, 50, 100 + 4 * i + j));
    }
}

TEST_CASE("second-moment bound is stable under doubling particles") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  std::vector<double> sup_moment;
  for (int p : {500, 1000, 2000}) {
    const auto run = run_of(4, p, grid, 11);
    const PathEnsemble e =
        simulate_graphon(spec, Graphon::min_kernel(), constant_policy(spec, grid, run.labels, 0.5), run);
    double worst = 0.0;
    for (int j = 0; j < e.units(); ++j) {
      double s = 0.0;
      for (int i = 0; i < p; ++i) {
        double m = 0.0;
        for (double x : e.path(j, i)) m = std::max(m, x * x);
        s += m;
      }
      worst = std::max(worst, s / p);
    }
    CHECK(std::isfinite(worst));
    sup_moment.push_back(worst);
  }
  CHECK(sup_moment[2] == doctest::Approx(sup_moment[1]).epsilon(0.15));
  CHECK(sup_moment[1] == doctest::Approx(sup_moment[0]).epsilon(0.15));
}

TEST_CASE("halving dt on a deterministic drift keeps the terminal mean") {
  const ModelSpec spec = builtin_model("lq_graphon", {{"s", 0.0}});
  std::vector<double> means;
  for (int K : {20, 40}) {
    const TimeGrid grid(1.0, K);
    const auto run = run_of(1, 2000, grid, 12);
    const LawFamily law = LawFamily::from_ensemble(
        simulate_graphon(spec, Graphon::constant(1.0), constant_policy(spec, grid, run.labels, 0.5), run));
    means.push_back(law.mean(0, K));
  }
  CHECK(std::abs(means[0] - means[1]) < 1e-12);
}

TEST_CASE("coarsened drivers bracket the path distance") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid fine(1.0, 40);
  const auto run = run_of(2, 400, fine, 13);
  const PolicyField pol = constant_policy(spec, fine, run.labels, 0.3);
  const PathEnsemble f = simulate_graphon(spec, Graphon::constant(0.8), pol, run);
  const PathEnsemble c = replay(coarsen(f), pol);
  const PathEnsemble fs = subsample_times(f, 2);
  for (int j = 0; j < 2; ++j) {
    const W2TBounds b = w2T_bounds(fs, j, c, j);
    REQUIRE(b.upper);
    CHECK(b.lower <= *b.upper + 1e-15);
    CHECK(*b.upper < 0.3);
  }
}

TEST_CASE("finite game edge cases") {
  const TimeGrid grid(1.0, 20);
  ModelSpec spec = builtin_model("no_interaction", {{"jump_scale", 0.0}});
  const int n = 5;
  const auto field = std::make_shared<PolicyField>(constant_policy(spec, grid, label_grid(1), 0.7));
  std::vector<double> labels;
  for (int i = 1; i <= n; ++i) labels.push_back(static_cast<double>(i) / n);
  const auto pols = stitch_policies(field, labels);
  const PathEnsemble e = simulate_finite(spec, InteractionMatrix::zeros(n), pols, grid, 7, 1);
  for (int j = 0; j < n; ++j)
    for (int r = 0; r < 7; ++r)
      for (int k = 0; k <= grid.steps; ++k) CHECK(e.state(j, r, k) == e.state(j, r, 0));

  ModelSpec self = zero_model();
  self.drift = [](double, double x, double xp, double) { return xp - x; };
  const PathEnsemble one = simulate_finite(self, InteractionMatrix::from_weights(1, {1.0}),
                                           stitch_policies(field, {1.0}), grid, 3, 2);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k <= grid.steps; ++k) CHECK(one.state(0, r, k) == one.state(0, r, 0));

  CHECK_THROWS_AS(simulate_finite(spec, InteractionMatrix::zeros(3), pols, grid, 2, 1), PreconditionError);
}

TEST_CASE("finite game coupled to a graphon reference run") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 20);
  const int n = 64, R = 8;
  const Graphon g = Graphon::constant(0.5);
  std::vector<double> labels;
  for (int i = 1; i <= n; ++i) labels.push_back(static_cast<double>(i) / n);
  const auto field = std::make_shared<PolicyField>(constant_policy(spec, grid, label_grid(4), 0.1));

  GraphonRun ref;
  ref.labels = labels;
  ref.particles = R;
  ref.grid = grid;
  ref.seed = 14;
  const PathEnsemble reference = simulate_graphon(spec, g, *field, ref);
  const InteractionMatrix z = sample_interaction(g, n, SamplingMode::ExactWeights, 15);
  const PathEnsemble fin = simulate_finite(spec, z, stitch_policies(field, labels), grid, R, 16, &reference);
  CHECK(fin.noise_key == reference.noise_key);
  double chaos = 0.0;
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < R; ++r) {
      double worst = 0.0;
      for (int k = 0; k <= grid.steps; ++k)
        worst = std::max(worst, std::pow(fin.state(i, r, k) - reference.state(i, r, k), 2));
      chaos += worst / R;
    }
  chaos /= n;
  CHECK(std::isfinite(chaos));
  CHECK(chaos > 0.0);
  CHECK(chaos < 0.1);
}
