#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gml/empirics.hpp"
#include "gml/errors.hpp"
#include "test_support.hpp"

using namespace gml;

namespace {

double brute_w2(std::vector<double> a, const std::vector<double>& b) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[perm[i]]) * (a[i] - b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / a.size());
}

std::vector<double> sorted_sample(std::mt19937_64& rng, int n, double shift = 0.0) {
  std::normal_distribution<double> d(shift, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  std::sort(v.begin(), v.end());
  return v;
}

// Exact optimal transport between a 2-atom and a 3-atom measure: the plan has
// two free entries; the cost is linear, so scan all vertices of the polygon
// cut out by the six nonnegativity constraints.
double lp_w2(const std::vector<Atom>& a, const std::vector<Atom>& b) {
  const double ma = a[0].weight + a[1].weight, mb = b[0].weight + b[1].weight + b[2].weight;
  const double p1 = a[0].weight / ma;
  const double q[3] = {b[0].weight / mb, b[1].weight / mb, b[2].weight / mb};
  auto plan = [&](double x, double y, double out[6]) {
    out[0] = x;
    out[1] = y;
    out[2] = p1 - x - y;
    out[3] = q[0] - x;
    out[4] = q[1] - y;
    out[5] = q[2] - out[2];
  };
  // Each constraint π_k(x, y) = 0 is a line c0 + cx x + cy y = 0.
  const double lines[6][3] = {{0, 1, 0}, {0, 0, 1}, {p1, -1, -1}, {q[0], -1, 0}, {q[1], 0, -1}, {q[2] - p1, 1, 1}};
  double best = INFINITY;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const double det = lines[i][1] * lines[j][2] - lines[i][2] * lines[j][1];
      if (std::abs(det) < 1e-14) continue;
      const double x = (-lines[i][0] * lines[j][2] + lines[i][2] * lines[j][0]) / det;
      const double y = (-lines[i][1] * lines[j][0] + lines[i][0] * lines[j][1]) / det;
      double pi[6];
      plan(x, y, pi);
      if (*std::min_element(pi, pi + 6) < -1e-12) continue;
      double cost = 0.0;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
          const double w = r == 0 ? pi[c] : pi[3 + c];
          const double d = a[r].location - b[c].location;
          cost += w * d * d;
        }
      best = std::min(best, cost);
    }
  return std::sqrt(best);
}

}  // namespace

TEST_CASE("w2_1d examples") {
  const std::vector<double> a = {0.0, 1.0, 2.0};
  CHECK(w2_1d(a, a) == 0.0);
  CHECK(w2_1d(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
  CHECK(w2_1d(a, std::vector<double>{0.5, 1.5, 3.0}) == doctest::Approx(std::sqrt(1.5 / 3.0)));
  CHECK(brute_w2(a, {0.5, 1.5, 3.0}) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(w2_1d(std::vector<double>{}, a), PreconditionError);
  CHECK_THROWS_AS(w2_1d(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}), PreconditionError);
}

TEST_CASE("sorted matching is optimal for small samples") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + rep % 6;
    const auto a = sorted_sample(rng, n), b = sorted_sample(rng, n, 0.5);
    CHECK(std::abs(w2_1d(a, b) - brute_w2(a, b)) <= 1e-12);
  }
}

TEST_CASE("w2_1d metric axioms on random triples") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + rep % 9;
    const auto a = sorted_sample(rng, n), b = sorted_sample(rng, n, 0.3), c = sorted_sample(rng, n, -0.2);
    CHECK(w2_1d(a, b) == w2_1d(b, a));
    CHECK(w2_1d(a, c) <= w2_1d(a, b) + w2_1d(b, c) + 1e-12);
  }
}

TEST_CASE("unequal sizes use the quantile grid") {
  const std::vector<double> a = {0.0, 1.0};
  const std::vector<double> b = {0.0, 0.0, 1.0, 1.0};
  CHECK(w2_1d(a, b) == doctest::Approx(0.0));
  const std::vector<double> c = {5.0};
  CHECK(w2_1d(std::vector<double>{2.0, 2.0, 2.0}, c) == doctest::Approx(3.0));
}

TEST_CASE("sample w2 shrinks like p^(-1/2)") {
  std::vector<double> ps, ds;
  for (int p = 250; p <= 8000; p *= 2) {
    double acc = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      std::mt19937_64 rng(1000 * p + rep);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> a(p), b(p);
      for (double& x : a) x = u(rng);
      for (double& x : b) x = u(rng);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      acc += w2_1d(a, b);
    }
    ps.push_back(p);
    ds.push_back(acc / 20);
  }
  const double slope = loglog_slope(ps, ds);
  CHECK(slope > -0.7);
  CHECK(slope < -0.3);
}

TEST_CASE("w2_weighted") {
  const WeightedSample a({{0.0, 0.3}, {1.0, 0.7}});
  const auto same = w2_weighted(a, a);
  CHECK(same.distance == doctest::Approx(0.0));
  CHECK(same.mass_gap == 0.0);
  const auto unit = w2_weighted(WeightedSample({{0.0, 1.0}}), WeightedSample({{1.0, 1.0}}));
  CHECK(unit.distance == doctest::Approx(1.0));
  CHECK(unit.mass_gap == 0.0);
  CHECK_THROWS_AS(w2_weighted(WeightedSample({{0.0, 0.0}}), a), PreconditionError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Atom> x = {{4 * u(rng) - 2, 0.05 + u(rng)}, {4 * u(rng) - 2, 0.05 + u(rng)}};
    std::vector<Atom> y = {{4 * u(rng) - 2, 0.05 + u(rng)}, {4 * u(rng) - 2, 0.05 + u(rng)}, {4 * u(rng) - 2, 0.05 + u(rng)}};
    const auto r = w2_weighted(WeightedSample(x), WeightedSample(y));
    CHECK(r.distance == doctest::Approx(lp_w2(x, y)).epsilon(1e-9));
  }
  const auto gap = w2_weighted(WeightedSample({{0.0, 0.5}}), WeightedSample({{0.0, 0.2}}));
  CHECK(gap.distance == 0.0);
  CHECK(gap.mass_gap == doctest::Approx(0.3));
}

TEST_CASE("w2T bounds") {
  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid grid(1.0, 10);
  const auto run = testing::run_of(2, 200, grid, 1);
  const PathEnsemble a = simulate_graphon(spec, Graphon::constant(1.0),
                                          testing::constant_policy(spec, grid, run.labels, 0.0), run);
  const W2TBounds self = w2T_bounds(a, 0, a, 0);
  CHECK(self.lower == 0.0);
  REQUIRE(self.upper);
  CHECK(*self.upper == 0.0);

  PathEnsemble b = a;
  for (double& x : b.states) x += 0.75;
  const W2TBounds shifted = w2T_bounds(a, 1, b, 1);
  CHECK(shifted.lower == doctest::Approx(0.75));
  REQUIRE(shifted.upper);
  CHECK(*shifted.upper == doctest::Approx(0.75));

  PathEnsemble c = b;
  c.noise_key ^= 1;
  CHECK_FALSE(w2T_bounds(a, 0, c, 0).upper);
  CHECK_THROWS_AS(w2T_bounds(a, 0, subsample_times(a, 2), 0), PreconditionError);
}

TEST_CASE("neighborhood measure") {
  PathEnsemble e;
  e.axis = UnitAxis::Players;
  e.grid = TimeGrid(1.0, 1);
  e.labels = {1.0 / 3, 2.0 / 3, 1.0};
  e.particles = 1;
  e.states = {1.0, 1.0, 2.0, 2.0, 3.0, 3.0};
  const InteractionMatrix z = InteractionMatrix::from_weights(3, {1.0, 0.5, 0.0, 0.5, 1.0, 1.0, 0.0, 1.0, 1.0});
  const WeightedSample m = neighborhood(e, z, 0, 0);
  REQUIRE(m.size() == 2);
  CHECK(m.atoms()[0].location == 1.0);
  CHECK(m.atoms()[0].weight == doctest::Approx(1.0 / 3));
  CHECK(m.atoms()[1].location == 2.0);
  CHECK(m.atoms()[1].weight == doctest::Approx(1.0 / 6));
  CHECK(m.total_mass() == doctest::Approx(0.5));

  const InteractionMatrix ones = InteractionMatrix::from_weights(3, std::vector<double>(9, 1.0));
  CHECK(neighborhood(e, ones, 1, 1).total_mass() == doctest::Approx(1.0));
  CHECK(neighborhood(e, InteractionMatrix::zeros(3), 1, 1).total_mass() == 0.0);
  CHECK_THROWS_AS(neighborhood(e, ones, 3, 0), PreconditionError);
}

TEST_CASE("law family distance") {
  const TimeGrid grid(1.0, 2);
  const int m = 4, p = 50;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  std::vector<double> s(static_cast<std::size_t>(m) * grid.points() * p);
  for (double& x : s) x = d(rng);
  const LawFamily mu(label_grid(m), grid, p, s);
  CHECK(law_family_distance(mu, mu, LabelAggregate::Sup) == 0.0);
  std::vector<double> t = s;
  for (int k = 0; k < grid.points(); ++k)
    for (int i = 0; i < p; ++i) t[(2 * grid.points() + k) * p + i] += 1.0;
  const LawFamily nu(label_grid(m), grid, p, t);
  CHECK(law_family_distance(mu, nu, LabelAggregate::Sup) == doctest::Approx(1.0));
  CHECK(law_family_distance(mu, nu, LabelAggregate::Avg) == doctest::Approx(1.0 / m));

  const ModelSpec spec = builtin_model("bounded_sine");
  const TimeGrid g2(1.0, 10);
  const auto r1 = testing::run_of(4, 800, g2, 10), r2 = testing::run_of(4, 800, g2, 11);
  const PolicyField pol = testing::constant_policy(spec, g2, r1.labels, 0.0);
  const LawFamily a = LawFamily::from_ensemble(simulate_graphon(spec, Graphon::min_kernel(), pol, r1));
  const LawFamily b = LawFamily::from_ensemble(simulate_graphon(spec, Graphon::min_kernel(), pol, r2));
  const double dist = law_family_distance(a, b, LabelAggregate::Avg);
  CHECK(dist > 0.0);
  CHECK(dist < 3.0 * bootstrap_law_distance_error(a, b, LabelAggregate::Avg, 20, 12));
  CHECK_THROWS_AS(law_family_distance(mu, a, LabelAggregate::Avg), PreconditionError);
}
