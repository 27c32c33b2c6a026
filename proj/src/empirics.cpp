#include "gml/empirics.hpp"

#include <algorithm>
#include <cmath>

#include "gml/errors.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

namespace gml {

namespace {

constexpr int kQuantilePoints = 512;

void require_sorted(std::span<const double> s) {
  if (s.empty()) throw PreconditionError("w2_1d: empty sample");
  if (!std::is_sorted(s.begin(), s.end())) throw PreconditionError("w2_1d: samples must be sorted");
}

// Left-continuous empirical quantile of a sorted sample.
double empirical_quantile(std::span<const double> s, double q) {
  const auto n = static_cast<double>(s.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n)) - 1;
  return s[std::min(idx, s.size() - 1)];
}

std::vector<double> resample(Substream& rng, std::span<const double> pool, std::size_t count) {
  std::vector<double> out(count);
  for (double& v : out) v = pool[static_cast<std::size_t>(rng.uniform() * pool.size())];
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Estimate mean_estimate(std::span<const double> samples) {
  if (samples.empty()) throw PreconditionError("mean_estimate: no samples");
  double s = 0.0;
  for (double v : samples) s += v;
  const double mean = s / samples.size();
  if (samples.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double var = ss / (samples.size() - 1);
  return {mean, std::sqrt(var / samples.size())};
}

double w2_1d(std::span<const double> a, std::span<const double> b) {
  require_sorted(a);
  require_sorted(b);
  double s = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / a.size());
  }
  for (int i = 0; i < kQuantilePoints; ++i) {
    const double q = (i + 0.5) / kQuantilePoints;
    const double d = empirical_quantile(a, q) - empirical_quantile(b, q);
    s += d * d;
  }
  return std::sqrt(s / kQuantilePoints);
}

WeightedW2 w2_weighted(const WeightedSample& a, const WeightedSample& b) {
  if (!(a.total_mass() > 0.0) || !(b.total_mass() > 0.0))
    throw PreconditionError("w2_weighted: zero-mass measure");
  auto sorted = [](const WeightedSample& m) {
    std::vector<Atom> atoms;
    for (const Atom& at : m.atoms())
      if (at.weight > 0.0) atoms.push_back({at.location, at.weight / m.total_mass()});
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& x, const Atom& y) { return x.location < y.location; });
    return atoms;
  };
  const auto pa = sorted(a), pb = sorted(b);
  // Integrate (F_a⁻¹ − F_b⁻¹)² over the merged cumulative-weight breakpoints.
  std::size_t i = 0, j = 0;
  double ca = pa[0].weight, cb = pb[0].weight, prev = 0.0, cost = 0.0;
  while (i < pa.size() && j < pb.size()) {
    const double next = std::min(ca, cb);
    const double d = pa[i].location - pb[j].location;
    cost += (next - prev) * d * d;
    prev = next;
    if (ca <= next && ++i < pa.size()) ca += pa[i].weight;
    if (cb <= next && ++j < pb.size()) cb += pb[j].weight;
  }
  return {std::sqrt(std::max(cost, 0.0)), std::abs(a.total_mass() - b.total_mass())};
}

W2TBounds w2T_bounds(const PathEnsemble& a, int unit_a, const PathEnsemble& b, int unit_b) {
  if (!(a.grid == b.grid)) throw PreconditionError("w2T_bounds: time grids differ");
  if (unit_a < 0 || unit_a >= a.units() || unit_b < 0 || unit_b >= b.units())
    throw PreconditionError("w2T_bounds: unit out of range");
  W2TBounds out;
  for (int k = 0; k < a.grid.points(); ++k) {
    auto ca = a.column(unit_a, k), cb = b.column(unit_b, k);
    std::sort(ca.begin(), ca.end());
    std::sort(cb.begin(), cb.end());
    out.lower = std::max(out.lower, w2_1d(ca, cb));
  }
  if (a.noise_key == b.noise_key && a.particles == b.particles) {
    double worst = 0.0;
    for (int k = 0; k < a.grid.points(); ++k) {
      double s = 0.0;
      for (int i = 0; i < a.particles; ++i) {
        const double d = a.state(unit_a, i, k) - b.state(unit_b, i, k);
        s += d * d;
      }
      worst = std::max(worst, s / a.particles);
    }
    out.upper = std::sqrt(worst);
  }
  return out;
}

WeightedSample neighborhood(const PathEnsemble& ensemble, const InteractionMatrix& zeta, int i,
                            int k, int replication) {
  const int n = zeta.n;
  if (i < 0 || i >= n) throw PreconditionError("neighborhood: player index out of range");
  if (ensemble.units() != n) throw PreconditionError("neighborhood: ensemble/interaction size mismatch");
  if (k < 0 || k > ensemble.grid.steps) throw PreconditionError("neighborhood: time index out of range");
  if (replication < 0 || replication >= ensemble.particles)
    throw PreconditionError("neighborhood: replication out of range");
  std::vector<Atom> atoms;
  for (int j = 0; j < n; ++j) {
    const double w = zeta(i, j) / n;
    if (w > 0.0) atoms.push_back({ensemble.state(j, replication, k), w});
  }
  return WeightedSample(std::move(atoms));
}

double law_family_distance(const LawFamily& mu, const LawFamily& nu, LabelAggregate mode) {
  if (mu.label_count() != nu.label_count() || !(mu.grid() == nu.grid()) || mu.empty() || nu.empty())
    throw PreconditionError("law_family_distance: grid mismatch");
  double agg = 0.0;
  for (int j = 0; j < mu.label_count(); ++j) {
    double worst = 0.0;
    for (int k = 0; k < mu.grid().points(); ++k)
      worst = std::max(worst, w2_1d(mu.marginal(j, k), nu.marginal(j, k)));
    agg = mode == LabelAggregate::Sup ? std::max(agg, worst) : agg + worst;
  }
  return mode == LabelAggregate::Sup ? agg : agg / mu.label_count();
}

double bootstrap_w2_error(std::span<const double> a, std::span<const double> b, int resamples,
                          std::uint64_t seed) {
  if (resamples < 1) throw PreconditionError("bootstrap: resamples must be >= 1");
  std::vector<double> pool(a.begin(), a.end());
  pool.insert(pool.end(), b.begin(), b.end());
  double ss = 0.0;
  for (int r = 0; r < resamples; ++r) {
    Substream rng(seed, {static_cast<std::uint64_t>(r)});
    const auto x = resample(rng, pool, a.size());
    const auto y = resample(rng, pool, b.size());
    const double w = w2_1d(x, y);
    ss += w * w;
  }
  return std::sqrt(ss / resamples);
}

double bootstrap_law_distance_error(const LawFamily& mu, const LawFamily& nu, LabelAggregate mode,
                                    int resamples, std::uint64_t seed) {
  if (mu.label_count() != nu.label_count() || !(mu.grid() == nu.grid()))
    throw PreconditionError("bootstrap: grid mismatch");
  if (resamples < 1) throw PreconditionError("bootstrap: resamples must be >= 1");
  const int m = mu.label_count(), T = mu.grid().points();
  std::vector<double> values(resamples);
  parallel_for(resamples, [&](std::size_t r) {
    double agg = 0.0;
    for (int j = 0; j < m; ++j) {
      double worst = 0.0;
      for (int k = 0; k < T; ++k) {
        Substream rng(seed, {r, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)});
        auto a = mu.marginal(j, k), b = nu.marginal(j, k);
        std::vector<double> pool(a.begin(), a.end());
        pool.insert(pool.end(), b.begin(), b.end());
        worst = std::max(worst, w2_1d(resample(rng, pool, a.size()), resample(rng, pool, b.size())));
      }
      agg = mode == LabelAggregate::Sup ? std::max(agg, worst) : agg + worst;
    }
    values[r] = mode == LabelAggregate::Sup ? agg : agg / m;
  });
  double ss = 0.0;
  for (double v : values) ss += v * v;
  return std::sqrt(ss / resamples);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("loglog_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace gml
