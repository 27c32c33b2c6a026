#pragma once

// Closed-form references for the linear-quadratic graphon model
//   dX = a dt + s dW,  reward E[∫ −½a² − ½(X − θ m̄(t))² dt − ½ c X_T²],
// where m̄(t) is the (unnormalized) mean of the environment measure. The value
// is V(t,x) = −½P(t)x² + q(t)x + r(t) with
//   P' = P² − 1, P(T) = c;  q' = Pq − θm̄, q(T) = 0;  r' = −½q² + ½θ²m̄² + ½s²P, r(T) = 0,
// and the optimal feedback is a*(t,x) = −P(t)x + q(t).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace gml::testing {

template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(const Rhs& f, double t, const std::array<double, N>& y, double h) {
  auto add = [](const std::array<double, N>& a, const std::array<double, N>& b, double s) {
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + s * b[i];
    return out;
  };
  const auto k1 = f(t, y);
  const auto k2 = f(t + 0.5 * h, add(y, k1, 0.5 * h));
  const auto k3 = f(t + 0.5 * h, add(y, k2, 0.5 * h));
  const auto k4 = f(t + h, add(y, k3, h));
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

// Riccati solution on a fine uniform grid, integrated backward from T.
struct LqValue {
  double T;
  int steps;
  std::vector<double> P, q, r;

  double at(const std::vector<double>& v, double t) const {
    const double pos = t / T * steps;
    int i = static_cast<int>(std::floor(pos));
    if (i >= steps) return v[steps];
    const double w = pos - i;
    return (1 - w) * v[i] + w * v[i + 1];
  }
  double V(double t, double x) const { return -0.5 * at(P, t) * x * x + at(q, t) * x + at(r, t); }
  double alpha(double t, double x) const { return -at(P, t) * x + at(q, t); }
};

inline LqValue lq_value(double T, double c, double theta, double s, const std::function<double(double)>& mbar,
                        int steps = 20000) {
  LqValue out{T, steps, std::vector<double>(steps + 1), std::vector<double>(steps + 1),
              std::vector<double>(steps + 1)};
  std::array<double, 3> y = {c, 0.0, 0.0};
  out.P[steps] = c;
  const double h = T / steps;
  auto rhs = [&](double t, const std::array<double, 3>& v) {
    const double m = mbar(t);
    return std::array<double, 3>{v[0] * v[0] - 1.0, v[0] * v[1] - theta * m,
                                 -0.5 * v[1] * v[1] + 0.5 * theta * theta * m * m + 0.5 * s * s * v[0]};
  };
  for (int i = steps; i > 0; --i) {
    y = rk4_step<3>(rhs, i * h, y, -h);
    out.P[i - 1] = y[0];
    out.q[i - 1] = y[1];
    out.r[i - 1] = y[2];
  }
  return out;
}

// Mean-field equilibrium with a Constant(1) graphon: m̄' = −P m̄ + q, m̄(0) = m0,
// q' = Pq − θm̄, q(T) = 0. The system is linear in (m̄, q), so two shots on
// q(0) determine the solution.
struct LqEquilibrium {
  double T;
  int steps;
  std::vector<double> P, q, mean;

  double mean_at(double t) const {
    const double pos = t / T * steps;
    int i = static_cast<int>(std::floor(pos));
    if (i >= steps) return mean[steps];
    const double w = pos - i;
    return (1 - w) * mean[i] + w * mean[i + 1];
  }
};

inline LqEquilibrium lq_equilibrium(double T, double c, double theta, double m0, int steps = 20000) {
  const double h = T / steps;
  // P forward grid from the backward Riccati sweep.
  std::vector<double> P(steps + 1);
  std::array<double, 1> p = {c};
  P[steps] = c;
  for (int i = steps; i > 0; --i) {
    p = rk4_step<1>([](double, const std::array<double, 1>& v) { return std::array<double, 1>{v[0] * v[0] - 1.0}; },
                    i * h, p, -h);
    P[i - 1] = p[0];
  }
  // (P, m̄, q) are integrated jointly forward from P(0) so RK4 sees P at half steps.
  auto shoot = [&](double q0, std::vector<double>* mean, std::vector<double>* qs) {
    std::array<double, 3> y = {P[0], m0, q0};
    auto rhs = [&](double, const std::array<double, 3>& v) {
      return std::array<double, 3>{v[0] * v[0] - 1.0, -v[0] * v[1] + v[2], v[0] * v[2] - theta * v[1]};
    };
    if (mean) (*mean)[0] = m0;
    if (qs) (*qs)[0] = q0;
    for (int i = 0; i < steps; ++i) {
      y = rk4_step<3>(rhs, i * h, y, h);
      if (mean) (*mean)[i + 1] = y[1];
      if (qs) (*qs)[i + 1] = y[2];
    }
    return y[2];
  };
  const double e0 = shoot(0.0, nullptr, nullptr);
  const double e1 = shoot(1.0, nullptr, nullptr);
  const double q0 = -e0 / (e1 - e0);
  LqEquilibrium out{T, steps, P, std::vector<double>(steps + 1), std::vector<double>(steps + 1)};
  shoot(q0, &out.mean, &out.q);
  return out;
}

// n-player game with ζ ≡ 1 (self included): the others follow a* = −P x + q
// from `eq`, so their average Y = (1/n)Σ_{j≠i} X_j is independent of X_i and
// player i's reward is −½a² − ½(κX − θY)² with κ = 1 − θ/n. Returns the gain
// of the best own-state feedback over a*, for X_i(0) ~ N(m0, v0). Terms in
// E[Y²] are common to both values and dropped.
inline double lq_deviation_gain(const LqEquilibrium& eq, double c, double theta, double s, int n, double m0,
                                double v0) {
  const double T = eq.T, kappa = 1.0 - theta / n;
  const int steps = eq.steps;
  const double h = T / steps;
  auto lerp = [&](const std::vector<double>& v, double t) {
    const double pos = std::clamp(t / h, 0.0, static_cast<double>(steps));
    const int i = std::min(static_cast<int>(pos), steps - 1);
    const double w = pos - i;
    return (1 - w) * v[i] + w * v[i + 1];
  };
  auto ybar = [&](double t) { return (n - 1.0) / n * lerp(eq.mean, t); };

  // Deviation value −½P̃x² + q̃x + r̃, backward.
  std::array<double, 3> y = {c, 0.0, 0.0};
  auto dev = [&](double t, const std::array<double, 3>& v) {
    return std::array<double, 3>{v[0] * v[0] - kappa * kappa, v[0] * v[1] - theta * kappa * ybar(t),
                                 0.5 * s * s * v[0] - 0.5 * v[1] * v[1]};
  };
  for (int i = steps; i > 0; --i) y = rk4_step<3>(dev, i * h, y, -h);
  const double v_dev = -0.5 * y[0] * (m0 * m0 + v0) + y[1] * m0 + y[2];

  // Base payoff under a*: mean, second moment and accumulated reward, forward.
  std::array<double, 3> z = {m0, m0 * m0 + v0, 0.0};
  auto base = [&](double t, const std::array<double, 3>& v) {
    const double P = lerp(eq.P, t), q = lerp(eq.q, t), m = v[0], S = v[1];
    const double reward = -0.5 * (P * P * S - 2 * P * q * m + q * q) - 0.5 * kappa * kappa * S +
                          theta * kappa * ybar(t) * m;
    return std::array<double, 3>{-P * m + q, -2 * P * S + 2 * q * m + s * s, reward};
  };
  for (int i = 0; i < steps; ++i) z = rk4_step<3>(base, i * h, z, h);
  const double j_base = z[2] - 0.5 * c * z[1];
  return v_dev - j_base;
}

}  // namespace gml::testing
