#pragma once

#include <cmath>
#include <vector>

#include "gml/errors.hpp"

namespace gml {

// Uniform time grid t_k = k·T/K, k = 0..K.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
    if (steps < 1) throw PreconditionError("TimeGrid: steps must be >= 1");
    if (!(horizon > 0.0)) throw PreconditionError("TimeGrid: horizon must be > 0");
  }

  double dt() const { return horizon / steps; }
  double t(int k) const { return horizon * k / steps; }
  int points() const { return steps + 1; }

  bool operator==(const TimeGrid& o) const {
    return steps == o.steps && horizon == o.horizon;
  }
};

// Uniform state grid on [lo, hi] with `points` nodes.
struct StateGrid {
  double lo = -1.0;
  double hi = 1.0;
  int points = 2;

  StateGrid() = default;
  StateGrid(double lo_, double hi_, int points_) : lo(lo_), hi(hi_), points(points_) {
    if (points < 3) throw PreconditionError("StateGrid: need at least 3 nodes");
    if (!(hi > lo)) throw PreconditionError("StateGrid: empty interval");
  }

  double h() const { return (hi - lo) / (points - 1); }
  double x(int g) const { return lo + (hi - lo) * g / (points - 1); }

  bool operator==(const StateGrid& o) const {
    return lo == o.lo && hi == o.hi && points == o.points;
  }
};

// Midpoints (j - 1/2)/m of a uniform label partition.
inline std::vector<double> label_grid(int m) {
  if (m < 1) throw PreconditionError("label_grid: m must be >= 1");
  std::vector<double> u(m);
  for (int j = 0; j < m; ++j) u[j] = (j + 0.5) / m;
  return u;
}

}  // namespace gml
