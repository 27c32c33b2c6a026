#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gml/grid.hpp"

namespace gml {

class PathEnsemble;

// Per-label, per-time sorted marginal samples: the discretization of a law
// μ ∈ P_Unif([0,1] × D) restricted to a label grid and a time grid.
class LawFamily {
 public:
  LawFamily() = default;
  // `samples` is laid out [label][time][particle]; each marginal gets sorted.
  LawFamily(std::vector<double> labels, TimeGrid grid, int particles,
            std::vector<double> samples);

  static LawFamily from_ensemble(const PathEnsemble& ensemble);

  const std::vector<double>& labels() const { return labels_; }
  int label_count() const { return static_cast<int>(labels_.size()); }
  const TimeGrid& grid() const { return grid_; }
  int particles() const { return particles_; }
  bool empty() const { return labels_.empty() || particles_ == 0; }

  std::span<const double> marginal(int label, int k) const {
    return {data_.data() + index(label, k), static_cast<std::size_t>(particles_)};
  }
  double mean(int label, int k) const;
  double variance(int label, int k) const;
  double quantile(int label, int k, double q) const;

  bool same_grids(const LawFamily& other) const {
    return labels_ == other.labels_ && grid_ == other.grid_ &&
           particles_ == other.particles_;
  }

  std::uint64_t seed = 0;
  std::uint64_t ensemble_id = 0;

 private:
  std::size_t index(int label, int k) const {
    return (static_cast<std::size_t>(label) * grid_.points() + k) * particles_;
  }

  std::vector<double> labels_;
  TimeGrid grid_;
  int particles_ = 0;
  std::vector<double> data_;
};

}  // namespace gml
