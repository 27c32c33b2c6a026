#pragma once

#include <span>
#include <vector>

namespace gml {

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

// Finite nonnegative measure on the real line given by weighted atoms. Used
// for graphon aggregates Λμ_t(u) and for finite-game neighborhood measures,
// both of which are sub-probability measures in general.
class WeightedSample {
 public:
  WeightedSample() = default;
  explicit WeightedSample(std::vector<Atom> atoms);

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  double total_mass() const { return mass_; }
  // Unnormalized first moment, ⟨m, x⟩ = Σ w x.
  double first_moment() const { return moment_; }
  // Mean of the normalized measure; 0 for the zero measure.
  double normalized_mean() const { return mass_ > 0.0 ? moment_ / mass_ : 0.0; }

  template <class F>
  double integrate(F&& h) const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.weight * h(a.location);
    return s;
  }

 private:
  std::vector<Atom> atoms_;
  double mass_ = 0.0;
  double moment_ = 0.0;
};

}  // namespace gml
