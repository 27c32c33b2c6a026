#include "gml/measure.hpp"

#include <cmath>

#include "gml/errors.hpp"

namespace gml {

WeightedSample::WeightedSample(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  for (const Atom& a : atoms_) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.location))
      throw PreconditionError("WeightedSample: weights must be >= 0 and locations finite");
    mass_ += a.weight;
    moment_ += a.weight * a.location;
  }
}

}  // namespace gml
