#include "gml/law_family.hpp"

#include <algorithm>
#include <cmath>

#include "gml/errors.hpp"

namespace gml {

LawFamily::LawFamily(std::vector<double> labels, TimeGrid grid, int particles,
                     std::vector<double> samples)
    : labels_(std::move(labels)), grid_(grid), particles_(particles), data_(std::move(samples)) {
  if (particles_ < 1) throw PreconditionError("LawFamily: particles must be >= 1");
  const std::size_t expected =
      labels_.size() * static_cast<std::size_t>(grid_.points()) * particles_;
  if (data_.size() != expected) throw PreconditionError("LawFamily: sample array size mismatch");
  for (double x : data_)
    if (!std::isfinite(x)) throw NumericalError("LawFamily: non-finite sample");
  for (std::size_t off = 0; off < data_.size(); off += particles_)
    std::sort(data_.begin() + off, data_.begin() + off + particles_);
}

double LawFamily::mean(int label, int k) const {
  double s = 0.0;
  for (double x : marginal(label, k)) s += x;
  return s / particles_;
}

double LawFamily::variance(int label, int k) const {
  const double mu = mean(label, k);
  double s = 0.0;
  for (double x : marginal(label, k)) s += (x - mu) * (x - mu);
  return particles_ > 1 ? s / (particles_ - 1) : 0.0;
}

double LawFamily::quantile(int label, int k, double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("LawFamily::quantile: q outside [0,1]");
  auto s = marginal(label, k);
  const double pos = q * (particles_ - 1);
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = std::min(lo + 1, particles_ - 1);
  const double frac = pos - lo;
  return s[lo] + frac * (s[hi] - s[lo]);
}

}  // namespace gml
