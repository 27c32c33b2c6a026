#include "gml/policy.hpp"

#include <algorithm>
#include <cmath>

#include "gml/errors.hpp"

namespace gml {

PolicyField::PolicyField(TimeGrid time, std::vector<double> labels, StateGrid state,
                         ActionSet actions)
    : time_(time), labels_(std::move(labels)), state_(state), actions_(actions) {
  if (labels_.empty()) throw PreconditionError("PolicyField: need at least one label");
  if (!std::is_sorted(labels_.begin(), labels_.end()))
    throw PreconditionError("PolicyField: labels must be sorted");
  values_.assign(static_cast<std::size_t>(time_.points()) * labels_.size() * state_.points,
                 actions_.midpoint());
}

PolicyField PolicyField::constant(TimeGrid time, std::vector<double> labels, StateGrid state,
                                  ActionSet actions, double a) {
  PolicyField p(time, std::move(labels), state, actions);
  std::fill(p.values_.begin(), p.values_.end(), actions.clamp(a));
  return p;
}

PolicyField PolicyField::closed_form(TimeGrid time, std::vector<double> labels, StateGrid state,
                                     ActionSet actions, ClosedForm fn) {
  PolicyField p(time, std::move(labels), state, actions);
  for (int k = 0; k < time.points(); ++k)
    for (std::size_t j = 0; j < p.labels_.size(); ++j)
      for (int g = 0; g < state.points; ++g)
        p.at(k, static_cast<int>(j), g) = actions.clamp(fn(time.t(k), p.labels_[j], state.x(g)));
  p.closed_form_ = std::move(fn);
  return p;
}

void PolicyField::set_slice(int k, int label, const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(state_.points))
    throw PreconditionError("PolicyField::set_slice: size mismatch");
  for (int g = 0; g < state_.points; ++g) {
    const double a = values[g];
    if (!(a >= actions_.lo && a <= actions_.hi))
      throw PreconditionError("PolicyField::set_slice: action outside A");
    at(k, label, g) = a;
  }
}

int PolicyField::nearest_time(double t) const {
  const double pos = t / time_.dt();
  int k = static_cast<int>(std::floor(pos));
  if (pos - k > 0.5 + 1e-12) ++k;
  return std::clamp(k, 0, time_.steps);
}

int PolicyField::nearest_label(double u) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), u);
  if (it == labels_.begin()) return 0;
  if (it == labels_.end()) return static_cast<int>(labels_.size()) - 1;
  const int hi = static_cast<int>(it - labels_.begin());
  // Ties go to the lower label.
  return (u - labels_[hi - 1] <= *it - u) ? hi - 1 : hi;
}

double PolicyField::eval_index(int k, int label, double x) const {
  const double h = state_.h();
  const double pos = (x - state_.lo) / h;
  if (!(pos > 0.0)) return at(k, label, 0);
  if (pos >= state_.points - 1) return at(k, label, state_.points - 1);
  const int g = static_cast<int>(pos);
  const double w = pos - g;
  return (1.0 - w) * at(k, label, g) + w * at(k, label, g + 1);
}

double PolicyField::operator()(double t, double u, double x) const {
  if (closed_form_) return actions_.clamp(closed_form_(t, u, x));
  return eval_index(nearest_time(t), nearest_label(u), x);
}

double PolicyField::sup_distance(const PolicyField& other) const {
  if (!(time_ == other.time_) || labels_ != other.labels_ || !(state_ == other.state_))
    throw PreconditionError("PolicyField::sup_distance: grid mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    d = std::max(d, std::abs(values_[i] - other.values_[i]));
  return d;
}

}  // namespace gml
