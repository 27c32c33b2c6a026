#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gml/grid.hpp"
#include "gml/model.hpp"

namespace gml {

// Markovian feedback control α(t, u, x) tabulated on time × label × state
// grids: nearest node in (t, u), piecewise linear in x, boundary value outside
// the state box. A closed-form override takes precedence when set.
class PolicyField {
 public:
  using ClosedForm = std::function<double(double t, double u, double x)>;

  PolicyField() = default;
  PolicyField(TimeGrid time, std::vector<double> labels, StateGrid state, ActionSet actions);
  // Constant policy a everywhere.
  static PolicyField constant(TimeGrid time, std::vector<double> labels, StateGrid state,
                              ActionSet actions, double a);
  static PolicyField closed_form(TimeGrid time, std::vector<double> labels, StateGrid state,
                                 ActionSet actions, ClosedForm fn);

  const TimeGrid& time() const { return time_; }
  const std::vector<double>& labels() const { return labels_; }
  const StateGrid& state() const { return state_; }
  const ActionSet& actions() const { return actions_; }
  bool has_closed_form() const { return static_cast<bool>(closed_form_); }

  double& at(int k, int label, int g) { return values_[index(k, label, g)]; }
  double at(int k, int label, int g) const { return values_[index(k, label, g)]; }
  // Writes one label's slice for time index k (size state().points).
  void set_slice(int k, int label, const std::vector<double>& values);

  int nearest_time(double t) const;
  int nearest_label(double u) const;
  double operator()(double t, double u, double x) const;
  double eval_index(int k, int label, double x) const;

  // Sup over nodes of |α − β| (same grids required).
  double sup_distance(const PolicyField& other) const;

 private:
  std::size_t index(int k, int label, int g) const {
    return (static_cast<std::size_t>(k) * labels_.size() + label) * state_.points + g;
  }

  TimeGrid time_;
  std::vector<double> labels_;
  StateGrid state_;
  ActionSet actions_;
  std::vector<double> values_;
  ClosedForm closed_form_;
};

// A player's control: a policy field read at a fixed label.
struct PolicySlice {
  std::shared_ptr<const PolicyField> field;
  double label = 0.0;

  double operator()(double t, double x) const { return (*field)(t, label, x); }
};

}  // namespace gml
