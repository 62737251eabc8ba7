#pragma once

// Reference generation under a parameter estimate and the geodesic-integrated
// control law
//
//   u = u*(r_hat) + sum_i K(mid_i, r_hat) (nodes[i+1] - nodes[i]),
//
// where the nodes run from the reference x* to the current state x.

#include "adaptcm/geodesic.hpp"
#include "adaptcm/model.hpp"
#include "adaptcm/network.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace adaptcm {

struct ReferencePoint {
  Vec x_star;
  Vec u_star;
  Vec r_hat;
  Vec setpoint;
  double residual = 0.0;  // |step(r_hat, x*, u*) - x*|_inf
};

class InfeasibleReference : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// u* lies outside the input box. The offending point is attached.
class SaturatedReference : public std::runtime_error {
 public:
  SaturatedReference(const std::string& what, ReferencePoint point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const ReferencePoint& point() const { return point_; }

 private:
  ReferencePoint point_;
};

/// Piecewise-constant setpoints; entry i is active on [start_i, start_{i+1}).
class SetpointSchedule {
 public:
  struct Entry {
    double start;  // hours
    Vec setpoint;
  };

  SetpointSchedule() = default;
  explicit SetpointSchedule(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t index_at(double t) const;
  const Vec& at(double t) const { return entries_[index_at(t)].setpoint; }

 private:
  std::vector<Entry> entries_;
};

ReferencePoint generate_reference(const UncertainModel& model, const Vec& r_hat,
                                  const Vec& setpoint);

using GainFn = std::function<Mat(const Vec& x)>;

struct ControlOptions {
  GeodesicOptions geodesic;
};

struct ControlResult {
  Vec u;
  Vec u_unclipped;
  bool saturated = false;
  bool state_clipped = false;
  bool geodesic_warning = false;  // optimiser hit its cap or stalled
  GeodesicPath path;
};

/// Generic form: metric and gain given separately, input clipped to `input_box`.
ControlResult control(const Metric& metric, const GainFn& gain, const Box& state_box,
                      const Box& input_box, const Vec& x, const ReferencePoint& ref,
                      const ControlOptions& opts = {});

/// Learned metric and gain evaluated at ref.r_hat.
ControlResult control(const NetworkWeights& w, const Box& input_box, const Vec& x,
                      const ReferencePoint& ref, const ControlOptions& opts = {});

}  // namespace adaptcm
