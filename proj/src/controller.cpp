#include "adaptcm/controller.hpp"

#include <cmath>

namespace adaptcm {

SetpointSchedule::SetpointSchedule(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("setpoint schedule is empty");
  if (entries_.front().start != 0.0) throw std::invalid_argument("setpoint schedule must start at 0");
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (!(entries_[i].start > entries_[i - 1].start)) {
      throw std::invalid_argument("setpoint start times must be strictly increasing");
    }
  }
}

std::size_t SetpointSchedule::index_at(double t) const {
  if (entries_.empty()) throw std::logic_error("setpoint schedule is empty");
  std::size_t idx = 0;
  // Small tolerance so that t accumulated in steps still lands on a switch time.
  while (idx + 1 < entries_.size() && entries_[idx + 1].start <= t + 1e-9) ++idx;
  return idx;
}

ReferencePoint generate_reference(const UncertainModel& model, const Vec& r_hat,
                                  const Vec& setpoint) {
  const auto eq = model.equilibrium(r_hat, setpoint);
  if (!eq) throw InfeasibleReference("no equilibrium in the state box for the setpoint");
  ReferencePoint ref{eq->first, eq->second, r_hat, setpoint, 0.0};
  ref.residual = (model.step(r_hat, ref.x_star, ref.u_star) - ref.x_star).lpNorm<Eigen::Infinity>();
  if (!model.input_box().contains(ref.u_star)) {
    throw SaturatedReference("equilibrium input outside the input box", ref);
  }
  return ref;
}

ControlResult control(const Metric& metric, const GainFn& gain, const Box& state_box,
                      const Box& input_box, const Vec& x, const ReferencePoint& ref,
                      const ControlOptions& opts) {
  ControlResult res;
  Vec xs = x;
  if (!state_box.contains(x)) {
    xs = state_box.clip(x);
    res.state_clipped = true;
    warn("control: state outside the state box, clipped");
  }
  res.path = geodesic(metric, ref.x_star, xs, opts.geodesic);
  res.path.r_hat = ref.r_hat;
  res.geodesic_warning = !res.path.converged;

  Vec u = ref.u_star;
  const auto& nodes = res.path.nodes;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const Vec delta = nodes[i + 1] - nodes[i];
    if (delta.squaredNorm() == 0.0) continue;
    u += gain(0.5 * (nodes[i] + nodes[i + 1])) * delta;
  }
  if (!u.allFinite()) throw std::runtime_error("control: non-finite input");
  res.u_unclipped = u;
  res.u = input_box.clip(u);
  res.saturated = !input_box.contains(u);
  return res;
}

ControlResult control(const NetworkWeights& w, const Box& input_box, const Vec& x,
                      const ReferencePoint& ref, const ControlOptions& opts) {
  ControlOptions o = opts;
  if (!o.geodesic.box) o.geodesic.box = w.state_box();
  NetworkMetric metric(w, ref.r_hat);
  const Vec r = ref.r_hat;
  auto gain = [&w, r](const Vec& z) { return evaluate(w, z, r).K; };
  return control(metric, gain, w.state_box(), input_box, x, ref, o);
}

}  // namespace adaptcm
