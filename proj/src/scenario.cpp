#include "adaptcm/scenario.hpp"

#include "adaptcm/io.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace adaptcm {

namespace {

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "gd") return Optimizer::GradientDescent;
  throw ConfigError("trainer.optimizer must be \"adam\" or \"gd\", got \"" + name + "\"");
}

}  // namespace

std::vector<std::string> ScenarioConfig::config_keys() {
  return {
      "model.alpha", "model.zeta", "model.time_step", "model.state_lower", "model.state_upper",
      "model.input_lower", "model.input_upper", "model.param_lower", "model.param_upper",
      "trainer.beta", "trainer.beta_relaxed", "trainer.eps_metric", "trainer.eps_omega",
      "trainer.learning_rate", "trainer.max_iterations", "trainer.tolerance", "trainer.optimizer",
      "trainer.hidden", "trainer.state_counts", "trainer.input_counts", "trainer.param_counts",
      "trainer.seed",
      "geodesic.segments", "geodesic.max_iterations", "geodesic.gradient_tolerance",
      "mhe.horizon", "mhe.max_iterations", "mhe.excitation_threshold", "mhe.per_step_sequence",
      "scenario.true_params", "scenario.initial_estimate", "scenario.initial_state",
      "scenario.schedule", "scenario.estimator_start", "scenario.duration",
      "scenario.estimator_enabled",
      "paths.weights", "paths.dataset", "paths.report", "paths.trajectory", "paths.summary",
      "paths.geodesics",
  };
}

ScenarioConfig ScenarioConfig::from_config(const Config& c) {
  c.require(config_keys());
  ScenarioConfig s;
  s.model.alpha = c.number("model.alpha");
  s.model.zeta = c.number("model.zeta");
  s.model.time_step = c.number("model.time_step");
  s.model.state_box = Box(to_vec(c.numbers("model.state_lower")), to_vec(c.numbers("model.state_upper")));
  s.model.input_box = Box(to_vec(c.numbers("model.input_lower")), to_vec(c.numbers("model.input_upper")));
  s.model.param_box = Box(to_vec(c.numbers("model.param_lower")), to_vec(c.numbers("model.param_upper")));

  TrainerConfig& t = s.trainer;
  t.beta = c.number("trainer.beta");
  t.beta_relaxed = c.number("trainer.beta_relaxed");
  t.eps_metric = c.numbers("trainer.eps_metric");
  t.eps_omega = c.numbers("trainer.eps_omega");
  t.learning_rate = c.number("trainer.learning_rate");
  t.max_iterations = static_cast<int>(c.integer("trainer.max_iterations"));
  t.loss_tolerance = c.number("trainer.tolerance");
  t.optimizer = parse_optimizer(c.string("trainer.optimizer"));
  t.hidden = c.integers("trainer.hidden");
  t.state_counts = c.integers("trainer.state_counts");
  t.input_counts = c.integers("trainer.input_counts");
  t.param_counts = c.integers("trainer.param_counts");
  const long seed = c.integer("trainer.seed");
  if (seed < 0) throw ConfigError("trainer.seed must be non-negative");
  t.seed = static_cast<std::uint64_t>(seed);

  s.geodesic.segments = static_cast<int>(c.integer("geodesic.segments"));
  s.geodesic.max_iterations = static_cast<int>(c.integer("geodesic.max_iterations"));
  s.geodesic.gradient_tolerance = c.number("geodesic.gradient_tolerance");

  s.mhe.horizon = static_cast<int>(c.integer("mhe.horizon"));
  s.mhe.max_iterations = static_cast<int>(c.integer("mhe.max_iterations"));
  s.mhe.excitation_threshold = c.number("mhe.excitation_threshold");
  s.mhe.per_step_sequence = c.boolean("mhe.per_step_sequence");
  if (c.has("mhe.step_weights")) s.mhe.step_weights = c.numbers("mhe.step_weights");
  if (c.has("mhe.state_weights")) s.mhe.state_weights = to_vec(c.numbers("mhe.state_weights"));

  s.true_params = to_vec(c.numbers("scenario.true_params"));
  s.initial_estimate = to_vec(c.numbers("scenario.initial_estimate"));
  s.initial_state = to_vec(c.numbers("scenario.initial_state"));
  std::vector<SetpointSchedule::Entry> entries;
  for (const auto& row : c.table("scenario.schedule")) {
    if (row.size() < 2) throw ConfigError("scenario.schedule rows are [start, setpoint...]");
    entries.push_back({row[0], to_vec(std::vector<double>(row.begin() + 1, row.end()))});
  }
  s.schedule = SetpointSchedule(std::move(entries));
  s.estimator_start = c.number("scenario.estimator_start");
  s.duration = c.number("scenario.duration");
  s.estimator_enabled = c.boolean("scenario.estimator_enabled");

  s.weights_path = c.string("paths.weights");
  s.dataset_path = c.string("paths.dataset");
  s.report_path = c.string("paths.report");
  s.trajectory_path = c.string("paths.trajectory");
  s.summary_path = c.string("paths.summary");
  s.geodesic_path = c.string("paths.geodesics");
  s.validate();
  return s;
}

int ScenarioConfig::steps() const {
  return static_cast<int>(std::llround(duration / time_step()));
}

void ScenarioConfig::validate() const {
  const double dt = time_step();
  if (!(duration > 0.0)) throw std::invalid_argument("scenario.duration must be positive");
  if (std::abs(steps() * dt - duration) > 1e-12) {
    throw std::invalid_argument("scenario.duration must be a multiple of the time step");
  }
  const double ks = std::round(estimator_start / dt);
  if (std::abs(ks * dt - estimator_start) > 1e-12) {
    throw std::invalid_argument("scenario.estimator_start must lie on a step boundary");
  }
  if (true_params.size() != 2 || initial_estimate.size() != 2 || initial_state.size() != 2) {
    throw DimensionError("scenario: parameters and state must be 2-vectors");
  }
  trainer.validate(2);
  if (mhe.horizon < 1) throw std::invalid_argument("mhe.horizon must be at least 1");
}

namespace {

double norm_or_nan(double num, double den) {
  return den > 1e-10 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrajectoryLog run(const ScenarioConfig& cfg, const NetworkWeights& w, bool keep_paths) {
  cfg.validate();
  const CstrModel model(cfg.model);
  const NetworkDims expected{model.state_dim(), model.input_dim(), model.param_dim()};
  if (!(w.dims() == expected)) throw ShapeMismatch("weights do not match the CSTR dimensions");

  const int steps = cfg.steps();
  const double dt = cfg.time_step();
  const int start_step = static_cast<int>(std::llround(cfg.estimator_start / dt));
  MheOptions mhe = cfg.mhe;
  EstimationWindow window(mhe.horizon);
  ControlOptions copts;
  copts.geodesic = cfg.geodesic;
  copts.geodesic.box = w.state_box();

  TrajectoryLog log;
  Vec x = cfg.initial_state;
  Vec r_hat = model.param_box().clip(cfg.initial_estimate);
  std::size_t sched_idx = cfg.schedule.index_at(0.0);
  ReferencePoint ref;
  try {
    ref = generate_reference(model, r_hat, cfg.schedule.entries()[sched_idx].setpoint);
  } catch (const std::exception& e) {
    throw SimulationError(std::string("step 0: ") + e.what(), 0, log);
  }

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    TrajectoryRow row;
    row.t = t;
    if (!x.allFinite()) throw SimulationError("step " + std::to_string(k) + ": non-finite state", k, log);

    window.push(x, Vec::Zero(model.input_dim()));
    bool reference_stale = false;
    if (cfg.estimator_enabled && k >= start_step && window.full()) {
      row.flags |= kEstimatorRan;
      const ParamEstimate est = estimate(model, window, r_hat, mhe);
      ++log.estimator_updates;
      if (est.held) row.flags |= kEstimateHeld;
      if (est.r_hat != r_hat) reference_stale = true;
      r_hat = est.r_hat;
    }
    const std::size_t idx = cfg.schedule.index_at(t);
    if (idx != sched_idx) reference_stale = true;
    if (reference_stale) {
      try {
        ref = generate_reference(model, r_hat, cfg.schedule.entries()[idx].setpoint);
        sched_idx = idx;
      } catch (const InfeasibleReference&) {
        row.flags |= kReferenceHeld;
      } catch (const SaturatedReference&) {
        row.flags |= kReferenceHeld;
      }
    }
    // The gain and metric always use the current estimate, even with a held reference.
    ReferencePoint active = ref;
    active.r_hat = r_hat;

    ControlResult c;
    try {
      c = control(w, model.input_box(), x, active, copts);
    } catch (const std::exception& e) {
      throw SimulationError("step " + std::to_string(k) + ": " + e.what(), k, log);
    }
    if (c.geodesic_warning) row.flags |= kGeodesicWarning;
    if (c.saturated) row.flags |= kInputSaturated;
    if (c.state_clipped) row.flags |= kStateClipped;
    window.set_latest_input(c.u);

    row.x = x;
    row.x_star = ref.x_star;
    row.u = c.u;
    row.u_star = ref.u_star;
    row.r_hat = r_hat;
    row.d_geo = c.path.length;
    log.rows.push_back(row);
    if (keep_paths) log.paths.push_back(c.path);

    if (k == steps) break;
    const Vec x_next = model.step(cfg.true_params, x, c.u);
    if (!x_next.allFinite()) {
      throw SimulationError("step " + std::to_string(k) + ": non-finite state", k, log);
    }
    const Vec x_eval = w.state_box().clip(x_next);
    const double d_next = distance(w, x_eval, ref.x_star, r_hat, copts.geodesic);
    log.rate.push_back(norm_or_nan(d_next, row.d_geo));
    x = x_next;
  }
  return log;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  out << "t,x1,x2,x1_star,x2_star,u,u_star,da1_hat,da2_hat,d_geo,flags\n";
  for (const TrajectoryRow& r : log.rows) {
    out << format_double(r.t) << ',' << format_double(r.x[0]) << ',' << format_double(r.x[1]) << ','
        << format_double(r.x_star[0]) << ',' << format_double(r.x_star[1]) << ','
        << format_double(r.u[0]) << ',' << format_double(r.u_star[0]) << ','
        << format_double(r.r_hat[0]) << ',' << format_double(r.r_hat[1]) << ','
        << format_double(r.d_geo) << ',' << r.flags << '\n';
  }
}

RunSummary summarize(const ScenarioConfig& cfg, const TrajectoryLog& log, double tol) {
  RunSummary s;
  if (log.rows.empty()) return s;
  s.final_error = (log.rows.back().x - log.rows.back().x_star).norm();
  const int start = static_cast<int>(std::llround(cfg.estimator_start / cfg.time_step()));
  const auto& at_start = log.rows[static_cast<std::size_t>(std::min<int>(start, static_cast<int>(log.rows.size()) - 1))];
  s.mismatch_offset = (at_start.x - at_start.x_star).norm();

  int updates = 0;
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    const auto& row = log.rows[k];
    const double err = (row.r_hat - cfg.true_params).lpNorm<Eigen::Infinity>();
    s.param_error.push_back(err);
    if (row.flags & kEstimatorRan) ++updates;
    if (!s.convergence_row && (row.flags & kEstimatorRan) && err < tol) {
      s.convergence_row = static_cast<int>(k);
      s.updates_to_converge = updates;
    }
  }
  // Per-step rates, split at the row where r_hat first reaches the tolerance.
  const std::size_t split = s.convergence_row ? static_cast<std::size_t>(*s.convergence_row) : log.rate.size();
  double sum_a = 0.0, sum_b = 0.0;
  int na = 0, nb = 0;
  for (std::size_t k = 0; k < log.rate.size(); ++k) {
    if (!std::isfinite(log.rate[k])) continue;
    if (k < split) {
      sum_a += log.rate[k];
      ++na;
    } else {
      sum_b += log.rate[k];
      ++nb;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.mean_rate_mismatched = na ? sum_a / na : nan;
  s.mean_rate_converged = nb ? sum_b / nb : nan;
  return s;
}

void write_summary(std::ostream& out, const RunSummary& s) {
  out << "final_error = " << format_double(s.final_error) << '\n';
  out << "mismatch_offset = " << format_double(s.mismatch_offset) << '\n';
  out << "convergence_row = " << (s.convergence_row ? std::to_string(*s.convergence_row) : "none") << '\n';
  out << "updates_to_converge = " << s.updates_to_converge << '\n';
  out << "mean_rate_mismatched = " << format_double(s.mean_rate_mismatched) << '\n';
  out << "mean_rate_converged = " << format_double(s.mean_rate_converged) << '\n';
  out << "param_error = [";
  for (std::size_t i = 0; i < s.param_error.size(); ++i) {
    out << (i ? ", " : "") << format_double(s.param_error[i]);
  }
  out << "]\n";
}

}  // namespace adaptcm
