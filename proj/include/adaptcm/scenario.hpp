#pragma once

// Closed-loop simulation: true plant, learned controller driven by the current
// estimate, moving-horizon estimator and a setpoint schedule.

#include "adaptcm/config.hpp"
#include "adaptcm/controller.hpp"
#include "adaptcm/cstr.hpp"
#include "adaptcm/geodesic.hpp"
#include "adaptcm/mhe.hpp"
#include "adaptcm/network.hpp"
#include "adaptcm/trainer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptcm {

/// Bits of the `flags` column of the trajectory CSV.
enum TrajectoryFlag : unsigned {
  kGeodesicWarning = 1u << 0,  // geodesic optimiser hit its cap or stalled
  kInputSaturated = 1u << 1,   // controller output clipped to the input box
  kEstimatorRan = 1u << 2,     // estimator updated (or tried to update) r_hat this step
  kEstimateHeld = 1u << 3,     // window not exciting or all steps rejected
  kReferenceHeld = 1u << 4,    // new reference infeasible, previous one kept
  kStateClipped = 1u << 5,     // state outside the box, clipped before control
};

struct ScenarioConfig {
  CstrParams model = CstrParams::defaults();
  TrainerConfig trainer;
  GeodesicOptions geodesic;
  MheOptions mhe;
  Vec true_params{{1.25, 1.375}};
  Vec initial_estimate{{2.5, 1.522}};
  Vec initial_state{{0.6, 0.01}};
  SetpointSchedule schedule{std::vector<SetpointSchedule::Entry>{{0.0, Vec{{0.2}}}, {0.6, Vec{{0.3}}}}};
  double estimator_start = 0.2;  // hours
  double duration = 1.0;         // hours
  bool estimator_enabled = true;
  std::string weights_path = "cstr_weights.txt";
  std::string dataset_path = "cstr_dataset.txt";
  std::string report_path = "cstr_verify.txt";
  std::string trajectory_path = "cstr_trajectory.csv";
  std::string summary_path = "cstr_summary.txt";
  std::string geodesic_path = "cstr_geodesics.csv";

  /// Every key listed in config_keys() must be present.
  static ScenarioConfig from_config(const Config& cfg);
  static std::vector<std::string> config_keys();

  double time_step() const { return model.time_step; }
  int steps() const;  // duration / time step
  void validate() const;
};

struct TrajectoryRow {
  double t = 0.0;
  Vec x, x_star, u, u_star, r_hat;
  double d_geo = 0.0;  // d(x_k, x*_k) under M(., r_hat_k)
  unsigned flags = 0;
};

struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;
  /// rate[k] = d(x_{k+1}, x*_k) / d(x_k, x*_k), both under the metric used at
  /// step k; NaN when d(x_k, x*_k) is negligible.
  std::vector<double> rate;
  std::vector<GeodesicPath> paths;  // one per row when requested
  int estimator_updates = 0;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, int step, TrajectoryLog partial)
      : std::runtime_error(what), step_(step), partial_(std::move(partial)) {}
  int step() const { return step_; }
  const TrajectoryLog& partial() const { return partial_; }

 private:
  int step_;
  TrajectoryLog partial_;
};

TrajectoryLog run(const ScenarioConfig& cfg, const NetworkWeights& w, bool keep_paths = false);

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);

struct RunSummary {
  double final_error = 0.0;  // |x - x*| at the last row
  double mismatch_offset = 0.0;  // |x - x*| when the estimator becomes active
  std::optional<int> convergence_row;  // first row with |r_hat - r|_inf < tol
  int updates_to_converge = -1;
  double mean_rate_mismatched = 0.0;
  double mean_rate_converged = 0.0;
  std::vector<double> param_error;  // |r_hat - r|_inf per row
};

RunSummary summarize(const ScenarioConfig& cfg, const TrajectoryLog& log,
                     double convergence_tolerance = 1e-3);
void write_summary(std::ostream& out, const RunSummary& s);

}  // namespace adaptcm
