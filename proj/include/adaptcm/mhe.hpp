#pragma once

// Moving-horizon parameter identification. Over a window of N + 1 measured
// states and the inputs applied at each of them, minimise
//
//   J(r) = sum_{i=1..N} w_i |W (f(r, x_{i-1}) + g(r, x_{i-1}) u_{i-1} - x_i)|^2
//
// over the parameter box by projected Gauss-Newton. The newest input in the
// window is not used.

#include "adaptcm/model.hpp"

#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

namespace adaptcm {

class EstimationWindow {
 public:
  struct Entry {
    Vec x;
    Vec u;
  };

  explicit EstimationWindow(int horizon);

  int horizon() const { return horizon_; }
  std::size_t capacity() const { return static_cast<std::size_t>(horizon_) + 1; }
  std::size_t size() const { return entries_.size(); }
  bool full() const { return entries_.size() == capacity(); }

  /// Appends (x, u), evicting the oldest entry at capacity.
  void push(const Vec& x, const Vec& u);
  /// Replaces the input of the newest entry (known only after the control step).
  void set_latest_input(const Vec& u);
  void clear() { entries_.clear(); }

  const Entry& operator[](std::size_t i) const { return entries_[i]; }  // 0 = oldest
  const std::deque<Entry>& entries() const { return entries_; }

 private:
  int horizon_;
  std::deque<Entry> entries_;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MheOptions {
  int horizon = 5;
  int max_iterations = 50;
  double step_tolerance = 1e-13;
  /// Smallest singular value of the stacked parameter Jacobian below which the
  /// window is treated as non-exciting and the previous estimate is held.
  double excitation_threshold = 1e-8;
  std::vector<double> step_weights;  // one per residual step, empty = 1
  Vec state_weights;                 // one per state component, empty = 1
  /// Solve for one parameter per window step instead of a single constant one.
  bool per_step_sequence = false;
};

struct ParamEstimate {
  Vec r_hat;
  double residual = 0.0;  // J at r_hat
  bool excited = true;
  bool held = false;      // r_hat is the previous estimate
  int iterations = 0;
  std::vector<Vec> sequence;  // per-step estimates (sequence mode only)
};

/// Window residual stack for a constant parameter (N n entries, unweighted).
Vec window_residuals(const UncertainModel& model, const EstimationWindow& window, const Vec& r);

ParamEstimate estimate(const UncertainModel& model, const EstimationWindow& window,
                       const Vec& r_prev, const MheOptions& opts = {});

}  // namespace adaptcm
