#pragma once

// Uncertain discrete-time control-affine models
//
//   x+ = f(r, x) + g(r, x) u,    r in a known parameter box,
//
// together with their differential dynamics A = d(f + g u)/dx, B = g.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptcm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box {z : lower <= z <= upper}.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vec& z, double tol = 0.0) const;
  Vec clip(const Vec& z) const;
  Vec midpoint() const { return 0.5 * (lower + upper); }
};

using ParamBox = Box;

/// Uniform mesh over a box, one count per dimension. A count of 1 selects the
/// midpoint of that dimension. The first dimension varies slowest.
std::vector<Vec> grid(const Box& box, const std::vector<int>& counts);

struct Jacobians {
  Mat A;
  Mat B;
};

class UncertainModel {
 public:
  virtual ~UncertainModel() = default;

  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int param_dim() const = 0;

  virtual const Box& state_box() const = 0;
  virtual const Box& input_box() const = 0;
  virtual const ParamBox& param_box() const = 0;

  /// x+ = f(r, x) + g(r, x) u
  Vec step(const Vec& r, const Vec& x, const Vec& u) const;
  Jacobians jacobians(const Vec& r, const Vec& x, const Vec& u) const;
  /// d x+ / d r, n x l. Used by parameter identification.
  Mat param_jacobian(const Vec& r, const Vec& x, const Vec& u) const;

  /// Equilibrium (x*, u*) with x* = f(r, x*) + g(r, x*) u*, selected by a
  /// model-specific setpoint. Returns nullopt if no equilibrium lies in the
  /// state box. The default implementation has no notion of setpoints.
  virtual std::optional<std::pair<Vec, Vec>> equilibrium(const Vec& r, const Vec& setpoint) const;

  virtual std::string name() const { return "model"; }

 protected:
  virtual Vec drift(const Vec& r, const Vec& x) const = 0;
  virtual Mat input_matrix(const Vec& r, const Vec& x) const = 0;
  /// d(f + g u)/dx.
  virtual Mat state_jacobian(const Vec& r, const Vec& x, const Vec& u) const = 0;
  /// d(f + g u)/dr; central differences unless overridden.
  virtual Mat parameter_jacobian(const Vec& r, const Vec& x, const Vec& u) const;

  void check_dims(const Vec& r, const Vec& x, const Vec& u) const;

 private:
  void warn_if_outside(const Vec& r) const;
};

/// Model assembled from callables; convenient for studies and tests.
class LambdaModel final : public UncertainModel {
 public:
  using DriftFn = std::function<Vec(const Vec& r, const Vec& x)>;
  using InputFn = std::function<Mat(const Vec& r, const Vec& x)>;
  using JacFn = std::function<Mat(const Vec& r, const Vec& x, const Vec& u)>;

  LambdaModel(Box state_box, Box input_box, ParamBox param_box, DriftFn f, InputFn g, JacFn a,
              JacFn dr = nullptr);

  int state_dim() const override { return static_cast<int>(state_box_.dim()); }
  int input_dim() const override { return static_cast<int>(input_box_.dim()); }
  int param_dim() const override { return static_cast<int>(param_box_.dim()); }
  const Box& state_box() const override { return state_box_; }
  const Box& input_box() const override { return input_box_; }
  const ParamBox& param_box() const override { return param_box_; }

  /// x+ = a x + b u on the given boxes (A and B constant).
  static LambdaModel linear(const Mat& a, const Mat& b, Box state_box, Box input_box,
                            ParamBox param_box);

 protected:
  Vec drift(const Vec& r, const Vec& x) const override { return f_(r, x); }
  Mat input_matrix(const Vec& r, const Vec& x) const override { return g_(r, x); }
  Mat state_jacobian(const Vec& r, const Vec& x, const Vec& u) const override {
    return a_(r, x, u);
  }
  Mat parameter_jacobian(const Vec& r, const Vec& x, const Vec& u) const override;

 private:
  Box state_box_, input_box_;
  ParamBox param_box_;
  DriftFn f_;
  InputFn g_;
  JacFn a_;
  JacFn dr_;
};

/// Number of out-of-box parameter warnings emitted so far (process-wide).
long parameter_warning_count();
void set_warnings_enabled(bool enabled);
void warn(const std::string& message);

}  // namespace adaptcm
