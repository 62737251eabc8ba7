#pragma once

// Discrete geodesics of a state-dependent Riemannian metric.
//
// A path is piecewise linear with S segments, nodes[0] = x* and nodes[S] = x.
// The metric is evaluated at segment midpoints, so
//
//   length = sum_i sqrt(dx_i^T M(mid_i) dx_i),   energy = S * sum_i dx_i^T M(mid_i) dx_i.
//
// Interior nodes minimise the energy (whose minimisers are constant-speed
// length minimisers). The length is read off the optimised path.

#include "adaptcm/autodiff.hpp"
#include "adaptcm/model.hpp"
#include "adaptcm/network.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace adaptcm {

class Metric {
 public:
  virtual ~Metric() = default;
  virtual int dim() const = 0;
  virtual Mat value(const Vec& x) const = 0;
  /// The same metric as an expression of `x`.
  virtual ad::ExprMatrix expr(ad::Graph& g, std::span<const ad::Var> x) const = 0;
};

/// M_NN(x, r_hat) of a trained network; only the metric outputs are used.
class NetworkMetric final : public Metric {
 public:
  NetworkMetric(const NetworkWeights& w, Vec r_hat);
  int dim() const override { return w_->dims().state_dim; }
  Mat value(const Vec& x) const override;
  ad::ExprMatrix expr(ad::Graph& g, std::span<const ad::Var> x) const override;

 private:
  const NetworkWeights* w_;
  Vec r_hat_;
};

/// Metric given by a pair of callables (value and expression form).
class FunctionMetric final : public Metric {
 public:
  using ValueFn = std::function<Mat(const Vec&)>;
  using ExprFn = std::function<ad::ExprMatrix(ad::Graph&, std::span<const ad::Var>)>;

  FunctionMetric(int dim, ValueFn value, ExprFn expr);
  static FunctionMetric constant(const Mat& m);

  int dim() const override { return dim_; }
  Mat value(const Vec& x) const override { return value_(x); }
  ad::ExprMatrix expr(ad::Graph& g, std::span<const ad::Var> x) const override {
    return expr_(g, x);
  }

 private:
  int dim_;
  ValueFn value_;
  ExprFn expr_;
};

class GeodesicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeodesicOptions {
  int segments = 20;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  /// Interior nodes are clipped to this box after every step when set.
  std::optional<Box> box;
};

struct GeodesicPath {
  std::vector<Vec> nodes;  // S + 1 nodes, nodes.front() = x*, nodes.back() = x
  int segments = 0;
  Vec r_hat;  // parameter the metric was evaluated at (empty for plain metrics)
  double length = 0.0;
  double energy = 0.0;
  double chord_length = 0.0;  // length of the straight initialisation
  int iterations = 0;
  bool converged = false;  // false: iteration cap or stalled line search; best path returned
};

double path_length(const Metric& metric, const std::vector<Vec>& nodes);
double path_energy(const Metric& metric, const std::vector<Vec>& nodes);

GeodesicPath geodesic(const Metric& metric, const Vec& x_star, const Vec& x,
                      const GeodesicOptions& opts = {});

/// Network metric at r_hat; the box defaults to the network's state box.
GeodesicPath geodesic(const NetworkWeights& w, const Vec& x, const Vec& x_star, const Vec& r_hat,
                      GeodesicOptions opts = {});

double distance(const Metric& metric, const Vec& x, const Vec& x_star,
                const GeodesicOptions& opts = {});
double distance(const NetworkWeights& w, const Vec& x, const Vec& x_star, const Vec& r_hat,
                GeodesicOptions opts = {});

}  // namespace adaptcm
