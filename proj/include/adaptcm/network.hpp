#pragma once

// Feedforward network mapping (x, r) to a symmetric metric M(x, r) and a
// differential feedback gain K(x, r).
//
// Inputs are affinely scaled to [-1, 1] with the state and parameter boxes the
// network was created for. The output vector packs the upper triangle of M row
// by row (n(n+1)/2 entries) followed by K row-major (m*n entries). Output
// entries are unconstrained; definiteness of M is a training objective.

#include "adaptcm/autodiff.hpp"
#include "adaptcm/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace adaptcm {

enum class Activation : std::uint8_t { Tanh, Identity };

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation activation = Activation::Tanh;
};

struct NetworkDims {
  int state_dim = 0;
  int input_dim = 0;
  int param_dim = 0;

  int input_width() const { return state_dim + param_dim; }
  int metric_outputs() const { return state_dim * (state_dim + 1) / 2; }
  int output_width() const { return metric_outputs() + input_dim * state_dim; }
  bool operator==(const NetworkDims&) const = default;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NetworkWeights {
 public:
  NetworkWeights(NetworkDims dims, std::vector<Layer> layers, Box state_box, ParamBox param_box);

  /// Hidden layers use tanh, the output layer is linear. Weights and biases are
  /// uniform in +-1/sqrt(fan_in), drawn from a seeded 64-bit Mersenne Twister.
  static NetworkWeights initialize(NetworkDims dims, const std::vector<int>& hidden,
                                   Box state_box, ParamBox param_box, std::uint64_t seed);

  const NetworkDims& dims() const { return dims_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Box& state_box() const { return state_box_; }
  const ParamBox& param_box() const { return param_box_; }

  std::size_t num_parameters() const;
  /// Per layer: weight row-major, then bias.
  Vec flatten() const;
  void assign(std::span<const double> params);

  /// Network input for (x, r), scaled to [-1, 1] on the boxes.
  Vec scale_inputs(const Vec& x, const Vec& r) const;
  /// Raw output vector for an already scaled input.
  Vec forward(const Vec& scaled) const;
  Vec outputs(const Vec& x, const Vec& r) const { return forward(scale_inputs(x, r)); }

 private:
  void validate() const;

  NetworkDims dims_;
  std::vector<Layer> layers_;
  Box state_box_;
  ParamBox param_box_;
};

struct MetricGainPair {
  Mat M;  // n x n, symmetric
  Mat K;  // m x n
};

struct SiameseOutput {
  MetricGainPair current;
  Mat next_metric;
};

Mat unpack_metric(const Vec& outputs, int n);
Mat unpack_gain(const Vec& outputs, int n, int m);

MetricGainPair evaluate(const NetworkWeights& w, const Vec& x, const Vec& r);

/// Both branches share `w`; next_metric is evaluate(w, x_next, r).M.
SiameseOutput evaluate_siamese(const NetworkWeights& w, const Vec& x_k, const Vec& x_next,
                               const Vec& r);

// ---- expression-graph form, for differentiation ----

/// Scaled network inputs as expressions of raw (x, r) expressions.
std::vector<ad::Var> scale_inputs_expr(const NetworkWeights& w, std::span<const ad::Var> x,
                                       std::span<const ad::Var> r);

/// Network outputs as expressions. `params` follows flatten() order
/// (typically graph inputs for training, or constants). Only the first
/// `output_count` outputs are built (all when negative).
std::vector<ad::Var> network_expr(const NetworkWeights& shape, std::span<const ad::Var> params,
                                  std::span<const ad::Var> scaled_inputs, int output_count = -1);

/// Network parameters as graph constants.
std::vector<ad::Var> constant_params(ad::Graph& g, const NetworkWeights& w);

ad::ExprMatrix unpack_metric_expr(std::span<const ad::Var> outputs, int n);
ad::ExprMatrix unpack_gain_expr(std::span<const ad::Var> outputs, int n, int m);

// ---- persistence ----

/// Versioned text container; floats are written as hex literals so a
/// round trip is bitwise exact.
std::string serialize(const NetworkWeights& w);
NetworkWeights deserialize(std::string_view text,
                           std::optional<NetworkDims> expected = std::nullopt);

void save_weights(const NetworkWeights& w, const std::string& path);
NetworkWeights load_weights(const std::string& path,
                            std::optional<NetworkDims> expected = std::nullopt);

}  // namespace adaptcm
