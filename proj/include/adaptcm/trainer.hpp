#pragma once

// Offline learning of a contraction metric / differential gain pair.
//
// For every sample (r, x_k, u_k) of a mesh over the input, state and parameter
// boxes the network is evaluated twice with shared weights, at (x_k, r) and at
// (x_{k+1}, r), and the hinge loss
//
//   L = sum_i max(0, eps_M_i - |M_(1,i)|) + sum_j max(0, eps_O_j - |Omega_(1,j)|),
//   Omega = (1 - beta) M_k - (A + B K_k)^T M_{k+1} (A + B K_k),
//
// over leading principal minors is minimised for the whole mesh as one batch.

#include "adaptcm/autodiff.hpp"
#include "adaptcm/model.hpp"
#include "adaptcm/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptcm {

enum class Optimizer { Adam, GradientDescent };

struct TrainerConfig {
  double beta = 0.26;
  double beta_relaxed = 0.21;
  std::vector<double> eps_metric{0.01, 0.01};
  std::vector<double> eps_omega{0.01, 0.01};
  double learning_rate = 1e-3;
  int max_iterations = 1000;
  double loss_tolerance = 1e-6;
  Optimizer optimizer = Optimizer::Adam;
  std::vector<int> hidden{15, 15, 15};
  std::vector<int> state_counts{11, 13};
  std::vector<int> input_counts{5};
  std::vector<int> param_counts{5, 5};
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate(int state_dim) const;
};

struct TrainingSample {
  Vec r;
  Vec x;
  Vec u;
  Vec x_next;  // unclipped propagation
  Mat A;
  Mat B;
};

/// One sample per (u, x, r) mesh point; u varies slowest, r fastest.
std::vector<TrainingSample> generate_dataset(const UncertainModel& model, const TrainerConfig& cfg);

/// Columnar text: one sample per row, columns r, x, u, x_next, A (row-major),
/// then B (row-major), preceded by a '#' header naming each column.
void write_dataset(std::ostream& out, const std::vector<TrainingSample>& data);
std::vector<TrainingSample> read_dataset(std::istream& in, int n, int m, int l);

struct SampleLoss {
  double loss = 0.0;
  std::vector<double> metric_minors;
  std::vector<double> omega_minors;
};

/// Compiled loss of a single sample as a function of the network parameters.
/// The graph is built once; each call re-evaluates it.
class LossGraph {
 public:
  LossGraph(const NetworkWeights& shape, const TrainerConfig& cfg, const Box& state_box);

  /// Loss at (params, sample); when `grad` is non-empty the parameter gradient
  /// is added into it.
  SampleLoss evaluate(std::span<const double> params, const TrainingSample& sample,
                      std::span<double> grad);

  std::size_t graph_size() const { return graph_.size(); }

 private:
  ad::Graph graph_;
  Box state_box_;
  std::size_t num_params_ = 0;
  int n_ = 0, m_ = 0, l_ = 0;
  std::vector<ad::NodeId> metric_minors_, omega_minors_;
  ad::NodeId loss_ = 0;
  std::vector<double> inputs_;
};

struct LossAndGradient {
  double loss = 0.0;
  Vec gradient;
};

/// Loss of one sample and its gradient with respect to flatten() order.
LossAndGradient loss(const NetworkWeights& w, const TrainingSample& sample,
                     const TrainerConfig& cfg, const Box& state_box);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> loss_history;  // total batch loss before each step, plus the final value
  int steps = 0;
  bool converged = false;
};

TrainResult train(const UncertainModel& model, const TrainerConfig& cfg);
TrainResult train(const UncertainModel& model, const TrainerConfig& cfg,
                  const std::vector<TrainingSample>& data, NetworkWeights initial);

struct VerificationCell {
  Vec x, u, r;
  double min_eig_omega = 0.0;          // at beta
  double min_eig_omega_relaxed = 0.0;  // at beta_relaxed
  double min_eig_metric = 0.0;
  double max_eig_metric = 0.0;
  bool metric_minors_positive = false;
};

struct VerificationReport {
  std::vector<VerificationCell> cells;
  double pass_fraction = 0.0;          // Omega > 0 at beta
  double pass_fraction_relaxed = 0.0;  // Omega > 0 at beta_relaxed
  double metric_eig_min = 0.0;
  double metric_eig_max = 0.0;
  double beta = 0.0;
  double beta_relaxed = 0.0;

  bool metric_positive() const { return metric_eig_min > 0.0; }
};

/// Mesh counts default to the training counts refined by halving the spacing.
struct VerifyMesh {
  std::vector<int> state_counts, input_counts, param_counts;
  static VerifyMesh refined(const TrainerConfig& cfg);
};

VerificationReport verify(const NetworkWeights& w, const UncertainModel& model,
                          const TrainerConfig& cfg, const VerifyMesh& mesh);

void write_report_text(std::ostream& out, const VerificationReport& report);
void write_report_csv(std::ostream& out, const VerificationReport& report);

}  // namespace adaptcm
