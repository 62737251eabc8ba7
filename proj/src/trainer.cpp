#include "adaptcm/trainer.hpp"

#include "adaptcm/io.hpp"
#include "adaptcm/linalg.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace adaptcm {

void TrainerConfig::validate(int state_dim) const {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("trainer.beta must lie in (0, 1]");
  if (!(beta_relaxed > 0.0 && beta_relaxed <= beta)) {
    throw std::invalid_argument("trainer.beta_relaxed must lie in (0, beta]");
  }
  auto check_eps = [&](const std::vector<double>& eps, const char* name) {
    if (static_cast<int>(eps.size()) != state_dim) {
      throw std::invalid_argument(std::string("trainer.") + name + " needs one margin per state");
    }
    for (double e : eps)
      if (!(e > 0.0)) throw std::invalid_argument(std::string("trainer.") + name + " must be positive");
  };
  check_eps(eps_metric, "eps_metric");
  check_eps(eps_omega, "eps_omega");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("trainer.learning_rate must be positive");
  if (max_iterations < 0) throw std::invalid_argument("trainer.max_iterations must be >= 0");
  if (hidden.empty()) throw std::invalid_argument("trainer.hidden needs at least one layer");
}

std::vector<TrainingSample> generate_dataset(const UncertainModel& model, const TrainerConfig& cfg) {
  const auto us = grid(model.input_box(), cfg.input_counts);
  const auto xs = grid(model.state_box(), cfg.state_counts);
  const auto rs = grid(model.param_box(), cfg.param_counts);
  if (us.empty() || xs.empty() || rs.empty()) throw std::invalid_argument("empty training grid");
  std::vector<TrainingSample> data;
  data.reserve(us.size() * xs.size() * rs.size());
  for (const Vec& u : us) {
    for (const Vec& x : xs) {
      for (const Vec& r : rs) {
        TrainingSample s;
        s.r = r;
        s.x = x;
        s.u = u;
        s.x_next = model.step(r, x, u);
        Jacobians j = model.jacobians(r, x, u);
        s.A = std::move(j.A);
        s.B = std::move(j.B);
        data.push_back(std::move(s));
      }
    }
  }
  return data;
}

void write_dataset(std::ostream& out, const std::vector<TrainingSample>& data) {
  if (data.empty()) {
    out << "# empty\n";
    return;
  }
  const auto n = data[0].x.size(), m = data[0].u.size(), l = data[0].r.size();
  out << "#";
  auto cols = [&](const char* tag, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) out << ' ' << tag << i + 1;
  };
  cols("r", l);
  cols("x", n);
  cols("u", m);
  cols("xn", n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out << " A" << i + 1 << j + 1;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out << " B" << i + 1 << j + 1;
  out << '\n';
  for (const TrainingSample& s : data) {
    bool first = true;
    auto put = [&](double v) {
      out << (first ? "" : " ") << format_double(v);
      first = false;
    };
    for (Eigen::Index i = 0; i < l; ++i) put(s.r[i]);
    for (Eigen::Index i = 0; i < n; ++i) put(s.x[i]);
    for (Eigen::Index i = 0; i < m; ++i) put(s.u[i]);
    for (Eigen::Index i = 0; i < n; ++i) put(s.x_next[i]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) put(s.A(i, j));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) put(s.B(i, j));
    out << '\n';
  }
}

std::vector<TrainingSample> read_dataset(std::istream& in, int n, int m, int l) {
  std::vector<TrainingSample> data;
  const int width = l + n + m + n + n * n + n * m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    for (const std::string& tok : split(line, ' ')) {
      if (!tok.empty()) v.push_back(parse_double(tok));
    }
    if (static_cast<int>(v.size()) != width) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " columns, got " + std::to_string(v.size()));
    }
    std::size_t k = 0;
    auto take = [&](int count) {
      Vec out(count);
      for (int i = 0; i < count; ++i) out[i] = v[k++];
      return out;
    };
    TrainingSample s;
    s.r = take(l);
    s.x = take(n);
    s.u = take(m);
    s.x_next = take(n);
    s.A.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s.A(i, j) = v[k++];
    s.B.resize(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) s.B(i, j) = v[k++];
    data.push_back(std::move(s));
  }
  return data;
}

// ---- loss ----

LossGraph::LossGraph(const NetworkWeights& shape, const TrainerConfig& cfg, const Box& state_box)
    : state_box_(state_box),
      num_params_(shape.num_parameters()),
      n_(shape.dims().state_dim),
      m_(shape.dims().input_dim),
      l_(shape.dims().param_dim) {
  cfg.validate(n_);
  using ad::Var;
  ad::Graph& g = graph_;
  std::vector<Var> params, r, x, xn;
  for (std::size_t i = 0; i < num_params_; ++i) params.push_back(ad::input(g));
  for (int i = 0; i < l_; ++i) r.push_back(ad::input(g));
  for (int i = 0; i < n_; ++i) x.push_back(ad::input(g));
  for (int i = 0; i < n_; ++i) xn.push_back(ad::input(g));
  ad::ExprMatrix a(static_cast<std::size_t>(n_), static_cast<std::size_t>(n_), Var{});
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) a(i, j) = ad::input(g);
  ad::ExprMatrix b(static_cast<std::size_t>(n_), static_cast<std::size_t>(m_), Var{});
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < m_; ++j) b(i, j) = ad::input(g);

  // Siamese branches: same parameter nodes, different state inputs.
  const auto out_k = network_expr(shape, params, scale_inputs_expr(shape, x, r));
  const auto out_next =
      network_expr(shape, params, scale_inputs_expr(shape, xn, r), shape.dims().metric_outputs());
  const ad::ExprMatrix mk = unpack_metric_expr(out_k, n_);
  const ad::ExprMatrix kk = unpack_gain_expr(out_k, n_, m_);
  const ad::ExprMatrix mn = unpack_metric_expr(out_next, n_);

  const ad::ExprMatrix acl = a + b * kk;
  const ad::ExprMatrix omega = (1.0 - cfg.beta) * mk + (-(acl.transpose() * mn * acl));

  Var total = ad::constant(g, 0.0);
  for (const Var& minor : ad::det_leading_minors(mk)) metric_minors_.push_back(minor.id());
  for (const Var& minor : ad::det_leading_minors(omega)) omega_minors_.push_back(minor.id());
  for (int i = 0; i < n_; ++i) {
    total = total + ad::relu(cfg.eps_metric[static_cast<std::size_t>(i)] -
                             Var(&g, metric_minors_[static_cast<std::size_t>(i)]));
  }
  for (int j = 0; j < n_; ++j) {
    total = total + ad::relu(cfg.eps_omega[static_cast<std::size_t>(j)] -
                             Var(&g, omega_minors_[static_cast<std::size_t>(j)]));
  }
  loss_ = total.id();
  inputs_.assign(g.num_inputs(), 0.0);
}

SampleLoss LossGraph::evaluate(std::span<const double> params, const TrainingSample& s,
                               std::span<double> grad) {
  if (params.size() != num_params_) throw ShapeMismatch("loss: parameter count mismatch");
  if (s.r.size() != l_ || s.x.size() != n_ || s.x_next.size() != n_ || s.A.rows() != n_ ||
      s.A.cols() != n_ || s.B.rows() != n_ || s.B.cols() != m_) {
    throw DimensionError("loss: sample dimensions do not match the network");
  }
  std::copy(params.begin(), params.end(), inputs_.begin());
  std::size_t k = num_params_;
  for (int i = 0; i < l_; ++i) inputs_[k++] = s.r[i];
  for (int i = 0; i < n_; ++i) inputs_[k++] = s.x[i];
  const Vec xn = state_box_.clip(s.x_next);
  for (int i = 0; i < n_; ++i) inputs_[k++] = xn[i];
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) inputs_[k++] = s.A(i, j);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < m_; ++j) inputs_[k++] = s.B(i, j);

  graph_.forward(inputs_);
  SampleLoss out;
  out.loss = graph_.value(loss_);
  for (ad::NodeId id : metric_minors_) out.metric_minors.push_back(graph_.value(id));
  for (ad::NodeId id : omega_minors_) out.omega_minors.push_back(graph_.value(id));
  if (!grad.empty() && out.loss > 0.0) {
    if (grad.size() != num_params_) throw ShapeMismatch("loss: gradient size mismatch");
    std::vector<double> all(graph_.num_inputs(), 0.0);
    const std::pair<ad::NodeId, double> seed{loss_, 1.0};
    graph_.backward(std::span(&seed, 1), all);
    for (std::size_t i = 0; i < num_params_; ++i) grad[i] += all[i];
  }
  return out;
}

LossAndGradient loss(const NetworkWeights& w, const TrainingSample& sample,
                     const TrainerConfig& cfg, const Box& state_box) {
  LossGraph lg(w, cfg, state_box);
  const Vec p = w.flatten();
  LossAndGradient out;
  out.gradient = Vec::Zero(p.size());
  out.loss = lg.evaluate(std::span(p.data(), static_cast<std::size_t>(p.size())), sample,
                         std::span(out.gradient.data(), static_cast<std::size_t>(p.size())))
                 .loss;
  return out;
}

// ---- training ----

namespace {

std::string describe_nonfinite(LossGraph& lg, std::span<const double> params,
                               const std::vector<TrainingSample>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SampleLoss sl = lg.evaluate(params, data[i], {});
    if (!std::isfinite(sl.loss)) {
      std::ostringstream os;
      os << "non-finite loss at sample " << i << " (metric minors:";
      for (double v : sl.metric_minors) os << ' ' << v;
      os << "; omega minors:";
      for (double v : sl.omega_minors) os << ' ' << v;
      os << ')';
      return os.str();
    }
  }
  return "non-finite total loss";
}

}  // namespace

TrainResult train(const UncertainModel& model, const TrainerConfig& cfg) {
  cfg.validate(model.state_dim());
  const auto data = generate_dataset(model, cfg);
  NetworkDims dims{model.state_dim(), model.input_dim(), model.param_dim()};
  auto init = NetworkWeights::initialize(dims, cfg.hidden, model.state_box(), model.param_box(),
                                         cfg.seed);
  return train(model, cfg, data, std::move(init));
}

TrainResult train(const UncertainModel& model, const TrainerConfig& cfg,
                  const std::vector<TrainingSample>& data, NetworkWeights initial) {
  cfg.validate(model.state_dim());
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  LossGraph lg(initial, cfg, model.state_box());
  Vec params = initial.flatten();
  const auto count = static_cast<std::size_t>(params.size());
  const std::span<const double> pspan(params.data(), count);
  Vec grad(params.size()), m1 = Vec::Zero(params.size()), m2 = Vec::Zero(params.size());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  TrainResult result{std::move(initial), {}, 0, false};
  while (true) {
    grad.setZero();
    const std::span<double> gspan(grad.data(), count);
    double total = 0.0;
    for (const TrainingSample& s : data) total += lg.evaluate(pspan, s, gspan).loss;
    if (!std::isfinite(total)) throw TrainingError(describe_nonfinite(lg, pspan, data));
    result.loss_history.push_back(total);
    if (total < cfg.loss_tolerance) {
      result.converged = true;
      break;
    }
    if (result.steps >= cfg.max_iterations) break;
    ++result.steps;
    if (cfg.optimizer == Optimizer::GradientDescent) {
      params -= cfg.learning_rate * grad;
    } else {
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(kBeta1, result.steps);
      const double c2 = 1.0 - std::pow(kBeta2, result.steps);
      params.array() -= cfg.learning_rate * (m1.array() / c1) /
                        ((m2.array() / c2).sqrt() + kAdamEps);
    }
  }
  result.weights.assign(pspan);
  return result;
}

// ---- verification ----

VerifyMesh VerifyMesh::refined(const TrainerConfig& cfg) {
  auto refine = [](const std::vector<int>& c) {
    std::vector<int> out;
    for (int v : c) out.push_back(v > 1 ? 2 * v - 1 : 1);
    return out;
  };
  return {refine(cfg.state_counts), refine(cfg.input_counts), refine(cfg.param_counts)};
}

VerificationReport verify(const NetworkWeights& w, const UncertainModel& model,
                          const TrainerConfig& cfg, const VerifyMesh& mesh) {
  const auto us = grid(model.input_box(), mesh.input_counts);
  const auto xs = grid(model.state_box(), mesh.state_counts);
  const auto rs = grid(model.param_box(), mesh.param_counts);
  VerificationReport rep;
  rep.beta = cfg.beta;
  rep.beta_relaxed = cfg.beta_relaxed;
  rep.metric_eig_min = std::numeric_limits<double>::infinity();
  rep.metric_eig_max = -std::numeric_limits<double>::infinity();
  rep.cells.reserve(us.size() * xs.size() * rs.size());
  std::size_t pass = 0, pass_relaxed = 0;
  for (const Vec& u : us) {
    for (const Vec& x : xs) {
      for (const Vec& r : rs) {
        const Vec xn = model.state_box().clip(model.step(r, x, u));
        const Jacobians j = model.jacobians(r, x, u);
        const SiameseOutput net = evaluate_siamese(w, x, xn, r);
        const Mat acl = j.A + j.B * net.current.K;
        const Mat push = acl.transpose() * net.next_metric * acl;
        VerificationCell c;
        c.x = x;
        c.u = u;
        c.r = r;
        c.min_eig_omega = min_eigenvalue((1.0 - cfg.beta) * net.current.M - push);
        c.min_eig_omega_relaxed = min_eigenvalue((1.0 - cfg.beta_relaxed) * net.current.M - push);
        const Vec me = symmetric_eigenvalues(net.current.M);
        c.min_eig_metric = me[0];
        c.max_eig_metric = me[me.size() - 1];
        c.metric_minors_positive = true;
        for (double d : leading_minors(net.current.M)) c.metric_minors_positive &= d > 0.0;
        pass += c.min_eig_omega > 0.0;
        pass_relaxed += c.min_eig_omega_relaxed > 0.0;
        rep.metric_eig_min = std::min(rep.metric_eig_min, c.min_eig_metric);
        rep.metric_eig_max = std::max(rep.metric_eig_max, c.max_eig_metric);
        rep.cells.push_back(std::move(c));
      }
    }
  }
  const double total = static_cast<double>(rep.cells.size());
  rep.pass_fraction = total > 0 ? pass / total : 0.0;
  rep.pass_fraction_relaxed = total > 0 ? pass_relaxed / total : 0.0;
  return rep;
}

void write_report_text(std::ostream& out, const VerificationReport& rep) {
  out << "cells = " << rep.cells.size() << '\n'
      << "beta = " << format_double(rep.beta) << '\n'
      << "beta_relaxed = " << format_double(rep.beta_relaxed) << '\n'
      << "pass_fraction = " << format_double(rep.pass_fraction) << '\n'
      << "pass_fraction_relaxed = " << format_double(rep.pass_fraction_relaxed) << '\n'
      << "metric_eig_min = " << format_double(rep.metric_eig_min) << '\n'
      << "metric_eig_max = " << format_double(rep.metric_eig_max) << '\n'
      << "metric_positive = " << (rep.metric_positive() ? "true" : "false") << '\n';
}

void write_report_csv(std::ostream& out, const VerificationReport& rep) {
  if (rep.cells.empty()) return;
  const auto& c0 = rep.cells.front();
  for (Eigen::Index i = 0; i < c0.x.size(); ++i) out << 'x' << i + 1 << ',';
  for (Eigen::Index i = 0; i < c0.u.size(); ++i) out << 'u' << i + 1 << ',';
  for (Eigen::Index i = 0; i < c0.r.size(); ++i) out << 'r' << i + 1 << ',';
  out << "min_eig_omega,min_eig_omega_relaxed,min_eig_metric,max_eig_metric,metric_minors_positive\n";
  for (const auto& c : rep.cells) {
    for (Eigen::Index i = 0; i < c.x.size(); ++i) out << format_double(c.x[i]) << ',';
    for (Eigen::Index i = 0; i < c.u.size(); ++i) out << format_double(c.u[i]) << ',';
    for (Eigen::Index i = 0; i < c.r.size(); ++i) out << format_double(c.r[i]) << ',';
    out << format_double(c.min_eig_omega) << ',' << format_double(c.min_eig_omega_relaxed) << ','
        << format_double(c.min_eig_metric) << ',' << format_double(c.max_eig_metric) << ','
        << (c.metric_minors_positive ? 1 : 0) << '\n';
  }
}

}  // namespace adaptcm
