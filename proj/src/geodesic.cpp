#include "adaptcm/geodesic.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace adaptcm {

NetworkMetric::NetworkMetric(const NetworkWeights& w, Vec r_hat) : w_(&w), r_hat_(std::move(r_hat)) {
  if (r_hat_.size() != w.dims().param_dim) throw DimensionError("metric: parameter dimension");
}

Mat NetworkMetric::value(const Vec& x) const { return evaluate(*w_, x, r_hat_).M; }

ad::ExprMatrix NetworkMetric::expr(ad::Graph& g, std::span<const ad::Var> x) const {
  std::vector<ad::Var> r;
  for (Eigen::Index i = 0; i < r_hat_.size(); ++i) r.push_back(ad::constant(g, r_hat_[i]));
  const auto params = constant_params(g, *w_);
  const auto out =
      network_expr(*w_, params, scale_inputs_expr(*w_, x, r), w_->dims().metric_outputs());
  return unpack_metric_expr(out, w_->dims().state_dim);
}

FunctionMetric::FunctionMetric(int dim, ValueFn value, ExprFn expr)
    : dim_(dim), value_(std::move(value)), expr_(std::move(expr)) {}

FunctionMetric FunctionMetric::constant(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  return FunctionMetric(
      n, [m](const Vec&) { return m; },
      [m](ad::Graph& g, std::span<const ad::Var>) {
        ad::ExprMatrix e(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                         ad::Var{});
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j) e(i, j) = ad::constant(g, m(i, j));
        return e;
      });
}

namespace {

double segment_quadratic(const Metric& metric, const Vec& a, const Vec& b) {
  const Vec d = b - a;
  const Mat m = metric.value(0.5 * (a + b));
  const double q = d.dot(m * d);
  if (!std::isfinite(q)) throw GeodesicError("non-finite metric evaluation on path");
  return q;
}

// Energy of the path as a function of the interior node coordinates.
class EnergyGraph {
 public:
  EnergyGraph(const Metric& metric, const Vec& x_star, const Vec& x, int segments)
      : n_(static_cast<int>(x.size())), segments_(segments) {
    using ad::Var;
    const int interior = (segments - 1) * n_;
    std::vector<Var> z;
    for (int i = 0; i < interior; ++i) z.push_back(ad::input(g_));
    std::vector<Var> start, end;
    for (int d = 0; d < n_; ++d) {
      start.push_back(ad::constant(g_, x_star[d]));
      end.push_back(ad::constant(g_, x[d]));
    }
    auto coord = [&](int node, int d) -> Var {
      if (node == 0) return start[static_cast<std::size_t>(d)];
      if (node == segments) return end[static_cast<std::size_t>(d)];
      return z[static_cast<std::size_t>((node - 1) * n_ + d)];
    };
    const Var half = ad::constant(g_, 0.5);
    Var total = ad::constant(g_, 0.0);
    for (int i = 0; i < segments; ++i) {
      std::vector<Var> delta, mid;
      for (int d = 0; d < n_; ++d) {
        delta.push_back(coord(i + 1, d) - coord(i, d));
        mid.push_back(half * (coord(i + 1, d) + coord(i, d)));
      }
      const ad::ExprMatrix m = metric.expr(g_, mid);
      for (int a = 0; a < n_; ++a) {
        for (int b = 0; b < n_; ++b) {
          total = total + delta[static_cast<std::size_t>(a)] * m(a, b) * delta[static_cast<std::size_t>(b)];
        }
      }
    }
    energy_ = (static_cast<double>(segments) * total).id();
  }

  double value(const std::vector<double>& z) {
    g_.forward(z);
    return g_.value(energy_);
  }

  double value_and_gradient(const std::vector<double>& z, std::vector<double>& grad) {
    g_.forward(z);
    grad.assign(z.size(), 0.0);
    const std::pair<ad::NodeId, double> seed{energy_, 1.0};
    g_.backward(std::span(&seed, 1), grad);
    return g_.value(energy_);
  }

 private:
  ad::Graph g_;
  int n_;
  int segments_;
  ad::NodeId energy_ = 0;
};

// Solves H y = rhs with H = 2S sum_i D_i^T M(mid_i) D_i, the energy Hessian with
// the metric frozen at the current midpoints (block tridiagonal, block Thomas
// algorithm). Returns nullopt if a pivot block is not positive definite.
std::optional<std::vector<double>> precondition(const std::vector<Mat>& mids,
                                                const std::vector<double>& rhs, int n) {
  const int k = static_cast<int>(mids.size()) - 1;  // interior nodes
  const double scale = 2.0 * static_cast<double>(mids.size());
  std::vector<Mat> c(static_cast<std::size_t>(k));
  std::vector<Vec> d(static_cast<std::size_t>(k));
  Mat upper_prev;
  for (int i = 0; i < k; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Mat diag = scale * (mids[ui] + mids[ui + 1]);
    const Mat lower = -scale * mids[ui];  // couples node i with node i - 1
    Vec r = Eigen::Map<const Vec>(rhs.data() + static_cast<std::ptrdiff_t>(i) * n, n);
    if (i > 0) {
      diag -= lower * c[ui - 1];
      r -= lower * d[ui - 1];
    }
    Eigen::LLT<Mat> llt(0.5 * (diag + diag.transpose()));
    if (llt.info() != Eigen::Success) return std::nullopt;
    c[ui] = llt.solve(-scale * mids[ui + 1]);
    d[ui] = llt.solve(r);
  }
  std::vector<double> out(rhs.size());
  Vec next = d[static_cast<std::size_t>(k - 1)];
  for (int i = k - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    if (i < k - 1) next = d[ui] - c[ui] * next;
    for (int j = 0; j < n; ++j) out[ui * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] = next[j];
  }
  return out;
}

std::vector<Vec> to_nodes(const Vec& x_star, const Vec& x, const std::vector<double>& z, int segments) {
  const auto n = x.size();
  std::vector<Vec> nodes;
  nodes.reserve(static_cast<std::size_t>(segments + 1));
  nodes.push_back(x_star);
  for (int i = 1; i < segments; ++i) {
    Vec p(n);
    for (Eigen::Index d = 0; d < n; ++d) p[d] = z[static_cast<std::size_t>((i - 1) * n + d)];
    nodes.push_back(std::move(p));
  }
  nodes.push_back(x);
  return nodes;
}

}  // namespace

double path_length(const Metric& metric, const std::vector<Vec>& nodes) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    total += std::sqrt(std::max(0.0, segment_quadratic(metric, nodes[i], nodes[i + 1])));
  }
  return total;
}

double path_energy(const Metric& metric, const std::vector<Vec>& nodes) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    total += segment_quadratic(metric, nodes[i], nodes[i + 1]);
  }
  return static_cast<double>(nodes.size() - 1) * total;
}

GeodesicPath geodesic(const Metric& metric, const Vec& x_star, const Vec& x,
                      const GeodesicOptions& opts) {
  if (x.size() != metric.dim() || x_star.size() != metric.dim()) {
    throw DimensionError("geodesic: endpoint dimension mismatch");
  }
  if (opts.segments < 1) throw std::invalid_argument("geodesic: need at least one segment");
  if (!x.allFinite() || !x_star.allFinite()) throw GeodesicError("geodesic: non-finite endpoint");
  const int n = metric.dim();
  const int s = opts.segments;

  GeodesicPath path;
  path.segments = s;
  std::vector<double> z(static_cast<std::size_t>((s - 1) * n));
  for (int i = 1; i < s; ++i) {
    const Vec p = x_star + (x - x_star) * (static_cast<double>(i) / s);
    for (int d = 0; d < n; ++d) z[static_cast<std::size_t>((i - 1) * n + d)] = p[d];
  }
  const std::vector<Vec> chord = to_nodes(x_star, x, z, s);
  path.chord_length = path_length(metric, chord);

  if (s == 1 || (x - x_star).squaredNorm() == 0.0) {
    path.nodes = chord;
    path.length = path.chord_length;
    path.energy = path_energy(metric, chord);
    path.converged = true;
    return path;
  }

  auto clip = [&](std::vector<double>& v) {
    if (!opts.box) return;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto d = static_cast<Eigen::Index>(k % static_cast<std::size_t>(n));
      v[k] = std::min(std::max(v[k], opts.box->lower[d]), opts.box->upper[d]);
    }
  };
  clip(z);

  EnergyGraph energy(metric, x_star, x, s);
  std::vector<double> grad;
  double e = energy.value_and_gradient(z, grad);
  if (!std::isfinite(e)) throw GeodesicError("geodesic: non-finite energy");
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iterations; ++it) {
    // Projected gradient: drop components blocked by an active bound.
    std::vector<double> pg = grad;
    if (opts.box) {
      for (std::size_t k = 0; k < pg.size(); ++k) {
        const auto d = static_cast<Eigen::Index>(k % static_cast<std::size_t>(n));
        if ((z[k] <= opts.box->lower[d] && pg[k] > 0.0) || (z[k] >= opts.box->upper[d] && pg[k] < 0.0))
          pg[k] = 0.0;
      }
    }
    double norm2 = 0.0;
    for (double g : pg) norm2 += g * g;
    if (std::sqrt(norm2) < opts.gradient_tolerance) {
      converged = true;
      break;
    }
    const std::vector<Vec> nodes = to_nodes(x_star, x, z, s);
    std::vector<Mat> mids;
    for (int i = 0; i < s; ++i) mids.push_back(metric.value(0.5 * (nodes[i] + nodes[i + 1])));
    std::vector<double> dir;
    if (auto pre = precondition(mids, pg, n)) {
      dir = std::move(*pre);
    } else {
      dir = *precondition(std::vector<Mat>(mids.size(), Mat::Identity(n, n)), pg, n);
    }
    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      std::vector<double> trial(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) trial[k] = z[k] - step * dir[k];
      clip(trial);
      double decrease = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) decrease += grad[k] * (z[k] - trial[k]);
      if (decrease <= 0.0) continue;
      const double et = energy.value(trial);
      if (std::isfinite(et) && et <= e - 1e-4 * decrease) {
        z = std::move(trial);
        e = energy.value_and_gradient(z, grad);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further progress is possible at this precision
  }
  path.iterations = it;
  path.converged = converged;
  path.nodes = to_nodes(x_star, x, z, s);
  path.length = path_length(metric, path.nodes);
  path.energy = path_energy(metric, path.nodes);
  if (!std::isfinite(path.length)) throw GeodesicError("geodesic: non-finite length");
  if (path.length > path.chord_length) {
    path.nodes = chord;
    path.length = path.chord_length;
    path.energy = path_energy(metric, chord);
  }
  return path;
}

GeodesicPath geodesic(const NetworkWeights& w, const Vec& x, const Vec& x_star, const Vec& r_hat,
                      GeodesicOptions opts) {
  if (!opts.box) opts.box = w.state_box();
  NetworkMetric metric(w, r_hat);
  GeodesicPath path = geodesic(metric, x_star, x, opts);
  path.r_hat = r_hat;
  return path;
}

double distance(const Metric& metric, const Vec& x, const Vec& x_star, const GeodesicOptions& opts) {
  return geodesic(metric, x_star, x, opts).length;
}

double distance(const NetworkWeights& w, const Vec& x, const Vec& x_star, const Vec& r_hat,
                GeodesicOptions opts) {
  return geodesic(w, x, x_star, r_hat, std::move(opts)).length;
}

}  // namespace adaptcm
