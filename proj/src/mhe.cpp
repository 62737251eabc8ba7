#include "adaptcm/mhe.hpp"

#include <cmath>

namespace adaptcm {

EstimationWindow::EstimationWindow(int horizon) : horizon_(horizon) {
  if (horizon < 1) throw std::invalid_argument("estimation horizon must be at least 1");
}

void EstimationWindow::push(const Vec& x, const Vec& u) {
  if (full()) entries_.pop_front();
  entries_.push_back({x, u});
}

void EstimationWindow::set_latest_input(const Vec& u) {
  if (entries_.empty()) throw std::logic_error("estimation window is empty");
  entries_.back().u = u;
}

Vec window_residuals(const UncertainModel& model, const EstimationWindow& window, const Vec& r) {
  const auto n = model.state_dim();
  Vec e(static_cast<Eigen::Index>(window.size() - 1) * n);
  for (std::size_t i = 1; i < window.size(); ++i) {
    const auto& prev = window[i - 1];
    e.segment(static_cast<Eigen::Index>(i - 1) * n, n) = model.step(r, prev.x, prev.u) - window[i].x;
  }
  return e;
}

namespace {

struct Problem {
  const UncertainModel& model;
  const EstimationWindow& window;
  const MheOptions& opts;
  int n, l, steps;
  int unknowns;
  Box box;  // box over the unknown vector
  Vec sqrt_w;

  Problem(const UncertainModel& m, const EstimationWindow& w, const MheOptions& o)
      : model(m), window(w), opts(o), n(m.state_dim()), l(m.param_dim()),
        steps(static_cast<int>(w.size()) - 1) {
    const int blocks = opts.per_step_sequence ? steps : 1;
    unknowns = blocks * l;
    box = Box(m.param_box().lower.replicate(blocks, 1), m.param_box().upper.replicate(blocks, 1));
    sqrt_w.resize(steps * n);
    if (!opts.step_weights.empty() && static_cast<int>(opts.step_weights.size()) != steps) {
      throw DimensionError("mhe: one step weight per window step required");
    }
    if (opts.state_weights.size() != 0 && opts.state_weights.size() != n) {
      throw DimensionError("mhe: one state weight per state component required");
    }
    for (int i = 0; i < steps; ++i) {
      const double ws = opts.step_weights.empty() ? 1.0 : opts.step_weights[static_cast<std::size_t>(i)];
      for (int d = 0; d < n; ++d) {
        const double wd = opts.state_weights.size() == 0 ? 1.0 : opts.state_weights[d];
        if (ws < 0.0 || wd < 0.0) throw std::invalid_argument("mhe: weights must be non-negative");
        sqrt_w[i * n + d] = std::sqrt(ws * wd);
      }
    }
  }

  Vec param_for(const Vec& z, int i) const {
    return opts.per_step_sequence ? Vec(z.segment(i * l, l)) : Vec(z);
  }

  Vec residuals(const Vec& z) const {
    Vec e(steps * n);
    for (int i = 0; i < steps; ++i) {
      const auto& prev = window[static_cast<std::size_t>(i)];
      e.segment(i * n, n) = model.step(param_for(z, i), prev.x, prev.u) - window[static_cast<std::size_t>(i + 1)].x;
    }
    return sqrt_w.cwiseProduct(e);
  }

  Mat jacobian(const Vec& z) const {
    Mat j = Mat::Zero(steps * n, unknowns);
    for (int i = 0; i < steps; ++i) {
      const auto& prev = window[static_cast<std::size_t>(i)];
      const Mat jr = model.param_jacobian(param_for(z, i), prev.x, prev.u);
      const int col = opts.per_step_sequence ? i * l : 0;
      j.block(i * n, col, n, l) = jr;
    }
    return sqrt_w.asDiagonal() * j;
  }
};

double cost(const Vec& e) {
  const double c = e.squaredNorm();
  if (!std::isfinite(c)) throw EstimationError("mhe: non-finite residual");
  return c;
}

// Gauss-Newton step for the free coordinates, the others held at their bounds.
Vec projected_step(const Problem& p, const Vec& z, const Vec& e, const Mat& j) {
  std::vector<bool> fixed(static_cast<std::size_t>(p.unknowns), false);
  Vec target = z;
  for (int round = 0; round <= p.unknowns; ++round) {
    std::vector<int> free_idx;
    for (int k = 0; k < p.unknowns; ++k)
      if (!fixed[static_cast<std::size_t>(k)]) free_idx.push_back(k);
    if (free_idx.empty()) break;
    // Linearised residual at the current target: e + J (target - z).
    const Vec lin = e + j * (target - z);
    Mat jf(j.rows(), static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t c = 0; c < free_idx.size(); ++c) jf.col(static_cast<Eigen::Index>(c)) = j.col(free_idx[c]);
    const Vec d = jf.colPivHouseholderQr().solve(-lin);
    bool newly_fixed = false;
    for (std::size_t c = 0; c < free_idx.size(); ++c) {
      const int k = free_idx[c];
      const double v = target[k] + d[static_cast<Eigen::Index>(c)];
      if (v < p.box.lower[k] || v > p.box.upper[k]) {
        fixed[static_cast<std::size_t>(k)] = true;
        newly_fixed = true;
      }
      target[k] = std::min(std::max(v, p.box.lower[k]), p.box.upper[k]);
    }
    if (!newly_fixed) break;
  }
  return target - z;
}

}  // namespace

ParamEstimate estimate(const UncertainModel& model, const EstimationWindow& window,
                       const Vec& r_prev, const MheOptions& opts) {
  if (!window.full() || window.size() < 2) throw std::logic_error("mhe: window not full");
  if (r_prev.size() != model.param_dim()) throw DimensionError("mhe: parameter dimension");
  Problem p(model, window, opts);

  const int blocks = opts.per_step_sequence ? p.steps : 1;
  const Vec z0 = p.box.clip(r_prev.replicate(blocks, 1));
  Vec z = z0;
  Vec e = p.residuals(z);
  double c = cost(e);

  ParamEstimate out;
  auto finish = [&](const Vec& zz, double cc) {
    out.residual = cc;
    if (opts.per_step_sequence) {
      for (int i = 0; i < p.steps; ++i) out.sequence.push_back(zz.segment(i * p.l, p.l));
      out.r_hat = out.sequence.back();
    } else {
      out.r_hat = zz;
    }
    return out;
  };

  Mat j = p.jacobian(z);
  const double smin = j.jacobiSvd().singularValues().minCoeff();
  if (!(smin >= opts.excitation_threshold) || j.rows() < j.cols()) {
    out.excited = false;
    out.held = true;
    return finish(z0, cost(p.residuals(z0)));
  }

  int accepted = 0;
  bool stalled = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vec dz = projected_step(p, z, e, j);
    if (dz.lpNorm<Eigen::Infinity>() <= opts.step_tolerance * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
    bool ok = false;
    double t = 1.0;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      const Vec trial = p.box.clip(z + t * dz);
      const Vec et = p.residuals(trial);
      const double ct = cost(et);
      if (ct <= c) {
        const bool progress = ct < c || (trial - z).lpNorm<Eigen::Infinity>() > 0.0;
        z = trial;
        e = et;
        c = ct;
        ok = progress;
        break;
      }
    }
    if (!ok) {
      stalled = true;
      break;
    }
    ++accepted;
    j = p.jacobian(z);
  }
  if (stalled && accepted == 0 && c > 0.0) {
    out.held = true;
    return finish(z0, cost(p.residuals(z0)));
  }
  return finish(z, c);
}

}  // namespace adaptcm
