#include "adaptcm/model.hpp"

#include <atomic>
#include <iostream>
#include <sstream>

namespace adaptcm {

namespace {

std::atomic<long> g_param_warnings{0};
std::atomic<bool> g_warnings_enabled{true};

std::string shape(const Vec& v) { return std::to_string(v.size()); }

}  // namespace

long parameter_warning_count() { return g_param_warnings.load(); }
void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

void warn(const std::string& message) {
  if (g_warnings_enabled) std::cerr << "adaptcm: warning: " << message << '\n';
}

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw DimensionError("box bounds differ in dimension");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw std::invalid_argument("box lower bound exceeds upper bound in dimension " +
                                  std::to_string(i));
    }
  }
}

bool Box::contains(const Vec& z, double tol) const {
  if (z.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] < lower[i] - tol || z[i] > upper[i] + tol) return false;
  }
  return true;
}

Vec Box::clip(const Vec& z) const {
  if (z.size() != lower.size()) throw DimensionError("clip: dimension mismatch");
  return z.cwiseMax(lower).cwiseMin(upper);
}

std::vector<Vec> grid(const Box& box, const std::vector<int>& counts) {
  const Eigen::Index d = box.dim();
  if (static_cast<Eigen::Index>(counts.size()) != d) {
    throw DimensionError("grid: " + std::to_string(counts.size()) + " counts for a " +
                         std::to_string(d) + "-dimensional box");
  }
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("grid: counts must be positive");
    total *= static_cast<std::size_t>(c);
  }
  std::vector<Vec> axes(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const int c = counts[static_cast<std::size_t>(i)];
    Vec& axis = axes[static_cast<std::size_t>(i)];
    axis.resize(c);
    if (c == 1) {
      axis[0] = 0.5 * (box.lower[i] + box.upper[i]);
      continue;
    }
    for (int k = 0; k < c; ++k) {
      // Endpoints are reproduced exactly.
      axis[k] = k == c - 1 ? box.upper[i]
                           : box.lower[i] + (box.upper[i] - box.lower[i]) * k / (c - 1);
    }
  }
  std::vector<Vec> points;
  points.reserve(total);
  std::vector<int> index(static_cast<std::size_t>(d), 0);
  for (std::size_t p = 0; p < total; ++p) {
    Vec z(d);
    for (Eigen::Index i = 0; i < d; ++i)
      z[i] = axes[static_cast<std::size_t>(i)][index[static_cast<std::size_t>(i)]];
    points.push_back(std::move(z));
    for (Eigen::Index i = d; i-- > 0;) {
      auto& k = index[static_cast<std::size_t>(i)];
      if (++k < counts[static_cast<std::size_t>(i)]) break;
      k = 0;
    }
  }
  return points;
}

// ---- UncertainModel ----

void UncertainModel::check_dims(const Vec& r, const Vec& x, const Vec& u) const {
  if (r.size() != param_dim() || x.size() != state_dim() || u.size() != input_dim()) {
    std::ostringstream os;
    os << name() << ": dimension mismatch (r " << shape(r) << "/" << param_dim() << ", x "
       << shape(x) << "/" << state_dim() << ", u " << shape(u) << "/" << input_dim() << ")";
    throw DimensionError(os.str());
  }
}

void UncertainModel::warn_if_outside(const Vec& r) const {
  if (!param_box().contains(r, 1e-12)) {
    ++g_param_warnings;
    if (g_param_warnings.load() <= 5) warn(name() + ": parameter outside its box");
  }
}

Vec UncertainModel::step(const Vec& r, const Vec& x, const Vec& u) const {
  check_dims(r, x, u);
  warn_if_outside(r);
  return drift(r, x) + input_matrix(r, x) * u;
}

Jacobians UncertainModel::jacobians(const Vec& r, const Vec& x, const Vec& u) const {
  check_dims(r, x, u);
  warn_if_outside(r);
  return {state_jacobian(r, x, u), input_matrix(r, x)};
}

Mat UncertainModel::param_jacobian(const Vec& r, const Vec& x, const Vec& u) const {
  check_dims(r, x, u);
  return parameter_jacobian(r, x, u);
}

Mat UncertainModel::parameter_jacobian(const Vec& r, const Vec& x, const Vec& u) const {
  Mat j(state_dim(), param_dim());
  for (int i = 0; i < param_dim(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(r[i]));
    Vec rp = r, rm = r;
    rp[i] += h;
    rm[i] -= h;
    j.col(i) = ((drift(rp, x) + input_matrix(rp, x) * u) - (drift(rm, x) + input_matrix(rm, x) * u)) /
               (2.0 * h);
  }
  return j;
}

std::optional<std::pair<Vec, Vec>> UncertainModel::equilibrium(const Vec&, const Vec&) const {
  throw std::logic_error(name() + ": equilibrium references are not defined for this model");
}

// ---- LambdaModel ----

LambdaModel::LambdaModel(Box state_box, Box input_box, ParamBox param_box, DriftFn f, InputFn g,
                         JacFn a, JacFn dr)
    : state_box_(std::move(state_box)),
      input_box_(std::move(input_box)),
      param_box_(std::move(param_box)),
      f_(std::move(f)),
      g_(std::move(g)),
      a_(std::move(a)),
      dr_(std::move(dr)) {}

Mat LambdaModel::parameter_jacobian(const Vec& r, const Vec& x, const Vec& u) const {
  if (dr_) return dr_(r, x, u);
  return UncertainModel::parameter_jacobian(r, x, u);
}

LambdaModel LambdaModel::linear(const Mat& a, const Mat& b, Box state_box, Box input_box,
                                ParamBox param_box) {
  return LambdaModel(
      std::move(state_box), std::move(input_box), std::move(param_box),
      [a](const Vec&, const Vec& x) -> Vec { return a * x; },
      [b](const Vec&, const Vec&) -> Mat { return b; },
      [a](const Vec&, const Vec&, const Vec&) -> Mat { return a; });
}

}  // namespace adaptcm
