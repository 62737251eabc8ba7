#include "adaptcm/cstr.hpp"

#include <cmath>

namespace adaptcm {

CstrParams CstrParams::defaults() {
  CstrParams p;
  p.state_box = Box(Vec{{0.1, -0.1}}, Vec{{1.1, 1.1}});
  p.input_box = Box(Vec{{-1.0}}, Vec{{1.0}});
  p.param_box = Box(Vec{{1.15, 1.275}}, Vec{{3.125, 3.438}});
  return p;
}

CstrModel::CstrModel(CstrParams params) : p_(std::move(params)) {
  if (p_.state_box.dim() != 2 || p_.input_box.dim() != 1 || p_.param_box.dim() != 2) {
    throw DimensionError("cstr: boxes must be 2-D state, 1-D input, 2-D parameter");
  }
  if (!(p_.time_step > 0.0)) throw std::invalid_argument("cstr: time step must be positive");
}

double CstrModel::arrhenius(double x2) const {
  return std::exp(p_.alpha * x2 / (p_.alpha + x2));
}

Vec CstrModel::drift(const Vec& r, const Vec& x) const {
  const double dt = p_.time_step;
  const double e = arrhenius(x[1]);
  const double c = 1.0 - x[0];
  return Vec{{(1.0 - dt) * x[0] + dt * r[0] * c * e + dt * (1.0 - p_.zeta) * x[0],
              (1.0 - dt) * x[1] + dt * r[1] * c * e}};
}

Mat CstrModel::input_matrix(const Vec&, const Vec&) const { return Mat{{0.0}, {1.0}}; }

Mat CstrModel::state_jacobian(const Vec& r, const Vec& x, const Vec&) const {
  const double dt = p_.time_step;
  const double a = p_.alpha;
  const double e = arrhenius(x[1]);
  const double de = e * a * a / ((a + x[1]) * (a + x[1]));
  const double c = 1.0 - x[0];
  return Mat{{(1.0 - dt) - dt * r[0] * e + dt * (1.0 - p_.zeta), dt * r[0] * c * de},
             {-dt * r[1] * e, (1.0 - dt) + dt * r[1] * c * de}};
}

Mat CstrModel::parameter_jacobian(const Vec&, const Vec& x, const Vec&) const {
  const double phi = p_.time_step * (1.0 - x[0]) * arrhenius(x[1]);
  return Mat{{phi, 0.0}, {0.0, phi}};
}

std::optional<std::pair<Vec, Vec>> CstrModel::equilibrium(const Vec& r, const Vec& setpoint) const {
  if (r.size() != 2 || setpoint.size() != 1) {
    throw DimensionError("cstr: equilibrium needs r in R^2 and a scalar temperature setpoint");
  }
  const double x2 = setpoint[0];
  if (x2 < p_.state_box.lower[1] || x2 > p_.state_box.upper[1]) return std::nullopt;
  const double e = arrhenius(x2);
  // Concentration balance divided by dt: -zeta x1 + Da1 (1 - x1) e = 0.
  auto balance = [&](double x1) { return -p_.zeta * x1 + r[0] * (1.0 - x1) * e; };
  double lo = p_.state_box.lower[0];
  double hi = p_.state_box.upper[0];
  double flo = balance(lo);
  const double fhi = balance(hi);
  if (flo == 0.0) hi = lo;
  else if (fhi == 0.0) lo = hi;
  else if ((flo > 0.0) == (fhi > 0.0)) return std::nullopt;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = balance(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double x1 = 0.5 * (lo + hi);
  const double dt = p_.time_step;
  const double u = dt * x2 - dt * r[1] * (1.0 - x1) * e;
  return std::make_pair(Vec{{x1, x2}}, Vec{{u}});
}

}  // namespace adaptcm
