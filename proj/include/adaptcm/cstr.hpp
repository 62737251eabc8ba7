#pragma once

// Continuously stirred tank reactor, explicit discretisation with a 0.1 h step:
//
//   x1+ = 0.9 x1 + 0.1 Da1 (1 - x1) e(x2) + 0.1 (1 - zeta) x1
//   x2+ = 0.9 x2 + 0.1 Da2 (1 - x1) e(x2) + u,      e(x2) = exp(alpha x2 / (alpha + x2))
//
// x1 is the normalised reactant concentration, x2 the reactor temperature and
// u the jacket temperature. The uncertain parameters are r = (Da1, Da2).

#include "adaptcm/model.hpp"

namespace adaptcm {

struct CstrParams {
  double alpha = 0.8;
  double zeta = 0.1;
  double time_step = 0.1;  // hours
  Box state_box{Vec::Constant(2, 0.0), Vec::Constant(2, 0.0)};
  Box input_box{Vec::Constant(1, 0.0), Vec::Constant(1, 0.0)};
  ParamBox param_box{Vec::Constant(2, 0.0), Vec::Constant(2, 0.0)};

  /// Constants and boxes of the reference study.
  static CstrParams defaults();
};

class CstrModel final : public UncertainModel {
 public:
  explicit CstrModel(CstrParams params = CstrParams::defaults());

  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  int param_dim() const override { return 2; }
  const Box& state_box() const override { return p_.state_box; }
  const Box& input_box() const override { return p_.input_box; }
  const ParamBox& param_box() const override { return p_.param_box; }
  const CstrParams& params() const { return p_; }

  /// Setpoint is the reactor temperature x2*. The concentration x1* solves the
  /// scalar balance by bisection on the x1 range; u* closes the temperature row.
  std::optional<std::pair<Vec, Vec>> equilibrium(const Vec& r, const Vec& setpoint) const override;

  /// Arrhenius factor exp(alpha x2 / (alpha + x2)).
  double arrhenius(double x2) const;

  std::string name() const override { return "cstr"; }

 protected:
  Vec drift(const Vec& r, const Vec& x) const override;
  Mat input_matrix(const Vec& r, const Vec& x) const override;
  Mat state_jacobian(const Vec& r, const Vec& x, const Vec& u) const override;
  Mat parameter_jacobian(const Vec& r, const Vec& x, const Vec& u) const override;

 private:
  CstrParams p_;
};

}  // namespace adaptcm
