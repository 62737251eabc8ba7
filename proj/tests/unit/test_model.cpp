#include "adaptcm/cstr.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace adaptcm;

namespace {

// Direct transcription of the discretised reactor, used as an independent oracle.
Vec cstr_oracle(const Vec& r, const Vec& x, double u) {
  const double e = std::exp(0.8 * x[1] / (0.8 + x[1]));
  Vec out(2);
  out[0] = 0.9 * x[0] + 0.1 * r[0] * (1 - x[0]) * e + 0.1 * 0.9 * x[0];
  out[1] = 0.9 * x[1] + 0.1 * r[1] * (1 - x[0]) * e + u;
  return out;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("box membership, clipping and validation") {
  Box b(Vec{{0.0, -1.0}}, Vec{{1.0, 1.0}});
  CHECK(b.contains(Vec{{0.5, 0.0}}));
  CHECK_FALSE(b.contains(Vec{{1.5, 0.0}}));
  CHECK(b.contains(Vec{{1.0 + 1e-12, 0.0}}, 1e-9));
  CHECK(b.clip(Vec{{2.0, -3.0}}) == Vec{{1.0, -1.0}});
  CHECK(b.midpoint() == Vec{{0.5, 0.0}});
  CHECK_THROWS(Box(Vec{{1.0}}, Vec{{0.0}}));
  CHECK_THROWS_AS(Box(Vec{{1.0}}, Vec{{1.0, 2.0}}), DimensionError);
}

TEST_CASE("grid ordering and endpoints") {
  Box b(Vec{{0.0, 10.0}}, Vec{{1.0, 20.0}});
  const auto g = grid(b, {3, 2});
  REQUIRE(g.size() == 6);
  CHECK(g[0] == Vec{{0.0, 10.0}});
  CHECK(g[1] == Vec{{0.0, 20.0}});
  CHECK(g[2] == Vec{{0.5, 10.0}});
  CHECK(g[5] == Vec{{1.0, 20.0}});
  const auto mid = grid(b, {1, 1});
  REQUIRE(mid.size() == 1);
  CHECK(mid[0] == Vec{{0.5, 15.0}});
  CHECK_THROWS(grid(b, {0, 2}));
  CHECK_THROWS_AS(grid(b, {2}), DimensionError);
}

TEST_CASE("CSTR step matches a direct transcription") {
  CstrModel m;
  for (int i = 0; i < 20; ++i) {
    const Vec r = m.param_box().lower + (m.param_box().upper - m.param_box().lower).cwiseProduct(
                                            (Vec::Random(2) + Vec::Ones(2)) / 2);
    const Vec x = m.state_box().lower + (m.state_box().upper - m.state_box().lower).cwiseProduct(
                                            (Vec::Random(2) + Vec::Ones(2)) / 2);
    const double u = Vec::Random(1)[0];
    const Vec got = m.step(r, x, Vec{{u}});
    const Vec want = cstr_oracle(r, x, u);
    CHECK((got - want).norm() < 1e-14);
  }
}

TEST_CASE("CSTR Jacobians agree with central differences") {
  CstrModel m;
  std::srand(11);
  const double h = 1e-6;
  for (int i = 0; i < 25; ++i) {
    const Vec r = Vec{{1.5, 2.0}} + 0.5 * Vec::Random(2);
    const Vec x = Vec{{0.6, 0.5}} + 0.4 * Vec::Random(2);
    const Vec u = Vec::Random(1);
    const Jacobians j = m.jacobians(r, x, u);
    for (int c = 0; c < 2; ++c) {
      Vec dx = Vec::Zero(2);
      dx[c] = h;
      const Vec col = (m.step(r, x + dx, u) - m.step(r, x - dx, u)) / (2 * h);
      CHECK((j.A.col(c) - col).lpNorm<Eigen::Infinity>() < 1e-7);
      const Vec colr = (m.step(r + dx, x, u) - m.step(r - dx, x, u)) / (2 * h);
      CHECK((m.param_jacobian(r, x, u).col(c) - colr).lpNorm<Eigen::Infinity>() < 1e-7);
    }
    Vec du = Vec::Constant(1, h);
    const Vec colu = (m.step(r, x, u + du) - m.step(r, x, u - du)) / (2 * h);
    CHECK((j.B.col(0) - colu).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("dimension errors and parameter warnings") {
  CstrModel m;
  CHECK_THROWS_AS(m.step(Vec::Ones(3), Vec::Ones(2), Vec::Ones(1)), DimensionError);
  CHECK_THROWS_AS(m.step(Vec::Ones(2), Vec::Ones(1), Vec::Ones(1)), DimensionError);
  set_warnings_enabled(false);
  const long before = parameter_warning_count();
  const Vec x = m.step(Vec{{10.0, 10.0}}, Vec{{0.5, 0.5}}, Vec::Zero(1));
  CHECK(x.allFinite());
  CHECK(parameter_warning_count() == before + 1);
  set_warnings_enabled(true);
}

TEST_CASE("CSTR equilibrium matches the closed-form balance") {
  CstrModel m;
  const Vec r{{1.25, 1.375}};
  for (double x2 : {0.0, 0.2, 0.3, 0.5, 1.0}) {
    const auto eq = m.equilibrium(r, Vec{{x2}});
    REQUIRE(eq.has_value());
    // zeta x1 = Da1 (1 - x1) e  =>  x1 = Da1 e / (zeta + Da1 e)
    const double e = std::exp(0.8 * x2 / (0.8 + x2));
    CHECK(eq->first[0] == doctest::Approx(r[0] * e / (0.1 + r[0] * e)).epsilon(1e-12));
    CHECK(eq->first[1] == x2);
    const Vec next = cstr_oracle(r, eq->first, eq->second[0]);
    CHECK((next - eq->first).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  CHECK_FALSE(m.equilibrium(r, Vec{{2.0}}).has_value());
}

TEST_CASE("linear lambda model") {
  auto m = LambdaModel::linear(Mat::Identity(2, 2) * 0.5, Mat::Constant(2, 1, 1.0),
                               Box(Vec::Constant(2, -1), Vec::Constant(2, 1)),
                               Box(Vec::Constant(1, -1), Vec::Constant(1, 1)),
                               Box(Vec::Zero(1), Vec::Ones(1)));
  const Vec x = m.step(Vec::Zero(1), Vec{{0.4, -0.2}}, Vec{{0.1}});
  CHECK(x[0] == doctest::Approx(0.3));
  CHECK(x[1] == doctest::Approx(0.0));
  CHECK(m.jacobians(Vec::Zero(1), x, Vec::Zero(1)).A(0, 0) == 0.5);
  CHECK(m.param_jacobian(Vec::Zero(1), x, Vec::Zero(1)).norm() < 1e-9);
  CHECK_THROWS_AS(m.equilibrium(Vec::Zero(1), Vec::Zero(1)), std::logic_error);
}

}
