#include "adaptcm/geodesic.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <random>

using namespace adaptcm;

namespace {

// M(x) = diag(1 + x1^2, 1).
FunctionMetric warped_metric() {
  return FunctionMetric(
      2,
      [](const Vec& x) {
        Mat m = Mat::Identity(2, 2);
        m(0, 0) = 1.0 + x[0] * x[0];
        return m;
      },
      [](ad::Graph& g, std::span<const ad::Var> x) {
        ad::ExprMatrix m(2, 2, ad::constant(g, 0.0));
        m(0, 0) = x[0] * x[0] + 1.0;
        m(1, 1) = ad::constant(g, 1.0);
        return m;
      });
}

// Shortest path on a square lattice with all moves (a, b), |a|, |b| <= 3,
// edge cost evaluated with the metric at the edge midpoint.
double lattice_distance(const Metric& metric, const Vec& from, const Vec& to, double lo, double hi,
                        int cells) {
  const double h = (hi - lo) / cells;
  const int n = cells + 1;
  auto index = [&](int i, int j) { return i * n + j; };
  auto node = [&](double v) { return static_cast<int>(std::lround((v - lo) / h)); };
  std::vector<std::pair<int, int>> moves;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      if ((a || b) && std::gcd(std::abs(a), std::abs(b)) == 1) moves.emplace_back(a, b);
  std::vector<double> dist(static_cast<std::size_t>(n * n), INFINITY);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  const int s = index(node(from[0]), node(from[1]));
  const int t = index(node(to[0]), node(to[1]));
  dist[static_cast<std::size_t>(s)] = 0.0;
  q.push({0.0, s});
  while (!q.empty()) {
    const auto [d, u] = q.top();
    q.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    if (u == t) return d;
    const int i = u / n, j = u % n;
    for (const auto& [a, b] : moves) {
      const int ii = i + a, jj = j + b;
      if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
      const Vec p{{lo + i * h, lo + j * h}}, q2{{lo + ii * h, lo + jj * h}};
      const Vec dx = q2 - p;
      const double c = std::sqrt(dx.dot(metric.value(0.5 * (p + q2)) * dx));
      const int v = index(ii, jj);
      if (d + c < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = d + c;
        q.push({d + c, v});
      }
    }
  }
  return INFINITY;
}

// The warped metric is flat in (s(x1), x2) with s' = sqrt(1 + x1^2).
double warped_exact(const Vec& a, const Vec& b) {
  auto s = [](double x) { return 0.5 * (x * std::sqrt(1 + x * x) + std::asinh(x)); };
  return std::hypot(s(b[0]) - s(a[0]), b[1] - a[1]);
}

}  // namespace

TEST_SUITE("geodesic") {

TEST_CASE("flat metric gives the Euclidean distance") {
  const auto flat = FunctionMetric::constant(Mat::Identity(2, 2));
  std::srand(2);
  for (int i = 0; i < 20; ++i) {
    const Vec a = Vec::Random(2), b = Vec::Random(2);
    const auto p = geodesic(flat, a, b);
    CHECK(std::abs(p.length - (a - b).norm()) < 1e-6);
    CHECK(p.nodes.front() == a);
    CHECK(p.nodes.back() == b);
    CHECK(p.nodes.size() == 21u);
  }
}

TEST_CASE("constant anisotropic metric") {
  Mat m = Mat::Identity(2, 2);
  m(0, 0) = 4.0;
  const auto metric = FunctionMetric::constant(m);
  CHECK(std::abs(distance(metric, Vec{{1.0, 0.0}}, Vec::Zero(2)) - 2.0) < 1e-6);
  CHECK(std::abs(distance(metric, Vec{{1.0, 1.0}}, Vec::Zero(2)) - std::sqrt(5.0)) < 1e-6);
}

TEST_CASE("state-dependent metric against a lattice shortest path") {
  const auto metric = warped_metric();
  const Vec a{{0.0, 0.0}}, b{{1.0, 1.0}};
  const double lattice = lattice_distance(metric, a, b, -0.5, 1.5, 80);
  const auto p = geodesic(metric, a, b);
  CHECK(std::abs(p.length - lattice) < 0.02 * lattice);
  CHECK(std::abs(p.length - warped_exact(a, b)) < 2e-3 * warped_exact(a, b));
  CHECK(p.length < p.chord_length);
  CHECK(p.converged);
  // Energy of a constant-speed minimiser equals length squared.
  CHECK(p.energy == doctest::Approx(p.length * p.length).epsilon(1e-3));
}

TEST_CASE("more segments approach the exact distance") {
  const auto metric = warped_metric();
  const Vec a{{-1.0, 0.5}}, b{{1.5, -0.5}};
  GeodesicOptions coarse, fine;
  coarse.segments = 5;
  fine.segments = 40;
  const double exact = warped_exact(a, b);
  const double e5 = std::abs(geodesic(metric, a, b, coarse).length - exact);
  const double e40 = std::abs(geodesic(metric, a, b, fine).length - exact);
  CHECK(e40 < e5);
  CHECK(e40 < 1e-3 * exact);
}

TEST_CASE("degenerate and invalid inputs") {
  const auto metric = warped_metric();
  const Vec a{{0.3, 0.3}};
  const auto p = geodesic(metric, a, a);
  CHECK(p.length == 0.0);
  CHECK(p.converged);
  GeodesicOptions one;
  one.segments = 1;
  CHECK(geodesic(metric, Vec::Zero(2), Vec{{1.0, 0.0}}, one).length == doctest::Approx(std::sqrt(1.25)));
  GeodesicOptions zero;
  zero.segments = 0;
  CHECK_THROWS(geodesic(metric, Vec::Zero(2), a, zero));
  CHECK_THROWS_AS(geodesic(metric, Vec::Zero(3), a), DimensionError);
  CHECK_THROWS_AS(geodesic(metric, Vec{{NAN, 0.0}}, a), GeodesicError);
}

TEST_CASE("interior nodes respect the box") {
  // Cheap travel for large x2 would pull the path upward; the box forbids x2 > 0.2.
  FunctionMetric metric(
      2,
      [](const Vec& x) {
        Mat m = Mat::Identity(2, 2);
        m(0, 0) = 1.0 / (1.0 + 4.0 * x[1] * x[1]);
        return m;
      },
      [](ad::Graph& g, std::span<const ad::Var> x) {
        ad::ExprMatrix m(2, 2, ad::constant(g, 0.0));
        m(0, 0) = ad::constant(g, 1.0) / (4.0 * (x[1] * x[1]) + 1.0);
        m(1, 1) = ad::constant(g, 1.0);
        return m;
      });
  GeodesicOptions opts;
  opts.box = Box(Vec{{-2.0, -0.2}}, Vec{{2.0, 0.2}});
  const auto free_path = geodesic(metric, Vec{{-1.0, 0.05}}, Vec{{1.0, 0.05}});
  const auto boxed = geodesic(metric, Vec{{-1.0, 0.05}}, Vec{{1.0, 0.05}}, opts);
  double top = 0.0;
  for (const auto& n : boxed.nodes) top = std::max(top, std::abs(n[1]));
  CHECK(top <= 0.2);
  CHECK(boxed.length >= free_path.length - 1e-9);
  CHECK(boxed.length < boxed.chord_length);
}

TEST_CASE("network metric") {
  const auto w = NetworkWeights::initialize({2, 1, 2}, {6}, Box(Vec{{0.1, -0.1}}, Vec{{1.1, 1.1}}),
                                            Box(Vec{{1.15, 1.275}}, Vec{{3.125, 3.438}}), 3);
  const Vec r{{2.0, 2.0}};
  NetworkMetric metric(w, r);
  const Vec x{{0.4, 0.6}};
  CHECK(metric.value(x) == evaluate(w, x, r).M);
  CHECK_THROWS_AS(NetworkMetric(w, Vec::Zero(3)), DimensionError);
  // path_length / path_energy on a hand-built two-segment path
  const std::vector<Vec> nodes = {Vec{{0.2, 0.2}}, Vec{{0.4, 0.3}}, Vec{{0.5, 0.5}}};
  double want = 0.0, energy = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Vec d = nodes[i + 1] - nodes[i];
    const double q = d.dot(evaluate(w, 0.5 * (nodes[i] + nodes[i + 1]), r).M * d);
    want += std::sqrt(std::max(0.0, q));
    energy += q;
  }
  CHECK(path_length(metric, nodes) == doctest::Approx(want));
  CHECK(path_energy(metric, nodes) == doctest::Approx(2.0 * energy));
}

}
