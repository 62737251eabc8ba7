#include "adaptcm/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace adaptcm {

namespace {

Vec jacobi_eigenvalues(Mat a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vec ev = a.diagonal();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

}  // namespace

Vec symmetric_eigenvalues(const Mat& s) {
  if (s.rows() != s.cols()) throw DimensionError("symmetric_eigenvalues: matrix not square");
  const Eigen::Index n = s.rows();
  if (n == 0) return Vec();
  if (n == 1) return Vec::Constant(1, s(0, 0));
  if (n == 2) {
    const double a = s(0, 0), b = 0.5 * (s(0, 1) + s(1, 0)), c = s(1, 1);
    const double mean = 0.5 * (a + c);
    const double radius = std::hypot(0.5 * (a - c), b);
    return Vec{{mean - radius, mean + radius}};
  }
  return jacobi_eigenvalues(0.5 * (s + s.transpose()));
}

std::vector<double> leading_minors(const Mat& s) {
  std::vector<double> out;
  for (Eigen::Index i = 1; i <= s.rows(); ++i) {
    out.push_back(s.topLeftCorner(i, i).partialPivLu().determinant());
  }
  return out;
}

}  // namespace adaptcm
