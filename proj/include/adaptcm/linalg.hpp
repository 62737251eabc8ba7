#pragma once

#include "adaptcm/model.hpp"

#include <vector>

namespace adaptcm {

/// Eigenvalues of a symmetric matrix in ascending order. Closed form for
/// n <= 2, cyclic Jacobi rotations otherwise.
Vec symmetric_eigenvalues(const Mat& s);

inline double min_eigenvalue(const Mat& s) { return symmetric_eigenvalues(s)[0]; }

/// Determinants of the leading principal blocks (numeric, via LU).
std::vector<double> leading_minors(const Mat& s);

}  // namespace adaptcm
