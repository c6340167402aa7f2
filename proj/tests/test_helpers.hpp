#pragma once

#include <cmath>
#include <vector>

#include "qdyn/state.hpp"

namespace qdyn::testing {

inline Matrix mat2(cplx a, cplx b, cplx c, cplx d) {
  Matrix m(2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

inline Matrix diag2(double a, double b) { return mat2(a, 0.0, 0.0, b); }

inline bool approx_equal(const Matrix& a, const Matrix& b, double tol) {
  return a.dim() == b.dim() && max_abs_diff(a, b) <= tol;
}

inline StateVector ket2(cplx a, cplx b) {
  StateVector v;
  v.amplitudes = {a, b};
  return v;
}

// ket with Bloch vector r on the unit sphere
inline StateVector ket_from_bloch(double x, double y, double z) {
  const double theta = std::acos(z);
  const double phi = std::atan2(y, x);
  StateVector v;
  v.amplitudes = {std::cos(theta / 2.0),
                  std::exp(cplx{0.0, phi}) * std::sin(theta / 2.0)};
  return v;
}

}  // namespace qdyn::testing
