#pragma once

#include <array>
#include <complex>
#include <vector>

#include "qdyn/errors.hpp"

namespace qdyn {

using cplx = std::complex<double>;

// Dense complex square matrix for small dimensions (2..64). Entries are stored
// row-major; dimensions up to kInlineDim live in an inline buffer so the
// integrator hot loop stays allocation-free.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int dim);

  static Matrix zero(int dim) { return Matrix(dim); }
  static Matrix identity(int dim);

  int dim() const { return dim_; }
  bool empty() const { return dim_ == 0; }

  cplx* data() { return dim_ <= kInlineDim ? small_.data() : big_.data(); }
  const cplx* data() const { return dim_ <= kInlineDim ? small_.data() : big_.data(); }

  cplx& operator()(int r, int c) { return data()[r * dim_ + c]; }
  const cplx& operator()(int r, int c) const { return data()[r * dim_ + c]; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(cplx s);

 private:
  static constexpr int kInlineDim = 4;

  int dim_ = 0;
  std::array<cplx, kInlineDim * kInlineDim> small_{};
  std::vector<cplx> big_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(const Matrix& a);
Matrix operator*(const Matrix& a, const Matrix& b);  // matrix product
Matrix operator*(cplx s, Matrix a);
Matrix operator*(Matrix a, cplx s);

// acc += s * x, without a temporary.
void add_scaled(Matrix& acc, cplx s, const Matrix& x);

Matrix adjoint(const Matrix& a);
Matrix transpose(const Matrix& a);
Matrix hermitian_part(const Matrix& a);  // (a + a†)/2

cplx trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double hermitian_defect(const Matrix& a);  // ‖a − a†‖_F
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool is_finite(const Matrix& a);

Matrix kron(const Matrix& a, const Matrix& b);

// ab − ba. Anti-Hermitian when a, b are Hermitian.
Matrix commutator(const Matrix& a, const Matrix& b);
// ab + ba. Hermitian when a, b are Hermitian.
Matrix anticommutator(const Matrix& a, const Matrix& b);
// tr(ab) accumulated over entry pairs; the product is never formed.
cplx trace_product(const Matrix& a, const Matrix& b);

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // orthonormal columns, column k ↔ eigenvalues[k]

  // V diag(λ) V†
  Matrix reconstruct() const;
};

// Cyclic Jacobi diagonalization for Hermitian matrices. The input must be
// Hermitian within herm_tol (relative Frobenius); iteration stops once the
// off-diagonal norm falls below off_tol · ‖a‖_F or max_sweeps is exhausted.
// Eigenvector phases are canonicalized: the first component of magnitude
// above 1e-12 is made nonnegative real.
SpectralDecomposition hermitian_eig(const Matrix& a, int max_sweeps = 100,
                                    double off_tol = 1e-14, double herm_tol = 1e-10);

struct LinearSolution {
  std::vector<cplx> solution;
  double rcond;  // 1-norm reciprocal condition estimate
};

// LU with partial pivoting plus iterative refinement. Throws SingularSystem
// when the reciprocal condition estimate falls below rcond_min.
LinearSolution solve_linear(const Matrix& m, const std::vector<cplx>& rhs,
                            double rcond_min = 1e-10);

// 1-norm reciprocal-condition estimate (0 for an exactly singular matrix).
double rcond_estimate(const Matrix& m);

}  // namespace qdyn
