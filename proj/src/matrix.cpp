#include "qdyn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qdyn {

namespace {

void require_same_dim(const Matrix& a, const Matrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch(std::string(op) + ": dimensions " + std::to_string(a.dim()) +
                            " and " + std::to_string(b.dim()) + " differ");
  }
}

}  // namespace

Matrix::Matrix(int dim) : dim_(dim) {
  if (dim < 0) throw InvalidArgument("matrix dimension must be nonnegative");
  if (dim > kInlineDim) big_.assign(static_cast<size_t>(dim) * dim, cplx{});
}

Matrix Matrix::identity(int dim) {
  Matrix m(dim);
  for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_dim(*this, o, "operator+=");
  cplx* a = data();
  const cplx* b = o.data();
  for (int i = 0; i < dim_ * dim_; ++i) a[i] += b[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_dim(*this, o, "operator-=");
  cplx* a = data();
  const cplx* b = o.data();
  for (int i = 0; i < dim_ * dim_; ++i) a[i] -= b[i];
  return *this;
}

Matrix& Matrix::operator*=(cplx s) {
  cplx* a = data();
  for (int i = 0; i < dim_ * dim_; ++i) a[i] *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix operator-(const Matrix& a) {
  Matrix r = a;
  return r *= cplx{-1.0, 0.0};
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "matrix product");
  const int n = a.dim();
  Matrix r(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (int j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
    }
  }
  return r;
}

Matrix operator*(cplx s, Matrix a) { return a *= s; }
Matrix operator*(Matrix a, cplx s) { return a *= s; }

void add_scaled(Matrix& acc, cplx s, const Matrix& x) {
  require_same_dim(acc, x, "add_scaled");
  cplx* a = acc.data();
  const cplx* b = x.data();
  const int n2 = acc.dim() * acc.dim();
  for (int i = 0; i < n2; ++i) a[i] += s * b[i];
}

Matrix adjoint(const Matrix& a) {
  const int n = a.dim();
  Matrix r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(j, i) = std::conj(a(i, j));
  return r;
}

Matrix transpose(const Matrix& a) {
  const int n = a.dim();
  Matrix r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(j, i) = a(i, j);
  return r;
}

Matrix hermitian_part(const Matrix& a) {
  const int n = a.dim();
  Matrix r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return r;
}

cplx trace(const Matrix& a) {
  cplx t{};
  for (int i = 0; i < a.dim(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  const cplx* p = a.data();
  for (int i = 0; i < a.dim() * a.dim(); ++i) s += std::norm(p[i]);
  return std::sqrt(s);
}

double hermitian_defect(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) s += std::norm(a(i, j) - std::conj(a(j, i)));
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  const cplx* p = a.data();
  for (int i = 0; i < a.dim() * a.dim(); ++i) m = std::max(m, std::abs(p[i]));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "max_abs_diff");
  double m = 0.0;
  const cplx* p = a.data();
  const cplx* q = b.data();
  for (int i = 0; i < a.dim() * a.dim(); ++i) m = std::max(m, std::abs(p[i] - q[i]));
  return m;
}

bool is_finite(const Matrix& a) {
  const cplx* p = a.data();
  for (int i = 0; i < a.dim() * a.dim(); ++i) {
    if (!std::isfinite(p[i].real()) || !std::isfinite(p[i].imag())) return false;
  }
  return true;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  const int na = a.dim(), nb = b.dim();
  Matrix r(na * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) {
      const cplx aij = a(i, j);
      if (aij == cplx{}) continue;
      for (int k = 0; k < nb; ++k)
        for (int l = 0; l < nb; ++l) r(i * nb + k, j * nb + l) = aij * b(k, l);
    }
  return r;
}

Matrix commutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "commutator");
  Matrix r = a * b;
  r -= b * a;
  return r;
}

Matrix anticommutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "anticommutator");
  Matrix r = a * b;
  r += b * a;
  return r;
}

cplx trace_product(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "trace_product");
  const int n = a.dim();
  cplx t{};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t += a(i, j) * b(j, i);
  return t;
}

Matrix SpectralDecomposition::reconstruct() const {
  const int n = eigenvectors.dim();
  Matrix r(n);
  for (int k = 0; k < n; ++k) {
    const double lam = eigenvalues[static_cast<size_t>(k)];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        r(i, j) += lam * eigenvectors(i, k) * std::conj(eigenvectors(j, k));
  }
  return r;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

}  // namespace

SpectralDecomposition hermitian_eig(const Matrix& a, int max_sweeps, double off_tol,
                                    double herm_tol) {
  const int n = a.dim();
  if (n == 0) throw InvalidArgument("hermitian_eig: empty matrix");
  if (!is_finite(a)) throw InvalidArgument("hermitian_eig: non-finite entries");

  const double anorm = frobenius_norm(a);
  const double scale = std::max(anorm, 1e-300);
  if (hermitian_defect(a) > herm_tol * scale) {
    throw NonHermitianInput("hermitian_eig: input is not Hermitian within tolerance");
  }

  Matrix h = hermitian_part(a);
  Matrix v = Matrix::identity(n);

  bool converged = (n == 1);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (off_diagonal_norm(h) <= off_tol * scale) {
      converged = true;
      break;
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cplx alpha = h(p, q);
        const double amag = std::abs(alpha);
        // Elements this small cannot keep the off-diagonal norm above tolerance.
        if (amag <= 1e-2 * off_tol * scale / n) continue;

        const double app = h(p, p).real();
        const double aqq = h(q, q).real();
        const double tau = (aqq - app) / (2.0 * amag);
        // smaller-magnitude root of t² − 2τt − 1 = 0
        const double t = (tau >= 0.0) ? -1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cplx phase = alpha / amag;           // e^{iφ}
        const cplx sp = s * phase;                 // s e^{iφ}
        const cplx spc = s * std::conj(phase);     // s e^{−iφ}

        const double dpp = app * c * c + 2.0 * amag * c * s + aqq * s * s;
        const double dqq = app * s * s - 2.0 * amag * c * s + aqq * c * c;
        h(p, p) = dpp;
        h(q, q) = dqq;
        h(p, q) = 0.0;
        h(q, p) = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == p || j == q) continue;
          const cplx hjp = h(j, p);
          const cplx hjq = h(j, q);
          h(j, p) = c * hjp + spc * hjq;
          h(j, q) = -sp * hjp + c * hjq;
          h(p, j) = std::conj(h(j, p));
          h(q, j) = std::conj(h(j, q));
        }
        for (int j = 0; j < n; ++j) {
          const cplx vjp = v(j, p);
          const cplx vjq = v(j, q);
          v(j, p) = c * vjp + spc * vjq;
          v(j, q) = -sp * vjp + c * vjq;
        }
      }
    }
  }
  if (!converged && off_diagonal_norm(h) > off_tol * scale) {
    throw ConvergenceFailure("hermitian_eig: Jacobi sweeps exhausted before convergence");
  }

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&h](int i, int j) { return h(i, i).real() < h(j, j).real(); });

  SpectralDecomposition dec;
  dec.eigenvalues.resize(static_cast<size_t>(n));
  dec.eigenvectors = Matrix(n);
  for (int k = 0; k < n; ++k) {
    const int src = order[static_cast<size_t>(k)];
    dec.eigenvalues[static_cast<size_t>(k)] = h(src, src).real();
    // canonical phase: first component above 1e-12 becomes nonnegative real
    cplx ph{1.0, 0.0};
    for (int i = 0; i < n; ++i) {
      const double mag = std::abs(v(i, src));
      if (mag > 1e-12) {
        ph = std::conj(v(i, src)) / mag;
        break;
      }
    }
    for (int i = 0; i < n; ++i) dec.eigenvectors(i, k) = ph * v(i, src);
  }
  return dec;
}

namespace {

struct LuFactors {
  Matrix lu;
  std::vector<int> pivots;
  bool singular = false;
};

LuFactors lu_factor(const Matrix& m) {
  const int n = m.dim();
  LuFactors f{m, std::vector<int>(static_cast<size_t>(n)), false};
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(f.lu(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double mag = std::abs(f.lu(i, k));
      if (mag > best) {
        best = mag;
        piv = i;
      }
    }
    f.pivots[static_cast<size_t>(k)] = piv;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
    }
    if (best == 0.0) {
      f.singular = true;
      return f;
    }
    const cplx inv_pivot = 1.0 / f.lu(k, k);
    for (int i = k + 1; i < n; ++i) {
      const cplx factor = f.lu(i, k) * inv_pivot;
      f.lu(i, k) = factor;
      for (int j = k + 1; j < n; ++j) f.lu(i, j) -= factor * f.lu(k, j);
    }
  }
  return f;
}

std::vector<cplx> lu_solve(const LuFactors& f, std::vector<cplx> b) {
  const int n = f.lu.dim();
  for (int k = 0; k < n; ++k) {
    std::swap(b[static_cast<size_t>(k)], b[static_cast<size_t>(f.pivots[static_cast<size_t>(k)])]);
    for (int i = k + 1; i < n; ++i)
      b[static_cast<size_t>(i)] -= f.lu(i, k) * b[static_cast<size_t>(k)];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) b[static_cast<size_t>(i)] -= f.lu(i, j) * b[static_cast<size_t>(j)];
    b[static_cast<size_t>(i)] /= f.lu(i, i);
  }
  return b;
}

double one_norm(const Matrix& m) {
  double best = 0.0;
  for (int j = 0; j < m.dim(); ++j) {
    double col = 0.0;
    for (int i = 0; i < m.dim(); ++i) col += std::abs(m(i, j));
    best = std::max(best, col);
  }
  return best;
}

}  // namespace

namespace {

double rcond_from_factors(const Matrix& m, const LuFactors& f) {
  if (f.singular) return 0.0;
  const int n = m.dim();
  // ‖M⁻¹‖₁ computed exactly column by column; systems here are N ≤ 4.
  double inv_norm = 0.0;
  for (int j = 0; j < n; ++j) {
    std::vector<cplx> e(static_cast<size_t>(n), cplx{});
    e[static_cast<size_t>(j)] = 1.0;
    const std::vector<cplx> col = lu_solve(f, std::move(e));
    double sum = 0.0;
    for (const cplx& x : col) sum += std::abs(x);
    inv_norm = std::max(inv_norm, sum);
  }
  const double mnorm = one_norm(m);
  return (mnorm > 0.0 && inv_norm > 0.0) ? 1.0 / (mnorm * inv_norm) : 0.0;
}

}  // namespace

double rcond_estimate(const Matrix& m) {
  if (m.dim() == 0) throw InvalidArgument("rcond_estimate: empty matrix");
  return rcond_from_factors(m, lu_factor(m));
}

LinearSolution solve_linear(const Matrix& m, const std::vector<cplx>& rhs, double rcond_min) {
  const int n = m.dim();
  if (n == 0) throw InvalidArgument("solve_linear: empty system");
  if (static_cast<int>(rhs.size()) != n) {
    throw DimensionMismatch("solve_linear: rhs length does not match matrix dimension");
  }

  const LuFactors f = lu_factor(m);
  const double rcond = rcond_from_factors(m, f);
  if (f.singular || rcond < rcond_min) {
    throw SingularSystem("solve_linear: system is singular to working precision (rcond=" +
                             std::to_string(rcond) + ")",
                         rcond);
  }

  std::vector<cplx> x = lu_solve(f, rhs);

  double rhs_norm = 0.0;
  for (const cplx& b : rhs) rhs_norm += std::norm(b);
  rhs_norm = std::sqrt(rhs_norm);
  const double target = 1e-12 * std::max(1.0, rhs_norm);

  for (int pass = 0; pass < 3; ++pass) {
    std::vector<cplx> residual(static_cast<size_t>(n), cplx{});
    for (int i = 0; i < n; ++i) {
      cplx acc = rhs[static_cast<size_t>(i)];
      for (int j = 0; j < n; ++j) acc -= m(i, j) * x[static_cast<size_t>(j)];
      residual[static_cast<size_t>(i)] = acc;
    }
    double rnorm = 0.0;
    for (const cplx& r : residual) rnorm += std::norm(r);
    if (std::sqrt(rnorm) <= target) break;
    const std::vector<cplx> dx = lu_solve(f, std::move(residual));
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] += dx[static_cast<size_t>(i)];
  }

  return LinearSolution{std::move(x), rcond};
}

}  // namespace qdyn
