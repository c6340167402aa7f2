#include "qdyn/state.hpp"

#include <cmath>
#include <utility>

namespace qdyn {

Observable::Observable(std::string label_in, Matrix matrix_in, double tol)
    : label(std::move(label_in)), matrix(std::move(matrix_in)) {
  if (!is_finite(matrix)) throw InvalidState("observable '" + label + "' has non-finite entries");
  const double scale = std::max(frobenius_norm(matrix), 1e-300);
  if (hermitian_defect(matrix) > tol * scale) {
    throw NonHermitianInput("observable '" + label + "' is not Hermitian within tolerance");
  }
}

void DensityMatrix::validate(double tol) const {
  if (!is_finite(matrix)) throw InvalidState("density matrix has non-finite entries");
  const double scale = std::max(frobenius_norm(matrix), 1e-300);
  if (hermitian_defect(matrix) > tol * scale) {
    throw InvalidState("density matrix is not Hermitian within tolerance");
  }
  const cplx tr = trace(matrix);
  if (std::abs(tr - cplx{1.0, 0.0}) > tol) {
    throw InvalidState("density matrix trace deviates from 1");
  }
  const SpectralDecomposition dec = hermitian_eig(matrix);
  if (dec.eigenvalues.front() < -tol) {
    throw InvalidState("density matrix has an eigenvalue below -tolerance");
  }
}

double StateVector::norm() const {
  double s = 0.0;
  for (const cplx& a : amplitudes) s += std::norm(a);
  return std::sqrt(s);
}

double BlochVector::norm() const { return std::sqrt(x * x + y * y + z * z); }

double expectation(const DensityMatrix& rho, const Observable& obs, double imag_tol) {
  const cplx value = trace_product(rho.matrix, obs.matrix);
  if (std::abs(value.imag()) > imag_tol) {
    throw InvalidState("expectation of '" + obs.label + "' has imaginary residue " +
                       std::to_string(value.imag()));
  }
  return value.real();
}

double covariance(const DensityMatrix& rho, const Observable& a, const Matrix& b) {
  if (a.dim() != rho.dim() || b.dim() != rho.dim()) {
    throw DimensionMismatch("covariance: dimensions do not match");
  }
  const cplx sym = 0.5 * trace_product(rho.matrix, anticommutator(a.matrix, b));
  const cplx ea = trace_product(rho.matrix, a.matrix);
  const cplx eb = trace_product(rho.matrix, b);
  return sym.real() - ea.real() * eb.real();
}

double von_neumann_entropy(const DensityMatrix& rho, double clamp) {
  const SpectralDecomposition dec = hermitian_eig(rho.matrix);
  double s = 0.0;
  for (double lam : dec.eigenvalues) {
    if (lam < -clamp) {
      throw InvalidState("entropy: eigenvalue " + std::to_string(lam) + " below -" +
                         std::to_string(clamp));
    }
    if (lam <= 0.0) continue;  // 0 ln 0 = 0
    s -= lam * std::log(lam);
  }
  return s;
}

double purity(const DensityMatrix& rho) {
  return trace_product(rho.matrix, rho.matrix).real();
}

DensityMatrix projector_from_ket(const StateVector& psi) {
  const int n = psi.dim();
  const double nrm2 = psi.norm() * psi.norm();
  if (!(nrm2 > 1e-24)) throw InvalidState("projector_from_ket: zero state vector");
  Matrix p(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      p(i, j) = psi.amplitudes[static_cast<size_t>(i)] *
                std::conj(psi.amplitudes[static_cast<size_t>(j)]) / nrm2;
  return DensityMatrix(std::move(p));
}

DensityMatrix from_mixture(const Mixture& mix) {
  if (mix.components.empty()) throw InvalidArgument("from_mixture: empty mixture");
  double total = 0.0;
  for (const auto& c : mix.components) {
    if (!(c.weight > 0.0) || c.weight > 1.0 + 1e-12) {
      throw InvalidArgument("from_mixture: weight out of (0,1]");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("from_mixture: weights sum to " + std::to_string(total));
  }
  const int n = mix.components.front().ket.dim();
  Matrix acc(n);
  for (const auto& c : mix.components) {
    if (c.ket.dim() != n) throw DimensionMismatch("from_mixture: component dimensions differ");
    add_scaled(acc, c.weight, projector_from_ket(c.ket).matrix);
  }
  return DensityMatrix(std::move(acc));
}

DensityMatrix bloch_decode(const BlochVector& r) {
  const double n2 = r.x * r.x + r.y * r.y + r.z * r.z;
  if (n2 > 1.0 + 1e-10) {
    throw InvalidState("bloch_decode: |r| exceeds 1");
  }
  Matrix m(2);
  m(0, 0) = 0.5 * (1.0 + r.z);
  m(1, 1) = 0.5 * (1.0 - r.z);
  m(0, 1) = 0.5 * cplx{r.x, -r.y};
  m(1, 0) = 0.5 * cplx{r.x, r.y};
  return DensityMatrix(std::move(m));
}

BlochVector bloch_encode(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw DimensionMismatch("bloch_encode: defined only for dimension 2");
  BlochVector r;
  r.x = trace_product(rho.matrix, pauli_x()).real();
  r.y = trace_product(rho.matrix, pauli_y()).real();
  r.z = trace_product(rho.matrix, pauli_z()).real();
  return r;
}

std::optional<Matrix> log_density(const DensityMatrix& rho, double ev_floor) {
  const SpectralDecomposition dec = hermitian_eig(rho.matrix);
  if (dec.eigenvalues.front() < ev_floor) return std::nullopt;
  const int n = rho.dim();
  Matrix l(n);
  for (int k = 0; k < n; ++k) {
    const double loglam = std::log(dec.eigenvalues[static_cast<size_t>(k)]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        l(i, j) += loglam * dec.eigenvectors(i, k) * std::conj(dec.eigenvectors(j, k));
  }
  return l;
}

Matrix pauli_x() {
  Matrix m(2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

Matrix pauli_y() {
  Matrix m(2);
  m(0, 1) = cplx{0.0, -1.0};
  m(1, 0) = cplx{0.0, 1.0};
  return m;
}

Matrix pauli_z() {
  Matrix m(2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

cplx inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("inner: dimensions differ");
  cplx s{};
  for (int i = 0; i < a.dim(); ++i)
    s += std::conj(a.amplitudes[static_cast<size_t>(i)]) * b.amplitudes[static_cast<size_t>(i)];
  return s;
}

StateVector mat_vec(const Matrix& m, const StateVector& v) {
  if (m.dim() != v.dim()) throw DimensionMismatch("mat_vec: dimensions differ");
  StateVector out;
  out.amplitudes.assign(static_cast<size_t>(m.dim()), cplx{});
  for (int i = 0; i < m.dim(); ++i) {
    cplx acc{};
    for (int j = 0; j < m.dim(); ++j) acc += m(i, j) * v.amplitudes[static_cast<size_t>(j)];
    out.amplitudes[static_cast<size_t>(i)] = acc;
  }
  return out;
}

Matrix random_hermitian(int dim, Rng& rng) {
  Matrix m(dim);
  for (int i = 0; i < dim; ++i) {
    m(i, i) = rng.normal();
    for (int j = i + 1; j < dim; ++j) {
      const cplx v{rng.normal() * 0.5, rng.normal() * 0.5};
      m(i, j) = v;
      m(j, i) = std::conj(v);
    }
  }
  return m;
}

DensityMatrix random_density(int dim, Rng& rng) {
  Matrix g(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = cplx{rng.normal(), rng.normal()};
  Matrix rho = g * adjoint(g);
  const double tr = trace(rho).real();
  rho *= cplx{1.0 / tr, 0.0};
  return DensityMatrix(std::move(rho));
}

StateVector random_ket(int dim, Rng& rng) {
  StateVector v;
  v.amplitudes.reserve(static_cast<size_t>(dim));
  for (int i = 0; i < dim; ++i) v.amplitudes.push_back(cplx{rng.normal(), rng.normal()});
  return v;
}

}  // namespace qdyn
