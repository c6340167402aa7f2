#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qdyn/matrix.hpp"
#include "qdyn/rng.hpp"

namespace qdyn {

// Hermitian operator with a display label.
struct Observable {
  std::string label;
  Matrix matrix;

  Observable() = default;
  // Validates Hermiticity within tol (relative Frobenius).
  Observable(std::string label, Matrix matrix, double tol = 1e-10);

  int dim() const { return matrix.dim(); }
};

// Wrapper for a (candidate) density matrix. Construction is cheap and does not
// validate: integrators hold transient near-valid states between steps.
// validate() is the explicit pathway that checks Hermiticity, unit trace and
// positivity.
struct DensityMatrix {
  Matrix matrix;

  DensityMatrix() = default;
  explicit DensityMatrix(Matrix m) : matrix(std::move(m)) {}

  int dim() const { return matrix.dim(); }
  void validate(double tol = 1e-10) const;
};

// Not necessarily normalized; only a nonzero norm is required.
struct StateVector {
  std::vector<cplx> amplitudes;

  int dim() const { return static_cast<int>(amplitudes.size()); }
  double norm() const;
};

struct Mixture {
  struct Component {
    double weight = 0.0;
    StateVector ket;
  };
  std::vector<Component> components;
};

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
};

// tr(ρ·obs). The imaginary residue must stay below imag_tol; a larger residue
// signals a corrupted state and throws InvalidState.
double expectation(const DensityMatrix& rho, const Observable& obs, double imag_tol = 1e-12);

// Symmetrized covariance ½tr(ρ{a,b}) − tr(ρa)tr(ρb), real by construction for
// Hermitian a, b.
double covariance(const DensityMatrix& rho, const Observable& a, const Matrix& b);

// S = −Σ λ ln λ with 0·ln 0 = 0. Eigenvalues in [−clamp, 0) are clamped to 0;
// anything below −clamp throws InvalidState.
double von_neumann_entropy(const DensityMatrix& rho, double clamp = 1e-10);

// tr(ρ²)
double purity(const DensityMatrix& rho);

// |ψ⟩⟨ψ| / ⟨ψ|ψ⟩; independent of the input norm and global phase.
DensityMatrix projector_from_ket(const StateVector& psi);

// Σ p_n |ψ_n⟩⟨ψ_n| / ⟨ψ_n|ψ_n⟩. Weights must lie in (0,1] and sum to 1.
DensityMatrix from_mixture(const Mixture& mix);

// ρ = (I + xσx + yσy + zσz)/2, defined for |r| ≤ 1 (+1e-10 slack).
DensityMatrix bloch_decode(const BlochVector& r);
// Inverse map; defined only for dim = 2.
BlochVector bloch_encode(const DensityMatrix& rho);

// ln ρ through the spectral decomposition. Returns nullopt when any eigenvalue
// falls below ev_floor (the state is too close to singular for a logarithm).
std::optional<Matrix> log_density(const DensityMatrix& rho, double ev_floor = 1e-12);

Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();

// ket helpers shared by the pure-state flows
cplx inner(const StateVector& a, const StateVector& b);  // ⟨a|b⟩
StateVector mat_vec(const Matrix& m, const StateVector& v);

// seeded random states (deterministic across platforms, see rng.hpp)
Matrix random_hermitian(int dim, Rng& rng);
DensityMatrix random_density(int dim, Rng& rng);  // Ginibre G G† / tr, full rank a.s.
StateVector random_ket(int dim, Rng& rng);

}  // namespace qdyn
