#pragma once

#include <string>
#include <vector>

#include "qdyn/state.hpp"

namespace qdyn {

// The constraint family {Φ^k, c^k}. Targets are captured from the initial
// state of a run, which guarantees feasibility at t = 0.
struct ConstraintSet {
  std::vector<Observable> observables;
  std::vector<double> targets;

  int size() const { return static_cast<int>(observables.size()); }
  int dim() const { return observables.empty() ? 0 : observables.front().dim(); }
  bool empty() const { return observables.empty(); }
  void validate() const;

  static ConstraintSet capture_targets(std::vector<Observable> obs, const DensityMatrix& rho0);
};

// tr(ρΦ^k) − c^k for each k.
std::vector<double> residuals(const DensityMatrix& rho, const ConstraintSet& cs);

// State-independent operator products reused across integrator stages. The
// multipliers themselves are state-dependent and are never cached.
struct ConstraintCache {
  std::vector<Matrix> h_comms;      // [H, Φ^k]
  std::vector<Matrix> pair_comms;   // [Φ^j, Φ^k] at index j*N + k
  std::vector<Matrix> pair_acomms;  // {Φ^j, Φ^k} at index j*N + k

  static ConstraintCache build(const ConstraintSet& cs, const Observable& h);
};

// w^{jk} = tr(ρ[Φ^j, Φ^k]); antisymmetric with purely imaginary entries,
// both asserted within 1e-12.
Matrix w_matrix(const DensityMatrix& rho, const ConstraintSet& cs,
                const ConstraintCache* cache = nullptr);

// m^{jk} = tr(ρ{Φ^j, Φ^k}) − 2 tr(ρΦ^j) tr(ρΦ^k); symmetric with real
// entries, asserted within 1e-12.
Matrix m_matrix(const DensityMatrix& rho, const ConstraintSet& cs,
                const ConstraintCache* cache = nullptr);

struct MultiplierSolution {
  std::vector<double> lambdas;
  double rcond = 0.0;
  Matrix geometry;  // the w or m matrix that was inverted
};

// λ solving tr(ρ[H,Φ^k]) = λ_j w^{jk} (requires even N and invertible w).
// The stationarity residual is re-checked per component before returning.
MultiplierSolution solve_multipliers_commutator(const DensityMatrix& rho, const ConstraintSet& cs,
                                                const Observable& h,
                                                const ConstraintCache* cache = nullptr);
// λ_j = i m_{jk} tr(ρ[H,Φ^k]) (any N, requires invertible m).
MultiplierSolution solve_multipliers_symmetric(const DensityMatrix& rho, const ConstraintSet& cs,
                                               const Observable& h,
                                               const ConstraintCache* cache = nullptr);

// Pure-state versions: the same formulas with expectations taken as
// ⟨ψ|·|ψ⟩/⟨ψ|ψ⟩.
MultiplierSolution solve_multipliers_commutator(const StateVector& psi, const ConstraintSet& cs,
                                                const Observable& h,
                                                const ConstraintCache* cache = nullptr);
MultiplierSolution solve_multipliers_symmetric(const StateVector& psi, const ConstraintSet& cs,
                                               const Observable& h,
                                               const ConstraintCache* cache = nullptr);

// Advisory pre-flight report: commutator norms, parity, dimension consistency.
struct QualificationReport {
  struct HamiltonianEntry {
    int k = 0;                // 1-based index of Φ^k
    double comm_norm = 0.0;   // ‖[H, Φ^k]‖_F
    bool qualified = false;   // nonzero commutator
  };
  struct PairEntry {
    int j = 0, k = 0;         // 1-based
    double comm_norm = 0.0;   // ‖[Φ^j, Φ^k]‖_F
    bool nonredundant = false;
  };

  int dim = 0;
  bool dims_consistent = true;
  bool parity_even = false;
  std::vector<HamiltonianEntry> hamiltonian_entries;
  std::vector<PairEntry> pair_entries;

  bool qualified_commutator() const;  // even N, [H,Φ^k] ≠ 0, pairs noncommuting
  bool qualified_symmetric() const;   // [H,Φ^k] ≠ 0
  std::string format() const;
};

QualificationReport qualification_check(const ConstraintSet& cs, const Observable& h);

}  // namespace qdyn
