#pragma once

#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qdyn/constraints.hpp"

namespace qdyn {

enum class FlowKind {
  Unitary,                   // dρ/dt = i[ρ, H]
  CommutatorConstrained,     // i[ρ,H] − i λ_k [ρ,Φ^k], w-based multipliers (even N)
  SymmetricConstrained,      // i[ρ,H] − λ_k ({ρ,Φ^k} − 2⟨Φ^k⟩ρ), m-based multipliers
  PureProjective,            // ψ̇ = −i(H − ⟨H⟩)ψ
  PureConstrainedCommutator, // ψ̇ = −i(H − ⟨H⟩)ψ + i λ_k (Φ^k − ⟨Φ^k⟩)ψ
  PureConstrainedSymmetric,  // ψ̇ = −i(H − ⟨H⟩)ψ − λ_k (Φ^k − ⟨Φ^k⟩)ψ
};

bool is_pure_kind(FlowKind k);
bool is_constrained_kind(FlowKind k);
bool is_commutator_kind(FlowKind k);
// Pure-state counterpart of a matrix-flow kind (Unitary → PureProjective, ...).
FlowKind pure_counterpart(FlowKind matrix_kind);
std::string flow_kind_name(FlowKind k);

struct FlowSpec {
  FlowKind kind = FlowKind::Unitary;
  Observable hamiltonian;
  ConstraintSet constraints;  // empty for Unitary / PureProjective

  void validate() const;
};

enum class StepMethod { RK4Fixed, RK4StepDoubling };

struct HygieneConfig {
  bool rehermitize = true;
  bool renormalize_trace = false;
};

struct IntegratorConfig {
  StepMethod method = StepMethod::RK4Fixed;
  double dt = 1e-3;           // ħ = 1 time units
  double t_final = 1.0;
  int record_stride = 1;      // record every this many accepted steps
  double adapt_tol = 1e-10;   // step-doubling local error bound
  HygieneConfig hygiene;

  void validate() const;
};

struct StepDiagnostics {
  std::vector<double> lambdas;
  double geometry_rcond = std::numeric_limits<double>::quiet_NaN();
  double hygiene_correction = 0.0;  // Frobenius norm of the applied correction
};

// Vector fields. All expressions use the orientation dρ/dt = i[ρ, H].
Matrix rhs_unitary(const DensityMatrix& rho, const Observable& h);
Matrix rhs_commutator_constrained(const DensityMatrix& rho, const FlowSpec& spec,
                                  StepDiagnostics* diag = nullptr);
Matrix rhs_symmetric_constrained(const DensityMatrix& rho, const FlowSpec& spec,
                                 StepDiagnostics* diag = nullptr);
StateVector rhs_pure_projective(const StateVector& psi, const Observable& h);
StateVector rhs_pure_constrained(const StateVector& psi, const FlowSpec& spec,
                                 StepDiagnostics* diag = nullptr);

// A flow with its state-independent operator products precomputed. Multipliers
// are re-solved at every stage evaluation; only fixed commutators and
// anticommutators are cached, which leaves the vector field unchanged.
class FlowField {
 public:
  explicit FlowField(FlowSpec spec);

  const FlowSpec& spec() const { return spec_; }
  const ConstraintCache* cache() const { return spec_.constraints.empty() ? nullptr : &cache_; }

  Matrix eval(const Matrix& rho, StepDiagnostics* diag = nullptr) const;
  StateVector eval(const StateVector& psi, StepDiagnostics* diag = nullptr) const;

 private:
  FlowSpec spec_;
  ConstraintCache cache_;
};

// Either a density matrix (matrix flows) or a ket (pure flows).
using FlowState = std::variant<DensityMatrix, StateVector>;

struct StepOutcome {
  FlowState state;
  StepDiagnostics diagnostics;
  double dt_used = 0.0;
  double dt_next = 0.0;  // suggestion for the next step (step doubling)
};

// One integrator step of size dt_attempt (step doubling may internally halve).
StepOutcome step(const FlowState& state, const FlowField& field, const IntegratorConfig& config,
                 double dt_attempt);
// Convenience overload starting from config.dt.
StepOutcome step(const FlowState& state, const FlowSpec& spec, const IntegratorConfig& config);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<DensityMatrix> states;   // projectors of ψ(t) for pure flows
  std::vector<StateVector> kets;       // populated only by pure flows
  std::vector<std::string> channel_names;
  std::map<std::string, std::vector<double>> channels;

  bool failed = false;
  double failure_time = 0.0;
  std::string failure_message;

  size_t size() const { return times.size(); }
  bool has_channel(const std::string& name) const { return channels.count(name) != 0; }
  const std::vector<double>& channel(const std::string& name) const;
};

// Monitor groups understood by evolve: purity, entropy, eigenvalues,
// residuals, lambdas, hygiene, bloch, entropy_rate.
const std::vector<std::string>& all_monitors();

// Advance the flow and record states plus monitor channels every
// record_stride steps (the final state is always recorded). Step errors are
// captured in the returned record (failed/failure_time/failure_message) so
// partial trajectories survive.
TrajectoryRecord evolve(const FlowState& initial, const FlowSpec& spec,
                        const IntegratorConfig& config,
                        const std::vector<std::string>& monitors = all_monitors());

}  // namespace qdyn
