#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qdyn/flow.hpp"

namespace qdyn {

// Initial state as declared in a scenario document. Kets evolve under the
// pure-state variant of the scenario flow; everything else under the matrix
// flow.
using InitialState = std::variant<BlochVector, DensityMatrix, StateVector, Mixture>;

struct Scenario {
  std::string name;
  int dimension = 0;
  Observable hamiltonian;
  std::vector<Observable> constraint_observables;
  FlowKind flow = FlowKind::Unitary;  // matrix kind; kets pick the pure counterpart
  std::vector<InitialState> initial_states;
  IntegratorConfig integrator;
  std::vector<std::string> monitors;  // empty = all
  std::uint64_t seed = 0;
};

DensityMatrix initial_density(const InitialState& state);
bool is_ket_state(const InitialState& state);

// Flow spec for one initial state; constraint targets are captured from that
// state, which makes it feasible at t = 0 by construction.
FlowSpec flow_spec_for(const Scenario& scenario, const InitialState& state);

TrajectoryRecord run_single(const Scenario& scenario, size_t index);
// Runs all initial states; trajectories are independent and run in parallel
// (max_threads = 0 picks the machine parallelism). Output order is by index.
std::vector<TrajectoryRecord> run_scenario(const Scenario& scenario, int max_threads = 0);

// Spin-½ cross-section scenario: H = σz, Φ = σx with target x0, symmetric
// flow. Initial states are a grid×grid lattice intersected with the open disc
// y² + z² < 1 − x0², plus the two equator points (x0, ±√(1−x0²), 0).
Scenario builtin_figure1(double x0, int grid);

// Two-qubit commutator-flow scenario: H = σz⊗1 + 0.5 σx⊗σx, Φ = (σx⊗1, σy⊗1),
// with a seeded random full-rank initial state whose ⟨σz⊗1⟩ stays away from 0.
Scenario builtin_even_pair(std::uint64_t seed = 20);

// Reduced vector field of the figure1 dynamics on the slice x = x0:
//   dy/dt = 2 x0 − 2 x0 y² / (1 − x0²),  dz/dt = −2 x0 y z / (1 − x0²).
// Test oracle: integrated independently and compared against the matrix flow.
std::pair<double, double> bloch_oracle_rhs(double x0, double y, double z);

// Max |ds_dt_formula − ds_dt_fd| over interior record points where both are
// defined. Requires a trajectory recorded from the symmetric flow.
double entropy_rate_check(const TrajectoryRecord& record);

struct MixtureReport {
  std::vector<double> times;
  // (a) distance between the matrix-flow trajectories from the two mixtures
  double max_flow_distance = 0.0;
  // (b) per-time distance between the matrix flow and the ensemble average of
  //     independently evolved pure components, one series per mixture
  std::vector<double> ensemble_distance_a;
  std::vector<double> ensemble_distance_b;

  double max_ensemble_distance() const;
};

// Evolves ρ(0) = Σ p_n Π_n under the matrix flow from two decompositions of
// the same state, and each decomposition's components under the pure-state
// flow. The matrix flow must agree between constructions (autonomy); the
// naive ensemble average need not.
MixtureReport mixture_experiment(const Mixture& mix_a, const Mixture& mix_b,
                                 const Observable& h, const std::vector<Observable>& phis,
                                 FlowKind flow, const IntegratorConfig& config);

}  // namespace qdyn
