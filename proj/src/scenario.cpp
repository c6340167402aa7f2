#include "qdyn/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <utility>

namespace qdyn {

DensityMatrix initial_density(const InitialState& state) {
  if (std::holds_alternative<BlochVector>(state)) return bloch_decode(std::get<BlochVector>(state));
  if (std::holds_alternative<DensityMatrix>(state)) return std::get<DensityMatrix>(state);
  if (std::holds_alternative<StateVector>(state)) {
    return projector_from_ket(std::get<StateVector>(state));
  }
  return from_mixture(std::get<Mixture>(state));
}

bool is_ket_state(const InitialState& state) {
  return std::holds_alternative<StateVector>(state);
}

FlowSpec flow_spec_for(const Scenario& scenario, const InitialState& state) {
  FlowSpec spec;
  spec.hamiltonian = scenario.hamiltonian;
  spec.kind = is_ket_state(state) ? pure_counterpart(scenario.flow) : scenario.flow;
  if (!scenario.constraint_observables.empty() && is_constrained_kind(spec.kind)) {
    spec.constraints =
        ConstraintSet::capture_targets(scenario.constraint_observables, initial_density(state));
  }
  return spec;
}

TrajectoryRecord run_single(const Scenario& scenario, size_t index) {
  const InitialState& state = scenario.initial_states.at(index);
  const FlowSpec spec = flow_spec_for(scenario, state);
  const FlowState y0 = is_ket_state(state)
                           ? FlowState(std::get<StateVector>(state))
                           : FlowState(initial_density(state));
  const std::vector<std::string>& monitors =
      scenario.monitors.empty() ? all_monitors() : scenario.monitors;
  return evolve(y0, spec, scenario.integrator, monitors);
}

std::vector<TrajectoryRecord> run_scenario(const Scenario& scenario, int max_threads) {
  const size_t n = scenario.initial_states.size();
  std::vector<TrajectoryRecord> records(n);
  if (n == 0) return records;

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const size_t workers =
      std::min(n, static_cast<size_t>(max_threads > 0 ? max_threads : static_cast<int>(hw)));

  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) records[i] = run_single(scenario, i);
    return records;
  }

  std::atomic<size_t> cursor{0};
  auto work = [&]() {
    while (true) {
      const size_t i = cursor.fetch_add(1);
      if (i >= n) break;
      records[i] = run_single(scenario, i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();
  return records;
}

Scenario builtin_figure1(double x0, int grid) {
  if (!(x0 > -1.0 && x0 < 1.0)) throw InvalidArgument("figure1: x0 must lie in (-1, 1)");
  if (grid < 1) throw InvalidArgument("figure1: grid must be positive");

  Scenario s;
  s.name = "figure1";
  s.dimension = 2;
  s.hamiltonian = Observable("sz", pauli_z());
  s.constraint_observables = {Observable("sx", pauli_x())};
  s.flow = FlowKind::SymmetricConstrained;
  s.integrator.method = StepMethod::RK4Fixed;
  s.integrator.dt = 1e-3;
  s.integrator.t_final = 50.0;
  s.integrator.record_stride = 100;
  s.seed = 0;

  const double radius = std::sqrt(1.0 - x0 * x0);
  const double r2_open = radius * radius * (1.0 - 1e-12);
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double y = (grid == 1) ? 0.0 : -radius + 2.0 * radius * i / (grid - 1);
      const double z = (grid == 1) ? 0.0 : -radius + 2.0 * radius * j / (grid - 1);
      if (y * y + z * z < r2_open) s.initial_states.push_back(BlochVector{x0, y, z});
    }
  }
  s.initial_states.push_back(BlochVector{x0, radius, 0.0});   // attractor
  s.initial_states.push_back(BlochVector{x0, -radius, 0.0});  // repeller
  return s;
}

Scenario builtin_even_pair(std::uint64_t seed) {
  Scenario s;
  s.name = "even_pair";
  s.dimension = 4;
  const Matrix id2 = Matrix::identity(2);
  Matrix h = kron(pauli_z(), id2);
  add_scaled(h, 0.5, kron(pauli_x(), pauli_x()));
  s.hamiltonian = Observable("sz1+0.5sxsx", std::move(h));
  s.constraint_observables = {Observable("sx1", kron(pauli_x(), id2)),
                              Observable("sy1", kron(pauli_y(), id2))};
  s.flow = FlowKind::CommutatorConstrained;
  s.integrator.method = StepMethod::RK4Fixed;
  s.integrator.dt = 5e-4;
  s.integrator.t_final = 10.0;
  s.integrator.record_stride = 20;
  s.seed = seed;

  // Draw until the w geometry is comfortably nonsingular (w^{12} = 2i⟨σz⊗1⟩)
  // and the state is safely full rank.
  Rng rng(seed);
  const Observable szI("sz1", kron(pauli_z(), id2));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    DensityMatrix rho = random_density(4, rng);
    if (std::abs(expectation(rho, szI)) <= 0.2) continue;
    const SpectralDecomposition dec = hermitian_eig(rho.matrix);
    if (dec.eigenvalues.front() < 5e-3) continue;
    s.initial_states.push_back(std::move(rho));
    break;
  }
  if (s.initial_states.empty()) {
    throw InvalidArgument("even_pair: no admissible state found for this seed");
  }
  return s;
}

std::pair<double, double> bloch_oracle_rhs(double x0, double y, double z) {
  if (!(std::abs(x0) < 1.0)) throw InvalidArgument("bloch_oracle_rhs: |x0| must be < 1");
  const double denom = 1.0 - x0 * x0;
  return {2.0 * x0 - 2.0 * x0 * y * y / denom, -2.0 * x0 * y * z / denom};
}

double entropy_rate_check(const TrajectoryRecord& record) {
  if (!record.has_channel("ds_dt_formula")) {
    throw InvalidArgument("entropy_rate_check: trajectory was not recorded from a symmetric flow");
  }
  const std::vector<double>& formula = record.channel("ds_dt_formula");
  const std::vector<double>& fd = record.channel("ds_dt_fd");
  double worst = 0.0;
  for (size_t i = 1; i + 1 < record.size(); ++i) {
    if (std::isnan(formula[i]) || std::isnan(fd[i])) continue;
    worst = std::max(worst, std::abs(formula[i] - fd[i]));
  }
  return worst;
}

double MixtureReport::max_ensemble_distance() const {
  double worst = 0.0;
  for (double d : ensemble_distance_a) worst = std::max(worst, d);
  for (double d : ensemble_distance_b) worst = std::max(worst, d);
  return worst;
}

namespace {

// Σ p_n Π(ψ_n(t)) with each component evolved independently under the
// pure-state flow; distances to the matrix-flow trajectory per record time.
std::vector<double> ensemble_distances(const Mixture& mix, const Scenario& base,
                                       const std::vector<TrajectoryRecord>& flow_records) {
  const TrajectoryRecord& reference = flow_records.front();
  std::vector<std::vector<DensityMatrix>> component_states;
  component_states.reserve(mix.components.size());
  for (const auto& component : mix.components) {
    Scenario s = base;
    s.initial_states = {InitialState(component.ket)};
    TrajectoryRecord rec = run_single(s, 0);
    if (rec.failed || rec.size() != reference.size()) {
      throw Error("mixture_experiment: component trajectory failed (" + rec.failure_message + ")");
    }
    component_states.push_back(std::move(rec.states));
  }

  std::vector<double> out(reference.size(), 0.0);
  for (size_t t = 0; t < reference.size(); ++t) {
    Matrix avg(reference.states[t].dim());
    for (size_t c = 0; c < mix.components.size(); ++c) {
      add_scaled(avg, mix.components[c].weight, component_states[c][t].matrix);
    }
    out[t] = frobenius_norm(avg - reference.states[t].matrix);
  }
  return out;
}

}  // namespace

MixtureReport mixture_experiment(const Mixture& mix_a, const Mixture& mix_b, const Observable& h,
                                 const std::vector<Observable>& phis, FlowKind flow,
                                 const IntegratorConfig& config) {
  if (is_pure_kind(flow)) {
    throw InvalidArgument("mixture_experiment: flow must be a matrix flow kind");
  }
  const DensityMatrix rho_a = from_mixture(mix_a);
  const DensityMatrix rho_b = from_mixture(mix_b);
  if (max_abs_diff(rho_a.matrix, rho_b.matrix) > 1e-12) {
    throw InvalidArgument("mixture_experiment: the two mixtures build different states");
  }

  Scenario base;
  base.name = "mixture_experiment";
  base.dimension = rho_a.dim();
  base.hamiltonian = h;
  base.constraint_observables = is_constrained_kind(flow) ? phis : std::vector<Observable>{};
  base.flow = flow;
  base.integrator = config;

  Scenario sa = base;
  sa.initial_states = {InitialState(rho_a)};
  Scenario sb = base;
  sb.initial_states = {InitialState(rho_b)};
  const TrajectoryRecord rec_a = run_single(sa, 0);
  const TrajectoryRecord rec_b = run_single(sb, 0);
  if (rec_a.failed || rec_b.failed) {
    throw Error("mixture_experiment: matrix flow failed (" + rec_a.failure_message +
                rec_b.failure_message + ")");
  }

  MixtureReport report;
  report.times = rec_a.times;
  for (size_t t = 0; t < rec_a.size() && t < rec_b.size(); ++t) {
    report.max_flow_distance = std::max(
        report.max_flow_distance, frobenius_norm(rec_a.states[t].matrix - rec_b.states[t].matrix));
  }
  report.ensemble_distance_a = ensemble_distances(mix_a, base, {rec_a});
  report.ensemble_distance_b = ensemble_distances(mix_b, base, {rec_b});
  return report;
}

}  // namespace qdyn
