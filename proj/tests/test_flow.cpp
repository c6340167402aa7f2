#include <doctest.h>

#include <cmath>

#include "qdyn/flow.hpp"
#include "qdyn/rng.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace qdyn;
using namespace qdyn::testing;

namespace {

FlowSpec qubit_symmetric(const DensityMatrix& rho0) {
  FlowSpec spec;
  spec.kind = FlowKind::SymmetricConstrained;
  spec.hamiltonian = Observable("sz", pauli_z());
  spec.constraints = ConstraintSet::capture_targets({Observable("sx", pauli_x())}, rho0);
  return spec;
}

FlowSpec two_qubit_commutator(const DensityMatrix& rho0) {
  const Matrix id2 = Matrix::identity(2);
  Matrix h = kron(pauli_z(), id2);
  add_scaled(h, 0.5, kron(pauli_x(), pauli_x()));
  FlowSpec spec;
  spec.kind = FlowKind::CommutatorConstrained;
  spec.hamiltonian = Observable("h", std::move(h));
  spec.constraints = ConstraintSet::capture_targets(
      {Observable("sx1", kron(pauli_x(), id2)), Observable("sy1", kron(pauli_y(), id2))}, rho0);
  return spec;
}

BlochVector bloch_velocity(const Matrix& rhs) {
  return {trace_product(rhs, pauli_x()).real(), trace_product(rhs, pauli_y()).real(),
          trace_product(rhs, pauli_z()).real()};
}

}  // namespace

TEST_CASE("rhs_unitary") {
  const Observable h("sz", pauli_z());
  CHECK(max_abs(rhs_unitary(DensityMatrix(diag2(1.0, 0.0)), h)) < 1e-15);
  CHECK(max_abs(rhs_unitary(DensityMatrix(Matrix::identity(2) * cplx{0.5, 0.0}), h)) < 1e-15);

  const Matrix rhs = rhs_unitary(bloch_decode({1.0, 0.0, 0.0}), h);
  const BlochVector v = bloch_velocity(rhs);
  CHECK(v.x == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(v.y == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(v.z == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(trace(rhs)) < 1e-14);
  CHECK(hermitian_defect(rhs) < 1e-13);
}

TEST_CASE("commutator flow freezes the fully constrained qubit") {
  const DensityMatrix rho = bloch_decode({0.5, 0.3, 0.2});
  FlowSpec spec;
  spec.kind = FlowKind::CommutatorConstrained;
  spec.hamiltonian = Observable("sz", pauli_z());
  spec.constraints = ConstraintSet::capture_targets(
      {Observable("sx", pauli_x()), Observable("sy", pauli_y())}, rho);
  StepDiagnostics diag;
  const Matrix rhs = rhs_commutator_constrained(rho, spec, &diag);
  CHECK(max_abs(rhs) < 1e-13);
  CHECK(diag.lambdas[0] == doctest::Approx(-2.5).epsilon(1e-11));
  CHECK(diag.lambdas[1] == doctest::Approx(-1.5).epsilon(1e-11));
}

TEST_CASE("commutator flow reduces to the unitary flow when H commutes with all constraints") {
  Rng rng(4);
  const Matrix id2 = Matrix::identity(2);
  DensityMatrix rho = random_density(4, rng);
  while (std::abs(trace_product(rho.matrix, kron(pauli_z(), id2)).real()) < 0.2) {
    rho = random_density(4, rng);
  }
  FlowSpec spec;
  spec.kind = FlowKind::CommutatorConstrained;
  spec.hamiltonian = Observable("1z", kron(id2, pauli_z()));
  spec.constraints = ConstraintSet::capture_targets(
      {Observable("sx1", kron(pauli_x(), id2)), Observable("sy1", kron(pauli_y(), id2))}, rho);
  const Matrix constrained = rhs_commutator_constrained(rho, spec);
  const Matrix unitary = rhs_unitary(rho, spec.hamiltonian);
  CHECK(max_abs_diff(constrained, unitary) < 1e-12);
}

TEST_CASE("two-qubit commutator flow is tangent, traceless and Hermitian") {
  Rng rng(14);
  for (int it = 0; it < 20; ++it) {
    DensityMatrix rho = random_density(4, rng);
    if (std::abs(trace_product(rho.matrix, kron(pauli_z(), Matrix::identity(2))).real()) < 0.2) {
      continue;
    }
    const FlowSpec spec = two_qubit_commutator(rho);
    const Matrix rhs = rhs_commutator_constrained(rho, spec);
    CHECK(std::abs(trace(rhs)) < 1e-13);
    CHECK(hermitian_defect(rhs) < 1e-12);
    for (const Observable& phi : spec.constraints.observables) {
      CHECK(std::abs(trace_product(rhs, phi.matrix)) < 1e-10);
    }
  }
}

TEST_CASE("symmetric flow matches the closed-form Bloch velocity") {
  const DensityMatrix rho = bloch_decode({0.5, 0.3, 0.2});
  const Matrix rhs = rhs_symmetric_constrained(rho, qubit_symmetric(rho));
  const BlochVector v = bloch_velocity(rhs);
  CHECK(v.x == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(v.y == doctest::Approx(0.88).epsilon(1e-12));
  CHECK(v.z == doctest::Approx(-0.08).epsilon(1e-12));
  CHECK(std::abs(trace(rhs)) < 1e-14);
  CHECK(hermitian_defect(rhs) < 1e-13);

  // tangency to the constraint surface
  CHECK(std::abs(trace_product(rhs, pauli_x())) < 1e-10);

  const double x0 = 0.5;
  const DensityMatrix on_axis = bloch_decode({x0, 0.0, 0.0});
  const BlochVector v2 = bloch_velocity(rhs_symmetric_constrained(on_axis, qubit_symmetric(on_axis)));
  CHECK(v2.y == doctest::Approx(2.0 * x0).epsilon(1e-13));
  CHECK(std::abs(v2.x) < 1e-13);
  CHECK(std::abs(v2.z) < 1e-13);
}

TEST_CASE("equator points are fixed points of the symmetric flow") {
  const double x0 = 0.5;
  const double radius = std::sqrt(1.0 - x0 * x0);
  for (double sign : {1.0, -1.0}) {
    const DensityMatrix eq = bloch_decode({x0, sign * radius, 0.0});
    CHECK(frobenius_norm(rhs_symmetric_constrained(eq, qubit_symmetric(eq))) < 1e-12);
  }
}

TEST_CASE("rhs_pure_projective") {
  const Observable h("sz", pauli_z());
  // eigenstate is stationary
  CHECK(rhs_pure_projective(ket2(1.0, 0.0), h).norm() < 1e-15);

  const double isq = 1.0 / std::sqrt(2.0);
  const StateVector plus = ket2(isq, isq);
  const StateVector rhs = rhs_pure_projective(plus, h);
  CHECK(std::abs(rhs.amplitudes[0] - cplx{0.0, -isq}) < 1e-14);
  CHECK(std::abs(rhs.amplitudes[1] - cplx{0.0, isq}) < 1e-14);

  Rng rng(21);
  for (int it = 0; it < 30; ++it) {
    const StateVector psi = random_ket(3, rng);
    const Observable hr("h", random_hermitian(3, rng));
    CHECK(std::abs(inner(psi, rhs_pure_projective(psi, hr))) < 1e-12 * psi.norm());
  }
}

TEST_CASE("rhs_pure_constrained: orthogonality and first-order conservation") {
  Rng rng(33);
  const Matrix id2 = Matrix::identity(2);
  for (int it = 0; it < 20; ++it) {
    StateVector psi = random_ket(4, rng);
    const DensityMatrix rho = projector_from_ket(psi);
    if (std::abs(trace_product(rho.matrix, kron(pauli_z(), id2)).real()) < 0.25) continue;
    FlowSpec spec = two_qubit_commutator(rho);
    spec.kind = FlowKind::PureConstrainedCommutator;
    const StateVector rhs = rhs_pure_constrained(psi, spec);
    CHECK(std::abs(inner(psi, rhs)) < 1e-12 * psi.norm() * psi.norm());
    // d⟨Φ^k⟩ along the flow = 2 Re ⟨ψ|(Φ−⟨Φ⟩)|rhs⟩ / ⟨ψ|ψ⟩
    const double n2 = psi.norm() * psi.norm();
    for (const Observable& phi : spec.constraints.observables) {
      const StateVector ppsi = mat_vec(phi.matrix, psi);
      const double mean = (inner(psi, ppsi) / n2).real();
      StateVector shifted = ppsi;
      for (int i = 0; i < 4; ++i) {
        shifted.amplitudes[static_cast<size_t>(i)] -= mean * psi.amplitudes[static_cast<size_t>(i)];
      }
      CHECK(std::abs(2.0 * (inner(shifted, rhs)).real() / n2) < 1e-10);
    }
  }
}

TEST_CASE("pure constrained flow equals the projective flow when multipliers vanish") {
  Rng rng(6);
  const Matrix id2 = Matrix::identity(2);
  StateVector psi = random_ket(4, rng);
  DensityMatrix rho = projector_from_ket(psi);
  while (std::abs(trace_product(rho.matrix, kron(pauli_z(), id2)).real()) < 0.25) {
    psi = random_ket(4, rng);
    rho = projector_from_ket(psi);
  }
  FlowSpec spec;
  spec.kind = FlowKind::PureConstrainedCommutator;
  spec.hamiltonian = Observable("1z", kron(id2, pauli_z()));  // commutes with both constraints
  spec.constraints = ConstraintSet::capture_targets(
      {Observable("sx1", kron(pauli_x(), id2)), Observable("sy1", kron(pauli_y(), id2))}, rho);
  const StateVector constrained = rhs_pure_constrained(psi, spec);
  const StateVector projective = rhs_pure_projective(psi, spec.hamiltonian);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(constrained.amplitudes[static_cast<size_t>(i)] -
                   projective.amplitudes[static_cast<size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("pure symmetric flow projects to the matrix flow derivative") {
  const double x0 = 0.5;
  const StateVector psi = ket_from_bloch(x0, 0.3, std::sqrt(1.0 - x0 * x0 - 0.09));
  const DensityMatrix rho = projector_from_ket(psi);
  FlowSpec spec = qubit_symmetric(rho);
  spec.kind = FlowKind::PureConstrainedSymmetric;
  const StateVector rhs = rhs_pure_constrained(psi, spec);

  // dΠ/dt = |rhs⟩⟨ψ| + |ψ⟩⟨rhs| for a normalized ψ
  Matrix dpi(2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      dpi(i, j) = rhs.amplitudes[static_cast<size_t>(i)] *
                      std::conj(psi.amplitudes[static_cast<size_t>(j)]) +
                  psi.amplitudes[static_cast<size_t>(i)] *
                      std::conj(rhs.amplitudes[static_cast<size_t>(j)]);

  FlowSpec mspec = qubit_symmetric(rho);
  const Matrix mrhs = rhs_symmetric_constrained(rho, mspec);
  CHECK(max_abs_diff(dpi, mrhs) < 1e-12);

  // equator point is fixed for the pure flow too
  const StateVector eq = ket_from_bloch(x0, std::sqrt(1.0 - x0 * x0), 0.0);
  FlowSpec espec = qubit_symmetric(projector_from_ket(eq));
  espec.kind = FlowKind::PureConstrainedSymmetric;
  CHECK(rhs_pure_constrained(eq, espec).norm() < 1e-12);
}

TEST_CASE("fixed-step unitary integration hits the quarter turn") {
  FlowSpec spec;
  spec.kind = FlowKind::Unitary;
  spec.hamiltonian = Observable("sz", pauli_z());
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = std::acos(-1.0) / 4.0;  // rotation angle 2t = π/2
  config.record_stride = 1000000;          // only the final state matters here

  const TrajectoryRecord rec = evolve(bloch_decode({1.0, 0.0, 0.0}), spec, config);
  REQUIRE_FALSE(rec.failed);
  const BlochVector r = bloch_encode(rec.states.back());
  CHECK(std::abs(r.x - 0.0) < 1e-9);
  CHECK(std::abs(r.y - 1.0) < 1e-9);
  CHECK(std::abs(r.z - 0.0) < 1e-9);
  CHECK(rec.times.back() == doctest::Approx(config.t_final).epsilon(1e-15));
}

TEST_CASE("RK4 is fourth order against the exact rotation") {
  FlowSpec spec;
  spec.kind = FlowKind::Unitary;
  spec.hamiltonian = Observable("sz", pauli_z());

  auto error_at = [&spec](double dt) {
    IntegratorConfig config;
    config.dt = dt;
    config.t_final = 0.785;
    config.record_stride = 1 << 30;
    const TrajectoryRecord rec = evolve(bloch_decode({1.0, 0.0, 0.0}), spec, config);
    const BlochVector r = bloch_encode(rec.states.back());
    const double angle = 2.0 * 0.785;
    const double ex = std::cos(angle), ey = std::sin(angle);
    return std::sqrt((r.x - ex) * (r.x - ex) + (r.y - ey) * (r.y - ey) + r.z * r.z);
  };
  const double ratio = error_at(0.02) / error_at(0.01);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("symmetric flow keeps the constraint over ten thousand steps") {
  const DensityMatrix rho0 = bloch_decode({0.5, -0.3, 0.4});
  FlowSpec spec = qubit_symmetric(rho0);
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 10.0;
  config.record_stride = 100;
  const TrajectoryRecord rec = evolve(rho0, spec, config);
  REQUIRE_FALSE(rec.failed);
  double worst = 0.0;
  for (double r : rec.channel("residual_1")) worst = std::max(worst, std::abs(r));
  CHECK(worst < 1e-8);
}

TEST_CASE("step doubling matches the fixed-step result and halves when needed") {
  FlowSpec spec;
  spec.kind = FlowKind::Unitary;
  spec.hamiltonian = Observable("sz", pauli_z());
  IntegratorConfig config;
  config.method = StepMethod::RK4StepDoubling;
  config.dt = 0.05;
  config.adapt_tol = 1e-12;
  config.t_final = 1.0;
  config.record_stride = 1 << 30;
  const TrajectoryRecord rec = evolve(bloch_decode({1.0, 0.0, 0.0}), spec, config);
  REQUIRE_FALSE(rec.failed);
  const BlochVector r = bloch_encode(rec.states.back());
  CHECK(std::abs(r.x - std::cos(2.0)) < 1e-9);
  CHECK(std::abs(r.y - std::sin(2.0)) < 1e-9);

  IntegratorConfig impossible = config;
  impossible.adapt_tol = 1e-30;
  const TrajectoryRecord fail = evolve(bloch_decode({1.0, 0.0, 0.0}), spec, impossible);
  CHECK(fail.failed);
  CHECK(fail.failure_time == 0.0);
  CHECK(fail.failure_message.find("underflow") != std::string::npos);
  CHECK(fail.size() == 1);  // the initial record is retained
}

TEST_CASE("trace is conserved to roundoff with hygiene disabled") {
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 5.0;
  config.record_stride = 100;
  config.hygiene.rehermitize = false;
  config.hygiene.renormalize_trace = false;

  const DensityMatrix rho0 = bloch_decode({0.5, 0.3, 0.2});

  FlowSpec sym = qubit_symmetric(rho0);
  const TrajectoryRecord rec1 = evolve(rho0, sym, config);
  REQUIRE_FALSE(rec1.failed);
  for (const DensityMatrix& s : rec1.states) {
    CHECK(std::abs(trace(s.matrix).real() - 1.0) < 1e-12);
    CHECK(std::abs(trace(s.matrix).imag()) < 1e-14);
  }

  Rng rng(61);
  DensityMatrix rho4 = random_density(4, rng);
  while (std::abs(trace_product(rho4.matrix, kron(pauli_z(), Matrix::identity(2))).real()) < 0.3) {
    rho4 = random_density(4, rng);
  }
  const TrajectoryRecord rec2 = evolve(rho4, two_qubit_commutator(rho4), config);
  REQUIRE_FALSE(rec2.failed);
  for (const DensityMatrix& s : rec2.states) {
    CHECK(std::abs(trace(s.matrix).real() - 1.0) < 1e-12);
  }
}

TEST_CASE("hermiticity drift stays tiny without rehermitization") {
  const DensityMatrix rho0 = bloch_decode({0.5, 0.3, 0.2});
  FlowSpec spec = qubit_symmetric(rho0);
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 10.0;  // ten thousand steps
  config.record_stride = 1000;
  config.hygiene.rehermitize = false;
  const TrajectoryRecord rec = evolve(rho0, spec, config);
  REQUIRE_FALSE(rec.failed);
  for (const DensityMatrix& s : rec.states) CHECK(hermitian_defect(s.matrix) < 1e-10);
}

TEST_CASE("hygiene corrections are recorded and stay small") {
  const DensityMatrix rho0 = bloch_decode({0.5, 0.3, 0.2});
  FlowSpec spec = qubit_symmetric(rho0);
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 2.0;
  config.record_stride = 10;
  const TrajectoryRecord rec = evolve(rho0, spec, config);
  REQUIRE_FALSE(rec.failed);
  const std::vector<double>& hyg = rec.channel("hygiene_correction");
  CHECK(hyg.front() == 0.0);
  for (double h : hyg) CHECK(h < 1e-8);
}

TEST_CASE("evolve is deterministic") {
  const DensityMatrix rho0 = bloch_decode({0.5, 0.3, 0.2});
  FlowSpec spec = qubit_symmetric(rho0);
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 1.0;
  config.record_stride = 10;
  const TrajectoryRecord a = evolve(rho0, spec, config);
  const TrajectoryRecord b = evolve(rho0, spec, config);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(max_abs_diff(a.states[i].matrix, b.states[i].matrix) == 0.0);
  }
  for (const std::string& name : a.channel_names) {
    const auto& ca = a.channel(name);
    const auto& cb = b.channel(name);
    for (size_t i = 0; i < ca.size(); ++i) {
      const bool same = (ca[i] == cb[i]) || (std::isnan(ca[i]) && std::isnan(cb[i]));
      CHECK(same);
    }
  }
}

TEST_CASE("record grid covers a non-integer step count") {
  FlowSpec spec;
  spec.kind = FlowKind::Unitary;
  spec.hamiltonian = Observable("sz", pauli_z());
  IntegratorConfig config;
  config.dt = 0.3;
  config.t_final = 1.0;
  config.record_stride = 3;
  const TrajectoryRecord rec = evolve(bloch_decode({0.4, 0.0, 0.0}), spec, config);
  REQUIRE_FALSE(rec.failed);
  REQUIRE(rec.size() == 3);  // t = 0, 0.9, 1.0
  CHECK(rec.times[1] == doctest::Approx(0.9));
  CHECK(rec.times.back() == doctest::Approx(1.0));
}

TEST_CASE("evolve reports a singular start instead of crashing") {
  // z = 0 makes w exactly singular for the (σx, σy) qubit pair
  const DensityMatrix rho0 = bloch_decode({0.5, 0.3, 0.0});
  FlowSpec spec;
  spec.kind = FlowKind::CommutatorConstrained;
  spec.hamiltonian = Observable("sz", pauli_z());
  spec.constraints = ConstraintSet::capture_targets(
      {Observable("sx", pauli_x()), Observable("sy", pauli_y())}, rho0);
  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 1.0;
  const TrajectoryRecord rec = evolve(rho0, spec, config);
  CHECK(rec.failed);
  CHECK(rec.failure_time == 0.0);
  CHECK(rec.failure_message.find("singular") != std::string::npos);
  CHECK(rec.size() == 1);
}

TEST_CASE("matrix flow matches the independent pair oracle") {
  Rng rng(71);
  const Matrix id2 = Matrix::identity(2);
  DensityMatrix rho0 = random_density(4, rng);
  while (std::abs(trace_product(rho0.matrix, kron(pauli_z(), id2)).real()) < 0.3) {
    rho0 = random_density(4, rng);
  }
  const FlowSpec spec = two_qubit_commutator(rho0);

  IntegratorConfig config;
  config.dt = 1e-3;
  config.t_final = 2.0;
  config.record_stride = 1 << 30;
  config.hygiene.rehermitize = false;
  const TrajectoryRecord rec = evolve(rho0, spec, config);
  REQUIRE_FALSE(rec.failed);

  Matrix oracle = rho0.matrix;
  const double dt_fine = 1e-4;
  const Matrix h = spec.hamiltonian.matrix;
  const Matrix p1 = spec.constraints.observables[0].matrix;
  const Matrix p2 = spec.constraints.observables[1].matrix;
  for (int i = 0; i < 20000; ++i) oracle = pair_commutator_rk4_step(oracle, h, p1, p2, dt_fine);

  CHECK(frobenius_norm(rec.states.back().matrix - oracle) < 1e-8);
}
