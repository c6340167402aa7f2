#include "qdyn/flow.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

namespace qdyn {

namespace {

constexpr double kMinDt = 1e-9;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

bool is_pure_kind(FlowKind k) {
  return k == FlowKind::PureProjective || k == FlowKind::PureConstrainedCommutator ||
         k == FlowKind::PureConstrainedSymmetric;
}

bool is_constrained_kind(FlowKind k) {
  return k != FlowKind::Unitary && k != FlowKind::PureProjective;
}

bool is_commutator_kind(FlowKind k) {
  return k == FlowKind::CommutatorConstrained || k == FlowKind::PureConstrainedCommutator;
}

FlowKind pure_counterpart(FlowKind matrix_kind) {
  switch (matrix_kind) {
    case FlowKind::Unitary:
      return FlowKind::PureProjective;
    case FlowKind::CommutatorConstrained:
      return FlowKind::PureConstrainedCommutator;
    case FlowKind::SymmetricConstrained:
      return FlowKind::PureConstrainedSymmetric;
    default:
      return matrix_kind;
  }
}

std::string flow_kind_name(FlowKind k) {
  switch (k) {
    case FlowKind::Unitary:
      return "unitary";
    case FlowKind::CommutatorConstrained:
      return "commutator";
    case FlowKind::SymmetricConstrained:
      return "symmetric";
    case FlowKind::PureProjective:
      return "pure_projective";
    case FlowKind::PureConstrainedCommutator:
      return "pure_commutator";
    case FlowKind::PureConstrainedSymmetric:
      return "pure_symmetric";
  }
  return "?";
}

void FlowSpec::validate() const {
  if (hamiltonian.dim() == 0) throw InvalidArgument("flow spec: missing Hamiltonian");
  if (is_constrained_kind(kind)) {
    if (constraints.empty()) {
      throw InvalidArgument("flow spec: constrained flow without constraints");
    }
    constraints.validate();
    if (constraints.dim() != hamiltonian.dim()) {
      throw DimensionMismatch("flow spec: constraint dimension differs from Hamiltonian");
    }
    if (is_commutator_kind(kind) && constraints.size() % 2 != 0) {
      throw OddConstraintCount("flow spec: commutator flow needs an even constraint count");
    }
  } else if (!constraints.empty()) {
    throw InvalidArgument("flow spec: unconstrained flow carries constraints");
  }
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidArgument("integrator: dt must be positive");
  if (!(t_final >= dt)) throw InvalidArgument("integrator: dt exceeds t_final");
  if (record_stride < 1) throw InvalidArgument("integrator: record_stride must be >= 1");
  if (!(adapt_tol > 0.0)) throw InvalidArgument("integrator: adapt_tol must be positive");
}

FlowField::FlowField(FlowSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (!spec_.constraints.empty()) {
    cache_ = ConstraintCache::build(spec_.constraints, spec_.hamiltonian);
  }
}

namespace {

Matrix unitary_part(const Matrix& rho, const Matrix& h) {
  Matrix out = commutator(rho, h);
  out *= cplx{0.0, 1.0};
  return out;
}

}  // namespace

Matrix FlowField::eval(const Matrix& rho, StepDiagnostics* diag) const {
  const FlowSpec& s = spec_;
  Matrix out = unitary_part(rho, s.hamiltonian.matrix);
  if (s.kind == FlowKind::Unitary) {
    if (diag) *diag = StepDiagnostics{};
    return out;
  }

  const DensityMatrix state(rho);
  const MultiplierSolution ms =
      s.kind == FlowKind::CommutatorConstrained
          ? solve_multipliers_commutator(state, s.constraints, s.hamiltonian, cache())
          : solve_multipliers_symmetric(state, s.constraints, s.hamiltonian, cache());
  if (diag) {
    diag->lambdas = ms.lambdas;
    diag->geometry_rcond = ms.rcond;
  }

  const int n = s.constraints.size();
  if (s.kind == FlowKind::CommutatorConstrained) {
    for (int k = 0; k < n; ++k) {
      const Matrix c = commutator(rho, s.constraints.observables[static_cast<size_t>(k)].matrix);
      add_scaled(out, cplx{0.0, -ms.lambdas[static_cast<size_t>(k)]}, c);
    }
  } else {
    for (int k = 0; k < n; ++k) {
      const Matrix& phi = s.constraints.observables[static_cast<size_t>(k)].matrix;
      const double lam = ms.lambdas[static_cast<size_t>(k)];
      const double mean = trace_product(rho, phi).real();
      add_scaled(out, cplx{-lam, 0.0}, anticommutator(rho, phi));
      add_scaled(out, cplx{2.0 * lam * mean, 0.0}, rho);
    }
  }
  return out;
}

StateVector FlowField::eval(const StateVector& psi, StepDiagnostics* diag) const {
  const FlowSpec& s = spec_;
  const double n2 = psi.norm() * psi.norm();
  if (!(n2 > 1e-24)) throw InvalidState("pure flow: zero state vector");

  const int d = psi.dim();
  StateVector hpsi = mat_vec(s.hamiltonian.matrix, psi);
  const double eh = (inner(psi, hpsi) / n2).real();

  StateVector out;
  out.amplitudes.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    out.amplitudes[static_cast<size_t>(i)] =
        cplx{0.0, -1.0} *
        (hpsi.amplitudes[static_cast<size_t>(i)] - eh * psi.amplitudes[static_cast<size_t>(i)]);
  }
  if (s.kind == FlowKind::PureProjective) {
    if (diag) *diag = StepDiagnostics{};
    return out;
  }

  const MultiplierSolution ms =
      s.kind == FlowKind::PureConstrainedCommutator
          ? solve_multipliers_commutator(psi, s.constraints, s.hamiltonian, cache())
          : solve_multipliers_symmetric(psi, s.constraints, s.hamiltonian, cache());
  if (diag) {
    diag->lambdas = ms.lambdas;
    diag->geometry_rcond = ms.rcond;
  }

  for (int k = 0; k < s.constraints.size(); ++k) {
    const Matrix& phi = s.constraints.observables[static_cast<size_t>(k)].matrix;
    const StateVector ppsi = mat_vec(phi, psi);
    const double ep = (inner(psi, ppsi) / n2).real();
    // +iλ_k(Φ^k − ⟨Φ^k⟩)ψ for the commutator variant, −λ_k(…)ψ for the symmetric one
    const cplx coeff = s.kind == FlowKind::PureConstrainedCommutator
                           ? cplx{0.0, ms.lambdas[static_cast<size_t>(k)]}
                           : cplx{-ms.lambdas[static_cast<size_t>(k)], 0.0};
    for (int i = 0; i < d; ++i) {
      out.amplitudes[static_cast<size_t>(i)] +=
          coeff * (ppsi.amplitudes[static_cast<size_t>(i)] -
                   ep * psi.amplitudes[static_cast<size_t>(i)]);
    }
  }
  return out;
}

Matrix rhs_unitary(const DensityMatrix& rho, const Observable& h) {
  if (rho.dim() != h.dim()) throw DimensionMismatch("rhs_unitary: dimension mismatch");
  return unitary_part(rho.matrix, h.matrix);
}

Matrix rhs_commutator_constrained(const DensityMatrix& rho, const FlowSpec& spec,
                                  StepDiagnostics* diag) {
  if (spec.kind != FlowKind::CommutatorConstrained) {
    throw InvalidArgument("rhs_commutator_constrained: wrong flow kind");
  }
  return FlowField(spec).eval(rho.matrix, diag);
}

Matrix rhs_symmetric_constrained(const DensityMatrix& rho, const FlowSpec& spec,
                                 StepDiagnostics* diag) {
  if (spec.kind != FlowKind::SymmetricConstrained) {
    throw InvalidArgument("rhs_symmetric_constrained: wrong flow kind");
  }
  return FlowField(spec).eval(rho.matrix, diag);
}

StateVector rhs_pure_projective(const StateVector& psi, const Observable& h) {
  FlowSpec spec;
  spec.kind = FlowKind::PureProjective;
  spec.hamiltonian = h;
  return FlowField(std::move(spec)).eval(psi);
}

StateVector rhs_pure_constrained(const StateVector& psi, const FlowSpec& spec,
                                 StepDiagnostics* diag) {
  if (spec.kind != FlowKind::PureConstrainedCommutator &&
      spec.kind != FlowKind::PureConstrainedSymmetric) {
    throw InvalidArgument("rhs_pure_constrained: wrong flow kind");
  }
  return FlowField(spec).eval(psi, diag);
}

namespace {

Matrix rk4_matrix(const Matrix& y, const FlowField& f, double dt, StepDiagnostics* diag) {
  const Matrix k1 = f.eval(y, diag);
  Matrix stage = y;
  add_scaled(stage, 0.5 * dt, k1);
  const Matrix k2 = f.eval(stage);
  stage = y;
  add_scaled(stage, 0.5 * dt, k2);
  const Matrix k3 = f.eval(stage);
  stage = y;
  add_scaled(stage, dt, k3);
  const Matrix k4 = f.eval(stage);

  Matrix out = y;
  add_scaled(out, dt / 6.0, k1);
  add_scaled(out, dt / 3.0, k2);
  add_scaled(out, dt / 3.0, k3);
  add_scaled(out, dt / 6.0, k4);
  return out;
}

void ket_add_scaled(StateVector& acc, cplx s, const StateVector& x) {
  for (size_t i = 0; i < acc.amplitudes.size(); ++i) acc.amplitudes[i] += s * x.amplitudes[i];
}

StateVector rk4_ket(const StateVector& y, const FlowField& f, double dt, StepDiagnostics* diag) {
  const StateVector k1 = f.eval(y, diag);
  StateVector stage = y;
  ket_add_scaled(stage, 0.5 * dt, k1);
  const StateVector k2 = f.eval(stage);
  stage = y;
  ket_add_scaled(stage, 0.5 * dt, k2);
  const StateVector k3 = f.eval(stage);
  stage = y;
  ket_add_scaled(stage, dt, k3);
  const StateVector k4 = f.eval(stage);

  StateVector out = y;
  ket_add_scaled(out, dt / 6.0, k1);
  ket_add_scaled(out, dt / 3.0, k2);
  ket_add_scaled(out, dt / 3.0, k3);
  ket_add_scaled(out, dt / 6.0, k4);
  return out;
}

FlowState rk4_once(const FlowState& y, const FlowField& f, double dt, StepDiagnostics* diag) {
  if (std::holds_alternative<DensityMatrix>(y)) {
    return DensityMatrix(rk4_matrix(std::get<DensityMatrix>(y).matrix, f, dt, diag));
  }
  return rk4_ket(std::get<StateVector>(y), f, dt, diag);
}

double state_distance(const FlowState& a, const FlowState& b) {
  if (std::holds_alternative<DensityMatrix>(a)) {
    const Matrix diff = std::get<DensityMatrix>(a).matrix - std::get<DensityMatrix>(b).matrix;
    return frobenius_norm(diff);
  }
  const auto& u = std::get<StateVector>(a).amplitudes;
  const auto& v = std::get<StateVector>(b).amplitudes;
  double s = 0.0;
  for (size_t i = 0; i < u.size(); ++i) s += std::norm(u[i] - v[i]);
  return std::sqrt(s);
}

// Rehermitization / trace renormalization; returns the Frobenius norm of the
// total applied correction. Kets are left untouched (the dynamics is
// norm- and phase-insensitive).
double apply_hygiene(FlowState& y, const HygieneConfig& hygiene) {
  if (!std::holds_alternative<DensityMatrix>(y)) return 0.0;
  if (!hygiene.rehermitize && !hygiene.renormalize_trace) return 0.0;
  Matrix& m = std::get<DensityMatrix>(y).matrix;
  const Matrix raw = m;
  if (hygiene.rehermitize) m = hermitian_part(m);
  if (hygiene.renormalize_trace) {
    const double tr = trace(m).real();
    if (std::abs(tr) > 1e-300) m *= cplx{1.0 / tr, 0.0};
  }
  return frobenius_norm(m - raw);
}

StepOutcome fixed_step(const FlowState& y, const FlowField& f, const IntegratorConfig& config,
                       double dt) {
  StepOutcome out;
  out.state = rk4_once(y, f, dt, &out.diagnostics);
  out.dt_used = dt;
  out.dt_next = config.dt;
  out.diagnostics.hygiene_correction = apply_hygiene(out.state, config.hygiene);
  return out;
}

StepOutcome doubling_step(const FlowState& y, const FlowField& f, const IntegratorConfig& config,
                          double dt_attempt) {
  double dt = dt_attempt;
  while (true) {
    StepOutcome out;
    const FlowState coarse = rk4_once(y, f, dt, &out.diagnostics);
    FlowState fine = rk4_once(y, f, 0.5 * dt, nullptr);
    fine = rk4_once(fine, f, 0.5 * dt, nullptr);
    const double err = state_distance(coarse, fine) / 15.0;  // Richardson for order 4
    if (err <= config.adapt_tol) {
      out.state = std::move(fine);
      out.dt_used = dt;
      out.dt_next = (err < config.adapt_tol / 64.0) ? std::min(2.0 * dt, config.dt) : dt;
      out.diagnostics.hygiene_correction = apply_hygiene(out.state, config.hygiene);
      return out;
    }
    dt *= 0.5;
    if (dt < kMinDt) {
      throw StepSizeUnderflow("step doubling: dt underflowed below " + std::to_string(kMinDt));
    }
  }
}

}  // namespace

StepOutcome step(const FlowState& state, const FlowField& field, const IntegratorConfig& config,
                 double dt_attempt) {
  config.validate();
  if (is_pure_kind(field.spec().kind) != std::holds_alternative<StateVector>(state)) {
    throw InvalidArgument("step: state representation does not match the flow kind");
  }
  if (config.method == StepMethod::RK4Fixed) return fixed_step(state, field, config, dt_attempt);
  return doubling_step(state, field, config, dt_attempt);
}

StepOutcome step(const FlowState& state, const FlowSpec& spec, const IntegratorConfig& config) {
  return step(state, FlowField(spec), config, config.dt);
}

const std::vector<double>& TrajectoryRecord::channel(const std::string& name) const {
  const auto it = channels.find(name);
  if (it == channels.end()) throw InvalidArgument("trajectory has no channel '" + name + "'");
  return it->second;
}

const std::vector<std::string>& all_monitors() {
  static const std::vector<std::string> names = {"purity",  "entropy", "eigenvalues",
                                                 "residuals", "lambdas", "hygiene",
                                                 "bloch",   "entropy_rate"};
  return names;
}

namespace {

bool wants(const std::vector<std::string>& monitors, const std::string& group) {
  return std::find(monitors.begin(), monitors.end(), group) != monitors.end();
}

struct Recorder {
  const FlowSpec& spec;
  const ConstraintCache* cache;
  std::vector<std::string> monitors;
  int dim = 0;
  bool need_eig = false;
  bool symmetric_formula = false;
  TrajectoryRecord rec;

  Recorder(const FlowSpec& s, const ConstraintCache* c, std::vector<std::string> mon, int d)
      : spec(s), cache(c), monitors(std::move(mon)), dim(d) {
    need_eig = wants(monitors, "entropy") || wants(monitors, "eigenvalues") ||
               wants(monitors, "entropy_rate");
    symmetric_formula =
        spec.kind == FlowKind::SymmetricConstrained && wants(monitors, "entropy_rate");

    auto add = [this](const std::string& name) {
      rec.channel_names.push_back(name);
      rec.channels[name] = {};
    };
    if (wants(monitors, "purity")) add("purity");
    if (wants(monitors, "entropy")) add("entropy");
    if (wants(monitors, "eigenvalues")) {
      for (int i = 1; i <= dim; ++i) add("eig_" + std::to_string(i));
    }
    for (int k = 1; k <= spec.constraints.size(); ++k) {
      if (wants(monitors, "residuals")) add("residual_" + std::to_string(k));
    }
    for (int k = 1; k <= spec.constraints.size(); ++k) {
      if (wants(monitors, "lambdas")) add("lambda_" + std::to_string(k));
    }
    if (wants(monitors, "hygiene")) add("hygiene_correction");
    if (dim == 2 && wants(monitors, "bloch")) {
      add("bloch_x");
      add("bloch_y");
      add("bloch_z");
    }
    if (symmetric_formula) add("ds_dt_formula");
    if (wants(monitors, "entropy")) add("ds_dt_fd");
  }

  void push(double t, const FlowState& y, double hygiene_correction) {
    rec.times.push_back(t);
    DensityMatrix rho = std::holds_alternative<DensityMatrix>(y)
                            ? std::get<DensityMatrix>(y)
                            : projector_from_ket(std::get<StateVector>(y));
    const bool pure_flow = std::holds_alternative<StateVector>(y);
    if (pure_flow) rec.kets.push_back(std::get<StateVector>(y));

    std::optional<SpectralDecomposition> dec;
    if (need_eig) dec = hermitian_eig(rho.matrix);

    if (wants(monitors, "purity")) rec.channels["purity"].push_back(purity(rho));

    double entropy = kNaN;
    if (wants(monitors, "entropy")) {
      entropy = 0.0;
      for (double lam : dec->eigenvalues) {
        if (lam < -1e-10) throw InvalidState("recorded state has negative eigenvalue");
        if (lam > 0.0) entropy -= lam * std::log(lam);
      }
      rec.channels["entropy"].push_back(entropy);
    }
    if (wants(monitors, "eigenvalues")) {
      for (int i = 0; i < dim; ++i) {
        rec.channels["eig_" + std::to_string(i + 1)].push_back(
            dec->eigenvalues[static_cast<size_t>(i)]);
      }
    }

    std::vector<double> lambdas(static_cast<size_t>(spec.constraints.size()), kNaN);
    if (is_constrained_kind(spec.kind) &&
        (wants(monitors, "lambdas") || symmetric_formula)) {
      try {
        MultiplierSolution ms;
        if (pure_flow) {
          const StateVector& psi = std::get<StateVector>(y);
          ms = is_commutator_kind(spec.kind)
                   ? solve_multipliers_commutator(psi, spec.constraints, spec.hamiltonian, cache)
                   : solve_multipliers_symmetric(psi, spec.constraints, spec.hamiltonian, cache);
        } else {
          ms = is_commutator_kind(spec.kind)
                   ? solve_multipliers_commutator(rho, spec.constraints, spec.hamiltonian, cache)
                   : solve_multipliers_symmetric(rho, spec.constraints, spec.hamiltonian, cache);
        }
        lambdas = ms.lambdas;
      } catch (const Error&) {
        // singular geometry exactly at a record point: leave NaN, the next
        // step will report the failure
      }
    }
    if (wants(monitors, "residuals")) {
      const std::vector<double> res = residuals(rho, spec.constraints);
      for (int k = 0; k < spec.constraints.size(); ++k) {
        rec.channels["residual_" + std::to_string(k + 1)].push_back(res[static_cast<size_t>(k)]);
      }
    }
    if (wants(monitors, "lambdas")) {
      for (int k = 0; k < spec.constraints.size(); ++k) {
        rec.channels["lambda_" + std::to_string(k + 1)].push_back(lambdas[static_cast<size_t>(k)]);
      }
    }
    if (wants(monitors, "hygiene")) {
      rec.channels["hygiene_correction"].push_back(hygiene_correction);
    }
    if (dim == 2 && wants(monitors, "bloch")) {
      const BlochVector b = bloch_encode(rho);
      rec.channels["bloch_x"].push_back(b.x);
      rec.channels["bloch_y"].push_back(b.y);
      rec.channels["bloch_z"].push_back(b.z);
    }
    if (symmetric_formula) {
      double rate = kNaN;
      if (dec->eigenvalues.front() >= 1e-12) {
        // ln ρ from the decomposition already at hand
        Matrix lnrho(dim);
        for (int k = 0; k < dim; ++k) {
          const double ll = std::log(dec->eigenvalues[static_cast<size_t>(k)]);
          for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
              lnrho(i, j) += ll * dec->eigenvectors(i, k) * std::conj(dec->eigenvectors(j, k));
        }
        rate = 0.0;
        for (int k = 0; k < spec.constraints.size(); ++k) {
          rate += 2.0 * lambdas[static_cast<size_t>(k)] *
                  covariance(rho, spec.constraints.observables[static_cast<size_t>(k)], lnrho);
        }
      }
      rec.channels["ds_dt_formula"].push_back(rate);
    }
    rec.states.push_back(std::move(rho));
  }

  void finalize() {
    if (!wants(monitors, "entropy")) return;
    const std::vector<double>& s = rec.channels["entropy"];
    std::vector<double>& fd = rec.channels["ds_dt_fd"];
    fd.assign(s.size(), kNaN);
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      const double dt2 = rec.times[i + 1] - rec.times[i - 1];
      if (dt2 > 0.0) fd[i] = (s[i + 1] - s[i - 1]) / dt2;
    }
  }
};

}  // namespace

TrajectoryRecord evolve(const FlowState& initial, const FlowSpec& spec,
                        const IntegratorConfig& config, const std::vector<std::string>& monitors) {
  spec.validate();
  config.validate();
  const bool pure = is_pure_kind(spec.kind);
  if (pure != std::holds_alternative<StateVector>(initial)) {
    throw InvalidArgument("evolve: state representation does not match the flow kind");
  }
  const int dim = pure ? std::get<StateVector>(initial).dim() : std::get<DensityMatrix>(initial).dim();
  if (dim != spec.hamiltonian.dim()) throw DimensionMismatch("evolve: state dimension mismatch");

  const FlowField field(spec);
  Recorder recorder(field.spec(), field.cache(), monitors, dim);
  recorder.push(0.0, initial, 0.0);

  FlowState y = initial;
  const double t_final = config.t_final;
  double pending_hygiene = 0.0;

  if (config.method == StepMethod::RK4Fixed) {
    const double dt = config.dt;
    const long n_full = static_cast<long>(std::floor(t_final / dt + 1e-9));
    const double tail = t_final - static_cast<double>(n_full) * dt;
    const bool has_tail = tail > 1e-12 * dt;
    const long total = n_full + (has_tail ? 1 : 0);
    for (long i = 1; i <= total; ++i) {
      const double h = (i <= n_full) ? dt : tail;
      const double t_here = (i <= n_full) ? static_cast<double>(i) * dt : t_final;
      try {
        StepOutcome out = fixed_step(y, field, config, h);
        y = std::move(out.state);
        pending_hygiene = std::max(pending_hygiene, out.diagnostics.hygiene_correction);
      } catch (const Error& e) {
        recorder.rec.failed = true;
        recorder.rec.failure_time = (i - 1 <= n_full) ? static_cast<double>(i - 1) * dt : t_final;
        recorder.rec.failure_message = e.what();
        break;
      }
      if (i % config.record_stride == 0 || i == total) {
        try {
          recorder.push(t_here, y, pending_hygiene);
        } catch (const Error& e) {
          recorder.rec.failed = true;
          recorder.rec.failure_time = t_here;
          recorder.rec.failure_message = e.what();
          break;
        }
        pending_hygiene = 0.0;
      }
    }
  } else {
    double t = 0.0;
    double dt_next = config.dt;
    long accepted = 0;
    const double t_eps = 1e-12 * std::max(1.0, t_final);
    while (t_final - t > t_eps) {
      const double attempt = std::min(dt_next, t_final - t);
      double t_new = t;
      try {
        StepOutcome out = doubling_step(y, field, config, attempt);
        y = std::move(out.state);
        t_new = t + out.dt_used;
        dt_next = out.dt_next;
        pending_hygiene = std::max(pending_hygiene, out.diagnostics.hygiene_correction);
      } catch (const Error& e) {
        recorder.rec.failed = true;
        recorder.rec.failure_time = t;
        recorder.rec.failure_message = e.what();
        break;
      }
      t = t_new;
      ++accepted;
      if (accepted % config.record_stride == 0 || t_final - t <= t_eps) {
        try {
          recorder.push(t, y, pending_hygiene);
        } catch (const Error& e) {
          recorder.rec.failed = true;
          recorder.rec.failure_time = t;
          recorder.rec.failure_message = e.what();
          break;
        }
        pending_hygiene = 0.0;
      }
    }
  }

  recorder.finalize();
  return std::move(recorder.rec);
}

}  // namespace qdyn
