#include "qdyn/constraints.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace qdyn {

namespace {

constexpr double kEntryTol = 1e-12;    // structural asserts on w and m entries
constexpr double kLambdaImagTol = 1e-10;
constexpr double kStationarityTol = 1e-9;
constexpr double kRcondMin = 1e-10;

// Expectation functionals: tr(ρA) for matrix states, ⟨ψ|A|ψ⟩/⟨ψ|ψ⟩ for kets.
struct ExpectRho {
  const Matrix& rho;
  cplx operator()(const Matrix& a) const { return trace_product(rho, a); }
};

struct ExpectPure {
  const StateVector& psi;
  double inv_norm2;
  cplx operator()(const Matrix& a) const {
    cplx acc{};
    const int n = a.dim();
    for (int i = 0; i < n; ++i) {
      cplx row{};
      for (int j = 0; j < n; ++j) row += a(i, j) * psi.amplitudes[static_cast<size_t>(j)];
      acc += std::conj(psi.amplitudes[static_cast<size_t>(i)]) * row;
    }
    return acc * inv_norm2;
  }
};

const Matrix& pair_comm(const ConstraintSet& cs, const ConstraintCache* cache,
                        std::vector<Matrix>& scratch, int j, int k) {
  const int n = cs.size();
  if (cache) return cache->pair_comms[static_cast<size_t>(j * n + k)];
  scratch.push_back(commutator(cs.observables[static_cast<size_t>(j)].matrix,
                               cs.observables[static_cast<size_t>(k)].matrix));
  return scratch.back();
}

template <class Expect>
Matrix build_w(const Expect& expect, const ConstraintSet& cs, const ConstraintCache* cache) {
  const int n = cs.size();
  Matrix w(n);
  std::vector<Matrix> scratch;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const cplx v = expect(pair_comm(cs, cache, scratch, j, k));
      if (std::abs(v.real()) > kEntryTol) {
        throw InvalidState("w_matrix: entry (" + std::to_string(j + 1) + "," +
                           std::to_string(k + 1) + ") is not purely imaginary");
      }
      w(j, k) = v;
    }
  }
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k)
      if (std::abs(w(j, k) + w(k, j)) > kEntryTol) {
        throw InvalidState("w_matrix: antisymmetry violated at (" + std::to_string(j + 1) + "," +
                           std::to_string(k + 1) + ")");
      }
  return w;
}

template <class Expect>
Matrix build_m(const Expect& expect, const ConstraintSet& cs, const ConstraintCache* cache) {
  const int n = cs.size();
  std::vector<cplx> means(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) means[static_cast<size_t>(k)] = expect(cs.observables[static_cast<size_t>(k)].matrix);

  Matrix m(n);
  std::vector<Matrix> scratch;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      cplx v;
      if (cache) {
        v = expect(cache->pair_acomms[static_cast<size_t>(j * n + k)]);
      } else {
        scratch.push_back(anticommutator(cs.observables[static_cast<size_t>(j)].matrix,
                                         cs.observables[static_cast<size_t>(k)].matrix));
        v = expect(scratch.back());
      }
      v -= 2.0 * means[static_cast<size_t>(j)] * means[static_cast<size_t>(k)];
      if (std::abs(v.imag()) > kEntryTol) {
        throw InvalidState("m_matrix: entry (" + std::to_string(j + 1) + "," +
                           std::to_string(k + 1) + ") is not real");
      }
      m(j, k) = v;
    }
  }
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      if (std::abs(m(j, k) - m(k, j)) > 1e-13 * std::max(1.0, max_abs(m))) {
        throw InvalidState("m_matrix: symmetry violated at (" + std::to_string(j + 1) + "," +
                           std::to_string(k + 1) + ")");
      }
  return m;
}

template <class Expect>
std::vector<cplx> hamiltonian_brackets(const Expect& expect, const ConstraintSet& cs,
                                       const Observable& h, const ConstraintCache* cache) {
  const int n = cs.size();
  std::vector<cplx> b(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    if (cache) {
      b[static_cast<size_t>(k)] = expect(cache->h_comms[static_cast<size_t>(k)]);
    } else {
      b[static_cast<size_t>(k)] =
          expect(commutator(h.matrix, cs.observables[static_cast<size_t>(k)].matrix));
    }
  }
  return b;
}

std::vector<double> to_real_lambdas(const std::vector<cplx>& x, const char* what) {
  std::vector<double> lam(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i].imag()) > kLambdaImagTol) {
      throw InvalidState(std::string(what) + ": multiplier " + std::to_string(i + 1) +
                         " has imaginary part " + std::to_string(x[i].imag()));
    }
    lam[i] = x[i].real();
  }
  return lam;
}

template <class Expect>
MultiplierSolution solve_commutator_impl(const Expect& expect, const ConstraintSet& cs,
                                         const Observable& h, const ConstraintCache* cache) {
  cs.validate();
  const int n = cs.size();
  if (n == 0) throw InvalidArgument("solve_multipliers_commutator: no constraints");
  if (n % 2 != 0) {
    throw OddConstraintCount("commutator flow needs an even constraint count, got " +
                             std::to_string(n));
  }
  if (h.dim() != cs.dim()) {
    throw DimensionMismatch("solve_multipliers_commutator: Hamiltonian dimension mismatch");
  }

  const Matrix w = build_w(expect, cs, cache);
  const std::vector<cplx> b = hamiltonian_brackets(expect, cs, h, cache);

  LinearSolution sol;
  try {
    // λ_k = w_{jk} b^j with w_{ij} the inverse of w^{jk}: solve Wᵀλ = b.
    sol = solve_linear(transpose(w), b, kRcondMin);
  } catch (const SingularSystem& e) {
    throw SingularConstraintGeometry(
        "w matrix is singular (rcond=" + std::to_string(e.rcond()) + ")", e.rcond());
  }

  MultiplierSolution out;
  out.lambdas = to_real_lambdas(sol.solution, "solve_multipliers_commutator");
  out.rcond = sol.rcond;
  out.geometry = w;

  for (int k = 0; k < n; ++k) {
    cplx res = b[static_cast<size_t>(k)];
    for (int j = 0; j < n; ++j) res -= out.lambdas[static_cast<size_t>(j)] * w(j, k);
    if (std::abs(res) > kStationarityTol) {
      throw InvalidState("solve_multipliers_commutator: stationarity residual " +
                         std::to_string(std::abs(res)) + " at component " + std::to_string(k + 1));
    }
  }
  return out;
}

template <class Expect>
MultiplierSolution solve_symmetric_impl(const Expect& expect, const ConstraintSet& cs,
                                        const Observable& h, const ConstraintCache* cache) {
  cs.validate();
  const int n = cs.size();
  if (n == 0) throw InvalidArgument("solve_multipliers_symmetric: no constraints");
  if (h.dim() != cs.dim()) {
    throw DimensionMismatch("solve_multipliers_symmetric: Hamiltonian dimension mismatch");
  }

  const Matrix m = build_m(expect, cs, cache);
  std::vector<cplx> b = hamiltonian_brackets(expect, cs, h, cache);
  for (cplx& v : b) v *= cplx{0.0, 1.0};  // λ_j = i m_{jk} b^k

  LinearSolution sol;
  try {
    sol = solve_linear(m, b, kRcondMin);
  } catch (const SingularSystem& e) {
    throw SingularConstraintGeometry(
        "m matrix is singular (rcond=" + std::to_string(e.rcond()) + ")", e.rcond());
  }

  MultiplierSolution out;
  out.lambdas = to_real_lambdas(sol.solution, "solve_multipliers_symmetric");
  out.rcond = sol.rcond;
  out.geometry = m;

  for (int k = 0; k < n; ++k) {
    // Eq. form: tr(ρ[H,Φ^k]) + i λ_j m^{jk} = 0
    cplx res = b[static_cast<size_t>(k)] * cplx{0.0, -1.0};
    for (int j = 0; j < n; ++j)
      res += cplx{0.0, 1.0} * out.lambdas[static_cast<size_t>(j)] * m(j, k);
    if (std::abs(res) > kStationarityTol) {
      throw InvalidState("solve_multipliers_symmetric: stationarity residual " +
                         std::to_string(std::abs(res)) + " at component " + std::to_string(k + 1));
    }
  }
  return out;
}

}  // namespace

void ConstraintSet::validate() const {
  if (observables.size() != targets.size()) {
    throw InvalidArgument("constraint set: observables and targets differ in length");
  }
  for (const Observable& o : observables) {
    if (o.dim() != dim()) {
      throw DimensionMismatch("constraint set: observable '" + o.label +
                              "' has inconsistent dimension");
    }
  }
}

ConstraintSet ConstraintSet::capture_targets(std::vector<Observable> obs,
                                             const DensityMatrix& rho0) {
  ConstraintSet cs;
  cs.observables = std::move(obs);
  cs.targets.reserve(cs.observables.size());
  for (const Observable& o : cs.observables) cs.targets.push_back(expectation(rho0, o));
  cs.validate();
  return cs;
}

std::vector<double> residuals(const DensityMatrix& rho, const ConstraintSet& cs) {
  cs.validate();
  std::vector<double> r(static_cast<size_t>(cs.size()));
  for (int k = 0; k < cs.size(); ++k) {
    r[static_cast<size_t>(k)] =
        expectation(rho, cs.observables[static_cast<size_t>(k)]) - cs.targets[static_cast<size_t>(k)];
  }
  return r;
}

ConstraintCache ConstraintCache::build(const ConstraintSet& cs, const Observable& h) {
  const int n = cs.size();
  ConstraintCache cache;
  cache.h_comms.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    cache.h_comms.push_back(commutator(h.matrix, cs.observables[static_cast<size_t>(k)].matrix));
  }
  cache.pair_comms.reserve(static_cast<size_t>(n) * n);
  cache.pair_acomms.reserve(static_cast<size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      cache.pair_comms.push_back(commutator(cs.observables[static_cast<size_t>(j)].matrix,
                                            cs.observables[static_cast<size_t>(k)].matrix));
      cache.pair_acomms.push_back(anticommutator(cs.observables[static_cast<size_t>(j)].matrix,
                                                 cs.observables[static_cast<size_t>(k)].matrix));
    }
  }
  return cache;
}

Matrix w_matrix(const DensityMatrix& rho, const ConstraintSet& cs, const ConstraintCache* cache) {
  cs.validate();
  return build_w(ExpectRho{rho.matrix}, cs, cache);
}

Matrix m_matrix(const DensityMatrix& rho, const ConstraintSet& cs, const ConstraintCache* cache) {
  cs.validate();
  return build_m(ExpectRho{rho.matrix}, cs, cache);
}

MultiplierSolution solve_multipliers_commutator(const DensityMatrix& rho, const ConstraintSet& cs,
                                                const Observable& h, const ConstraintCache* cache) {
  return solve_commutator_impl(ExpectRho{rho.matrix}, cs, h, cache);
}

MultiplierSolution solve_multipliers_symmetric(const DensityMatrix& rho, const ConstraintSet& cs,
                                               const Observable& h, const ConstraintCache* cache) {
  return solve_symmetric_impl(ExpectRho{rho.matrix}, cs, h, cache);
}

MultiplierSolution solve_multipliers_commutator(const StateVector& psi, const ConstraintSet& cs,
                                                const Observable& h, const ConstraintCache* cache) {
  const double n2 = psi.norm() * psi.norm();
  if (!(n2 > 1e-24)) throw InvalidState("solve_multipliers_commutator: zero state vector");
  return solve_commutator_impl(ExpectPure{psi, 1.0 / n2}, cs, h, cache);
}

MultiplierSolution solve_multipliers_symmetric(const StateVector& psi, const ConstraintSet& cs,
                                               const Observable& h, const ConstraintCache* cache) {
  const double n2 = psi.norm() * psi.norm();
  if (!(n2 > 1e-24)) throw InvalidState("solve_multipliers_symmetric: zero state vector");
  return solve_symmetric_impl(ExpectPure{psi, 1.0 / n2}, cs, h, cache);
}

bool QualificationReport::qualified_commutator() const {
  if (!dims_consistent || !parity_even) return false;
  for (const auto& e : hamiltonian_entries)
    if (!e.qualified) return false;
  for (const auto& p : pair_entries)
    if (!p.nonredundant) return false;
  return true;
}

bool QualificationReport::qualified_symmetric() const {
  if (!dims_consistent) return false;
  for (const auto& e : hamiltonian_entries)
    if (!e.qualified) return false;
  return true;
}

std::string QualificationReport::format() const {
  std::ostringstream os;
  os << "constraints: " << hamiltonian_entries.size() << " (N "
     << (parity_even ? "even" : "odd") << "), dimension " << dim
     << (dims_consistent ? "" : " [INCONSISTENT]") << "\n";
  for (const auto& e : hamiltonian_entries) {
    os << "  |[H, Phi^" << e.k << "]|_F = " << e.comm_norm
       << (e.qualified ? "" : "  FLAGGED: commutes with H") << "\n";
  }
  for (const auto& p : pair_entries) {
    os << "  |[Phi^" << p.j << ", Phi^" << p.k << "]|_F = " << p.comm_norm
       << (p.nonredundant ? "" : "  FLAGGED: commuting pair") << "\n";
  }
  os << "  commutator flow: " << (qualified_commutator() ? "qualified" : "NOT qualified");
  if (!parity_even) os << " (odd constraint count)";
  os << "\n  symmetric flow:  " << (qualified_symmetric() ? "qualified" : "NOT qualified") << "\n";
  return os.str();
}

QualificationReport qualification_check(const ConstraintSet& cs, const Observable& h) {
  QualificationReport rep;
  rep.dim = h.dim();
  rep.parity_even = cs.size() % 2 == 0 && cs.size() > 0;
  for (const Observable& o : cs.observables) {
    if (o.dim() != h.dim()) rep.dims_consistent = false;
  }
  if (!rep.dims_consistent) return rep;

  const int n = cs.size();
  for (int k = 0; k < n; ++k) {
    const Matrix c = commutator(h.matrix, cs.observables[static_cast<size_t>(k)].matrix);
    const double norm = frobenius_norm(c);
    const double scale =
        1e-12 * (1.0 + frobenius_norm(h.matrix) *
                           frobenius_norm(cs.observables[static_cast<size_t>(k)].matrix));
    rep.hamiltonian_entries.push_back({k + 1, norm, norm > scale});
  }
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const Matrix c = commutator(cs.observables[static_cast<size_t>(j)].matrix,
                                  cs.observables[static_cast<size_t>(k)].matrix);
      const double norm = frobenius_norm(c);
      const double scale =
          1e-12 * (1.0 + frobenius_norm(cs.observables[static_cast<size_t>(j)].matrix) *
                             frobenius_norm(cs.observables[static_cast<size_t>(k)].matrix));
      rep.pair_entries.push_back({j + 1, k + 1, norm, norm > scale});
    }
  }
  return rep;
}

}  // namespace qdyn
