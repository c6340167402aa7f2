#include "qdyn/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qdyn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ScenarioParseError(msg); }

const json& require_key(const json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(where + ": missing key '" + key + "'");
  return *it;
}

double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + ": expected a number");
  return j.get<double>();
}

cplx parse_entry(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    fail(where + ": matrix entries must be [re, im] pairs");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Matrix parse_matrix(const json& j, int expect_dim, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where + ": expected an array of rows");
  const int n = static_cast<int>(j.size());
  if (expect_dim > 0 && n != expect_dim) {
    fail(where + ": has " + std::to_string(n) + " rows, expected " + std::to_string(expect_dim));
  }
  Matrix m(n);
  for (int r = 0; r < n; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      fail(where + ": row " + std::to_string(r) + " does not have " + std::to_string(n) +
           " entries");
    }
    for (int c = 0; c < n; ++c) {
      m(r, c) = parse_entry(row[static_cast<size_t>(c)],
                            where + " (row " + std::to_string(r) + ", col " + std::to_string(c) + ")");
    }
  }
  if (!is_finite(m)) fail(where + ": non-finite entries");
  return m;
}

void require_hermitian(const Matrix& m, const std::string& where) {
  const double scale = std::max(frobenius_norm(m), 1.0);
  double worst = 0.0;
  int wr = 0, wc = 0;
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = i; j < m.dim(); ++j) {
      const double d = std::abs(m(i, j) - std::conj(m(j, i)));
      if (d > worst) {
        worst = d;
        wr = i;
        wc = j;
      }
    }
  }
  if (worst > 1e-10 * scale) {
    fail(where + ": not Hermitian at row " + std::to_string(wr) + ", col " + std::to_string(wc) +
         " (defect " + std::to_string(worst) + ")");
  }
}

std::vector<cplx> parse_amplitudes(const json& j, int expect_dim, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where + ": expected an array of [re, im] pairs");
  if (expect_dim > 0 && static_cast<int>(j.size()) != expect_dim) {
    fail(where + ": has " + std::to_string(j.size()) + " amplitudes, expected " +
         std::to_string(expect_dim));
  }
  std::vector<cplx> out;
  out.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_entry(j[i], where + " (amplitude " + std::to_string(i) + ")"));
  }
  return out;
}

InitialState parse_initial_state(const json& j, int dim, const std::string& where) {
  if (!j.is_object()) fail(where + ": expected an object");
  const std::string kind = require_key(j, "kind", where).get<std::string>();
  if (kind == "bloch") {
    if (dim != 2) fail(where + ": bloch states need dimension 2");
    BlochVector r;
    r.x = require_number(require_key(j, "x", where), where + ".x");
    r.y = require_number(require_key(j, "y", where), where + ".y");
    r.z = require_number(require_key(j, "z", where), where + ".z");
    if (r.norm() > 1.0 + 1e-10) fail(where + ": bloch vector leaves the unit ball");
    return r;
  }
  if (kind == "matrix") {
    Matrix m = parse_matrix(require_key(j, "matrix", where), dim, where + ".matrix");
    require_hermitian(m, where + ".matrix");
    DensityMatrix rho(std::move(m));
    try {
      rho.validate();
    } catch (const Error& e) {
      fail(where + ": " + e.what());
    }
    return rho;
  }
  if (kind == "ket") {
    StateVector psi;
    psi.amplitudes = parse_amplitudes(require_key(j, "amplitudes", where), dim, where + ".amplitudes");
    if (!(psi.norm() > 1e-12)) fail(where + ": ket has (near) zero norm");
    return psi;
  }
  if (kind == "mixture") {
    const json& comps = require_key(j, "components", where);
    if (!comps.is_array() || comps.empty()) fail(where + ".components: expected a nonempty array");
    Mixture mix;
    for (size_t i = 0; i < comps.size(); ++i) {
      const std::string cw = where + ".components[" + std::to_string(i) + "]";
      Mixture::Component c;
      c.weight = require_number(require_key(comps[i], "weight", cw), cw + ".weight");
      c.ket.amplitudes = parse_amplitudes(require_key(comps[i], "ket", cw), dim, cw + ".ket");
      mix.components.push_back(std::move(c));
    }
    try {
      from_mixture(mix);  // validates weights and component norms
    } catch (const Error& e) {
      fail(where + ": " + e.what());
    }
    return mix;
  }
  fail(where + ": unknown state kind '" + kind + "'");
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.dim(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.dim(); ++c) {
      row.push_back(ordered_json::array({m(r, c).real(), m(r, c).imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json amplitudes_to_json(const StateVector& psi) {
  ordered_json arr = ordered_json::array();
  for (const cplx& a : psi.amplitudes) arr.push_back(ordered_json::array({a.real(), a.imag()}));
  return arr;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string flow_kind_to_file_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::Unitary:
      return "unitary";
    case FlowKind::CommutatorConstrained:
      return "commutator";
    case FlowKind::SymmetricConstrained:
      return "symmetric";
    default:
      throw InvalidArgument("scenario files carry matrix flow kinds only");
  }
}

FlowKind flow_kind_from_file_string(const std::string& s) {
  if (s == "unitary") return FlowKind::Unitary;
  if (s == "commutator") return FlowKind::CommutatorConstrained;
  if (s == "symmetric") return FlowKind::SymmetricConstrained;
  throw ScenarioParseError("unknown flow '" + s + "' (expected unitary|commutator|symmetric)");
}

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) fail("scenario: expected a JSON object");
  Scenario s;
  s.name = require_key(doc, "name", "scenario").get<std::string>();
  const json& jdim = require_key(doc, "dimension", "scenario");
  if (!jdim.is_number_integer() || jdim.get<int>() < 1) {
    fail("scenario.dimension: expected a positive integer");
  }
  s.dimension = jdim.get<int>();

  Matrix h = parse_matrix(require_key(doc, "hamiltonian", "scenario"), s.dimension,
                          "scenario.hamiltonian");
  require_hermitian(h, "scenario.hamiltonian");
  s.hamiltonian = Observable("H", std::move(h));

  if (doc.contains("constraints")) {
    const json& jc = doc["constraints"];
    if (!jc.is_array()) fail("scenario.constraints: expected an array");
    for (size_t k = 0; k < jc.size(); ++k) {
      const std::string where = "scenario.constraints[" + std::to_string(k) + "]";
      const std::string label = require_key(jc[k], "label", where).get<std::string>();
      Matrix phi = parse_matrix(require_key(jc[k], "observable", where), s.dimension,
                                where + ".observable");
      require_hermitian(phi, where + ".observable");
      s.constraint_observables.emplace_back(label, std::move(phi));
    }
  }

  s.flow = flow_kind_from_file_string(require_key(doc, "flow", "scenario").get<std::string>());

  const json& jstates = require_key(doc, "initial_states", "scenario");
  if (!jstates.is_array() || jstates.empty()) {
    fail("scenario.initial_states: expected a nonempty array");
  }
  for (size_t i = 0; i < jstates.size(); ++i) {
    s.initial_states.push_back(parse_initial_state(
        jstates[i], s.dimension, "scenario.initial_states[" + std::to_string(i) + "]"));
  }

  const json& jint = require_key(doc, "integrator", "scenario");
  const std::string method =
      jint.contains("method") ? jint["method"].get<std::string>() : std::string("rk4");
  if (method == "rk4") {
    s.integrator.method = StepMethod::RK4Fixed;
  } else if (method == "rk4_adaptive") {
    s.integrator.method = StepMethod::RK4StepDoubling;
  } else {
    fail("scenario.integrator.method: expected rk4|rk4_adaptive");
  }
  s.integrator.dt = require_number(require_key(jint, "dt", "scenario.integrator"),
                                   "scenario.integrator.dt");
  s.integrator.t_final = require_number(require_key(jint, "t_final", "scenario.integrator"),
                                        "scenario.integrator.t_final");
  if (jint.contains("record_stride")) {
    if (!jint["record_stride"].is_number_integer()) {
      fail("scenario.integrator.record_stride: expected an integer");
    }
    s.integrator.record_stride = jint["record_stride"].get<int>();
  }
  if (jint.contains("adapt_tol")) {
    s.integrator.adapt_tol = require_number(jint["adapt_tol"], "scenario.integrator.adapt_tol");
  }
  if (doc.contains("hygiene")) {
    const json& jh = doc["hygiene"];
    if (jh.contains("rehermitize")) s.integrator.hygiene.rehermitize = jh["rehermitize"].get<bool>();
    if (jh.contains("renormalize_trace")) {
      s.integrator.hygiene.renormalize_trace = jh["renormalize_trace"].get<bool>();
    }
  }
  try {
    s.integrator.validate();
  } catch (const Error& e) {
    fail(std::string("scenario.integrator: ") + e.what());
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) fail("scenario.seed: expected an integer");
    s.seed = doc["seed"].get<std::uint64_t>();
  }
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("scenario: invalid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

ordered_json scenario_to_json(const Scenario& scenario) {
  ordered_json doc;
  doc["name"] = scenario.name;
  doc["dimension"] = scenario.dimension;
  doc["hamiltonian"] = matrix_to_json(scenario.hamiltonian.matrix);
  ordered_json constraints = ordered_json::array();
  for (const Observable& o : scenario.constraint_observables) {
    ordered_json c;
    c["label"] = o.label;
    c["observable"] = matrix_to_json(o.matrix);
    constraints.push_back(std::move(c));
  }
  doc["constraints"] = std::move(constraints);
  doc["flow"] = flow_kind_to_file_string(scenario.flow);

  ordered_json states = ordered_json::array();
  for (const InitialState& st : scenario.initial_states) {
    ordered_json j;
    if (std::holds_alternative<BlochVector>(st)) {
      const BlochVector& r = std::get<BlochVector>(st);
      j["kind"] = "bloch";
      j["x"] = r.x;
      j["y"] = r.y;
      j["z"] = r.z;
    } else if (std::holds_alternative<DensityMatrix>(st)) {
      j["kind"] = "matrix";
      j["matrix"] = matrix_to_json(std::get<DensityMatrix>(st).matrix);
    } else if (std::holds_alternative<StateVector>(st)) {
      j["kind"] = "ket";
      j["amplitudes"] = amplitudes_to_json(std::get<StateVector>(st));
    } else {
      const Mixture& mix = std::get<Mixture>(st);
      j["kind"] = "mixture";
      ordered_json comps = ordered_json::array();
      for (const auto& c : mix.components) {
        ordered_json jc;
        jc["weight"] = c.weight;
        jc["ket"] = amplitudes_to_json(c.ket);
        comps.push_back(std::move(jc));
      }
      j["components"] = std::move(comps);
    }
    states.push_back(std::move(j));
  }
  doc["initial_states"] = std::move(states);

  ordered_json jint;
  jint["method"] = scenario.integrator.method == StepMethod::RK4Fixed ? "rk4" : "rk4_adaptive";
  jint["dt"] = scenario.integrator.dt;
  jint["t_final"] = scenario.integrator.t_final;
  jint["record_stride"] = scenario.integrator.record_stride;
  jint["adapt_tol"] = scenario.integrator.adapt_tol;
  doc["integrator"] = std::move(jint);

  ordered_json jh;
  jh["rehermitize"] = scenario.integrator.hygiene.rehermitize;
  jh["renormalize_trace"] = scenario.integrator.hygiene.renormalize_trace;
  doc["hygiene"] = std::move(jh);
  doc["seed"] = scenario.seed;
  return doc;
}

void write_scenario_file(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write scenario file '" + path + "'");
  out << scenario_to_json(scenario).dump(2) << "\n";
}

std::string trajectory_csv(const TrajectoryRecord& record, int dim, int n_constraints) {
  std::vector<std::string> columns = {"t", "purity", "entropy"};
  for (int i = 1; i <= dim; ++i) columns.push_back("eig_" + std::to_string(i));
  for (int k = 1; k <= n_constraints; ++k) columns.push_back("residual_" + std::to_string(k));
  for (int k = 1; k <= n_constraints; ++k) columns.push_back("lambda_" + std::to_string(k));
  columns.push_back("hygiene_correction");
  if (dim == 2) {
    columns.push_back("bloch_x");
    columns.push_back("bloch_y");
    columns.push_back("bloch_z");
  }

  std::ostringstream os;
  for (size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << "\n";
  for (size_t i = 0; i < record.size(); ++i) {
    os << fmt17(record.times[i]);
    for (size_t c = 1; c < columns.size(); ++c) {
      os << "," << fmt17(record.channel(columns[c])[i]);
    }
    os << "\n";
  }
  return os.str();
}

std::string figure_svg(const std::vector<TrajectoryRecord>& records, double x0) {
  if (!(std::abs(x0) < 1.0)) throw InvalidArgument("figure_svg: |x0| must be < 1");
  const double radius = std::sqrt(1.0 - x0 * x0);
  const double margin = 1.06 * radius;
  char buf[256];

  std::ostringstream os;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.6g %.6g %.6g %.6g\">\n",
                -margin, -margin, 2 * margin, 2 * margin);
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "  <circle cx=\"0\" cy=\"0\" r=\"%.6g\" fill=\"none\" stroke=\"#3a6ea5\" "
                "stroke-width=\"%.6g\"/>\n",
                radius, 0.004 * radius);
  os << buf;
  for (const TrajectoryRecord& rec : records) {
    if (!rec.has_channel("bloch_y") || rec.size() == 0) continue;
    const std::vector<double>& ys = rec.channel("bloch_y");
    const std::vector<double>& zs = rec.channel("bloch_z");
    // stationary trajectories (the equator fixed points) are already drawn as
    // markers; a degenerate one-point polyline adds nothing
    double displacement = 0.0;
    for (size_t i = 0; i < ys.size(); ++i) {
      displacement = std::max(displacement, std::hypot(ys[i] - ys[0], zs[i] - zs[0]));
    }
    if (displacement < 1e-6 * radius) continue;
    os << "  <polyline fill=\"none\" stroke=\"#3a6ea5\" stroke-width=\""
       << 0.006 * radius << "\" points=\"";
    for (size_t i = 0; i < ys.size(); ++i) {
      // SVG y-axis points down; plot (y, −z) so +z is up
      std::snprintf(buf, sizeof(buf), "%s%.6g,%.6g", i ? " " : "", ys[i], -zs[i]);
      os << buf;
    }
    os << "\"/>\n";
  }
  for (const double sign : {1.0, -1.0}) {
    std::snprintf(buf, sizeof(buf),
                  "  <circle cx=\"%.6g\" cy=\"0\" r=\"%.6g\" fill=\"#c23b22\"/>\n", sign * radius,
                  0.02 * radius);
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace qdyn
