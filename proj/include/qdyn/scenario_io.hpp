#pragma once

#include <string>

#include <json.hpp>

#include "qdyn/scenario.hpp"

namespace qdyn {

// Scenario document schema (JSON): name, dimension, hamiltonian (matrix),
// constraints ([{label, observable}]), flow ("unitary"|"commutator"|
// "symmetric"), initial_states ([{kind: bloch|matrix|ket|mixture, ...}]),
// integrator ({method: "rk4"|"rk4_adaptive", dt, t_final, record_stride,
// adapt_tol}), hygiene ({rehermitize, renormalize_trace}), seed. A matrix is
// an array of rows whose entries are [re, im] pairs. Constraint targets are
// never stored; they are captured from each initial state at run time.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario_file(const std::string& path);

nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
void write_scenario_file(const Scenario& scenario, const std::string& path);

// CSV with the fixed column order t, purity, entropy, eig_1..eig_d,
// residual_1..residual_N, lambda_1..lambda_N, hygiene_correction and, for
// dimension 2, bloch_x, bloch_y, bloch_z. 17 significant digits.
std::string trajectory_csv(const TrajectoryRecord& record, int dim, int n_constraints);

// Self-contained SVG of the (y,z) cross-section disc at slice x0: boundary
// circle, one polyline per trajectory, the two equator fixed points as filled
// circles.
std::string figure_svg(const std::vector<TrajectoryRecord>& records, double x0);

std::string flow_kind_to_file_string(FlowKind kind);
FlowKind flow_kind_from_file_string(const std::string& s);

}  // namespace qdyn
