#include "qdyn/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "qdyn/scenario_io.hpp"

namespace qdyn::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kIntegrationFailure = 2;

bool qualified_for(const QualificationReport& report, FlowKind flow) {
  if (flow == FlowKind::Unitary) return true;
  return flow == FlowKind::CommutatorConstrained ? report.qualified_commutator()
                                                 : report.qualified_symmetric();
}

// Geometry matrix at one initial state; targets are irrelevant for w/m.
double initial_geometry_rcond(const Scenario& scenario, const InitialState& state) {
  ConstraintSet cs =
      ConstraintSet::capture_targets(scenario.constraint_observables, initial_density(state));
  const DensityMatrix rho = initial_density(state);
  const Matrix geometry = scenario.flow == FlowKind::CommutatorConstrained ? w_matrix(rho, cs)
                                                                           : m_matrix(rho, cs);
  return rcond_estimate(geometry);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

int run_scenario_to_dir(const Scenario& scenario, const std::string& out_dir, bool svg,
                        int threads, std::ostream& out) {
  const QualificationReport report =
      qualification_check(ConstraintSet{scenario.constraint_observables,
                                        std::vector<double>(scenario.constraint_observables.size(), 0.0)},
                          scenario.hamiltonian);
  if (!qualified_for(report, scenario.flow)) {
    out << report.format();
    out << "error: scenario is not qualified for the " << flow_kind_name(scenario.flow)
        << " flow\n";
    return kValidationFailure;
  }
  if (svg && scenario.dimension != 2) {
    out << "error: --svg needs a dimension-2 scenario\n";
    return kValidationFailure;
  }

  fs::create_directories(out_dir);
  const std::vector<TrajectoryRecord> records = run_scenario(scenario, threads);

  const int n_constraints = static_cast<int>(scenario.constraint_observables.size());
  ordered_json summary;
  summary["scenario"] = scenario.name;
  summary["flow"] = flow_kind_to_file_string(scenario.flow);
  summary["dimension"] = scenario.dimension;
  summary["n_states"] = records.size();
  ordered_json trajectories = ordered_json::array();
  bool any_failed = false;
  for (size_t i = 0; i < records.size(); ++i) {
    const TrajectoryRecord& rec = records[i];
    const std::string file = "traj_" + std::to_string(i) + ".csv";
    write_text_file(fs::path(out_dir) / file,
                    trajectory_csv(rec, scenario.dimension, n_constraints));
    ordered_json t;
    t["index"] = i;
    t["file"] = file;
    t["status"] = rec.failed ? "error" : "ok";
    t["records"] = rec.size();
    t["final_time"] = rec.times.empty() ? 0.0 : rec.times.back();
    if (rec.failed) {
      any_failed = true;
      t["failure_time"] = rec.failure_time;
      t["message"] = rec.failure_message;
    }
    trajectories.push_back(std::move(t));
  }
  summary["trajectories"] = std::move(trajectories);
  write_text_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");

  if (svg) {
    double x0 = 0.0;
    if (n_constraints > 0 && !scenario.initial_states.empty()) {
      x0 = expectation(initial_density(scenario.initial_states.front()),
                       scenario.constraint_observables.front());
    }
    write_text_file(fs::path(out_dir) / "figure1.svg", figure_svg(records, x0));
  }

  out << "wrote " << records.size() << " trajectories to " << out_dir << "\n";
  if (any_failed) {
    out << "error: at least one trajectory failed; see summary.json\n";
    return kIntegrationFailure;
  }
  return kOk;
}

}  // namespace

int run_check(const std::string& scenario_path, std::ostream& out) {
  Scenario scenario;
  try {
    scenario = load_scenario_file(scenario_path);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }

  out << "scenario: " << scenario.name << "\n";
  out << "dimension: " << scenario.dimension << ", flow: " << flow_kind_name(scenario.flow)
      << ", states: " << scenario.initial_states.size() << "\n";

  bool ok = true;
  const bool constrained = scenario.flow != FlowKind::Unitary;
  if (constrained && scenario.constraint_observables.empty()) {
    out << "error: " << flow_kind_name(scenario.flow) << " flow without constraints\n";
    return kValidationFailure;
  }

  if (!scenario.constraint_observables.empty()) {
    const QualificationReport report = qualification_check(
        ConstraintSet{scenario.constraint_observables,
                      std::vector<double>(scenario.constraint_observables.size(), 0.0)},
        scenario.hamiltonian);
    out << report.format();
    if (constrained) ok = qualified_for(report, scenario.flow);
  }

  for (size_t i = 0; i < scenario.initial_states.size(); ++i) {
    const InitialState& state = scenario.initial_states[i];
    out << "initial state " << i << ":";
    try {
      if (!scenario.constraint_observables.empty()) {
        ConstraintSet cs = ConstraintSet::capture_targets(scenario.constraint_observables,
                                                          initial_density(state));
        double worst = 0.0;
        for (double r : residuals(initial_density(state), cs)) worst = std::max(worst, std::abs(r));
        out << " max residual after target capture " << worst;
        if (constrained) {
          const double rcond = initial_geometry_rcond(scenario, state);
          out << ", geometry rcond " << rcond;
          if (rcond < 1e-10) {
            out << "  FLAGGED: singular constraint geometry";
            ok = false;
          }
        }
      } else {
        out << " unconstrained";
      }
    } catch (const Error& e) {
      out << " error: " << e.what();
      ok = false;
    }
    out << "\n";
  }
  out << "verdict: " << (ok ? "qualified" : "NOT qualified") << "\n";
  return ok ? kOk : kValidationFailure;
}

int run_run(const std::string& scenario_path, const std::string& out_dir, int threads,
            std::ostream& out) {
  Scenario scenario;
  try {
    scenario = load_scenario_file(scenario_path);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  try {
    return run_scenario_to_dir(scenario, out_dir, /*svg=*/false, threads, out);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
}

int run_sweep(const std::string& scenario_path, const std::string& out_dir, bool svg, int threads,
              std::ostream& out) {
  Scenario scenario;
  try {
    scenario = load_scenario_file(scenario_path);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  try {
    return run_scenario_to_dir(scenario, out_dir, svg, threads, out);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
}

int run_demo_figure1(double x0, int grid, const std::string& out_dir, int threads,
                     std::ostream& out) {
  try {
    const Scenario scenario = builtin_figure1(x0, grid);
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / "scenario.json").string();
    write_scenario_file(scenario, path);
    out << "wrote " << path << "\n";
    return run_sweep(path, out_dir, /*svg=*/true, threads, out);
  } catch (const Error& e) {
    out << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
}

int threads_from_env() {
  const char* env = std::getenv("QDYN_THREADS");
  if (!env) return 0;
  const int v = std::atoi(env);
  return v > 0 ? v : 0;
}

}  // namespace qdyn::cli
