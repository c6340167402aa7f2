#pragma once

#include <iosfwd>
#include <string>

namespace qdyn::cli {

// Exit codes: 0 success, 1 validation failure, 2 integration failure.
int run_check(const std::string& scenario_path, std::ostream& out);
int run_run(const std::string& scenario_path, const std::string& out_dir, int threads,
            std::ostream& out);
int run_sweep(const std::string& scenario_path, const std::string& out_dir, bool svg, int threads,
              std::ostream& out);
int run_demo_figure1(double x0, int grid, const std::string& out_dir, int threads,
                     std::ostream& out);

// QDYN_THREADS cap; 0 means "use machine parallelism".
int threads_from_env();

}  // namespace qdyn::cli
