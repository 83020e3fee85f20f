#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lewis/solver.hpp"
#include "lewis/types.hpp"

namespace lewis {

enum class MatrixFormat { autodetect, csv, matrix_market };

MatrixFormat matrix_format_from_name(const std::string& name);
const char* matrix_format_name(MatrixFormat f);

// CSV (one comma-separated row per line) or Matrix Market dense
// "array real general". Enforces m >= n, finite entries, no zero rows.
DenseMatrix load_matrix(const std::string& path, MatrixFormat format = MatrixFormat::autodetect);
DenseMatrix parse_matrix(std::istream& in, MatrixFormat format, const std::string& origin);

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& a);
void save_matrix_market(const std::string& path, const Eigen::MatrixXd& a);

struct RunManifest {
  std::string input;
  MatrixFormat format = MatrixFormat::autodetect;
  SolverConfig base;            // p/eps/variant/overrides; schedule() fills the rest
  std::string report_path;      // empty: report to stdout
  std::string trace_path;       // empty: no trace file
  std::uint64_t seed = 0;
  int verify_trials = 100;      // ellipsoid directions sampled post-solve
};

// Exit codes: 0 solved with residual <= eps; 1 input error; 2 convergence
// budget exhausted (or residual above eps); 3 internal invariant violation.
int run(const RunManifest& manifest, std::ostream& diagnostics);

int exit_code_for(const Error& e);

std::string report_to_json(const SolverReport& report, const RunManifest& manifest,
                           bool ellipsoid_ok);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

// Validates a report written by run(): required keys present and the trace F
// column non-increasing (up to 1e-9). Returns 0 when clean, 1 otherwise.
int lint_report(const std::string& report_path, const std::string& trace_path_override,
                std::ostream& diagnostics);

}  // namespace lewis
