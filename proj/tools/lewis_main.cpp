#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "lewis/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Computes eps-approximate lp Lewis weights of a tall matrix for p > 2.\n"
      "Writes a JSON report (stdout or --out) and an optional per-iteration\n"
      "trace CSV. Exit codes: 0 solved to target, 1 input error, 2 iteration\n"
      "or wall-clock budget exhausted, 3 internal invariant violation."};
  app.require_subcommand(0, 1);

  std::string input, format_name = "auto", variant_name = "parallel";
  std::string out_path, trace_path;
  double p = 4.0, eps = 1e-6, max_iters_scale = 1.0, deadline_seconds = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  app.add_option("--input", input, "matrix file (CSV or Matrix Market array)");
  app.add_option("--format", format_name, "input format: csv, matrix-market or auto")
      ->capture_default_str();
  app.add_option("-p", p, "norm exponent, p > 2")->capture_default_str();
  app.add_option("--eps", eps, "relative fixed-point residual target")->capture_default_str();
  app.add_option("--variant", variant_name,
                 "solver: parallel, sequential, one-step or cohen-peng")
      ->capture_default_str();
  app.add_option("--out", out_path, "report JSON path (default: stdout)");
  app.add_option("--trace", trace_path, "trace CSV path (default: none)");
  app.add_option("--seed", seed, "seed for post-solve verification sampling")
      ->capture_default_str();
  app.add_option("--max-iters-scale", max_iters_scale,
                 "multiplier on the scheduled iteration budget")
      ->capture_default_str();
  app.add_option("--deadline-seconds", deadline_seconds,
                 "wall-clock budget; 0 disables")
      ->capture_default_str();
  app.add_option("--threads", threads, "row-parallel worker threads")->capture_default_str();

  auto* lint = app.add_subcommand("lint", "validate a report JSON and its trace CSV");
  std::string lint_report_path, lint_trace_path;
  lint->add_option("--report", lint_report_path, "report JSON to validate")->required();
  lint->add_option("--trace", lint_trace_path, "trace CSV (default: the report's trace_path)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (lint->parsed()) return lewis::lint_report(lint_report_path, lint_trace_path, std::cerr);

  if (input.empty()) {
    std::cerr << "error: --input is required (see --help)\n";
    return 1;
  }

  try {
    lewis::RunManifest manifest;
    manifest.input = input;
    manifest.format = lewis::matrix_format_from_name(format_name);
    manifest.base.p = p;
    manifest.base.eps = eps;
    manifest.base.variant = lewis::variant_from_name(variant_name);
    manifest.base.max_iters_scale = max_iters_scale;
    manifest.base.deadline_seconds = deadline_seconds;
    manifest.base.threads = static_cast<int>(threads);
    manifest.report_path = out_path;
    manifest.trace_path = trace_path;
    manifest.seed = seed;
    return lewis::run(manifest, std::cerr);
  } catch (const lewis::Error& e) {
    std::cerr << e.what() << '\n';
    return lewis::exit_code_for(e);
  }
}
