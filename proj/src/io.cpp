#include "lewis/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace lewis {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_field(std::string_view field, const std::string& origin, long line, long column) {
  std::string_view token = trim(field);
  double value = 0.0;
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || end != token.data() + token.size())
    fail(ErrorCode::parse_error, origin + ":" + std::to_string(line) + ":" +
                                     std::to_string(column) + ": cannot parse '" +
                                     std::string(token) + "' as a number");
  if (!std::isfinite(value))
    fail(ErrorCode::parse_error, origin + ":" + std::to_string(line) + ":" +
                                     std::to_string(column) + ": non-finite entry '" +
                                     std::string(token) + "'");
  return value;
}

void check_shape(const Eigen::MatrixXd& a, const std::string& origin) {
  if (a.rows() < a.cols())
    fail(ErrorCode::dimension_error,
         origin + ": matrix must be tall, got " + std::to_string(a.rows()) + " x " +
             std::to_string(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    if (a.row(i).cwiseAbs().maxCoeff() == 0.0)
      fail(ErrorCode::zero_row_error, origin + ": row " + std::to_string(i) + " is all zeros");
}

DenseMatrix parse_csv(std::istream& in, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_number = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::vector<double> row;
    std::string_view rest = line;
    long column = 1;
    while (true) {
      std::size_t comma = rest.find(',');
      std::string_view field = comma == std::string_view::npos ? rest : rest.substr(0, comma);
      row.push_back(parse_field(field, origin, line_number, column));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
      ++column;
    }
    if (width < 0) width = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != width)
      fail(ErrorCode::parse_error,
           origin + ":" + std::to_string(line_number) + ": expected " + std::to_string(width) +
               " fields, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::parse_error, origin + ": no rows");

  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), width);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < width; ++j) a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  check_shape(a, origin);
  return DenseMatrix(std::move(a));
}

DenseMatrix parse_matrix_market(std::istream& in, const std::string& origin) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("%%MatrixMarket", 0) != 0)
    fail(ErrorCode::parse_error, origin + ":1: missing %%MatrixMarket header");
  std::istringstream hs(header.substr(14));
  std::string object, fmt, field, symmetry;
  hs >> object >> fmt >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  if (lower(object) != "matrix" || lower(fmt) != "array" || lower(field) != "real" ||
      lower(symmetry) != "general")
    fail(ErrorCode::parse_error,
         origin + ":1: only 'matrix array real general' is supported, got '" + header + "'");

  std::string line;
  long line_number = 1;
  auto next_content_line = [&]() {
    while (std::getline(in, line)) {
      ++line_number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string_view t = trim(line);
      if (t.empty() || t.front() == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_content_line())
    fail(ErrorCode::parse_error, origin + ": missing size line");
  long m = 0, n = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> m >> n) || m <= 0 || n <= 0)
      fail(ErrorCode::parse_error,
           origin + ":" + std::to_string(line_number) + ": bad size line '" + line + "'");
  }

  Eigen::MatrixXd a(m, n);
  // Array format lists entries column by column.
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!next_content_line())
        fail(ErrorCode::parse_error, origin + ": expected " + std::to_string(m * n) +
                                         " entries, file ended early");
      a(i, j) = parse_field(line, origin, line_number, 1);
    }
  check_shape(a, origin);
  return DenseMatrix(std::move(a));
}

StepType step_type_from_name(const std::string& name) {
  for (StepType t : {StepType::init, StepType::descent, StepType::round_pass,
                     StepType::coordinate_step, StepType::extract, StepType::fixed_point})
    if (name == step_type_name(t)) return t;
  fail(ErrorCode::parse_error, "unknown step type '" + name + "'");
}

}  // namespace

MatrixFormat matrix_format_from_name(const std::string& name) {
  if (name == "csv") return MatrixFormat::csv;
  if (name == "matrix-market" || name == "mtx") return MatrixFormat::matrix_market;
  if (name == "auto" || name.empty()) return MatrixFormat::autodetect;
  fail(ErrorCode::parse_error,
       "unknown matrix format '" + name + "' (expected csv or matrix-market)");
}

const char* matrix_format_name(MatrixFormat f) {
  switch (f) {
    case MatrixFormat::autodetect: return "auto";
    case MatrixFormat::csv: return "csv";
    case MatrixFormat::matrix_market: return "matrix-market";
  }
  fail(ErrorCode::domain_error, "unknown matrix format");
}

DenseMatrix parse_matrix(std::istream& in, MatrixFormat format, const std::string& origin) {
  if (format == MatrixFormat::autodetect) {
    // A Matrix Market file must open with its banner; anything else is CSV.
    format = in.peek() == '%' ? MatrixFormat::matrix_market : MatrixFormat::csv;
  }
  return format == MatrixFormat::csv ? parse_csv(in, origin) : parse_matrix_market(in, origin);
}

DenseMatrix load_matrix(const std::string& path, MatrixFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::parse_error, "cannot open '" + path + "'");
  return parse_matrix(in, format, path);
}

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& a) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::parse_error, "cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out << ',';
      out << format_double(a(i, j));
    }
    out << '\n';
  }
}

void save_matrix_market(const std::string& path, const Eigen::MatrixXd& a) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::parse_error, "cannot write '" + path + "'");
  out << "%%MatrixMarket matrix array real general\n";
  out << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out << format_double(a(i, j)) << '\n';
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::parse_error:
    case ErrorCode::dimension_error:
    case ErrorCode::zero_row_error:
    case ErrorCode::non_finite_input:
    case ErrorCode::unsupported_p:
    case ErrorCode::domain_error:
    case ErrorCode::not_positive_definite:
      return 1;
    case ErrorCode::iteration_cap_exceeded:
    case ErrorCode::deadline_exceeded:
    case ErrorCode::oracle_stalled:
      return 2;
    case ErrorCode::invariant_violated:
    case ErrorCode::index_out_of_range:
    case ErrorCode::bracket_failure:
    case ErrorCode::precondition_violated:
    case ErrorCode::invalid_step_size:
    case ErrorCode::downdate_singular:
      return 3;
  }
  return 3;
}

std::string report_to_json(const SolverReport& report, const RunManifest& manifest,
                           bool ellipsoid_ok) {
  nlohmann::json j;
  const Eigen::VectorXd& wo = report.weights_optimizer.values;
  const Eigen::VectorXd& wd = report.weights_definition.values;
  j["weights_optimizer"] = std::vector<double>(wo.data(), wo.data() + wo.size());
  j["weights_definition"] = std::vector<double>(wd.data(), wd.data() + wd.size());
  j["residuals"] = {
      {"max_relative_fixed_point_residual", report.residuals.max_relative_fixed_point_residual},
      {"optimality_residual", report.residuals.optimality_residual},
      {"rho_max", report.residuals.rho_max},
      {"suboptimality_certificate", report.residuals.suboptimality_certificate},
  };
  j["iterations"] = {
      {"descent_steps", report.iterations.descent_steps},
      {"round_passes", report.iterations.round_passes},
      {"coordinate_steps", report.iterations.coordinate_steps},
      {"fixed_point_steps", report.iterations.fixed_point_steps},
      {"trace_rows", report.iterations.trace_rows},
  };
  j["trace_path"] = manifest.trace_path;
  j["wall_ms"] = report.wall_ms;
  j["config"] = {
      {"input", manifest.input},
      {"format", matrix_format_name(manifest.format)},
      {"p", report.config.p},
      {"eps", report.config.eps},
      {"variant", variant_name(report.config.variant)},
      {"m", static_cast<long>(report.config.m)},
      {"n", static_cast<long>(report.config.n)},
      {"alpha", report.config.alpha},
      {"alpha_bar", report.config.alpha_bar},
      {"eps_tilde", report.config.eps_tilde},
      {"beta", report.config.beta},
      {"t_total", report.config.t_total},
      {"k_meta", report.config.k_meta},
      {"k_one_step", report.config.k_one_step},
      {"cap_scale", report.config.cap_scale},
      {"max_iters_scale", report.config.max_iters_scale},
      {"deadline_seconds", report.config.deadline_seconds},
      {"threads", report.config.threads},
      {"seed", manifest.seed},
  };
  j["stop_reason"] = report.stop_reason;
  j["max_objective_increase"] = report.max_objective_increase;
  j["max_rho_seen"] = report.max_rho_seen;
  j["verification"] = {
      {"ellipsoid_containment", ellipsoid_ok},
      {"trials", manifest.verify_trials},
      {"seed", manifest.seed},
  };
  return j.dump(2);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::parse_error, "cannot write '" + path + "'");
  out << "iter,step_type,F,rho_max,opt_residual\n";
  for (const TraceRow& row : rows)
    out << row.iteration << ',' << step_type_name(row.type) << ',' << format_double(row.objective)
        << ',' << format_double(row.rho_max) << ',' << format_double(row.optimality_residual)
        << '\n';
}

int run(const RunManifest& manifest, std::ostream& diagnostics) {
  try {
    DenseMatrix a = load_matrix(manifest.input, manifest.format);
    SolverConfig cfg = manifest.base;
    cfg.seed = manifest.seed;
    SolverReport report = solve(a, cfg);

    AlphaParams params = AlphaParams::from_p(report.config.p);
    double max_ratio = 0.0;
    bool ellipsoid_ok =
        ellipsoid_containment(a, report.weights_optimizer.values, params,
                              manifest.verify_trials, manifest.seed, &max_ratio);

    if (!manifest.trace_path.empty()) write_trace_csv(manifest.trace_path, report.trace);
    std::string json = report_to_json(report, manifest, ellipsoid_ok);
    if (manifest.report_path.empty()) {
      std::cout << json << '\n';
    } else {
      std::ofstream out(manifest.report_path);
      if (!out) fail(ErrorCode::parse_error, "cannot write '" + manifest.report_path + "'");
      out << json << '\n';
    }

    double residual = report.residuals.max_relative_fixed_point_residual;
    if (!(residual <= report.config.eps)) {
      diagnostics << "residual " << residual << " above target " << report.config.eps << " ("
                  << report.stop_reason << ")\n";
      return 2;
    }
    if (!ellipsoid_ok) {
      diagnostics << "ellipsoid containment failed at the returned weights (max ratio "
                  << max_ratio << ")\n";
      return 3;
    }
    return 0;
  } catch (const Error& e) {
    diagnostics << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    diagnostics << "internal error: " << e.what() << '\n';
    return 3;
  }
}

int lint_report(const std::string& report_path, const std::string& trace_path_override,
                std::ostream& diagnostics) {
  nlohmann::json j;
  try {
    std::ifstream in(report_path);
    if (!in) {
      diagnostics << "cannot open '" << report_path << "'\n";
      return 1;
    }
    in >> j;
  } catch (const std::exception& e) {
    diagnostics << "report is not valid JSON: " << e.what() << '\n';
    return 1;
  }

  int problems = 0;
  for (const char* key :
       {"weights_optimizer", "weights_definition", "residuals", "iterations", "trace_path",
        "wall_ms", "config"})
    if (!j.contains(key)) {
      diagnostics << "missing report key '" << key << "'\n";
      ++problems;
    }
  if (j.contains("residuals"))
    for (const char* key : {"max_relative_fixed_point_residual", "optimality_residual", "rho_max",
                            "suboptimality_certificate"})
      if (!j["residuals"].contains(key)) {
        diagnostics << "missing residuals key '" << key << "'\n";
        ++problems;
      }

  std::string trace_path = trace_path_override;
  if (trace_path.empty() && j.contains("trace_path") && j["trace_path"].is_string())
    trace_path = j["trace_path"].get<std::string>();

  if (!trace_path.empty()) {
    std::ifstream in(trace_path);
    if (!in) {
      diagnostics << "cannot open trace '" << trace_path << "'\n";
      return problems + 1;
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "iter,step_type,F,rho_max,opt_residual") {
      diagnostics << "unexpected trace header '" << line << "'\n";
      ++problems;
    }
    long line_number = 1;
    double prev_f = 0.0;
    bool have_prev = false;
    while (std::getline(in, line)) {
      ++line_number;
      if (trim(line).empty()) continue;
      std::istringstream ss(line);
      std::string iter_field, type_field, f_field, rho_field, res_field;
      if (!std::getline(ss, iter_field, ',') || !std::getline(ss, type_field, ',') ||
          !std::getline(ss, f_field, ',') || !std::getline(ss, rho_field, ',') ||
          !std::getline(ss, res_field)) {
        diagnostics << trace_path << ":" << line_number << ": short row\n";
        ++problems;
        continue;
      }
      try {
        StepType type = step_type_from_name(type_field);
        double f = std::stod(f_field);
        if (type == StepType::extract || type == StepType::fixed_point) continue;
        if (have_prev && f > prev_f + 1e-9) {
          diagnostics << trace_path << ":" << line_number << ": objective increased from "
                      << format_double(prev_f) << " to " << format_double(f) << '\n';
          ++problems;
        }
        prev_f = f;
        have_prev = true;
      } catch (const std::exception& e) {
        diagnostics << trace_path << ":" << line_number << ": " << e.what() << '\n';
        ++problems;
      }
    }
  }

  return problems == 0 ? 0 : 1;
}

}  // namespace lewis
