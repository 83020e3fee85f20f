#include "lewis/types.hpp"

#include "lewis/trace.hpp"

namespace lewis {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_positive_definite: return "NotPositiveDefinite";
    case ErrorCode::downdate_singular: return "DowndateSingular";
    case ErrorCode::non_finite_input: return "NonFiniteInput";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::domain_error: return "DomainError";
    case ErrorCode::invalid_step_size: return "InvalidStepSize";
    case ErrorCode::iteration_cap_exceeded: return "IterationCapExceeded";
    case ErrorCode::bracket_failure: return "BracketFailure";
    case ErrorCode::unsupported_p: return "UnsupportedP";
    case ErrorCode::precondition_violated: return "PreconditionViolated";
    case ErrorCode::invariant_violated: return "InvariantViolated";
    case ErrorCode::oracle_stalled: return "OracleStalled";
    case ErrorCode::deadline_exceeded: return "DeadlineExceeded";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::dimension_error: return "DimensionError";
    case ErrorCode::zero_row_error: return "ZeroRowError";
  }
  return "UnknownError";
}

const char* step_type_name(StepType type) {
  switch (type) {
    case StepType::init: return "init";
    case StepType::descent: return "descent";
    case StepType::round_pass: return "round_pass";
    case StepType::coordinate_step: return "coordinate_step";
    case StepType::extract: return "extract";
    case StepType::fixed_point: return "fixed_point";
  }
  return "unknown";
}

DenseMatrix::DenseMatrix(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.size() == 0) fail(ErrorCode::dimension_error, "empty matrix");
  if (!a_.allFinite()) fail(ErrorCode::non_finite_input, "matrix has NaN or Inf entries");
  at_ = a_.transpose();
}

WeightVector::WeightVector(Eigen::VectorXd v, Normalization tag)
    : values(std::move(v)), normalization(tag) {
  check_positive_weights(values);
}

void check_positive_weights(const Eigen::VectorXd& w, const std::string& where) {
  std::string prefix = where.empty() ? std::string() : where + ": ";
  if (!w.allFinite())
    fail(ErrorCode::non_finite_input, prefix + "weight vector has NaN or Inf entries");
  if (w.size() == 0 || (w.array() <= 0.0).any())
    fail(ErrorCode::domain_error, prefix + "weights must be strictly positive");
}

}  // namespace lewis
