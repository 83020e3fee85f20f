#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lewis {

enum class ErrorCode {
  not_positive_definite,
  downdate_singular,
  non_finite_input,
  index_out_of_range,
  domain_error,
  invalid_step_size,
  iteration_cap_exceeded,
  bracket_failure,
  unsupported_p,
  precondition_violated,
  invariant_violated,
  oracle_stalled,
  deadline_exceeded,
  parse_error,
  dimension_error,
  zero_row_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

// Tall dense instance matrix. Rows a_i are the vectors appearing in all
// quadratic forms; they are kept transposed as well so a_i is a contiguous
// column in hot loops.
class DenseMatrix {
 public:
  explicit DenseMatrix(Eigen::MatrixXd a);

  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return a_.cols(); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::MatrixXd& transposed() const { return at_; }

  // a_i as a contiguous n-vector.
  Eigen::MatrixXd::ConstColXpr row_vector(Eigen::Index i) const {
    check_row(i);
    return at_.col(i);
  }

  void check_row(Eigen::Index i) const {
    if (i < 0 || i >= rows())
      fail(ErrorCode::index_out_of_range,
           "row " + std::to_string(i) + " outside [0, " + std::to_string(rows()) + ")");
  }

 private:
  Eigen::MatrixXd a_;   // m x n
  Eigen::MatrixXd at_;  // n x m
};

enum class Normalization { optimizer, definition };

// Strictly positive weight vector with its normalization tag. "optimizer"
// weights are iterates/solutions of the convex objective; "definition"
// weights are the fixed-point normalization (optimizer^{1+alpha}).
struct WeightVector {
  Eigen::VectorXd values;
  Normalization normalization = Normalization::optimizer;

  WeightVector() = default;
  WeightVector(Eigen::VectorXd v, Normalization tag);

  Eigen::Index size() const { return values.size(); }
};

// Throws unless every entry of w is finite and strictly positive; `where`
// names the operation in the error message.
void check_positive_weights(const Eigen::VectorXd& w, const std::string& where = "");

}  // namespace lewis
