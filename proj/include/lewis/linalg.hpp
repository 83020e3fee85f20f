#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lewis/types.hpp"

namespace lewis {

struct FactorizeOptions {
  enum class Method { cholesky, qr };
  Method method = Method::cholesky;
  // Full refactorization after this many rank-one updates; <= 0 means "m".
  long refactor_period = 0;
  // Sherman-Morrison denominators below this trigger a fresh factorization
  // instead of an in-place update.
  double downdate_tolerance = 1e-8;
};

// Factorization of the weighted Gram matrix A^T W A supporting solves,
// per-row quadratic forms, leverage scores and rank-one weight updates.
// Callers treat it as immutable except through rank_one_update, which takes
// the state by value and returns the updated one.
class SpdState {
 public:
  SpdState() = default;
  SpdState(const DenseMatrix& a, Eigen::VectorXd w, FactorizeOptions opts = {});

  Eigen::Index dim() const { return n_; }
  const Eigen::VectorXd& weights() const { return w_; }
  const FactorizeOptions& options() const { return opts_; }
  long updates_since_refactor() const { return updates_since_refactor_; }

  // Rebuilds the factorization from the currently stored weights, reusing
  // internal storage. Used by solver hot loops via set_weights.
  void set_weights(const DenseMatrix& a, const Eigen::VectorXd& w);

  double log_det() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // Applies the inverse lower-triangular factor: returns L^{-1} B where
  // A^T W A = L L^T.
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& b) const;

  // x^T (A^T W A)^{-1} x
  double quadform(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // a_i^T (A^T W A)^{-1} a_i
  double row_quadform(const DenseMatrix& a, Eigen::Index i) const;

  // sigma_i = w_i a_i^T (A^T W A)^{-1} a_i for all rows. The optional
  // workspace avoids per-call allocation in hot loops; threads > 1 fans the
  // row map out over a read-only factorization.
  void leverage_into(const DenseMatrix& a, Eigen::VectorXd& sigma,
                     Eigen::MatrixXd* workspace = nullptr, int threads = 1) const;
  Eigen::VectorXd leverage(const DenseMatrix& a, int threads = 1) const;

  // Symmetric (A^T W A)^{-1/2} via an eigendecomposition; n x n, test-scale.
  Eigen::MatrixXd inverse_sqrt() const;

  friend SpdState rank_one_update(SpdState state, const DenseMatrix& a, Eigen::Index i,
                                  double delta);

 private:
  void refactor(const DenseMatrix& a);
  void check_pivots(double max_gram_diag) const;

  Eigen::Index n_ = 0;
  Eigen::VectorXd w_;
  FactorizeOptions opts_;
  long period_ = 0;
  long updates_since_refactor_ = 0;
  Eigen::MatrixXd gram_;  // A^T W A (cholesky path)
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd qr_r_;       // n x n upper-triangular factor (qr path)
  Eigen::VectorXd sqrt_w_;     // entrywise sqrt(w), kept in sync with w_
  Eigen::MatrixXd scaled_t_;   // m x n matrix W^{1/2} A, Gram assembly + leverage
  Eigen::MatrixXd inv_lower_;  // explicit L^{-1} for the batched leverage map
};

// Returns the state of A^T W A after w_i += delta. Refactorizes on schedule
// or when the update is numerically risky; otherwise performs an in-place
// Cholesky rank-one update.
SpdState rank_one_update(SpdState state, const DenseMatrix& a, Eigen::Index i, double delta);

Eigen::VectorXd leverage_scores(const DenseMatrix& a, const Eigen::VectorXd& w, int threads = 1);

}  // namespace lewis
