#include "lewis/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

namespace lewis {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Row maps below this size are not worth fanning out.
constexpr Eigen::Index kParallelRowThreshold = 1024;

// Leverage maps are processed in fixed row blocks so the floating-point
// result cannot depend on how many threads the blocks are dealt out to.
constexpr Eigen::Index kLeverageBlock = 256;

// Unblocked forward substitution for L^{-1}. The factors here are n x n with
// n in the tens, where the generic triangular solver's dispatch overhead
// dominates the arithmetic. Reads only the lower triangle of `lower`.
void invert_lower(const Eigen::MatrixXd& lower, Eigen::MatrixXd& out) {
  const Eigen::Index n = lower.rows();
  out.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = 1.0 / lower(j, j);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index k = j; k < i; ++k) s -= lower(i, k) * out(k, j);
      out(i, j) = s / lower(i, i);
    }
  }
}

}  // namespace

SpdState::SpdState(const DenseMatrix& a, Eigen::VectorXd w, FactorizeOptions opts)
    : n_(a.cols()), w_(std::move(w)), opts_(opts) {
  if (w_.size() != a.rows())
    fail(ErrorCode::dimension_error, "weight vector length does not match row count");
  check_positive_weights(w_);
  period_ = opts_.refactor_period > 0 ? opts_.refactor_period : a.rows();
  refactor(a);
}

void SpdState::set_weights(const DenseMatrix& a, const Eigen::VectorXd& w) {
  if (w.size() != a.rows() || a.cols() != n_)
    fail(ErrorCode::dimension_error, "weight vector length does not match row count");
  w_ = w;
  refactor(a);
}

void SpdState::refactor(const DenseMatrix& a) {
  const Eigen::MatrixXd& am = a.matrix();
  const Eigen::Index m = am.rows();
  sqrt_w_ = w_.array().sqrt();
  scaled_t_.resize(m, n_);
  for (Eigen::Index j = 0; j < n_; ++j)
    scaled_t_.col(j) = am.col(j).cwiseProduct(sqrt_w_);

  if (opts_.method == FactorizeOptions::Method::qr) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled_t_);
    qr_r_ = qr.matrixQR().topRows(n_).triangularView<Eigen::Upper>();
    double max_gram_diag = scaled_t_.colwise().squaredNorm().maxCoeff();
    check_pivots(max_gram_diag);
    Eigen::MatrixXd lower = qr_r_.transpose();
    invert_lower(lower, inv_lower_);
  } else {
    gram_.resize(n_, n_);
    // Dot-product assembly beats the blocked rank-update kernels for the
    // tall-thin shapes here; mirroring keeps gram_ usable as a dense matrix.
    for (Eigen::Index j = 0; j < n_; ++j)
      for (Eigen::Index k = 0; k <= j; ++k) {
        double v = scaled_t_.col(j).dot(scaled_t_.col(k));
        gram_(j, k) = v;
        gram_(k, j) = v;
      }
    double max_gram_diag = gram_.diagonal().maxCoeff();
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success)
      fail(ErrorCode::not_positive_definite, "Cholesky factorization failed (rank-deficient A?)");
    check_pivots(max_gram_diag);
    invert_lower(llt_.matrixLLT(), inv_lower_);
  }
  updates_since_refactor_ = 0;
}

void SpdState::check_pivots(double max_gram_diag) const {
  double threshold = static_cast<double>(n_) * kEps * max_gram_diag;
  double min_pivot;
  if (opts_.method == FactorizeOptions::Method::qr) {
    min_pivot = qr_r_.diagonal().array().abs().square().minCoeff();
  } else {
    min_pivot = llt_.matrixLLT().diagonal().array().square().minCoeff();
  }
  if (!(min_pivot > threshold))
    fail(ErrorCode::not_positive_definite,
         "pivot " + std::to_string(min_pivot) + " below rank threshold " +
             std::to_string(threshold));
}

double SpdState::log_det() const {
  if (opts_.method == FactorizeOptions::Method::qr)
    return 2.0 * qr_r_.diagonal().array().abs().log().sum();
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd SpdState::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_) fail(ErrorCode::dimension_error, "rhs length does not match");
  if (opts_.method == FactorizeOptions::Method::qr) {
    Eigen::VectorXd y = qr_r_.transpose().triangularView<Eigen::Lower>().solve(rhs);
    return qr_r_.triangularView<Eigen::Upper>().solve(y);
  }
  return llt_.solve(rhs);
}

Eigen::MatrixXd SpdState::solve_lower(const Eigen::MatrixXd& b) const {
  if (b.rows() != n_) fail(ErrorCode::dimension_error, "block height does not match");
  if (opts_.method == FactorizeOptions::Method::qr)
    return qr_r_.transpose().triangularView<Eigen::Lower>().solve(b);
  return llt_.matrixL().solve(b);
}

double SpdState::quadform(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != n_) fail(ErrorCode::dimension_error, "vector length does not match");
  if (opts_.method == FactorizeOptions::Method::qr)
    return qr_r_.transpose().triangularView<Eigen::Lower>().solve(x).squaredNorm();
  return llt_.matrixL().solve(x).squaredNorm();
}

double SpdState::row_quadform(const DenseMatrix& a, Eigen::Index i) const {
  a.check_row(i);
  return quadform(a.transposed().col(i));
}

void SpdState::leverage_into(const DenseMatrix& a, Eigen::VectorXd& sigma,
                             Eigen::MatrixXd* workspace, int threads) const {
  const Eigen::Index m = a.rows();
  if (scaled_t_.rows() != m)
    fail(ErrorCode::dimension_error, "matrix row count does not match the factorization");
  sigma.resize(m);

  Eigen::MatrixXd local;
  Eigen::MatrixXd& y = workspace ? *workspace : local;
  y.resize(m, n_);

  // sigma_i = ||L^{-1} sqrt(w_i) a_i||^2; the rows of scaled_t_ are already
  // weight-scaled, so dense products against the explicit L^{-1} cover all
  // rows. The work is cut into fixed-size row blocks whose boundaries depend
  // only on m, never on the thread count, so the serial and fanned-out paths
  // run bit-identical arithmetic.
  auto solve_block = [&](Eigen::Index begin, Eigen::Index len) {
    auto rows = y.middleRows(begin, len);
    rows.noalias() = scaled_t_.middleRows(begin, len) * inv_lower_.transpose();
    sigma.segment(begin, len).setZero();
    for (Eigen::Index j = 0; j < n_; ++j)
      sigma.segment(begin, len).array() += rows.col(j).array().square();
  };
  auto run_blocks = [&](Eigen::Index first_block, Eigen::Index stride) {
    for (Eigen::Index begin = first_block * kLeverageBlock; begin < m;
         begin += stride * kLeverageBlock) {
      solve_block(begin, std::min(kLeverageBlock, m - begin));
    }
  };

  int usable = std::max(1, threads);
  if (usable > 1 && m >= kParallelRowThreshold) {
    std::vector<std::thread> pool;
    for (int t = 0; t < usable; ++t) pool.emplace_back(run_blocks, t, usable);
    for (auto& t : pool) t.join();
  } else {
    run_blocks(0, 1);
  }
}

Eigen::VectorXd SpdState::leverage(const DenseMatrix& a, int threads) const {
  Eigen::VectorXd sigma;
  leverage_into(a, sigma, nullptr, threads);
  return sigma;
}

Eigen::MatrixXd SpdState::inverse_sqrt() const {
  Eigen::MatrixXd gram(n_, n_);
  if (opts_.method == FactorizeOptions::Method::qr) {
    gram = qr_r_.transpose() * qr_r_;
  } else {
    Eigen::MatrixXd l = llt_.matrixL();
    gram = l * l.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0)
    fail(ErrorCode::not_positive_definite, "cannot take inverse square root");
  return es.operatorInverseSqrt();
}

SpdState rank_one_update(SpdState state, const DenseMatrix& a, Eigen::Index i, double delta) {
  a.check_row(i);
  if (delta == 0.0) return state;

  double w_new = state.w_[i] + delta;
  if (!(w_new > 0.0))
    fail(ErrorCode::downdate_singular,
         "update drives weight " + std::to_string(i) + " to " + std::to_string(w_new));

  double denom = 1.0 + delta * state.row_quadform(a, i);
  if (denom <= 1e-14)
    fail(ErrorCode::downdate_singular,
         "Sherman-Morrison denominator " + std::to_string(denom) + " at row " +
             std::to_string(i));

  bool must_refactor = state.opts_.method == FactorizeOptions::Method::qr ||
                       state.updates_since_refactor_ + 1 >= state.period_ ||
                       denom < state.opts_.downdate_tolerance;
  state.w_[i] = w_new;
  if (must_refactor) {
    state.refactor(a);
    return state;
  }

  state.llt_.rankUpdate(a.transposed().col(i), delta);
  if (state.llt_.info() != Eigen::Success) {
    state.refactor(a);  // recoverable numerical issue; rebuild from scratch
    return state;
  }
  // Keep the leverage caches consistent with the updated factor.
  double old_sqrt = state.sqrt_w_[i];
  state.sqrt_w_[i] = std::sqrt(w_new);
  state.scaled_t_.row(i) *= state.sqrt_w_[i] / old_sqrt;
  invert_lower(state.llt_.matrixLLT(), state.inv_lower_);
  ++state.updates_since_refactor_;
  return state;
}

Eigen::VectorXd leverage_scores(const DenseMatrix& a, const Eigen::VectorXd& w, int threads) {
  return SpdState(a, w).leverage(a, threads);
}

}  // namespace lewis
