#include "lewis/verify.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "lewis/linalg.hpp"
#include "lewis/steps.hpp"

namespace lewis {

namespace {

// Box-Muller over the raw mt19937_64 stream; both are pinned by the standard,
// so sampled directions are bit-identical across platforms for a fixed seed.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Eigen::VectorXd leverage_at(const DenseMatrix& a, const Eigen::VectorXd& w) {
  return SpdState(a, w).leverage(a);
}

}  // namespace

double lewis_residual(const DenseMatrix& a, const WeightVector& wbar, double p) {
  AlphaParams::from_p(p);  // validates p > 2
  if (wbar.normalization != Normalization::definition)
    fail(ErrorCode::domain_error,
         "lewis_residual expects definition-normalized weights");
  if (wbar.values.size() != a.rows())
    fail(ErrorCode::dimension_error, "lewis_residual: weight count must match row count");

  Eigen::VectorXd v = (wbar.values.array().log() * (1.0 - 2.0 / p)).exp().matrix();
  Eigen::VectorXd sigma = leverage_at(a, v);
  Eigen::VectorXd quad = (sigma.array() / v.array()).matrix();
  Eigen::VectorXd target = (wbar.values.array().log() * (2.0 / p)).exp().matrix();
  return ((target - quad).cwiseAbs().array() / target.array()).maxCoeff();
}

double optimality_residual(const DenseMatrix& a, const Eigen::VectorXd& w,
                           const AlphaParams& params) {
  check_positive_weights(w, "optimality_residual");
  Eigen::VectorXd sigma = leverage_at(a, w);
  return (sigma - pow_one_plus_alpha(w, params)).cwiseAbs().maxCoeff();
}

double suboptimality_certificate(const DenseMatrix& a, const Eigen::VectorXd& w,
                                 const AlphaParams& params) {
  check_positive_weights(w, "suboptimality_certificate");
  Eigen::VectorXd sigma = leverage_at(a, w);
  Eigen::VectorXd w1pa = pow_one_plus_alpha(w, params);
  Eigen::ArrayXd rho = sigma.array() / w1pa.array();
  double rho_max = rho.maxCoeff();
  if (!rounding_condition(rho_max, params))
    fail(ErrorCode::precondition_violated,
         "suboptimality certificate requires rho_max <= 1 + alpha, got " +
             std::to_string(rho_max));
  return 5.0 * std::max(1.0, 1.0 / params.alpha) *
         (w1pa.array() * (rho - 1.0).square() / (rho + 1.0)).sum();
}

ResidualReport residual_report(const DenseMatrix& a, const Eigen::VectorXd& w_optimizer,
                               const AlphaParams& params) {
  check_positive_weights(w_optimizer, "residual_report");
  Eigen::VectorXd sigma = leverage_at(a, w_optimizer);
  Eigen::VectorXd w1pa = pow_one_plus_alpha(w_optimizer, params);
  Eigen::ArrayXd rho = sigma.array() / w1pa.array();

  ResidualReport rep;
  rep.rho_max = rho.maxCoeff();
  rep.optimality_residual = (sigma - w1pa).cwiseAbs().maxCoeff();
  // Identical to evaluating the definition-normalized fixed-point equation at
  // w^{1+alpha}: the relative residual is max |1 - rho_i|.
  rep.max_relative_fixed_point_residual = (rho - 1.0).abs().maxCoeff();
  // The certificate formula is always finite; it bounds F(w) - F(w*) only
  // when rho_max <= 1 + alpha (readable off the rho_max field).
  rep.suboptimality_certificate =
      5.0 * std::max(1.0, 1.0 / params.alpha) *
      (w1pa.array() * (rho - 1.0).square() / (rho + 1.0)).sum();
  return rep;
}

bool ellipsoid_containment(const DenseMatrix& a, const Eigen::VectorXd& w,
                           const AlphaParams& params, int trials, std::uint64_t seed,
                           double* max_ratio) {
  check_positive_weights(w, "ellipsoid_containment");
  if (trials <= 0)
    fail(ErrorCode::domain_error, "ellipsoid_containment: trials must be positive");

  SpdState state(a, w);
  Eigen::MatrixXd isqrt = state.inverse_sqrt();
  // Rows of W^{-alpha/2} A (A^T W A)^{-1/2}; boundary point images are M u.
  Eigen::VectorXd row_scale = (w.array().log() * (-params.alpha / 2.0)).exp().matrix();
  Eigen::MatrixXd mapped = row_scale.asDiagonal() * (a.matrix() * isqrt);

  double bound = std::sqrt(1.0 + params.alpha) * (1.0 + 1e-9);
  double worst = 0.0;
  GaussianSampler gauss(seed);
  Eigen::VectorXd u(a.cols());
  bool ok = true;
  for (int t = 0; t < trials; ++t) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = gauss();
      norm = u.norm();
    } while (norm == 0.0);
    u /= norm;
    double reach = (mapped * u).cwiseAbs().maxCoeff();
    worst = std::max(worst, reach / std::sqrt(1.0 + params.alpha));
    if (reach > bound) ok = false;
  }
  if (max_ratio != nullptr) *max_ratio = worst;
  return ok;
}

OracleResult oracle_solve(const DenseMatrix& a, double p, double tol, long max_iters) {
  AlphaParams params = AlphaParams::from_p(p);
  if (!(tol > 0.0)) fail(ErrorCode::domain_error, "oracle_solve: tolerance must be positive");

  const Eigen::Index m = a.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  double f = objective_value(a, w, params);

  for (long iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd sigma = leverage_at(a, w);
    Eigen::VectorXd w1pa = pow_one_plus_alpha(w, params);
    if ((sigma - w1pa).cwiseAbs().maxCoeff() <= tol)
      return OracleResult{w, f, iter};

    Eigen::VectorXd grad =
        ((w.array().log() * params.alpha).exp() - sigma.array() / w.array()).matrix();

    // Projected gradient step with Armijo backtracking; the positivity clip
    // w+ >= w/2 keeps every trial point in the domain. The trial step is the
    // exact-line-search step g'g / g'Hg: the curvature keeps the step stable
    // for the stiffest coordinates, which matters because near the optimum f
    // differences drop below double precision and a step probed only through
    // f comparisons either collapses or limit-cycles. For the same reason the
    // acceptance carries an absolute tolerance of a few ulps of f, so true
    // but unmeasurable decreases are not rejected.
    double curvature = hessian_quadform(a, w, params, grad);
    double gg = grad.squaredNorm();
    double step = (curvature > 0.0 && gg > 0.0)
                      ? std::min(std::max(gg / curvature, 1e-18), 1e12)
                      : 1.0;
    double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    bool accepted = false;
    while (step > 1e-18) {
      Eigen::VectorXd trial = (w - step * grad).cwiseMax(0.5 * w);
      double f_trial = objective_value(a, trial, params);
      double slope = grad.dot(trial - w);
      if (f_trial <= f + 1e-4 * slope + noise) {
        w = std::move(trial);
        f = f_trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      fail(ErrorCode::oracle_stalled,
           "oracle_solve: no acceptable step at iteration " + std::to_string(iter) +
               " (residual " +
               std::to_string((sigma - w1pa).cwiseAbs().maxCoeff()) + ", tol " +
               std::to_string(tol) + ")");
  }
  fail(ErrorCode::oracle_stalled,
       "oracle_solve: iteration cap " + std::to_string(max_iters) +
           " reached before the residual target");
}

}  // namespace lewis
