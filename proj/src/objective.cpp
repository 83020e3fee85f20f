#include "lewis/objective.hpp"

#include <cmath>
#include <string>

namespace lewis {

AlphaParams AlphaParams::from_p(double p) {
  if (!std::isfinite(p) || !(p > 2.0))
    fail(ErrorCode::unsupported_p,
         "p must be a finite value greater than 2, got " + std::to_string(p));
  AlphaParams params;
  params.p = p;
  params.alpha = 2.0 / (p - 2.0);
  params.alpha_bar = std::max(1.0, params.alpha);
  return params;
}

Eigen::VectorXd pow_one_plus_alpha(const Eigen::VectorXd& w,
                                   const AlphaParams& params) {
  check_positive_weights(w, "pow_one_plus_alpha");
  return (w.array().log() * (1.0 + params.alpha)).exp().matrix();
}

double objective_value(const SpdState& state, const AlphaParams& params) {
  Eigen::VectorXd w1pa = pow_one_plus_alpha(state.weights(), params);
  return -state.log_det() + w1pa.sum() / (1.0 + params.alpha);
}

double objective_value(const DenseMatrix& a, const Eigen::VectorXd& w,
                       const AlphaParams& params) {
  SpdState state(a, w, FactorizeOptions{});
  return objective_value(state, params);
}

Eigen::VectorXd gradient(const DenseMatrix& a, const Eigen::VectorXd& w,
                         const AlphaParams& params) {
  SpdState state(a, w, FactorizeOptions{});
  Eigen::VectorXd sigma(a.rows());
  state.leverage_into(a, sigma);
  // w^{-1} (w^{1+alpha} - sigma) = w^alpha - sigma / w
  return ((w.array().log() * params.alpha).exp() -
          sigma.array() / w.array())
      .matrix();
}

double hessian_quadform(const DenseMatrix& a, const Eigen::VectorXd& w,
                        const AlphaParams& params, const Eigen::VectorXd& h) {
  if (h.size() != a.rows())
    fail(ErrorCode::dimension_error,
         "hessian_quadform: direction has " + std::to_string(h.size()) +
             " entries for " + std::to_string(a.rows()) + " rows");
  SpdState state(a, w, FactorizeOptions{});
  // S = sum_i h_i a_i a_i^T, then || L^{-1} S L^{-T} ||_F^2.
  Eigen::MatrixXd s = a.transposed() * h.asDiagonal() * a.matrix();
  Eigen::MatrixXd m = state.solve_lower(s);              // L^{-1} S
  Eigen::MatrixXd k = state.solve_lower(m.transpose());  // L^{-1} S L^{-T}
  double curvature = k.squaredNorm();
  double penalty =
      params.alpha *
      (h.array().square() * (w.array().log() * (params.alpha - 1.0)).exp())
          .sum();
  return curvature + penalty;
}

RhoVector rho(const DenseMatrix& a, const Eigen::VectorXd& w,
              const AlphaParams& params) {
  SpdState state(a, w, FactorizeOptions{});
  Eigen::VectorXd sigma(a.rows());
  state.leverage_into(a, sigma);
  RhoVector out;
  out.values.resize(a.rows());
  rho_into(sigma, pow_one_plus_alpha(w, params), out);
  return out;
}

void rho_into(const Eigen::VectorXd& sigma, const Eigen::VectorXd& w_pow,
              RhoVector& out) {
  if (sigma.size() != w_pow.size() || out.values.size() != sigma.size())
    fail(ErrorCode::dimension_error, "rho_into: size mismatch");
  out.values.array() = sigma.array() / w_pow.array();
  out.max = out.values.maxCoeff(&out.argmax);
}

}  // namespace lewis
