#pragma once

#include <Eigen/Dense>

#include "lewis/linalg.hpp"
#include "lewis/types.hpp"

namespace lewis {

// Reparameterization of p > 2: alpha = 2/(p-2), alpha_bar = max(1, alpha).
struct AlphaParams {
  double p = 0;
  double alpha = 0;
  double alpha_bar = 0;

  static AlphaParams from_p(double p);
};

// Elementwise w^{1+alpha} for strictly positive w, evaluated as
// exp((1+alpha) log w).
Eigen::VectorXd pow_one_plus_alpha(const Eigen::VectorXd& w, const AlphaParams& params);

// F(w) = -log det(A^T W A) + (1/(1+alpha)) sum_i w_i^{1+alpha}
double objective_value(const DenseMatrix& a, const Eigen::VectorXd& w, const AlphaParams& params);
// Same, reusing an existing factorization of A^T W A at the state's weights.
double objective_value(const SpdState& state, const AlphaParams& params);

// [grad F(w)]_i = w_i^{-1} (w_i^{1+alpha} - sigma_i(w))
Eigen::VectorXd gradient(const DenseMatrix& a, const Eigen::VectorXd& w,
                         const AlphaParams& params);

// h^T [W^{-1} P^{(2)} W^{-1} + alpha W^{alpha-1}] h, accumulated through
// n x n contractions (never materializes the m x m projection).
double hessian_quadform(const DenseMatrix& a, const Eigen::VectorXd& w, const AlphaParams& params,
                        const Eigen::VectorXd& h);

struct RhoVector {
  Eigen::VectorXd values;
  double max = 0;
  Eigen::Index argmax = 0;
};

// rho_i(w) = sigma_i(w) / w_i^{1+alpha}; equals 1 entrywise at the optimizer.
RhoVector rho(const DenseMatrix& a, const Eigen::VectorXd& w, const AlphaParams& params);

// Hot-path variant: rho from precomputed sigma and w^{1+alpha}.
void rho_into(const Eigen::VectorXd& sigma, const Eigen::VectorXd& w_pow, RhoVector& out);

}  // namespace lewis
