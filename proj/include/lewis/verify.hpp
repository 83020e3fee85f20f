#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "lewis/objective.hpp"
#include "lewis/types.hpp"

namespace lewis {

struct ResidualReport {
  double max_relative_fixed_point_residual = 0;
  double optimality_residual = 0;
  double rho_max = 0;
  double suboptimality_certificate = 0;
};

// max_i |wbar_i^{2/p} - a_i^T (A^T Wbar^{1-2/p} A)^{-1} a_i| / wbar_i^{2/p}
// for definition-normalized weights; the relative fixed-point residual.
double lewis_residual(const DenseMatrix& a, const WeightVector& wbar, double p);

// ||sigma(w) - w^{1+alpha}||_inf for optimizer-normalized weights.
double optimality_residual(const DenseMatrix& a, const Eigen::VectorXd& w,
                           const AlphaParams& params);

// 5 max(1, 1/alpha) sum_i w_i^{1+alpha} (rho_i - 1)^2 / (rho_i + 1); an upper
// bound on F(w) - F(w*) whenever the rounding condition holds.
double suboptimality_certificate(const DenseMatrix& a, const Eigen::VectorXd& w,
                                 const AlphaParams& params);

// All four residual diagnostics at an optimizer-normalized w.
ResidualReport residual_report(const DenseMatrix& a, const Eigen::VectorXd& w_optimizer,
                               const AlphaParams& params);

// Samples `trials` random unit directions u and checks that the boundary
// points x = (A^T W A)^{-1/2} u of the ellipsoid satisfy
// ||W^{-alpha/2} A x||_inf <= sqrt(1+alpha) (1 + 1e-9). Requires the rounding
// condition. Deterministic for a fixed seed.
bool ellipsoid_containment(const DenseMatrix& a, const Eigen::VectorXd& w,
                           const AlphaParams& params, int trials, std::uint64_t seed,
                           double* max_ratio = nullptr);

struct OracleResult {
  Eigen::VectorXd w;
  double objective = 0;
  long iterations = 0;
};

// Independent ground truth for small instances: projected gradient descent
// with Armijo backtracking (slope factor 1e-4) and positivity clipping to
// w+ >= w/2, run until ||sigma(w) - w^{1+alpha}||_inf <= tol. Deliberately
// not the production descent step, so agreement is evidence.
OracleResult oracle_solve(const DenseMatrix& a, double p, double tol, long max_iters = 1000000);

}  // namespace lewis
