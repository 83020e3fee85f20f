#pragma once

#include <Eigen/Dense>

#include <span>

#include "lewis/linalg.hpp"
#include "lewis/objective.hpp"
#include "lewis/trace.hpp"
#include "lewis/types.hpp"

namespace lewis {

// Multiplicative quasi-Newton update on the coordinates in C:
//   w_i <- w_i [1 + eta_i (rho_i - 1)/(rho_i + 1)].
// Step sizes must lie in [0, 1/(3 alpha_bar)].
Eigen::VectorXd descent_step(const Eigen::VectorXd& w, const RhoVector& rho,
                             std::span<const Eigen::Index> c, const Eigen::VectorXd& eta,
                             const AlphaParams& params);

// Full-coordinate-set variant writing through w; used by the solver loops.
void descent_step_inplace(Eigen::VectorXd& w, const Eigen::VectorXd& rho,
                          const Eigen::VectorXd& eta, const AlphaParams& params);

// rho_max <= (1+alpha), inclusive up to relative slack 1e-12.
bool rounding_condition(double rho_max, const AlphaParams& params);

inline constexpr double kRoundingConditionSlack = 1e-12;
inline constexpr double kSequentialMembershipTol = 1e-14;

struct RoundOptions {
  // Safety multiple applied to the proved iteration bounds before a cap
  // trips; turns non-termination bugs into diagnosable errors.
  double cap_scale = 10.0;
  FactorizeOptions factorize;
  TraceSink* trace = nullptr;
  long trace_iteration_base = 0;
  int threads = 1;
};

struct RoundResult {
  Eigen::VectorXd w;
  Eigen::VectorXd sigma;      // leverage scores at the returned weights
  long passes = 0;            // while-loop passes (parallel)
  long coordinate_steps = 0;  // rank-one steps (sequential)
};

// Repeated masked Descent on the violating set {i : rho_i > 1+alpha} until
// the rounding condition holds. Output >= input entrywise and F never
// increases.
RoundResult round_parallel(const DenseMatrix& a, Eigen::VectorXd w, const AlphaParams& params,
                           const RoundOptions& opts = {});

// Exact 1-D minimization over each coordinate of {i : rho_i >= 1}, largest
// rho first, via Sherman-Morrison rank-one updates of the Gram factorization.
RoundResult round_sequential(const DenseMatrix& a, Eigen::VectorXd w, const AlphaParams& params,
                             const RoundOptions& opts = {});

// The positive root of (1 + delta sigma)(1 + delta)^alpha = rho on
// [0, rho^{1/alpha} - 1], to relative residual 1e-12. Closed form for
// alpha = 1, safeguarded Newton with bisection fallback otherwise.
double solve_coordinate_delta(double rho_i, double sigma_i, const AlphaParams& params);

// Closed-form objective change of the coordinate step w_i <- w_i (1+delta):
//   -log(1 + delta sigma_i) + (w_i^{1+alpha}/(1+alpha)) ((1+delta)^{1+alpha} - 1).
double coordinate_objective_delta(double w_i, double sigma_i, double delta,
                                  const AlphaParams& params);

}  // namespace lewis
