#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "lewis/linalg.hpp"
#include "lewis/objective.hpp"
#include "lewis/steps.hpp"
#include "lewis/trace.hpp"
#include "lewis/types.hpp"
#include "lewis/verify.hpp"

namespace lewis {

enum class Variant { parallel, sequential, one_step, cohen_peng };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct SolverConfig {
  double p = 4.0;
  double eps = 1e-6;
  Variant variant = Variant::parallel;

  // Derived by schedule().
  Eigen::Index m = 0, n = 0;
  double alpha = 0, alpha_bar = 0;
  double eps_tilde = 0;
  double beta = 0;     // one-step damping (1/1000) min(alpha^2, 1)
  long t_total = 0;    // outer iteration budget

  // Schedule constants and overrides.
  double k_meta = 40.0;        // T_total = ceil(K max(alpha,1/alpha) log(m/eps_tilde))
  double k_one_step = 2000.0;  // T_total = ceil(K max(alpha^-3,alpha^2) log(mp/eps_tilde))
  double cap_scale = 10.0;     // safety multiple on proved round/coordinate caps
  double max_iters_scale = 1.0;
  double eps_tilde_override = 0.0;      // > 0 replaces the default eps_tilde
  double sigma_early_stop = 0.0;        // > 0 replaces sqrt(eps_tilde)/4
  double certified_residual_target = 0; // > 0 replaces eps/2
  long one_step_check_interval = 512;
  double deadline_seconds = 0.0;        // > 0: wall-clock budget, DeadlineExceeded on expiry

  FactorizeOptions factorize;
  int threads = 1;
  long trace_capacity = 1 << 16;  // stored rows; the run is audited at full rate
  long snapshot_capacity = 32;
  std::uint64_t seed = 0;  // verification sampling (recorded, not used by solves)
};

// Populates every derived field for an m x n instance.
SolverConfig schedule(double p, Eigen::Index m, Eigen::Index n, double eps);

struct IterationCounts {
  long descent_steps = 0;
  long round_passes = 0;       // parallel while-loop passes over the whole run
  long coordinate_steps = 0;   // sequential rank-one steps over the whole run
  long fixed_point_steps = 0;  // cohen-peng iterations
  long trace_rows = 0;         // rows emitted before decimation
};

struct SolverReport {
  WeightVector weights_optimizer;   // w-hat
  WeightVector weights_definition;  // w-hat^{1+alpha}
  ResidualReport residuals;         // evaluated at the returned weights
  IterationCounts iterations;
  std::vector<TraceRow> trace;      // decimated to config.trace_capacity
  // Streaming audits over every emitted row (not just stored ones).
  double max_objective_increase = 0;
  double max_rho_seen = 0;
  std::vector<Eigen::VectorXd> rounded_iterates;  // decimated snapshots
  double wall_ms = 0;
  std::string stop_reason;
  SolverConfig config;
};

// Algorithm: start at w = (n/m) 1; round (parallel or sequential per the
// variant) then full-set damped descent, with residual-certified extraction;
// the returned weights always come from a rounded iterate.
SolverReport lewis_meta(const DenseMatrix& a, const SolverConfig& cfg);

// One-step variant: w = 1, no rounding; step 1/(3 alpha_bar) on coordinates
// with rho_i >= 1 and beta/(3 alpha_bar) elsewhere. The rounding condition
// is an invariant of every iterate (checked; violation is a bug).
SolverReport lewis_one_step(const DenseMatrix& a, const SolverConfig& cfg);

// Fixed-point baseline for p in (2,4):
//   wbar_i <- (a_i^T (A^T Wbar^{1-2/p} A)^{-1} a_i)^{p/2}.
SolverReport cohen_peng_fixed_point(const DenseMatrix& a, const SolverConfig& cfg);

// Dispatch on cfg.variant.
SolverReport solve(const DenseMatrix& a, const SolverConfig& cfg);

// w-hat_i = (a_i^T (A^T W_R A)^{-1} a_i)^{1/alpha} for a rounded w_R.
Eigen::VectorXd extract_weights(const DenseMatrix& a, const Eigen::VectorXd& w_r,
                                const AlphaParams& params);

// wbar = w-hat^{1+alpha}; sums to n at a verified solution.
WeightVector to_definition_normalization(const WeightVector& w_hat, const AlphaParams& params);

}  // namespace lewis
