#include "lewis/steps.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace lewis {

namespace {

double step_size_bound(const AlphaParams& params) {
  return 1.0 / (3.0 * params.alpha_bar);
}

void check_step_sizes(const Eigen::VectorXd& eta, const AlphaParams& params) {
  double bound = step_size_bound(params) * (1.0 + 1e-15);
  if ((eta.array() < 0.0).any() || (eta.array() > bound).any())
    fail(ErrorCode::invalid_step_size,
         "step sizes must lie in [0, 1/(3 alpha_bar)] = [0, " +
             std::to_string(step_size_bound(params)) + "]");
}

double objective_from_state(const SpdState& state, const Eigen::VectorXd& w1pa,
                            const AlphaParams& params) {
  return -state.log_det() + w1pa.sum() / (1.0 + params.alpha);
}

}  // namespace

Eigen::VectorXd descent_step(const Eigen::VectorXd& w, const RhoVector& rho,
                             std::span<const Eigen::Index> c, const Eigen::VectorXd& eta,
                             const AlphaParams& params) {
  if (rho.values.size() != w.size() || eta.size() != w.size())
    fail(ErrorCode::dimension_error, "descent_step: rho/eta length must match w");
  check_step_sizes(eta, params);
  Eigen::VectorXd out = w;
  for (Eigen::Index i : c) {
    if (i < 0 || i >= w.size())
      fail(ErrorCode::index_out_of_range,
           "descent_step: coordinate " + std::to_string(i) + " outside [0, " +
               std::to_string(w.size()) + ")");
    double r = rho.values[i];
    out[i] = w[i] * (1.0 + eta[i] * (r - 1.0) / (r + 1.0));
  }
  return out;
}

void descent_step_inplace(Eigen::VectorXd& w, const Eigen::VectorXd& rho,
                          const Eigen::VectorXd& eta, const AlphaParams& params) {
  if (rho.size() != w.size() || eta.size() != w.size())
    fail(ErrorCode::dimension_error, "descent_step_inplace: rho/eta length must match w");
  check_step_sizes(eta, params);
  w.array() *= 1.0 + eta.array() * (rho.array() - 1.0) / (rho.array() + 1.0);
}

bool rounding_condition(double rho_max, const AlphaParams& params) {
  return rho_max <= (1.0 + params.alpha) * (1.0 + kRoundingConditionSlack);
}

RoundResult round_parallel(const DenseMatrix& a, Eigen::VectorXd w, const AlphaParams& params,
                           const RoundOptions& opts) {
  check_positive_weights(w, "round_parallel");
  const Eigen::Index m = a.rows();
  SpdState state(a, w, opts.factorize);

  Eigen::VectorXd sigma(m);
  Eigen::MatrixXd workspace;
  RhoVector rho;
  rho.values.resize(m);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(m, step_size_bound(params));
  std::vector<Eigen::Index> violating;
  violating.reserve(static_cast<std::size_t>(m));

  long cap = -1;  // decided from the entry violation once the loop engages
  RoundResult result;
  while (true) {
    state.leverage_into(a, sigma, &workspace, opts.threads);
    Eigen::VectorXd w1pa = pow_one_plus_alpha(w, params);
    rho_into(sigma, w1pa, rho);
    if (opts.trace != nullptr) {
      TraceRow row;
      row.iteration = opts.trace_iteration_base + result.passes;
      row.type = StepType::round_pass;
      row.objective = objective_from_state(state, w1pa, params);
      row.rho_max = rho.max;
      row.optimality_residual = (sigma - w1pa).cwiseAbs().maxCoeff();
      opts.trace->emit(row);
    }
    if (rounding_condition(rho.max, params)) break;

    if (cap < 0) {
      // Passes needed: each shrinks log(rho_max) by at least
      // alpha * log(1 + alpha / (3 alpha_bar (2 + alpha))).
      double per_pass =
          params.alpha *
          std::log1p(params.alpha / (3.0 * params.alpha_bar * (2.0 + params.alpha)));
      double needed = std::log(rho.max / (1.0 + params.alpha)) / per_pass;
      cap = static_cast<long>(std::ceil(opts.cap_scale * needed)) + 10;
    }
    if (result.passes >= cap)
      fail(ErrorCode::iteration_cap_exceeded,
           "round_parallel: " + std::to_string(result.passes) +
               " passes without reaching the rounding condition (cap " +
               std::to_string(cap) + ")");

    violating.clear();
    for (Eigen::Index i = 0; i < m; ++i)
      if (rho.values[i] > 1.0 + params.alpha) violating.push_back(i);
    for (Eigen::Index i : violating) {
      double r = rho.values[i];
      w[i] *= 1.0 + eta[i] * (r - 1.0) / (r + 1.0);
    }
    state.set_weights(a, w);
    ++result.passes;
  }

  result.w = std::move(w);
  result.sigma = std::move(sigma);
  return result;
}

double solve_coordinate_delta(double rho_i, double sigma_i, const AlphaParams& params) {
  if (!(sigma_i > 0.0) || sigma_i > 1.0 + 1e-9)
    fail(ErrorCode::domain_error,
         "solve_coordinate_delta: leverage score " + std::to_string(sigma_i) +
             " outside (0, 1]");
  if (rho_i < 1.0 - kSequentialMembershipTol)
    fail(ErrorCode::bracket_failure,
         "solve_coordinate_delta: rho = " + std::to_string(rho_i) +
             " below 1, no nonnegative root");
  if (rho_i <= 1.0) return 0.0;

  const double alpha = params.alpha;
  if (alpha == 1.0) {
    // sigma d^2 + (1+sigma) d + (1-rho) = 0, written to avoid cancellation.
    double b = 1.0 + sigma_i;
    return 2.0 * (rho_i - 1.0) / (b + std::sqrt(b * b + 4.0 * sigma_i * (rho_i - 1.0)));
  }

  // Newton on h(d) = log(1 + d sigma) + alpha log(1 + d) - log(rho); h is
  // increasing and concave, so from the left endpoint the iterates increase
  // monotonically toward the root. Bisection guards the bracket.
  double lo = 0.0;
  double hi = std::expm1(std::log(rho_i) / alpha);  // (1+d)^alpha = rho alone
  double log_rho = std::log(rho_i);
  double d = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double h = std::log1p(d * sigma_i) + alpha * std::log1p(d) - log_rho;
    double residual = std::abs(std::expm1(std::log1p(d * sigma_i) + alpha * std::log1p(d) -
                                          log_rho)) * rho_i;
    if (residual <= 1e-12 * rho_i) return d;
    if (h < 0.0)
      lo = d;
    else
      hi = d;
    double slope = sigma_i / (1.0 + d * sigma_i) + alpha / (1.0 + d);
    double next = d - h / slope;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    d = next;
  }
  fail(ErrorCode::bracket_failure,
       "solve_coordinate_delta: no convergence for rho = " + std::to_string(rho_i) +
           ", sigma = " + std::to_string(sigma_i));
}

double coordinate_objective_delta(double w_i, double sigma_i, double delta,
                                  const AlphaParams& params) {
  if (!(1.0 + delta * sigma_i > 0.0))
    fail(ErrorCode::domain_error,
         "coordinate_objective_delta: 1 + delta*sigma = " +
             std::to_string(1.0 + delta * sigma_i) + " not positive");
  if (!(w_i > 0.0))
    fail(ErrorCode::domain_error, "coordinate_objective_delta: weight must be positive");
  double w1pa = std::exp((1.0 + params.alpha) * std::log(w_i));
  double growth = std::expm1((1.0 + params.alpha) * std::log1p(delta));
  return -std::log1p(delta * sigma_i) + w1pa / (1.0 + params.alpha) * growth;
}

RoundResult round_sequential(const DenseMatrix& a, Eigen::VectorXd w, const AlphaParams& params,
                             const RoundOptions& opts) {
  check_positive_weights(w, "round_sequential");
  const Eigen::Index m = a.rows();
  SpdState state(a, w, opts.factorize);

  Eigen::VectorXd sigma(m);
  Eigen::MatrixXd workspace;
  state.leverage_into(a, sigma, &workspace, opts.threads);
  Eigen::VectorXd w1pa = pow_one_plus_alpha(w, params);

  // Entry set {i : rho_i >= 1}, processed largest violation first. Members
  // whose rho drops below 1 by the time they are reached are skipped.
  std::vector<std::pair<double, Eigen::Index>> entry;
  entry.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    double r = sigma[i] / w1pa[i];
    if (r >= 1.0 - kSequentialMembershipTol) entry.emplace_back(r, i);
  }
  std::sort(entry.begin(), entry.end(), std::greater<>());

  double f_run = 0.0;
  if (opts.trace != nullptr) f_run = objective_from_state(state, w1pa, params);

  RoundResult result;
  for (const auto& [entry_rho, i] : entry) {
    double sigma_i = w[i] * state.row_quadform(a, i);
    double w1pa_i = std::exp((1.0 + params.alpha) * std::log(w[i]));
    double rho_i = sigma_i / w1pa_i;
    if (rho_i < 1.0 - kSequentialMembershipTol) continue;  // fixed by earlier steps
    double delta = solve_coordinate_delta(rho_i, sigma_i, params);
    if (delta == 0.0) continue;

    double df = coordinate_objective_delta(w[i], sigma_i, delta, params);
    try {
      state = rank_one_update(std::move(state), a, i, delta * w[i]);
      w[i] *= 1.0 + delta;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::downdate_singular) throw;
      w[i] *= 1.0 + delta;
      state = SpdState(a, w, opts.factorize);  // recover with a fresh factorization
    }
    ++result.coordinate_steps;

    if (opts.trace != nullptr) {
      f_run += df;
      state.leverage_into(a, sigma, &workspace, opts.threads);
      w1pa = pow_one_plus_alpha(w, params);
      TraceRow row;
      row.iteration = opts.trace_iteration_base + result.coordinate_steps - 1;
      row.type = StepType::coordinate_step;
      row.objective = f_run;
      row.rho_max = (sigma.array() / w1pa.array()).maxCoeff();
      row.optimality_residual = (sigma - w1pa).cwiseAbs().maxCoeff();
      opts.trace->emit(row);
    }
  }

  state.leverage_into(a, sigma, &workspace, opts.threads);
  result.w = std::move(w);
  result.sigma = std::move(sigma);
  return result;
}

}  // namespace lewis
