#include "lewis/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace lewis {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Deadline {
  Clock::time_point start = Clock::now();
  double limit_seconds = 0.0;

  void check(const char* where) const {
    if (limit_seconds <= 0.0) return;
    double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (elapsed > limit_seconds)
      fail(ErrorCode::deadline_exceeded,
           std::string(where) + ": wall clock " + std::to_string(elapsed) +
               " s exceeded the " + std::to_string(limit_seconds) + " s budget");
  }
};

bool audited_row(StepType type) {
  // Extraction candidates are probes, not iterates; fixed-point iterations
  // carry no objective-decrease guarantee. Both are stored but not audited.
  return type == StepType::init || type == StepType::descent ||
         type == StepType::round_pass || type == StepType::coordinate_step;
}

// Stores a decimated subsample of the emitted rows (stride doubling once the
// capacity fills) while running the monotonicity and rho audits at full rate.
class CollectingSink : public TraceSink {
 public:
  explicit CollectingSink(long capacity) : capacity_(std::max<long>(2, capacity)) {}

  void emit(const TraceRow& row) override {
    if (audited_row(row.type)) {
      if (have_prev_)
        max_objective_increase_ = std::max(max_objective_increase_, row.objective - prev_f_);
      prev_f_ = row.objective;
      have_prev_ = true;
      max_rho_seen_ = std::max(max_rho_seen_, row.rho_max);
    }
    if (emitted_ % stride_ == 0) {
      rows_.push_back(row);
      if (static_cast<long>(rows_.size()) >= capacity_) compact();
    }
    ++emitted_;
  }

  long emitted() const { return emitted_; }
  double max_objective_increase() const { return max_objective_increase_; }
  double max_rho_seen() const { return max_rho_seen_; }
  std::vector<TraceRow> take_rows() { return std::move(rows_); }

 private:
  void compact() {
    std::size_t keep = 0;
    for (std::size_t j = 0; j < rows_.size(); j += 2) rows_[keep++] = rows_[j];
    rows_.resize(keep);
    stride_ *= 2;
  }

  long capacity_;
  long stride_ = 1;
  long emitted_ = 0;
  std::vector<TraceRow> rows_;
  double prev_f_ = 0;
  bool have_prev_ = false;
  double max_objective_increase_ = 0;
  double max_rho_seen_ = 0;
};

// Uniform-stride subsample of weight vectors, same doubling scheme; the most
// recent snapshot is always retained so the final rounded iterate survives.
class SnapshotStore {
 public:
  explicit SnapshotStore(long capacity) : capacity_(std::max<long>(2, capacity)) {}

  void add(const Eigen::VectorXd& w) {
    last_ = w;
    have_last_ = true;
    last_stored_ = false;
    if (count_ % stride_ == 0) {
      items_.push_back(w);
      last_stored_ = true;
      if (static_cast<long>(items_.size()) >= capacity_) {
        last_stored_ = (items_.size() - 1) % 2 == 0;  // does the tail survive?
        std::size_t keep = 0;
        for (std::size_t j = 0; j < items_.size(); j += 2) items_[keep++] = std::move(items_[j]);
        items_.resize(keep);
        stride_ *= 2;
      }
    }
    ++count_;
  }

  std::vector<Eigen::VectorXd> take() {
    if (have_last_ && !last_stored_) items_.push_back(std::move(last_));
    return std::move(items_);
  }

 private:
  long capacity_;
  long stride_ = 1;
  long count_ = 0;
  bool have_last_ = false;
  bool last_stored_ = false;
  Eigen::VectorXd last_;
  std::vector<Eigen::VectorXd> items_;
};

// Recomputes every derived field from (p, eps, m, n) and the variant,
// honoring the overrides. Idempotent; called on entry to each solver.
SolverConfig finalize_schedule(Eigen::Index m, Eigen::Index n, SolverConfig cfg) {
  AlphaParams params = AlphaParams::from_p(cfg.p);
  if (m < n)
    fail(ErrorCode::dimension_error,
         "solver requires a tall matrix, got " + std::to_string(m) + " x " +
             std::to_string(n));
  if (!(cfg.eps > 0.0) || !(cfg.eps < 1.0))
    fail(ErrorCode::domain_error,
         "accuracy target must lie in (0, 1), got " + std::to_string(cfg.eps));
  if (!(cfg.max_iters_scale > 0.0))
    fail(ErrorCode::domain_error, "max_iters_scale must be positive");

  cfg.m = m;
  cfg.n = n;
  cfg.alpha = params.alpha;
  cfg.alpha_bar = params.alpha_bar;

  double a = params.alpha;
  if (cfg.eps_tilde_override > 0.0) {
    cfg.eps_tilde = cfg.eps_tilde_override;
  } else {
    double denom = 25.0 * static_cast<double>(m) *
                   (std::sqrt(static_cast<double>(n)) + a) * (a + 1.0 / a);
    cfg.eps_tilde = std::pow(a, 8) * std::pow(cfg.eps, 4) / std::pow(denom, 4);
  }
  cfg.beta = std::min(a * a, 1.0) / 1000.0;

  double t_raw;
  if (cfg.variant == Variant::one_step)
    t_raw = cfg.k_one_step * std::max(1.0 / (a * a * a), a * a) *
            std::log(static_cast<double>(m) * cfg.p / cfg.eps_tilde);
  else
    t_raw = cfg.k_meta * std::max(a, 1.0 / a) *
            std::log(static_cast<double>(m) / cfg.eps_tilde);
  cfg.t_total = std::max<long>(1, static_cast<long>(std::ceil(cfg.max_iters_scale * t_raw)));
  return cfg;
}

double sigma_early_stop_threshold(const SolverConfig& cfg) {
  return cfg.sigma_early_stop > 0.0 ? cfg.sigma_early_stop : std::sqrt(cfg.eps_tilde) / 4.0;
}

double certified_target(const SolverConfig& cfg) {
  return cfg.certified_residual_target > 0.0 ? cfg.certified_residual_target : cfg.eps / 2.0;
}

// w-hat_i = (sigma_i / w_i)^{1/alpha} from leverage scores already in hand.
Eigen::VectorXd candidate_from_sigma(const Eigen::VectorXd& sigma, const Eigen::VectorXd& w,
                                     const AlphaParams& params) {
  return ((sigma.array() / w.array()).log() / params.alpha).exp().matrix();
}

struct SolveContext {
  const DenseMatrix& a;
  SolverConfig cfg;
  AlphaParams params;
  CollectingSink sink;
  SnapshotStore snaps;
  Deadline deadline;
  Clock::time_point start = Clock::now();
  long iter_base = 0;  // trace iteration counter across phases

  SolveContext(const DenseMatrix& mat, const SolverConfig& scheduled)
      : a(mat),
        cfg(scheduled),
        params(AlphaParams::from_p(scheduled.p)),
        sink(scheduled.trace_capacity),
        snaps(scheduled.snapshot_capacity) {
    deadline.start = start;
    deadline.limit_seconds = scheduled.deadline_seconds;
  }
};

// Certification probe: relative fixed-point residual of the candidate
// extracted from (w, sigma). One factorization at the candidate.
double candidate_residual(SolveContext& ctx, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& sigma, Eigen::VectorXd& w_hat_out) {
  w_hat_out = candidate_from_sigma(sigma, w, ctx.params);
  WeightVector wbar{pow_one_plus_alpha(w_hat_out, ctx.params), Normalization::definition};
  return lewis_residual(ctx.a, wbar, ctx.cfg.p);
}

SolverReport finalize_report(SolveContext& ctx, const Eigen::VectorXd& w_hat,
                             IterationCounts counts, const std::string& stop_reason) {
  SolverReport rep;
  rep.weights_optimizer = WeightVector{w_hat, Normalization::optimizer};
  rep.weights_definition =
      to_definition_normalization(rep.weights_optimizer, ctx.params);
  rep.residuals = residual_report(ctx.a, w_hat, ctx.params);

  TraceRow row;
  row.iteration = ctx.iter_base;
  row.type = StepType::extract;
  row.objective = objective_value(ctx.a, w_hat, ctx.params);
  row.rho_max = rep.residuals.rho_max;
  row.optimality_residual = rep.residuals.optimality_residual;
  ctx.sink.emit(row);

  counts.trace_rows = ctx.sink.emitted();
  rep.iterations = counts;
  rep.trace = ctx.sink.take_rows();
  rep.max_objective_increase = ctx.sink.max_objective_increase();
  rep.max_rho_seen = ctx.sink.max_rho_seen();
  rep.rounded_iterates = ctx.snaps.take();
  rep.wall_ms = elapsed_ms(ctx.start);
  rep.stop_reason = stop_reason;
  rep.config = ctx.cfg;
  return rep;
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::parallel: return "parallel";
    case Variant::sequential: return "sequential";
    case Variant::one_step: return "one-step";
    case Variant::cohen_peng: return "cohen-peng";
  }
  fail(ErrorCode::domain_error, "unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "parallel") return Variant::parallel;
  if (name == "sequential") return Variant::sequential;
  if (name == "one-step" || name == "one_step") return Variant::one_step;
  if (name == "cohen-peng" || name == "cohen_peng") return Variant::cohen_peng;
  fail(ErrorCode::parse_error, "unknown variant '" + name +
                                   "' (expected parallel, sequential, one-step or cohen-peng)");
}

SolverConfig schedule(double p, Eigen::Index m, Eigen::Index n, double eps) {
  SolverConfig cfg;
  cfg.p = p;
  cfg.eps = eps;
  return finalize_schedule(m, n, cfg);
}

Eigen::VectorXd extract_weights(const DenseMatrix& a, const Eigen::VectorXd& w_r,
                                const AlphaParams& params) {
  check_positive_weights(w_r, "extract_weights");
  SpdState state(a, w_r);
  Eigen::VectorXd sigma = state.leverage(a);
  double rho_max =
      (sigma.array() / pow_one_plus_alpha(w_r, params).array()).maxCoeff();
  if (rho_max > (1.0 + params.alpha) * (1.0 + 1e-9))
    fail(ErrorCode::precondition_violated,
         "extract_weights requires a rounded input, got rho_max = " +
             std::to_string(rho_max) + " > 1 + alpha = " +
             std::to_string(1.0 + params.alpha));
  return candidate_from_sigma(sigma, w_r, params);
}

WeightVector to_definition_normalization(const WeightVector& w_hat, const AlphaParams& params) {
  if (w_hat.normalization != Normalization::optimizer)
    fail(ErrorCode::domain_error,
         "to_definition_normalization expects optimizer-normalized weights");
  return WeightVector{pow_one_plus_alpha(w_hat.values, params), Normalization::definition};
}

SolverReport lewis_meta(const DenseMatrix& a, const SolverConfig& base) {
  SolveContext ctx(a, finalize_schedule(a.rows(), a.cols(), base));
  const AlphaParams& params = ctx.params;
  const Eigen::Index m = a.rows();
  const bool sequential = ctx.cfg.variant == Variant::sequential;

  Eigen::VectorXd w = Eigen::VectorXd::Constant(
      m, static_cast<double>(a.cols()) / static_cast<double>(m));
  Eigen::VectorXd eta =
      Eigen::VectorXd::Constant(m, 1.0 / (3.0 * params.alpha_bar));
  double sigma_stop = sigma_early_stop_threshold(ctx.cfg);
  double target = certified_target(ctx.cfg);

  IterationCounts counts;
  Eigen::VectorXd w_hat;

  auto do_round = [&](Eigen::VectorXd current) {
    RoundOptions opts;
    opts.cap_scale = ctx.cfg.cap_scale;
    opts.factorize = ctx.cfg.factorize;
    opts.trace = &ctx.sink;
    opts.trace_iteration_base = ctx.iter_base;
    opts.threads = ctx.cfg.threads;
    RoundResult r = sequential ? round_sequential(a, std::move(current), params, opts)
                               : round_parallel(a, std::move(current), params, opts);
    ctx.iter_base += sequential ? r.coordinate_steps : r.passes + 1;
    counts.round_passes += r.passes;
    counts.coordinate_steps += r.coordinate_steps;
    ctx.snaps.add(r.w);
    return r;
  };

  for (long t = 0; t < ctx.cfg.t_total; ++t) {
    RoundResult r = do_round(std::move(w));
    w = std::move(r.w);

    double res = candidate_residual(ctx, w, r.sigma, w_hat);
    if (res <= target)
      return finalize_report(ctx, w_hat, counts,
                             "residual certified after " + std::to_string(t) +
                                 " descent iterations");
    Eigen::VectorXd w1pa = pow_one_plus_alpha(w, params);
    if ((r.sigma - w1pa).cwiseAbs().maxCoeff() <= sigma_stop)
      return finalize_report(ctx, w_hat, counts,
                             "sigma residual below the early-stop threshold");

    Eigen::VectorXd rho = (r.sigma.array() / w1pa.array()).matrix();
    descent_step_inplace(w, rho, eta, params);
    ++counts.descent_steps;
    ctx.deadline.check("lewis_meta");
  }

  // Budget exhausted: the contract still guarantees the returned weights come
  // from a rounded iterate, so round once more and extract.
  RoundResult r = do_round(std::move(w));
  double res = candidate_residual(ctx, r.w, r.sigma, w_hat);
  return finalize_report(ctx, w_hat, counts,
                         "iteration budget exhausted (" + std::to_string(ctx.cfg.t_total) +
                             " iterations, final residual " + std::to_string(res) + ")");
}

SolverReport lewis_one_step(const DenseMatrix& a, const SolverConfig& base) {
  SolverConfig scheduled = base;
  scheduled.variant = Variant::one_step;
  SolveContext ctx(a, finalize_schedule(a.rows(), a.cols(), scheduled));
  const AlphaParams& params = ctx.params;
  const Eigen::Index m = a.rows();

  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  SpdState state(a, w, ctx.cfg.factorize);
  Eigen::VectorXd sigma(m), w1pa(m), diff(m), u(m);
  Eigen::MatrixXd workspace;

  const double full_step = 1.0 / (3.0 * params.alpha_bar);
  const double damped_step = ctx.cfg.beta / (3.0 * params.alpha_bar);
  const double invariant_bound = (1.0 + params.alpha) * (1.0 + 1e-9);
  const double sigma_stop = sigma_early_stop_threshold(ctx.cfg);
  const double target = certified_target(ctx.cfg);
  const long check_interval = std::max<long>(1, ctx.cfg.one_step_check_interval);

  IterationCounts counts;
  Eigen::VectorXd w_hat;

  for (long t = 0; t < ctx.cfg.t_total; ++t) {
    state.leverage_into(a, sigma, &workspace, ctx.cfg.threads);
    w1pa = (w.array().log() * (1.0 + params.alpha)).exp().matrix();
    // u_i = (rho_i - 1)/(rho_i + 1) from sigma and w^{1+alpha} directly: one
    // division pass serves the invariant check, the residual, the step-size
    // split (u >= 0 iff rho >= 1) and the update.
    diff = sigma - w1pa;
    u = (diff.array() / (sigma + w1pa).array()).matrix();
    double u_max = u.maxCoeff();
    double rho_max = (1.0 + u_max) / (1.0 - u_max);
    if (rho_max > invariant_bound)
      fail(ErrorCode::invariant_violated,
           "iterate " + std::to_string(t) + " broke the rounding condition: rho_max = " +
               std::to_string(rho_max) + " > (1+alpha)(1+1e-9) = " +
               std::to_string(invariant_bound));

    TraceRow row;
    row.iteration = ctx.iter_base++;
    row.type = t == 0 ? StepType::init : StepType::descent;
    row.objective = -state.log_det() + w1pa.sum() / (1.0 + params.alpha);
    row.rho_max = rho_max;
    row.optimality_residual = diff.cwiseAbs().maxCoeff();
    ctx.sink.emit(row);
    ctx.snaps.add(w);

    if (t % check_interval == 0 || row.optimality_residual <= sigma_stop) {
      double res = candidate_residual(ctx, w, sigma, w_hat);
      if (res <= target)
        return finalize_report(ctx, w_hat, counts,
                               "residual certified after " + std::to_string(t) +
                                   " descent iterations");
      if (row.optimality_residual <= sigma_stop)
        return finalize_report(ctx, w_hat, counts,
                               "sigma residual below the early-stop threshold");
    }

    w.array() *=
        1.0 + ((u.array() >= 0.0).cast<double>() * (full_step - damped_step) + damped_step) *
                  u.array();
    state.set_weights(a, w);
    ++counts.descent_steps;
    if ((t & 63) == 0) ctx.deadline.check("lewis_one_step");
  }

  state.leverage_into(a, sigma, &workspace, ctx.cfg.threads);
  double res = candidate_residual(ctx, w, sigma, w_hat);
  return finalize_report(ctx, w_hat, counts,
                         "iteration budget exhausted (" + std::to_string(ctx.cfg.t_total) +
                             " iterations, final residual " + std::to_string(res) + ")");
}

SolverReport cohen_peng_fixed_point(const DenseMatrix& a, const SolverConfig& base) {
  if (!(base.p > 2.0 && base.p < 4.0))
    fail(ErrorCode::unsupported_p,
         "the fixed-point baseline contracts only for p in (2, 4), got p = " +
             std::to_string(base.p));
  SolverConfig scheduled = base;
  scheduled.variant = Variant::cohen_peng;
  SolveContext ctx(a, finalize_schedule(a.rows(), a.cols(), scheduled));
  const AlphaParams& params = ctx.params;
  const Eigen::Index m = a.rows();
  const double p = ctx.cfg.p;

  // Contraction rate |p/2 - 1| < 1 gives log log m + log(1/eps) iterations up
  // to a rate-dependent constant.
  double rate = 1.0 - std::abs(p / 2.0 - 1.0);
  double loglog_m = std::log(
      std::max(std::log(static_cast<double>(std::max<Eigen::Index>(m, 3))), 1.0));
  long cap = static_cast<long>(std::ceil(
                 ctx.cfg.cap_scale * (loglog_m + std::log(1.0 / ctx.cfg.eps)) / rate)) +
             20;
  ctx.cfg.t_total = cap;

  Eigen::VectorXd wbar = Eigen::VectorXd::Constant(
      m, static_cast<double>(a.cols()) / static_cast<double>(m));
  Eigen::VectorXd v(m), q(m), sigma(m);
  Eigen::MatrixXd workspace;

  IterationCounts counts;
  for (long t = 0; t < cap; ++t) {
    v = (wbar.array().log() * (1.0 - 2.0 / p)).exp().matrix();
    SpdState state(a, v, ctx.cfg.factorize);
    state.leverage_into(a, sigma, &workspace, ctx.cfg.threads);
    q = (sigma.array() / v.array()).matrix();
    // rho(v) = q / wbar^{2/p}: its distance from 1 is the relative
    // fixed-point residual of wbar.
    Eigen::VectorXd ratio =
        (q.array() / (wbar.array().log() * (2.0 / p)).exp()).matrix();
    double residual = (ratio.array() - 1.0).abs().maxCoeff();

    TraceRow row;
    row.iteration = ctx.iter_base++;
    row.type = StepType::fixed_point;
    row.objective =
        -state.log_det() +
        (v.array().log() * (1.0 + params.alpha)).exp().sum() / (1.0 + params.alpha);
    row.rho_max = ratio.maxCoeff();
    row.optimality_residual =
        (sigma.array() - (v.array().log() * (1.0 + params.alpha)).exp()).abs().maxCoeff();
    ctx.sink.emit(row);
    ++counts.fixed_point_steps;

    if (residual <= ctx.cfg.eps) {
      ctx.snaps.add(v);
      return finalize_report(ctx, v, counts,
                             "fixed-point residual below target after " +
                                 std::to_string(t + 1) + " iterations");
    }
    wbar = (q.array().log() * (p / 2.0)).exp().matrix();
    ctx.deadline.check("cohen_peng_fixed_point");
  }

  v = (wbar.array().log() * (1.0 - 2.0 / p)).exp().matrix();
  return finalize_report(ctx, v, counts,
                         "iteration budget exhausted (" + std::to_string(cap) +
                             " fixed-point iterations)");
}

SolverReport solve(const DenseMatrix& a, const SolverConfig& cfg) {
  switch (cfg.variant) {
    case Variant::parallel:
    case Variant::sequential:
      return lewis_meta(a, cfg);
    case Variant::one_step:
      return lewis_one_step(a, cfg);
    case Variant::cohen_peng:
      return cohen_peng_fixed_point(a, cfg);
  }
  fail(ErrorCode::domain_error, "unknown variant");
}

}  // namespace lewis
