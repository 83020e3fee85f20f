#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "lewis/linalg.hpp"
#include "lewis/objective.hpp"
#include "lewis/steps.hpp"
#include "lewis/trace.hpp"
#include "lewis/types.hpp"
#include "test_util.hpp"

using lewis::AlphaParams;
using lewis::DenseMatrix;
using lewis::Error;
using lewis::ErrorCode;
using lewis::RhoVector;
using lewis::testing::Rng;

namespace {

std::vector<Eigen::Index> all_indices(Eigen::Index m) {
  std::vector<Eigen::Index> c(static_cast<size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) c[static_cast<size_t>(i)] = i;
  return c;
}

// Collects every emitted row; tests inspect specific step types.
struct RecordingSink : lewis::TraceSink {
  std::vector<lewis::TraceRow> rows;
  void emit(const lewis::TraceRow& row) override { rows.push_back(row); }
};

}  // namespace

TEST_CASE("descent leaves fixed points unchanged") {
  AlphaParams params = AlphaParams::from_p(4.0);
  Rng rng(5000);
  Eigen::VectorXd w = lewis::testing::random_weights(rng, 4, 0.5, 2.0);
  RhoVector r;
  r.values = Eigen::VectorXd::Ones(4);
  r.max = 1.0;
  auto c = all_indices(4);
  Eigen::VectorXd eta = (1.0 / 3.0) * Eigen::VectorXd::Ones(4);
  Eigen::VectorXd out = lewis::descent_step(w, r, c, eta, params);
  CHECK((out - w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("descent frozen example on duplicated-row instance") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix dup = lewis::testing::duplicated_row_instance();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  RhoVector r = lewis::rho(dup, w, params);
  auto c = all_indices(2);
  Eigen::VectorXd eta = (1.0 / 3.0) * Eigen::VectorXd::Ones(2);
  Eigen::VectorXd out = lewis::descent_step(w, r, c, eta, params);
  CHECK(out[0] == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("descent touches only the masked coordinates") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix dup = lewis::testing::duplicated_row_instance();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  RhoVector r = lewis::rho(dup, w, params);
  std::vector<Eigen::Index> c = {0};
  Eigen::VectorXd eta = (1.0 / 3.0) * Eigen::VectorXd::Ones(2);
  Eigen::VectorXd out = lewis::descent_step(w, r, c, eta, params);
  CHECK(out[0] == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
  CHECK(out[1] == 1.0);  // bitwise untouched
}

TEST_CASE("descent validates step sizes and indices") {
  AlphaParams params = AlphaParams::from_p(4.0);  // 1/(3 alpha_bar) = 1/3
  Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  RhoVector r;
  r.values = Eigen::VectorXd::Ones(2);
  r.max = 1.0;
  auto c = all_indices(2);

  Eigen::VectorXd too_big = 0.34 * Eigen::VectorXd::Ones(2);
  bool threw = false;
  try {
    lewis::descent_step(w, r, c, too_big, params);
  } catch (const Error& e) {
    threw = true;
    CHECK(e.code() == ErrorCode::invalid_step_size);
  }
  CHECK(threw);

  Eigen::VectorXd negative = Eigen::VectorXd::Ones(2);
  negative[0] = -0.01;
  CHECK_THROWS_AS(lewis::descent_step(w, r, c, negative, params), Error);

  std::vector<Eigen::Index> bad = {2};
  Eigen::VectorXd eta = 0.1 * Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(lewis::descent_step(w, r, bad, eta, params), Error);
}

TEST_CASE("descent keeps weights positive and decreases objective") {
  for (int trial = 0; trial < 110; ++trial) {
    Rng rng(5100 + trial);
    Eigen::Index n = rng.integer(1, 4);
    Eigen::Index m = n + rng.integer(1, 10);
    DenseMatrix a(lewis::testing::gaussian_matrix(rng, m, n));
    Eigen::VectorXd w = lewis::testing::random_weights(rng, m, 0.05, 3.0);
    AlphaParams params = AlphaParams::from_p(rng.range(2.2, 10.0));
    RhoVector r = lewis::rho(a, w, params);
    Eigen::VectorXd eta(m);
    double cap = 1.0 / (3.0 * params.alpha_bar);
    for (Eigen::Index i = 0; i < m; ++i) eta[i] = rng.range(0.0, cap);

    auto c = all_indices(m);
    Eigen::VectorXd out = lewis::descent_step(w, r, c, eta, params);
    CHECK(out.minCoeff() > 0.0);

    // Guaranteed progress: F(w+) <= F(w) - sum (eta_i/2) w^{1+a} (rho-1)^2/(rho+1).
    Eigen::VectorXd w1pa = lewis::pow_one_plus_alpha(w, params);
    double promised = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double d = r.values[i] - 1.0;
      promised += 0.5 * eta[i] * w1pa[i] * d * d / (r.values[i] + 1.0);
    }
    double before = lewis::objective_value(a, w, params);
    double after = lewis::objective_value(a, out, params);
    CHECK(after <= before - promised + 1e-9);
  }
}

TEST_CASE("rounding condition boundary cases") {
  AlphaParams params = AlphaParams::from_p(4.0);  // 1 + alpha = 2
  CHECK(lewis::rounding_condition(1.0, params));
  CHECK(lewis::rounding_condition(2.0, params));  // boundary inclusive
  CHECK_FALSE(lewis::rounding_condition(2.5, params));
  CHECK(lewis::rounding_condition(2.0 * (1.0 + 0.5e-12), params));  // inside the slack
  CHECK_FALSE(lewis::rounding_condition(2.0 * (1.0 + 1e-11), params));
}

TEST_CASE("coordinate delta closed form and newton paths") {
  AlphaParams p4 = AlphaParams::from_p(4.0);
  CHECK(lewis::solve_coordinate_delta(1.0, 0.7, p4) == 0.0);

  // alpha = 1, sigma = 0.5, rho = 2: quadratic root (-1.5 + sqrt(4.25))/1.
  double expect = -1.5 + std::sqrt(4.25);
  CHECK(lewis::solve_coordinate_delta(2.0, 0.5, p4) ==
        doctest::Approx(expect).epsilon(1e-12));

  // alpha = 0.5 (p = 6): compare against an independent bisection oracle.
  AlphaParams p6 = AlphaParams::from_p(6.0);
  double sigma = 0.9, rho = 3.0;
  double lo = 0.0, hi = std::pow(rho, 1.0 / p6.alpha) - 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double g = (1.0 + mid * sigma) * std::pow(1.0 + mid, p6.alpha);
    (g < rho ? lo : hi) = mid;
  }
  double oracle = 0.5 * (lo + hi);
  double delta = lewis::solve_coordinate_delta(rho, sigma, p6);
  CHECK(delta == doctest::Approx(oracle).epsilon(1e-11));
  CHECK(std::abs((1.0 + delta * sigma) * std::pow(1.0 + delta, p6.alpha) - rho) <= 1e-12 * rho);
}

TEST_CASE("coordinate delta equation residual across random inputs") {
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(5200 + trial);
    AlphaParams params = AlphaParams::from_p(rng.range(2.05, 20.0));
    double sigma = rng.range(1e-6, 1.0);
    double rho = 1.0 + rng.range(0.0, 50.0);
    double delta = lewis::solve_coordinate_delta(rho, sigma, params);
    CHECK(delta >= 0.0);
    double g = (1.0 + delta * sigma) * std::pow(1.0 + delta, params.alpha);
    CHECK(std::abs(g - rho) <= 1e-12 * rho);
  }
}

TEST_CASE("coordinate objective delta frozen examples") {
  AlphaParams params = AlphaParams::from_p(4.0);
  CHECK(lewis::coordinate_objective_delta(1.3, 0.4, 0.0, params) == 0.0);

  // Duplicated-row instance, i = 1, delta = 1: compare to a recomputation.
  DenseMatrix dup = lewis::testing::duplicated_row_instance();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(2);
  double sigma = lewis::leverage_scores(dup, w)[0];
  double closed = lewis::coordinate_objective_delta(w[0], sigma, 1.0, params);
  Eigen::VectorXd w_after = w;
  w_after[0] *= 2.0;
  double recomputed =
      lewis::objective_value(dup, w_after, params) - lewis::objective_value(dup, w, params);
  CHECK(closed == doctest::Approx(recomputed).epsilon(1e-10));

  bool threw = false;
  try {
    lewis::coordinate_objective_delta(1.0, 0.8, -2.0, params);  // 1 + delta*sigma < 0
  } catch (const Error& e) {
    threw = true;
    CHECK(e.code() == ErrorCode::domain_error);
  }
  CHECK(threw);
}

TEST_CASE("solved coordinate delta strictly decreases the objective") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(5300 + trial);
    Eigen::Index n = rng.integer(1, 3);
    Eigen::Index m = n + rng.integer(1, 6);
    DenseMatrix a(lewis::testing::gaussian_matrix(rng, m, n));
    // Small weights push rho above 1.
    Eigen::VectorXd w = lewis::testing::random_weights(rng, m, 0.01, 0.3);
    AlphaParams params = AlphaParams::from_p(rng.range(2.5, 9.0));
    RhoVector r = lewis::rho(a, w, params);
    if (r.max <= 1.0 + 1e-9) continue;
    Eigen::Index i = r.argmax;
    double sigma = lewis::leverage_scores(a, w)[i];
    double delta = lewis::solve_coordinate_delta(r.max, sigma, params);
    double change = lewis::coordinate_objective_delta(w[i], sigma, delta, params);
    CHECK(change < 0.0);

    Eigen::VectorXd w_after = w;
    w_after[i] *= (1.0 + delta);
    double recomputed =
        lewis::objective_value(a, w_after, params) - lewis::objective_value(a, w, params);
    CHECK(change == doctest::Approx(recomputed).epsilon(1e-8));
  }
}

TEST_CASE("parallel rounding is the identity on rounded input") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix tri = lewis::testing::triangle_instance();
  Eigen::VectorXd w = (2.0 / 3.0) * Eigen::VectorXd::Ones(3);  // rho = 1.5 <= 2
  lewis::RoundResult res = lewis::round_parallel(tri, w, params);
  CHECK((res.w - w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.passes == 0);
}

TEST_CASE("parallel rounding postconditions on small weights") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix tri = lewis::testing::triangle_instance();
  Eigen::VectorXd w = 0.01 * Eigen::VectorXd::Ones(3);
  double f_before = lewis::objective_value(tri, w, params);

  lewis::RoundResult res = lewis::round_parallel(tri, w, params);
  RhoVector r = lewis::rho(tri, res.w, params);
  CHECK(r.max <= (1.0 + params.alpha) * (1.0 + 1e-12));
  CHECK(lewis::objective_value(tri, res.w, params) < f_before);
  CHECK((res.w.array() >= w.array()).all());
  CHECK(res.passes >= 1);
  // Returned leverage scores match a fresh evaluation.
  Eigen::VectorXd sigma = lewis::leverage_scores(tri, res.w);
  CHECK((res.sigma - sigma).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("parallel rounding contracts rho max per pass") {
  for (double p : {4.0, 8.0, 3.0}) {
    AlphaParams params = AlphaParams::from_p(p);
    Rng rng(5400 + static_cast<int>(p));
    DenseMatrix a(lewis::testing::gaussian_matrix(rng, 12, 3));
    Eigen::VectorXd w = 0.02 * Eigen::VectorXd::Ones(12);

    RecordingSink sink;
    lewis::RoundOptions opts;
    opts.trace = &sink;
    lewis::RoundResult res = lewis::round_parallel(a, w, params, opts);

    double alpha = params.alpha;
    double factor =
        std::pow(1.0 + alpha / (3.0 * params.alpha_bar * (2.0 + alpha)), alpha);
    std::vector<double> rho_path;
    for (const auto& row : sink.rows)
      if (row.type == lewis::StepType::round_pass) rho_path.push_back(row.rho_max);
    REQUIRE(rho_path.size() >= 2);
    for (size_t k = 0; k + 1 < rho_path.size(); ++k) {
      if (rho_path[k + 1] <= (1.0 + alpha) * (1.0 + 1e-12)) continue;  // post-exit row
      CHECK(rho_path[k + 1] <= rho_path[k] / factor * (1.0 + 1e-9));
    }

    // Monotone objective along the recorded passes.
    for (size_t k = 0; k + 1 < rho_path.size(); ++k)
      CHECK(sink.rows[k + 1].objective <= sink.rows[k].objective + 1e-9);
    RhoVector r = lewis::rho(a, res.w, params);
    CHECK(lewis::rounding_condition(r.max, params));
  }
}

TEST_CASE("sequential rounding is the identity when no coordinate violates") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix dup = lewis::testing::duplicated_row_instance();
  Eigen::VectorXd w = 1.2 * Eigen::VectorXd::Ones(2);  // rho = (1/2.4)/1.2^2 < 1
  lewis::RoundResult res = lewis::round_sequential(dup, w, params);
  CHECK((res.w - w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.coordinate_steps == 0);
}

TEST_CASE("sequential rounding drives processed coordinates to one") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix tri = lewis::testing::triangle_instance();
  Eigen::VectorXd w = 0.1 * Eigen::VectorXd::Ones(3);
  double f_before = lewis::objective_value(tri, w, params);

  lewis::RoundResult res = lewis::round_sequential(tri, w, params);
  RhoVector r = lewis::rho(tri, res.w, params);
  CHECK(r.max <= 1.0 + 1e-8);  // every coordinate was processed here
  CHECK(lewis::objective_value(tri, res.w, params) <= f_before);
  CHECK(res.coordinate_steps >= 3);
  Eigen::VectorXd sigma = lewis::leverage_scores(tri, res.w);
  CHECK((res.sigma - sigma).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("sequential rounding changes only the violating coordinate") {
  // For A = I_2 the leverage scores are identically 1, so rho_i = 1/w_i^{1+a}
  // decouples: w = (0.5, 2.0) has exactly one violation (rho = (4, 0.25)).
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix eye(Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd w(2);
  w << 0.5, 2.0;
  RhoVector r1 = lewis::rho(eye, w, params);
  REQUIRE(r1.values[0] == doctest::Approx(4.0).epsilon(1e-12));
  REQUIRE(r1.values[1] < 1.0 - 1e-14);

  lewis::RoundResult res = lewis::round_sequential(eye, w, params);
  CHECK(res.w[1] == w[1]);  // bitwise identical
  CHECK(res.w[0] > w[0]);
  // The coordinate solve lands on rho_0 = 1 exactly: (1+delta)^2 = 4.
  CHECK(res.w[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lewis::rho(eye, res.w, params).values[0] <= 1.0 + 1e-9);
  CHECK(res.coordinate_steps == 1);
}

TEST_CASE("sequential rounding never raises untouched coordinates") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(5600 + trial);
    Eigen::Index n = rng.integer(1, 3);
    Eigen::Index m = n + rng.integer(2, 8);
    DenseMatrix a(lewis::testing::gaussian_matrix(rng, m, n));
    Eigen::VectorXd w = lewis::testing::random_weights(rng, m, 0.05, 0.5);
    AlphaParams params = AlphaParams::from_p(rng.range(3.0, 8.0));

    RhoVector before = lewis::rho(a, w, params);
    lewis::RoundResult res = lewis::round_sequential(a, w, params);
    RhoVector after = lewis::rho(a, res.w, params);
    CHECK(after.max <= (1.0 + params.alpha) * (1.0 + 1e-12));
    for (Eigen::Index i = 0; i < m; ++i) {
      if (res.w[i] == w[i] && before.values[i] < 1.0 - 1e-14)
        CHECK(after.values[i] <= before.values[i] * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("rounding cap turns non-termination into an error") {
  AlphaParams params = AlphaParams::from_p(4.0);
  DenseMatrix tri = lewis::testing::triangle_instance();
  Eigen::VectorXd w = 1e-4 * Eigen::VectorXd::Ones(3);
  lewis::RoundOptions opts;
  opts.cap_scale = 1e-8;  // force the cap to zero passes
  bool threw = false;
  try {
    lewis::round_parallel(tri, w, params, opts);
  } catch (const Error& e) {
    threw = true;
    CHECK(e.code() == ErrorCode::iteration_cap_exceeded);
  }
  CHECK(threw);
}
