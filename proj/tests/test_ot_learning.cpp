#include <doctest.h>

#include <cmath>

#include "saddle/diagnostics.hpp"
#include "saddle/ot/learning.hpp"
#include "saddle/solvers.hpp"

using namespace saddle;

namespace {
Mat random_cloud(int n, int dim, Rng& rng, double scale = 1.0) {
  Mat c(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) c(i, d) = scale * rng.uniform();
  return c;
}

SemiDualMapProblem small_problem(Rng& rng, int m = 6, int n = 4,
                                 MapModel model = MapModel::affine(2, 2)) {
  return SemiDualMapProblem(random_cloud(m, 2, rng), random_cloud(n, 2, rng), model,
                            0.1, 3);
}
} // namespace

TEST_CASE("map models: directional derivatives match finite differences") {
  Rng rng(1);
  for (const MapModel model :
       {MapModel::affine(2, 2), MapModel::perceptron(2, 2, 16)}) {
    Vec theta = model.init_params(5);
    theta += 0.2 * rng.gaussian_vec(model.param_dim());
    const Vec y = rng.gaussian_vec(2);
    const Vec u = rng.gaussian_vec(2);

    // <u, f(theta)> as scalar function of theta; gradient is vjp(y, u)
    Vec analytic = Vec::Zero(model.param_dim());
    model.vjp(theta, y, u, analytic);
    const double err = finite_diff_check(
        [&](const Vec& t) { return u.dot(model.forward(t, y)); }, theta, analytic);
    CHECK(err <= 1e-7);
  }
}

TEST_CASE("map gradient through the mapped-target semi-dual matches finite differences") {
  Rng rng(2);
  const Mat y_inputs = random_cloud(4, 2, rng);
  const Vec x = rng.gaussian_vec(2);
  const Vec nu = Vec::Constant(4, 0.25);
  const Vec v = 0.1 * rng.gaussian_vec(4);
  const double eps = 0.2;

  for (const MapModel model :
       {MapModel::affine(2, 2), MapModel::perceptron(2, 2, 8)}) {
    Vec theta = model.init_params(6);
    theta += 0.1 * rng.gaussian_vec(model.param_dim());
    const Vec analytic = grad_theta_h_mapped(model, theta, x, y_inputs, nu, v, eps);
    const double err = finite_diff_check(
        [&](const Vec& t) { return h_value_mapped(model, t, x, y_inputs, nu, v, eps); },
        theta, analytic);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("map gradient through the pushforward semi-dual matches finite differences") {
  Rng rng(3);
  const Mat targets = random_cloud(5, 2, rng);
  const Vec z = rng.gaussian_vec(2);
  const Vec nu = Vec::Constant(5, 0.2);
  const Vec v = 0.1 * rng.gaussian_vec(5);
  const double eps = 0.2;

  for (const MapModel model :
       {MapModel::affine(2, 2), MapModel::perceptron(2, 2, 8)}) {
    Vec theta = model.init_params(7);
    theta += 0.1 * rng.gaussian_vec(model.param_dim());
    const Vec analytic = grad_theta_h_pushforward(model, theta, z, targets, nu, v, eps);
    const double err = finite_diff_check(
        [&](const Vec& t) {
          return h_value_pushforward(model, t, z, targets, nu, v, eps);
        },
        theta, analytic);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("single target: the map gradient is the plain cost gradient") {
  Rng rng(4);
  const Mat y_inputs = random_cloud(1, 2, rng);
  const Vec x = rng.gaussian_vec(2);
  const Vec nu = Vec::Ones(1);
  const Vec v = Vec::Zero(1);
  const MapModel model = MapModel::affine(2, 2);
  const Vec theta = model.init_params();

  const Vec g = grad_theta_h_mapped(model, theta, x, y_inputs, nu, v, 0.3);
  Vec expect = Vec::Zero(model.param_dim());
  const Vec mapped = model.forward(theta, y_inputs.row(0).transpose());
  model.vjp(theta, y_inputs.row(0).transpose(), 2.0 * (mapped - x), expect);
  CHECK((g - expect).norm() <= 1e-14 * (1.0 + expect.norm()));
}

TEST_CASE("softmax weights stay strictly positive at fixed regularization") {
  Rng rng(5);
  const Vec cost = 5.0 * rng.gaussian_vec(6).cwiseAbs();
  const Vec nu = Vec::Constant(6, 1.0 / 6.0);
  const Vec w = semidual_weights(cost, nu, Vec::Zero(6), 0.05);
  CHECK(w.minCoeff() > 0.0);
}

TEST_CASE("oracle full-batch gradients match finite differences") {
  Rng rng(6);
  const auto prob = small_problem(rng);
  Vec theta = prob.initial_theta() + 0.1 * rng.gaussian_vec(prob.theta_dim());
  Vec v = prob.project_v(0.05 * rng.gaussian_vec(prob.v_dim()));
  Vec g_theta, g_v;
  prob.exact_grad(theta, v, g_theta, g_v);

  const double err_theta = finite_diff_check(
      [&](const Vec& t) { return prob.exact_value(t, v); }, theta, g_theta);
  CHECK(err_theta <= 1e-6);
  const double err_v = finite_diff_check(
      [&](const Vec& vv) { return prob.exact_value(theta, vv); }, v, g_v);
  CHECK(err_v <= 1e-6);
}

TEST_CASE("randomized solver respects the frozen dual ball") {
  Rng rng(7);
  const auto prob = small_problem(rng, 10, 5);
  SolverConfig config;
  config.algorithm = Algorithm::Rsgda;
  StepSchedule::Params params;
  params.p = 0.4;
  params.custom_alpha = 0.02;
  params.custom_eta = 0.05;  // eps = 0.1: admissible ascent steps are <= eps/2
  params.strict = false;
  config.schedule = StepSchedule(Regime::Custom, prob.smoothness(), params);
  config.max_iters = 400;
  const RunSummary summary = run(config, prob);
  CHECK(summary.final_state.v.norm() <= prob.ball_radius() + 1e-12);
  CHECK_FALSE(summary.diverged);
}

TEST_CASE("learning loop: zero subroutine iterations leave the potentials alone") {
  Rng rng(8);
  const auto prob = small_problem(rng);
  auto state = sinkhorn_learning_init(prob);
  const Vec v_before = state.v;
  RngStreams streams(1);
  sinkhorn_learning_step(state, prob, 0, 0.05, 4, streams);
  CHECK((state.v - v_before).norm() == 0.0);
  CHECK(state.steps == 1);
  CHECK(state.v_sign == 0);
}

TEST_CASE("learning loop: recovery sign is self-checked once and logged") {
  Rng rng(9);
  const auto prob = small_problem(rng, 8, 5);
  auto state = sinkhorn_learning_init(prob);
  RngStreams streams(2);
  std::string log;
  sinkhorn_learning_step(state, prob, 3, 0.05, 8, streams, &log);
  CHECK(state.v_sign != 0);
  // for this scaling normalization the semi-dual wants +eps log b
  CHECK(state.v_sign == 1);
  CHECK(state.sign_flipped);
  CHECK(log.find("flipping") != std::string::npos);
}

TEST_CASE("learning loop: full batch and many subroutine iterations reach the semi-dual maximum") {
  Rng rng(10);
  const Mat x = random_cloud(12, 2, rng);
  const Mat y = random_cloud(5, 2, rng);
  const SemiDualMapProblem prob(x, y, MapModel::affine(2, 2), 0.1, 3);

  auto state = sinkhorn_learning_init(prob);
  RngStreams streams(3);
  sinkhorn_learning_step(state, prob, 2000, 0.0, 12, streams);

  // theta untouched (alpha = 0): compare E[h] at the recovered v against the
  // converged scaling value on the same clouds
  const double dual_value = prob.exact_value(state.theta, state.v);
  const Mat cost = cost_matrix_sqeuclidean(x, prob.mapped_cloud(state.theta));
  const double plan_value = sinkhorn_to_tolerance(cost, 0.1, 1e-12).value(0.1);
  CHECK(std::abs(dual_value - plan_value) <= 1e-6);
}

TEST_CASE("learning loop: minibatch descent reduces the transport loss") {
  Rng rng(11);
  const Mat x = random_cloud(64, 2, rng);
  Mat y = random_cloud(16, 2, rng);
  y.array() += 1.5;  // displaced target inputs: identity init is far from optimal
  const SemiDualMapProblem prob(x, y, MapModel::affine(2, 2), 0.1, 3);

  auto state = sinkhorn_learning_init(prob);
  RngStreams streams(4);
  const double loss0 = prob.transport_loss(state.theta);
  for (int k = 0; k < 300; ++k)
    sinkhorn_learning_step(state, prob, 1, 0.05, 16, streams);
  const double loss1 = prob.transport_loss(state.theta);
  CHECK(loss1 < loss0);
}
