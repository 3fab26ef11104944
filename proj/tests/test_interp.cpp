#include <doctest.h>

#include "saddle/problems/interpolating.hpp"

using namespace saddle;

namespace {
InterpolatingFiniteSum make_problem(double sigma_sq = 2.0, int components = 10) {
  auto base = QuadraticSaddle::preset(QuadraticSaddle::Preset::KappaFive, 0.0, 0.0);
  return InterpolatingFiniteSum::make(std::move(base), components, sigma_sq, 17);
}
} // namespace

TEST_CASE("every component's ascent gradient vanishes at the shared maximizer") {
  const auto prob = make_problem();
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec theta = rng.gaussian_vec(prob.theta_dim());
    const Vec vstar = prob.exact_vstar(theta);
    Vec g_theta, g_v;
    for (int i = 0; i < prob.n_components(); ++i) {
      prob.component_grad(i, theta, vstar, g_theta, g_v);
      CHECK(g_v.norm() <= 1e-12);
    }
  }
}

TEST_CASE("component average equals the full gradient") {
  const auto prob = make_problem();
  Rng rng(2);
  const Vec theta = rng.gaussian_vec(prob.theta_dim());
  const Vec v = rng.gaussian_vec(prob.v_dim());
  Vec sum_t = Vec::Zero(prob.theta_dim());
  Vec sum_v = Vec::Zero(prob.v_dim());
  Vec g_theta, g_v;
  for (int i = 0; i < prob.n_components(); ++i) {
    prob.component_grad(i, theta, v, g_theta, g_v);
    sum_t += g_theta;
    sum_v += g_v;
  }
  sum_t /= prob.n_components();
  sum_v /= prob.n_components();
  Vec e_theta, e_v;
  prob.exact_grad(theta, v, e_theta, e_v);
  CHECK((sum_t - e_theta).norm() <= 1e-12 * (1.0 + e_theta.norm()));
  CHECK((sum_v - e_v).norm() <= 1e-12 * (1.0 + e_v.norm()));
}

TEST_CASE("descent gradients differ across components") {
  const auto prob = make_problem(2.0);
  const Vec theta = Vec::Ones(prob.theta_dim());
  const Vec v = Vec::Ones(prob.v_dim());
  Vec g_theta, g_v, mean = Vec::Zero(prob.theta_dim());
  std::vector<Vec> grads;
  for (int i = 0; i < prob.n_components(); ++i) {
    prob.component_grad(i, theta, v, g_theta, g_v);
    grads.push_back(g_theta);
    mean += g_theta;
  }
  mean /= prob.n_components();
  double var = 0.0;
  for (const Vec& g : grads) var += (g - mean).squaredNorm();
  var /= prob.n_components();
  CHECK(var == doctest::Approx(2.0).epsilon(1e-10));  // shifts scaled to sigma_sq
  CHECK(prob.smoothness().sigma_sq == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(prob.smoothness().sigma_tilde_sq == 0.0);
}

TEST_CASE("exact oracles delegate to the base quadratic") {
  const auto prob = make_problem();
  Rng rng(3);
  const Vec theta = rng.gaussian_vec(prob.theta_dim());
  CHECK(prob.exact_phi(theta) == prob.base().exact_phi(theta));
  CHECK(prob.min_phi() == 0.0);
  CHECK((prob.exact_vstar(theta) - prob.base().exact_vstar(theta)).norm() == 0.0);
}

TEST_CASE("shifts must average to zero") {
  auto base = QuadraticSaddle::preset(QuadraticSaddle::Preset::KappaFive, 0.0, 0.0);
  Mat shifts = Mat::Ones(base.theta_dim(), 4);
  CHECK_THROWS_AS(InterpolatingFiniteSum(std::move(base), std::move(shifts)), SpecError);
}
