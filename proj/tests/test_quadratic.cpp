#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "saddle/problems/quadratic.hpp"

using namespace saddle;

namespace {
Mat scalar_mat(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

QuadraticSaddle preset5(double sd_theta = 0.0, double sd_v = 0.0) {
  return QuadraticSaddle::preset(QuadraticSaddle::Preset::KappaFive, sd_theta, sd_v);
}
} // namespace

TEST_CASE("scalar instance: closed-form phi, grad phi and v*") {
  // Q = -1, B = 2, mu = 2: M = -1 + 4/2 = 1
  QuadraticSaddle prob(scalar_mat(-1.0), scalar_mat(2.0), 2.0, 0.0, 0.0);
  Vec theta(1), v(1);
  theta << 1.0;
  CHECK(prob.exact_vstar(theta)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(prob.exact_phi(theta) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prob.exact_grad_phi(theta)[0] == doctest::Approx(1.0).epsilon(1e-15));

  theta << 0.0;
  CHECK(prob.exact_vstar(theta)[0] == 0.0);
  CHECK(prob.exact_phi(theta) == 0.0);
  CHECK(prob.exact_grad_phi(theta)[0] == 0.0);
}

TEST_CASE("construction rejects broken instances") {
  // Q positive definite: not a saddle
  CHECK_THROWS_AS(QuadraticSaddle(scalar_mat(1.0), scalar_mat(1.0), 1.0, 0.0, 0.0),
                  SpecError);
  // decoupled indefinite Q leaves phi unbounded below (M not psd)
  CHECK_THROWS_AS(QuadraticSaddle(scalar_mat(-1.0), scalar_mat(0.0), 1.0, 0.0, 0.0),
                  SpecError);
}

TEST_CASE("phi(theta) - F(theta, v) equals mu/2 ||v - v*||^2 exactly") {
  const auto prob = preset5();
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec theta = rng.gaussian_vec(prob.theta_dim());
    const Vec v = rng.gaussian_vec(prob.v_dim());
    const double lhs = prob.exact_phi(theta) - prob.exact_value(theta, v);
    const double rhs =
        0.5 * prob.mu() * (v - prob.exact_vstar(theta)).squaredNorm();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("phi(theta) == F(theta, v*(theta)) at 100 random points") {
  const auto prob = preset5();
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec theta = 3.0 * rng.gaussian_vec(prob.theta_dim());
    const double phi = prob.exact_phi(theta);
    const double f_at_vstar = prob.exact_value(theta, prob.exact_vstar(theta));
    CHECK(phi == doctest::Approx(f_at_vstar).epsilon(1e-12));
  }
}

TEST_CASE("v* is kappa-Lipschitz and grad phi is 2 kappa L-Lipschitz") {
  const auto prob = preset5();
  const double kappa = prob.L() / prob.mu();
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec t1 = rng.gaussian_vec(prob.theta_dim());
    const Vec t2 = rng.gaussian_vec(prob.theta_dim());
    const double dv = (prob.exact_vstar(t1) - prob.exact_vstar(t2)).norm();
    const double dg = (prob.exact_grad_phi(t1) - prob.exact_grad_phi(t2)).norm();
    const double dt = (t1 - t2).norm();
    CHECK(dv <= kappa * dt * (1.0 + 1e-12));
    CHECK(dg <= 2.0 * kappa * prob.L() * dt * (1.0 + 1e-6));
  }
}

TEST_CASE("presets hit their condition numbers") {
  struct Want {
    QuadraticSaddle::Preset which;
    double kappa;
  };
  for (const auto& w : {Want{QuadraticSaddle::Preset::KappaOne, 1.1},
                        Want{QuadraticSaddle::Preset::KappaFive, 5.0},
                        Want{QuadraticSaddle::Preset::KappaTwentyFive, 25.0}}) {
    const auto prob = QuadraticSaddle::preset(w.which, 0.0, 0.0);
    CHECK(prob.L() / prob.mu() == doctest::Approx(w.kappa).epsilon(1e-10));

    // spectrum of Q inside [-1,1] and indefinite
    Eigen::SelfAdjointEigenSolver<Mat> es(prob.Q());
    CHECK(es.eigenvalues().minCoeff() < 0.0);
    CHECK(es.eigenvalues().minCoeff() >= -1.0 - 1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-12);

    // M psd with min phi = 0 at theta = 0
    Eigen::SelfAdjointEigenSolver<Mat> ms(prob.M());
    CHECK(ms.eigenvalues().minCoeff() >= -1e-12);
    CHECK(prob.min_phi() == 0.0);
  }
}

TEST_CASE("preset closed-form L matches the assembled Hessian spectral norm") {
  const auto prob = preset5();
  const Eigen::Index d = prob.theta_dim(), n = prob.v_dim();
  Mat H = Mat::Zero(d + n, d + n);
  H.topLeftCorner(d, d) = prob.Q();
  H.topRightCorner(d, n) = prob.B();
  H.bottomLeftCorner(n, d) = prob.B().transpose();
  H.bottomRightCorner(n, n) = -prob.mu() * Mat::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  CHECK(prob.L() == doctest::Approx(es.eigenvalues().cwiseAbs().maxCoeff()).epsilon(1e-12));
}

TEST_CASE("stochastic oracle: zero noise returns the exact gradients") {
  const auto prob = preset5(0.0, 0.0);
  RngStreams rng(5);
  Rng probe(6);
  const Vec theta = probe.gaussian_vec(prob.theta_dim());
  const Vec v = probe.gaussian_vec(prob.v_dim());
  Vec gs_theta, gs_v, ge_theta, ge_v;
  prob.stoch_grad(theta, v, 1, rng, &gs_theta, &gs_v);
  prob.exact_grad(theta, v, ge_theta, ge_v);
  CHECK((gs_theta - ge_theta).norm() == 0.0);
  CHECK((gs_v - ge_v).norm() == 0.0);
}

TEST_CASE("stochastic oracle: empirical variance matches sigma^2/batch") {
  const double sd = 0.3;
  const auto prob = preset5(sd, sd);
  const double sigma_sq = prob.smoothness().sigma_sq;
  CHECK(sigma_sq ==
        doctest::Approx(static_cast<double>(prob.theta_dim()) * sd * sd));

  RngStreams rng(7);
  const Vec theta = Vec::Ones(prob.theta_dim());
  const Vec v = Vec::Ones(prob.v_dim());
  Vec g_exact, gv_exact;
  prob.exact_grad(theta, v, g_exact, gv_exact);

  auto empirical_var = [&](int batch) {
    const int samples = 20000;
    double acc = 0.0;
    Vec g;
    for (int s = 0; s < samples; ++s) {
      prob.stoch_grad(theta, v, batch, rng, &g, nullptr);
      acc += (g - g_exact).squaredNorm();
    }
    return acc / samples;
  };

  const double var1 = empirical_var(1);
  CHECK(var1 == doctest::Approx(sigma_sq).epsilon(0.05));
  // batch = 4 halves the standard deviation
  const double var4 = empirical_var(4);
  CHECK(var4 == doctest::Approx(sigma_sq / 4.0).epsilon(0.05));
}

TEST_CASE("stochastic oracle consumes streams independently of requested outputs") {
  const auto prob = preset5(0.5, 0.5);
  RngStreams both(9), theta_only(9);
  Rng probe(10);
  const Vec theta = probe.gaussian_vec(prob.theta_dim());
  const Vec v = probe.gaussian_vec(prob.v_dim());

  Vec a, b;
  prob.stoch_grad(theta, v, 1, both, &a, &b);
  prob.stoch_grad(theta, v, 1, theta_only, &a, nullptr);
  // second draws must coincide
  Vec x, y;
  prob.stoch_grad(theta, v, 1, both, &x, nullptr);
  prob.stoch_grad(theta, v, 1, theta_only, &y, nullptr);
  CHECK((x - y).norm() == 0.0);
}
