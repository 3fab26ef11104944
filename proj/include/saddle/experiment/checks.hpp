#pragma once

// Named verification batteries reused by the CLI and the acceptance suite:
// finite-difference validation of every analytic gradient in the repo, and
// Monte-Carlo certification of the one-step Lyapunov inequality. Verdicts are
// machine-readable rows (check name, pass, measure, seed).

#include <string>
#include <vector>

#include "saddle/csv.hpp"
#include "saddle/diagnostics.hpp"
#include "saddle/ot/learning.hpp"
#include "saddle/problems/dro.hpp"
#include "saddle/problems/quadratic.hpp"

namespace saddle {

struct CheckRow {
  std::string name;
  bool pass = false;
  double measure = 0.0;  // max relative error, or slack
  std::uint64_t seed = 0;
};

inline void write_check_rows(const std::string& path, const std::vector<CheckRow>& rows,
                             bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::out);
  if (!out) throw CsvError("cannot open " + path + " for writing");
  if (!append) out << "check,pass,measure,seed\n";
  for (const CheckRow& row : rows)
    out << row.name << ',' << (row.pass ? 1 : 0) << ',' << csv_number(row.measure)
        << ',' << row.seed << '\n';
}

// 20 random probes per analytic gradient; pass at relative error <= 1e-5.
inline std::vector<CheckRow> gradient_check_suite(std::uint64_t seed = 2024,
                                                  int probes = 20,
                                                  double tolerance = 1e-5) {
  std::vector<CheckRow> rows;
  auto push = [&](const std::string& name, double max_err) {
    rows.push_back({name, max_err <= tolerance, max_err, seed});
  };

  Rng rng(derive_seed(seed, "grad-check"));

  {
    const auto quad = QuadraticSaddle::preset(QuadraticSaddle::Preset::KappaFive, 0.0, 0.0);
    double err_t = 0.0, err_v = 0.0, err_phi = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
      const Vec theta = 2.0 * rng.gaussian_vec(quad.theta_dim());
      const Vec v = 2.0 * rng.gaussian_vec(quad.v_dim());
      Vec g_theta, g_v;
      quad.exact_grad(theta, v, g_theta, g_v);
      err_t = std::max(err_t, finite_diff_check(
                                  [&](const Vec& t) { return quad.exact_value(t, v); },
                                  theta, g_theta));
      err_v = std::max(err_v, finite_diff_check(
                                  [&](const Vec& vv) { return quad.exact_value(theta, vv); },
                                  v, g_v));
      err_phi = std::max(err_phi, finite_diff_check(
                                      [&](const Vec& t) { return quad.exact_phi(t); },
                                      theta, quad.exact_grad_phi(theta)));
    }
    push("quadratic_grad_theta", err_t);
    push("quadratic_grad_v", err_v);
    push("quadratic_grad_phi", err_phi);
  }

  {
    const ToyDro dro(make_blobs(40, seed), 1.3);
    double err_t = 0.0, err_v = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
      Vec theta = rng.gaussian_vec(dro.theta_dim());
      theta.head(2) *= 1.5 / theta.head(2).norm();
      Vec v = dro.initial_v() + 0.3 * rng.gaussian_vec(dro.v_dim());
      Vec g_theta, g_v;
      dro.exact_grad(theta, v, g_theta, g_v);
      err_t = std::max(err_t, finite_diff_check(
                                  [&](const Vec& t) { return dro.exact_value(t, v); },
                                  theta, g_theta));
      err_v = std::max(err_v, finite_diff_check(
                                  [&](const Vec& vv) { return dro.exact_value(theta, vv); },
                                  v, g_v));
    }
    push("dro_grad_theta", err_t);
    push("dro_grad_v", err_v);
  }

  {
    double err = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
      const int n = 3 + static_cast<int>(rng.uniform_index(6));
      const Vec cost = 2.0 * rng.gaussian_vec(n).cwiseAbs();
      Vec nu = rng.gaussian_vec(n).cwiseAbs().array() + 0.05;
      nu /= nu.sum();
      const Vec v = 0.5 * rng.gaussian_vec(n);
      const double eps = 0.1 + 0.4 * rng.uniform();
      err = std::max(err, finite_diff_check(
                              [&](const Vec& vv) { return h_value(cost, nu, vv, eps); },
                              v, grad_v_h(cost, nu, v, eps)));
    }
    push("semidual_grad_v_h", err);
  }

  {
    const std::pair<const char*, MapModel> models[] = {
        {"affine", MapModel::affine(2, 2)},
        {"perceptron", MapModel::perceptron(2, 2, 12)}};
    for (const auto& [label, model] : models) {
      double err_map = 0.0, err_push = 0.0, err_vjp = 0.0;
      for (int probe = 0; probe < probes; ++probe) {
        Mat y_inputs(4, 2);
        for (int i = 0; i < 4; ++i) y_inputs.row(i) = rng.gaussian_vec(2).transpose();
        const Vec x = rng.gaussian_vec(2);
        const Vec nu = Vec::Constant(4, 0.25);
        const Vec v = 0.2 * rng.gaussian_vec(4);
        const double eps = 0.15;
        Vec theta = model.init_params(seed + probe);
        theta += 0.15 * rng.gaussian_vec(model.param_dim());

        err_map = std::max(
            err_map,
            finite_diff_check(
                [&](const Vec& t) { return h_value_mapped(model, t, x, y_inputs, nu, v, eps); },
                theta, grad_theta_h_mapped(model, theta, x, y_inputs, nu, v, eps)));
        err_push = std::max(
            err_push,
            finite_diff_check(
                [&](const Vec& t) {
                  return h_value_pushforward(model, t, x, y_inputs, nu, v, eps);
                },
                theta, grad_theta_h_pushforward(model, theta, x, y_inputs, nu, v, eps)));

        const Vec u = rng.gaussian_vec(2);
        Vec vjp_grad = Vec::Zero(model.param_dim());
        model.vjp(theta, x, u, vjp_grad);
        err_vjp = std::max(
            err_vjp, finite_diff_check(
                         [&](const Vec& t) { return u.dot(model.forward(t, x)); },
                         theta, vjp_grad));
      }
      push(std::string("grad_theta_h_mapped_") + label, err_map);
      push(std::string("grad_theta_h_pushforward_") + label, err_push);
      push(std::string("map_vjp_") + label, err_vjp);
    }
  }

  return rows;
}

// One-step inequality certification on the quadratic testbed: n_states random
// states, Monte-Carlo estimate of the conditional expectation, 3-sigma slack.
// Steps sit exactly on the admissibility bound (margin 1).
struct OneStepSuite {
  std::vector<CheckRow> rows;
  int n_pass = 0;
  int n_states = 0;
};

inline OneStepSuite one_step_certification_suite(double noise_sd, int n_states,
                                                 int mc_samples,
                                                 std::uint64_t seed = 7) {
  const auto prob =
      QuadraticSaddle::preset(QuadraticSaddle::Preset::KappaFive, noise_sd, noise_sd);
  const SmoothnessSpec spec = prob.smoothness();
  const double eta = 1.0 / (2.0 * spec.L);
  StepSchedule::Params params;
  params.p = 0.5;
  params.custom_alpha = admissible_alpha_bound(spec, 0.5, eta);
  params.custom_eta = eta;
  StepSchedule schedule(Regime::Custom, spec, params);

  OneStepSuite suite;
  suite.n_states = n_states;
  Rng rng(derive_seed(seed, "one-step-states"));
  for (int s = 0; s < n_states; ++s) {
    const double scale = 0.5 + 3.0 * rng.uniform();
    const Vec theta = scale * rng.gaussian_vec(prob.theta_dim());
    const Vec v = prob.exact_vstar(theta) + scale * rng.gaussian_vec(prob.v_dim());
    const auto cert =
        verify_one_step_inequality(prob, theta, v, schedule, 0, mc_samples, seed + s);
    CheckRow row;
    row.name = "one_step_state_" + std::to_string(s);
    row.pass = cert.pass && !cert.refused;
    row.measure = cert.slack;
    row.seed = seed + s;
    if (row.pass) ++suite.n_pass;
    suite.rows.push_back(row);
  }
  return suite;
}

} // namespace saddle
