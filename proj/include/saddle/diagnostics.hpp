#pragma once

// Quantitative checks behind the experiments: finite-difference validation of
// every analytic gradient, Monte-Carlo certification of the one-step Lyapunov
// inequality, log-log rate fitting, and noise-constant estimation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "saddle/core.hpp"
#include "saddle/schedules.hpp"

namespace saddle {

struct DiagnosticsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Central-difference gradient check. For each h in the grid, compares the
// central difference of f against the analytic gradient and reports the best
// relative error; per-coordinate steps are scaled by (1 + |x_i|).

inline const std::vector<double>& default_fd_grid() {
  static const std::vector<double> grid{1e-3, 1e-4, 1e-5};
  return grid;
}

template <typename F>
double finite_diff_check(F&& f, const Vec& point, const Vec& analytic_grad,
                         std::span<const double> h_grid = {}) {
  std::vector<double> grid(h_grid.begin(), h_grid.end());
  if (grid.empty()) grid = default_fd_grid();
  const double denom = std::max(analytic_grad.norm(), 1e-12);
  double best = std::numeric_limits<double>::infinity();
  Vec x = point;
  for (double h : grid) {
    Vec fd(point.size());
    for (Eigen::Index i = 0; i < point.size(); ++i) {
      const double hi = h * (1.0 + std::abs(point[i]));
      x[i] = point[i] + hi;
      const double fp = f(x);
      x[i] = point[i] - hi;
      const double fm = f(x);
      x[i] = point[i];
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw DiagnosticsError("finite_diff_check: non-finite oracle output");
      fd[i] = (fp - fm) / (2.0 * hi);
    }
    best = std::min(best, (fd - analytic_grad).norm() / denom);
  }
  return best;
}

// ---------------------------------------------------------------------------
// One-step inequality certificate on a problem with exact phi and v*.
//
// With admissible steps, the randomized update satisfies
//
//   p a_k ||grad phi(theta_k)||^2 + 2 E_k[E_{k+1}]
//     <= 2 E_k + 4 e_k p a_k kappa L sigma_tilde^2
//        + 2 sigma^2 (p a_k^2 kappa L
//                     + p^2 (2p+(1-p) e_k mu) a_k^3 kappa^4 / ((1-p)^2 e_k^2)).
//
// E_k[E_{k+1}] is estimated from mc_samples one-step simulations of the
// frozen state; each sample draws fresh gradient noise, forms both candidate
// updates, and averages the two coin branches exactly (a Rao-Blackwellized
// sample with the same mean and smaller variance). The verdict allows
// three Monte-Carlo standard errors of slack. Inadmissible steps are refused
// rather than judged: the inequality is only claimed under the bounds.

struct OneStepCertificate {
  bool refused = false;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double mc_se = 0.0;
  double slack = 0.0;  // rhs + 3 se - lhs
};

inline double lyapunov_value(const ProblemOracle& problem, const Vec& theta,
                             const Vec& v, double p, double alpha, double eta) {
  const SmoothnessSpec spec = problem.smoothness();
  const double d = problem.exact_phi(theta) - problem.min_phi();
  const double r = (problem.exact_vstar(theta) - v).squaredNorm();
  return d + spec.kappa() * spec.L * (p * alpha / ((1.0 - p) * eta)) * r;
}

inline OneStepCertificate verify_one_step_inequality(
    const ProblemOracle& problem, const Vec& theta, const Vec& v,
    const StepSchedule& schedule, long k, int mc_samples,
    std::uint64_t mc_seed) {
  require_capability(problem, Capability::ExactPhi, "verify_one_step_inequality");
  require_capability(problem, Capability::ExactVstar, "verify_one_step_inequality");
  const SmoothnessSpec spec = problem.smoothness();
  const double p = schedule.p();
  const StepPair now = schedule.at(k);
  const StepPair next = schedule.at(k + 1);

  OneStepCertificate cert;
  if (!check_step_admissibility(spec, p, now.alpha, now.eta).ok) {
    cert.refused = true;
    return cert;
  }

  const double kappa = spec.kappa();
  const double kL = kappa * spec.L;
  const double e_now = lyapunov_value(problem, theta, v, p, now.alpha, now.eta);
  const double grad_phi_sq = problem.exact_grad_phi(theta).squaredNorm();

  RngStreams rng(mc_seed);
  double mean = 0.0, m2 = 0.0;
  Vec g_theta(theta.size()), g_v(v.size());
  for (int s = 0; s < mc_samples; ++s) {
    problem.stoch_grad(theta, v, 1, rng, &g_theta, &g_v);
    const Vec theta_plus = theta - now.alpha * g_theta;
    const Vec v_plus = problem.project_v(v + now.eta * g_v);
    const double e_next =
        p * lyapunov_value(problem, theta_plus, v, p, next.alpha, next.eta) +
        (1.0 - p) * lyapunov_value(problem, theta, v_plus, p, next.alpha, next.eta);
    const double delta = e_next - mean;
    mean += delta / (s + 1);
    m2 += delta * (e_next - mean);
  }
  const double var = mc_samples > 1 ? m2 / (mc_samples - 1) : 0.0;
  cert.mc_se = 2.0 * std::sqrt(var / mc_samples);  // enters lhs through 2 E[..]

  cert.lhs = p * now.alpha * grad_phi_sq + 2.0 * mean;
  const double q = 2.0 * p + (1.0 - p) * now.eta * spec.mu;
  cert.rhs = 2.0 * e_now + 4.0 * now.eta * p * now.alpha * kL * spec.sigma_tilde_sq +
             2.0 * spec.sigma_sq *
                 (p * now.alpha * now.alpha * kL +
                  p * p * q * std::pow(now.alpha, 3) * std::pow(kappa, 4) /
                      ((1.0 - p) * (1.0 - p) * now.eta * now.eta));
  cert.slack = cert.rhs + 3.0 * cert.mc_se - cert.lhs;
  cert.pass = cert.slack >= 0.0;
  return cert;
}

// ---------------------------------------------------------------------------
// Least-squares slope of log(value) against log(iteration) over a window.
// values[i] is the quantity at iteration i+1; nonpositive entries are
// skipped (log-domain).

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  long points = 0;
};

inline RateFit fit_rate_points(std::span<const std::pair<long, double>> points,
                               long window_lo, long window_hi) {
  if (window_lo < 1) window_lo = 1;
  std::vector<double> xs, ys;
  for (const auto& [k, v] : points) {
    if (k < window_lo || k > window_hi) continue;
    if (v > 0.0 && std::isfinite(v)) {
      xs.push_back(std::log(static_cast<double>(k)));
      ys.push_back(std::log(v));
    }
  }
  const long n = static_cast<long>(xs.size());
  if (n < 10)
    throw DiagnosticsError("fit_rate: window holds fewer than 10 usable points");

  double mx = 0.0, my = 0.0;
  for (long i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (long i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

inline RateFit fit_rate(std::span<const double> values, long window_lo,
                        long window_hi) {
  window_hi = std::min<long>(window_hi, static_cast<long>(values.size()));
  std::vector<std::pair<long, double>> points;
  points.reserve(static_cast<size_t>(values.size()));
  for (long k = 1; k <= static_cast<long>(values.size()); ++k)
    points.emplace_back(k, values[static_cast<size_t>(k - 1)]);
  return fit_rate_points(points, window_lo, window_hi);
}

// ---------------------------------------------------------------------------
// Sample estimates of the noise constants: variance of the stochastic
// theta-gradient at (theta, v), and the second moment of the stochastic
// v-gradient at (theta, v*(theta)) when v* is available.

struct NoiseEstimate {
  double sigma_sq_hat = 0.0;
  std::optional<double> sigma_tilde_sq_hat;
};

inline NoiseEstimate estimate_noise(const ProblemOracle& problem, const Vec& theta,
                                    const Vec& v, int samples, std::uint64_t seed) {
  if (samples < 2) throw DiagnosticsError("estimate_noise: need at least 2 samples");
  RngStreams rng(seed);
  Vec g(theta.size());
  Vec mean = Vec::Zero(theta.size());
  std::vector<Vec> draws;
  draws.reserve(samples);
  for (int s = 0; s < samples; ++s) {
    problem.stoch_grad(theta, v, 1, rng, &g, nullptr);
    draws.push_back(g);
    mean += g;
  }
  mean /= static_cast<double>(samples);
  double acc = 0.0;
  for (const Vec& d : draws) acc += (d - mean).squaredNorm();
  NoiseEstimate est;
  est.sigma_sq_hat = acc / static_cast<double>(samples - 1);

  if (has_capability(problem.capabilities(), Capability::ExactVstar)) {
    const Vec vstar = problem.exact_vstar(theta);
    Vec gv(vstar.size());
    double second = 0.0;
    for (int s = 0; s < samples; ++s) {
      problem.stoch_grad(theta, vstar, 1, rng, nullptr, &gv);
      second += gv.squaredNorm();
    }
    est.sigma_tilde_sq_hat = second / static_cast<double>(samples);
  }
  return est;
}

} // namespace saddle
