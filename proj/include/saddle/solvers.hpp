#pragma once

// The descent-ascent algorithm family over any ProblemOracle.
//
//   RSGDA  per iteration one sample feeds both candidate updates
//          theta+ = theta - alpha_k g_theta, v+ = proj(v + eta_k g_v);
//          a coin with descent probability p commits exactly one of them.
//   ESGDA  m projected stochastic ascent steps (fresh sample each), then one
//          descent step evaluated at the updated v.
//   SGDA   ESGDA with m = 1 (two independent samples per outer step).
//   SGDmax ascend until v is a delta-approximate maximizer,
//          phi(theta) - F(theta, v) <= delta, then one descent step.
//   RGDA   RSGDA driven by exact gradients.
//
// Iterations are counted in gradient updates (IterateState::iter), so traces
// of different algorithms align on oracle work: an RSGDA run of k iterations
// does the same number of gradient steps as an ESGDA run of k/(m+1) outer
// loops with loop size m.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/core.hpp"
#include "saddle/schedules.hpp"

namespace saddle {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Algorithm { Rsgda, Esgda, Sgda, Sgdmax, Rgda };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Rsgda: return "rsgda";
    case Algorithm::Esgda: return "esgda";
    case Algorithm::Sgda: return "sgda";
    case Algorithm::Sgdmax: return "sgdmax";
    case Algorithm::Rgda: return "rgda";
  }
  return "?";
}

inline Algorithm algorithm_from_name(const std::string& name) {
  for (Algorithm a : {Algorithm::Rsgda, Algorithm::Esgda, Algorithm::Sgda,
                      Algorithm::Sgdmax, Algorithm::Rgda}) {
    if (name == algorithm_name(a)) return a;
  }
  throw SolverError("unknown algorithm: " + name);
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::Rsgda;
  StepSchedule schedule;
  int loop_size_m = 1;             // ESGDA inner ascent steps
  double max_oracle_delta = 1e-8;  // SGDmax accuracy
  int batch_size = 1;
  long max_iters = 1000;  // budget in gradient updates
  std::uint64_t master_seed = 0;
  bool fast_mode = true;  // flip the coin before evaluating gradients
  double divergence_guard = 1e12;
  long trace_stride = 1;
  long sgdmax_inner_cap = 1000000;

  void validate() const {
    if (algorithm == Algorithm::Esgda && loop_size_m < 1)
      throw SolverError("ESGDA requires loop_size_m >= 1");
    if (algorithm == Algorithm::Sgdmax && !(max_oracle_delta > 0.0))
      throw SolverError("SGDmax requires max_oracle_delta > 0");
    if (batch_size < 1) throw SolverError("batch_size must be >= 1");
    if (max_iters < 0) throw SolverError("max_iters must be >= 0");
    if (trace_stride < 1) throw SolverError("trace_stride must be >= 1");
  }
};

// One trace row per outer step. Quantities that need oracles the problem does
// not expose stay NaN and are written as empty CSV cells, never fabricated.
struct RunRecord {
  long iter = 0;
  double alpha_k = 0.0;
  double eta_k = 0.0;
  char step_kind = 'O';  // 'T' descent, 'V' ascent (randomized), 'O' outer
  double grad_phi_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double surrogate_grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double phi = std::numeric_limits<double>::quiet_NaN();
  double d_k = std::numeric_limits<double>::quiet_NaN();
  double r_k = std::numeric_limits<double>::quiet_NaN();
  double e_k = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
};

struct StepOutcome {
  bool theta_step = false;
  long inner_steps = 0;  // SGDmax ascent count
};

namespace detail {
inline void check_finite(const Vec& g, const char* what) {
  if (!g.allFinite())
    throw SolverError(std::string("non-finite gradient encountered in ") + what);
}
} // namespace detail

// One randomized step. Computes both candidates then commits one, or flips
// first in fast mode; the two modes produce bit-identical trajectories
// because the oracle's stream consumption does not depend on which outputs
// are requested and the coin lives on its own stream.
inline StepOutcome rsgda_step(IterateState& state, const ProblemOracle& problem,
                              double alpha, double eta, double p, int batch,
                              RngStreams& rng, bool fast_mode = true) {
  StepOutcome out;
  if (fast_mode) {
    out.theta_step = rng.coin.bernoulli(p);
    Vec g(state.theta.size());
    if (out.theta_step) {
      problem.stoch_grad(state.theta, state.v, batch, rng, &g, nullptr);
      detail::check_finite(g, "rsgda theta step");
      state.theta -= alpha * g;
      state.count_theta_update();
    } else {
      g.resize(state.v.size());
      problem.stoch_grad(state.theta, state.v, batch, rng, nullptr, &g);
      detail::check_finite(g, "rsgda v step");
      state.v = problem.project_v(state.v + eta * g);
      state.count_v_update();
    }
  } else {
    Vec g_theta, g_v;
    problem.stoch_grad(state.theta, state.v, batch, rng, &g_theta, &g_v);
    detail::check_finite(g_theta, "rsgda theta step");
    detail::check_finite(g_v, "rsgda v step");
    const Vec theta_plus = state.theta - alpha * g_theta;
    const Vec v_plus = problem.project_v(state.v + eta * g_v);
    out.theta_step = rng.coin.bernoulli(p);
    if (out.theta_step) {
      state.theta = theta_plus;
      state.count_theta_update();
    } else {
      state.v = v_plus;
      state.count_v_update();
    }
  }
  return out;
}

// Exact-gradient variant (randomized GDA).
inline StepOutcome rgda_step(IterateState& state, const ProblemOracle& problem,
                             double alpha, double eta, double p, RngStreams& rng) {
  Vec g_theta, g_v;
  problem.exact_grad(state.theta, state.v, g_theta, g_v);
  detail::check_finite(g_theta, "rgda theta step");
  detail::check_finite(g_v, "rgda v step");
  StepOutcome out;
  out.theta_step = rng.coin.bernoulli(p);
  if (out.theta_step) {
    state.theta -= alpha * g_theta;
    state.count_theta_update();
  } else {
    state.v = problem.project_v(state.v + eta * g_v);
    state.count_v_update();
  }
  return out;
}

inline StepOutcome esgda_step(IterateState& state, const ProblemOracle& problem,
                              double alpha, double eta, int m, int batch,
                              RngStreams& rng) {
  if (m < 1) throw SolverError("ESGDA loop size must be >= 1");
  Vec g_v(state.v.size());
  for (int t = 0; t < m; ++t) {
    problem.stoch_grad(state.theta, state.v, batch, rng, nullptr, &g_v);
    detail::check_finite(g_v, "esgda ascent");
    state.v = problem.project_v(state.v + eta * g_v);
    state.count_v_update();
  }
  Vec g_theta(state.theta.size());
  problem.stoch_grad(state.theta, state.v, batch, rng, &g_theta, nullptr);
  detail::check_finite(g_theta, "esgda descent");
  state.theta -= alpha * g_theta;
  state.count_theta_update();
  return {true, 0};
}

inline StepOutcome sgda_step(IterateState& state, const ProblemOracle& problem,
                             double alpha, double eta, int batch, RngStreams& rng) {
  return esgda_step(state, problem, alpha, eta, 1, batch, rng);
}

inline StepOutcome sgdmax_step(IterateState& state, const ProblemOracle& problem,
                               double alpha, double eta, double delta, int batch,
                               RngStreams& rng, long inner_cap = 1000000) {
  require_capability(problem, Capability::ExactPhi, "sgdmax_step");
  const double phi = problem.exact_phi(state.theta);
  StepOutcome out;
  Vec g_v(state.v.size());
  while (phi - problem.exact_value(state.theta, state.v) > delta) {
    if (out.inner_steps >= inner_cap)
      throw SolverError("sgdmax: inner ascent exceeded cap " +
                        std::to_string(inner_cap) + " without reaching delta=" +
                        std::to_string(delta));
    problem.stoch_grad(state.theta, state.v, batch, rng, nullptr, &g_v);
    detail::check_finite(g_v, "sgdmax ascent");
    state.v = problem.project_v(state.v + eta * g_v);
    state.count_v_update();
    ++out.inner_steps;
  }
  Vec g_theta(state.theta.size());
  problem.stoch_grad(state.theta, state.v, batch, rng, &g_theta, nullptr);
  detail::check_finite(g_theta, "sgdmax descent");
  state.theta -= alpha * g_theta;
  state.count_theta_update();
  out.theta_step = true;
  return out;
}

struct RunSummary {
  bool diverged = false;
  long iterations = 0;
  long outer_steps = 0;
  double final_phi = std::numeric_limits<double>::quiet_NaN();
  double min_grad_phi_sq = std::numeric_limits<double>::quiet_NaN();
  double min_surrogate_sq = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  IterateState final_state;
};

using RowSink = std::function<void(const RunRecord&, const IterateState&)>;

inline RunSummary run(const SolverConfig& config, const ProblemOracle& problem,
                      const RowSink& sink = {}) {
  config.validate();
  const CapabilityMask caps = problem.capabilities();
  const bool stochastic = config.algorithm != Algorithm::Rgda;
  if (stochastic) {
    require_capability(problem, Capability::StochGradTheta, "run");
    require_capability(problem, Capability::StochGradV, "run");
  } else {
    require_capability(problem, Capability::ExactGrad, "run");
  }
  if (config.algorithm == Algorithm::Sgdmax)
    require_capability(problem, Capability::ExactPhi, "run");

  const bool track_phi = has_capability(caps, Capability::ExactPhi);
  const bool track_vstar = has_capability(caps, Capability::ExactVstar);
  const bool track_grad_phi = track_phi && track_vstar;
  const bool track_surrogate = has_capability(caps, Capability::ExactGrad);
  const bool lyapunov_weight = config.algorithm == Algorithm::Rsgda ||
                               config.algorithm == Algorithm::Rgda;

  RngStreams rng(config.master_seed);
  IterateState state(problem.initial_theta(), problem.initial_v());
  state.v = problem.project_v(state.v);

  const SmoothnessSpec spec = problem.smoothness();
  const double kappa_L = spec.kappa() * spec.L;
  const double p = config.schedule.p();
  double min_phi_value = 0.0;
  if (track_phi) min_phi_value = problem.min_phi();

  RunSummary summary;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  // Per-step bookkeeping: the running minimum of the exact ||grad phi||^2
  // (the quantity the rate experiments fit) and phi itself (which feeds the
  // divergence guard) are evaluated every outer step when the problem exposes
  // them; the surrogate gradient, a full-data pass on finite-sum problems, is
  // only evaluated on emitted rows.
  auto record = [&](double alpha, double eta, char kind) {
    const long outer = summary.outer_steps;
    RunRecord row;
    row.iter = state.iter;
    row.alpha_k = alpha;
    row.eta_k = eta;
    row.step_kind = kind;
    if (track_grad_phi) {
      row.grad_phi_norm_sq = problem.exact_grad_phi(state.theta).squaredNorm();
      if (!(row.grad_phi_norm_sq >= summary.min_grad_phi_sq))  // NaN-safe
        summary.min_grad_phi_sq = row.grad_phi_norm_sq;
    }
    if (track_phi) {
      row.phi = problem.exact_phi(state.theta);
      row.d_k = row.phi - min_phi_value;
      summary.final_phi = row.phi;
    }
    if (track_vstar) {
      row.r_k = (problem.exact_vstar(state.theta) - state.v).squaredNorm();
      if (track_phi && lyapunov_weight && eta > 0.0 && p < 1.0) {
        row.e_k = row.d_k + kappa_L * (p * alpha / ((1.0 - p) * eta)) * row.r_k;
      }
    }
    const bool emit = sink && (outer % config.trace_stride == 0);
    if (emit) {
      if (track_surrogate) {
        Vec g_theta, g_v;
        problem.exact_grad(state.theta, state.v, g_theta, g_v);
        row.surrogate_grad_norm_sq = g_theta.squaredNorm();
        if (!(row.surrogate_grad_norm_sq >= summary.min_surrogate_sq))
          summary.min_surrogate_sq = row.surrogate_grad_norm_sq;
      }
      row.wall_time_s = elapsed();
      sink(row, state);
    }
    return row;
  };

  while (state.iter < config.max_iters) {
    const StepPair steps = config.schedule.at(summary.outer_steps);
    char kind = 'O';
    switch (config.algorithm) {
      case Algorithm::Rsgda: {
        const StepOutcome o = rsgda_step(state, problem, steps.alpha, steps.eta, p,
                                         config.batch_size, rng, config.fast_mode);
        kind = o.theta_step ? 'T' : 'V';
        break;
      }
      case Algorithm::Rgda: {
        const StepOutcome o = rgda_step(state, problem, steps.alpha, steps.eta, p, rng);
        kind = o.theta_step ? 'T' : 'V';
        break;
      }
      case Algorithm::Esgda:
        esgda_step(state, problem, steps.alpha, steps.eta, config.loop_size_m,
                   config.batch_size, rng);
        break;
      case Algorithm::Sgda:
        sgda_step(state, problem, steps.alpha, steps.eta, config.batch_size, rng);
        break;
      case Algorithm::Sgdmax:
        sgdmax_step(state, problem, steps.alpha, steps.eta, config.max_oracle_delta,
                    config.batch_size, rng, config.sgdmax_inner_cap);
        break;
    }
    ++summary.outer_steps;
    const RunRecord row = record(steps.alpha, steps.eta, kind);

    // Divergence is a recorded outcome, not an error: step-size sweeps cross
    // the stability boundary on purpose. phi is only inspected on rows where
    // it was evaluated.
    const bool theta_blown =
        !state.theta.allFinite() || state.theta.norm() > config.divergence_guard;
    const bool phi_blown =
        !std::isnan(row.phi) &&
        (!std::isfinite(row.phi) || std::abs(row.phi) > config.divergence_guard);
    if (theta_blown || phi_blown) {
      summary.diverged = true;
      break;
    }
  }

  if (track_phi && !summary.diverged && state.theta.allFinite())
    summary.final_phi = problem.exact_phi(state.theta);
  summary.iterations = state.iter;
  summary.wall_time_s = elapsed();
  summary.final_state = std::move(state);
  return summary;
}

inline std::vector<RunRecord> collect_run(const SolverConfig& config,
                                          const ProblemOracle& problem,
                                          RunSummary* summary_out = nullptr) {
  std::vector<RunRecord> rows;
  RunSummary s = run(config, problem,
                     [&rows](const RunRecord& r, const IterateState&) { rows.push_back(r); });
  if (summary_out) *summary_out = s;
  return rows;
}

} // namespace saddle
