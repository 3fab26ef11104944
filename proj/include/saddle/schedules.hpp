#pragma once

// Step-size schedules for the randomized descent-ascent family.
//
// Everything is anchored on one admissibility condition for the pair
// (alpha_k, eta_k) given a descent probability p:
//
//     eta_k <= 1/(2L)   and
//     alpha_k <= (1-p) eta_k / (4 kappa^2 sqrt(p (2p + (1-p) eta_k mu)))
//
// under which the one-step descent inequality for the Lyapunov potential
// E_k = D_k + kappa L (p alpha_k / ((1-p) eta_k)) r_k holds. The published
// per-regime constants exceed this alpha bound by a fixed factor (2 for the
// constant and decreasing regimes, kappa^2/(1-p) for the interpolation
// regimes); strict mode clamps alpha down to the bound, non-strict mode
// emits the regime constants as stated and reports the violation factor.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "saddle/core.hpp"

namespace saddle {

struct ScheduleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require_probability(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ScheduleError("descent probability p must lie strictly in (0,1), got " +
                        std::to_string(p));
}

// Largest admissible descent step for a given ascent step.
inline double admissible_alpha_bound(const SmoothnessSpec& spec, double p, double eta) {
  const double kappa = spec.kappa();
  return (1.0 - p) * eta /
         (4.0 * kappa * kappa *
          std::sqrt(p * (2.0 * p + (1.0 - p) * eta * spec.mu)));
}

struct StepAdmissibility {
  bool ok = false;
  bool eta_ok = false;
  bool alpha_ok = false;
  double alpha_bound = 0.0;
  double margin = 0.0;  // alpha_bound / alpha; >= 1 means admissible
};

inline StepAdmissibility check_step_admissibility(const SmoothnessSpec& spec,
                                                  double p, double alpha,
                                                  double eta) {
  require_probability(p);
  StepAdmissibility res;
  res.eta_ok = eta <= 1.0 / (2.0 * spec.L);
  res.alpha_bound = admissible_alpha_bound(spec, p, eta);
  res.margin = res.alpha_bound / alpha;
  res.alpha_ok = alpha <= res.alpha_bound;
  res.ok = res.eta_ok && res.alpha_ok;
  return res;
}

struct StepPair {
  double alpha = 0.0;
  double eta = 0.0;
};

// ---------------------------------------------------------------------------
// Constant steps, exact gradients (randomized GDA).
//
// Main form: eta = 1/(2L), alpha = (1-p) / (4 kappa^2 L sqrt(p(2p+(1-p)/(2 kappa)))).
// Appendix form: eta = 1/L with the matching constant. The two are not
// reconciled in the source material; the main form is the default.

struct RgdaSteps {
  double alpha = 0.0;
  double eta = 0.0;
  // p outside [1/kappa, 1/2]: the rate constant degrades but nothing breaks.
  bool rate_constant_degrades = false;
};

inline RgdaSteps rgda_constant(const SmoothnessSpec& spec, double p,
                               bool appendix_variant = false) {
  require_probability(p);
  const double kappa = spec.kappa();
  RgdaSteps out;
  if (appendix_variant) {
    out.eta = 1.0 / spec.L;
    out.alpha = (1.0 - p) / (2.0 * kappa * kappa * spec.L *
                             std::sqrt(p * (2.0 * p + (1.0 - p) / kappa)));
  } else {
    out.eta = 1.0 / (2.0 * spec.L);
    out.alpha = (1.0 - p) / (4.0 * kappa * kappa * spec.L *
                             std::sqrt(p * (2.0 * p + (1.0 - p) / (2.0 * kappa))));
  }
  // best-rate range is [1/kappa, 1/2]; for kappa < 2 the lower edge collapses
  // onto 1/2
  out.rate_constant_degrades = (p < std::min(1.0 / kappa, 0.5)) || (p > 0.5);
  return out;
}

// ---------------------------------------------------------------------------
// Decreasing steps, stochastic gradients.
//
// eta_k = 1/(2L (k+1)^{2/5}),
// alpha_k = (1-p) / (2 sqrt(p(2p+(1-p) eta_k mu))) * eta_k / (kappa^2 (k+1)^{1/5}).
// The appendix restatement uses alpha_k = (1-p) eta_k / (4 p kappa^2 (k+1)^{1/5}).

inline StepPair rsgda_decreasing(const SmoothnessSpec& spec, double p, long k,
                                 bool appendix_variant = false) {
  require_probability(p);
  if (k < 0) throw ScheduleError("iteration index must be >= 0");
  const double kappa = spec.kappa();
  const double kp1 = static_cast<double>(k) + 1.0;
  StepPair out;
  out.eta = 1.0 / (2.0 * spec.L * std::pow(kp1, 0.4));
  if (appendix_variant) {
    out.alpha = (1.0 - p) * out.eta / (4.0 * p * kappa * kappa * std::pow(kp1, 0.2));
  } else {
    out.alpha = (1.0 - p) /
                (2.0 * std::sqrt(p * (2.0 * p + (1.0 - p) * out.eta * spec.mu))) *
                out.eta / (kappa * kappa * std::pow(kp1, 0.2));
  }
  return out;
}

// Almost-sure variant: the eta exponent gains a positive offset zeta so the
// step-size summability conditions hold strictly.
inline StepPair rsgda_as_steps(const SmoothnessSpec& spec, double p, double zeta,
                               long k) {
  require_probability(p);
  if (!(zeta > 0.0)) throw ScheduleError("zeta must be > 0 for the a.s. regime");
  if (k < 0) throw ScheduleError("iteration index must be >= 0");
  const double kappa = spec.kappa();
  const double kp1 = static_cast<double>(k) + 1.0;
  StepPair out;
  out.eta = 1.0 / (2.0 * spec.L * std::pow(kp1, 0.4 + zeta));
  out.alpha = (1.0 - p) /
              (2.0 * std::sqrt(p * (2.0 * p + (1.0 - p) * out.eta * spec.mu))) *
              out.eta / (kappa * kappa * std::pow(kp1, 0.2));
  return out;
}

// ---------------------------------------------------------------------------
// Summability conditions for almost-sure convergence, decided symbolically
// from the power-law exponents (alpha_k ~ k^{e_alpha}, eta_k ~ k^{e_eta};
// the sqrt factor in alpha_k is bounded above and below so it never affects
// summability). sum k^e diverges iff e >= -1.
//
//   (1) sum alpha_k            = inf
//   (2) sum alpha_k^2 sigma^2  < inf
//   (3) sum eta_k alpha_k sigma_tilde^2          < inf
//   (4) sum alpha_k^3 / eta_k^2 sigma^2          < inf

struct SummabilityReport {
  bool sum_alpha_diverges = false;
  bool sum_alpha_sq_finite = false;
  bool sum_eta_alpha_finite = false;
  bool sum_alpha3_over_eta2_finite = false;

  bool all() const {
    return sum_alpha_diverges && sum_alpha_sq_finite && sum_eta_alpha_finite &&
           sum_alpha3_over_eta2_finite;
  }
};

inline SummabilityReport summability_from_exponents(double e_alpha, double e_eta,
                                                    bool has_sigma,
                                                    bool has_sigma_tilde) {
  SummabilityReport r;
  r.sum_alpha_diverges = e_alpha >= -1.0;
  r.sum_alpha_sq_finite = !has_sigma || (2.0 * e_alpha < -1.0);
  r.sum_eta_alpha_finite = !has_sigma_tilde || (e_eta + e_alpha < -1.0);
  r.sum_alpha3_over_eta2_finite = !has_sigma || (3.0 * e_alpha - 2.0 * e_eta < -1.0);
  return r;
}

// Exponents for the decreasing family: e_eta = -(2/5+zeta), e_alpha = e_eta - 1/5.
inline SummabilityReport rsgda_as_summability(double zeta, bool has_sigma,
                                              bool has_sigma_tilde) {
  const double e_eta = -(0.4 + zeta);
  const double e_alpha = e_eta - 0.2;
  return summability_from_exponents(e_alpha, e_eta, has_sigma, has_sigma_tilde);
}

// ---------------------------------------------------------------------------
// Fixed precision, constant steps, arbitrary minibatch size.
//
// Given a target epsilon, returns the constant (alpha, eta) and the minimum
// iteration count guaranteeing min_t E||grad phi(theta_t)|| <= epsilon.
// The derivation assumes sigma >= sigma_tilde >= 1 and otherwise substitutes
// max(sigma, sigma_tilde, 1); the same substitution is applied here. The
// final term of the iteration bound is stated with its sigma^2 factors
// already cancelled.

struct FixedPrecisionPlan {
  double alpha = 0.0;
  double eta = 0.0;
  double k_min = 0.0;
};

inline FixedPrecisionPlan rsgda_fixed_precision(const SmoothnessSpec& spec,
                                                double p, double epsilon,
                                                double d0, double r0) {
  require_probability(p);
  if (!(epsilon > 0.0)) throw ScheduleError("epsilon must be > 0");
  if (d0 < 0.0 || r0 < 0.0) throw ScheduleError("d0 and r0 must be >= 0");
  if (spec.sigma_sq == 0.0)
    throw ScheduleError(
        "noiseless problem: the fixed-precision regime degenerates; use "
        "rgda_constant instead");
  const double kappa = spec.kappa();
  const double L = spec.L;
  const double s2 = std::max({spec.sigma_sq, spec.sigma_tilde_sq, 1.0});
  const double s = std::sqrt(s2);
  const double e2 = epsilon * epsilon;
  const double e3 = e2 * epsilon;
  const double k2 = kappa * kappa;
  const double k3 = k2 * kappa;

  FixedPrecisionPlan plan;
  plan.eta = e2 / (24.0 * kappa * L * s2);
  const double lead = e2 / (12.0 * kappa * L * s2);
  const double t1 = e2 / (12.0 * kappa * L * s2);
  const double t2 = (1.0 - p) / p * e3 / (48.0 * std::sqrt(3.0) * k3 * L * s2 * s);
  const double t3 = std::sqrt((1.0 - p) / p) * e2 / (12.0 * std::sqrt(2.0) * k2 * L * s2);
  const double t4 =
      (1.0 - p) /
      (8.0 * k2 * L *
       std::sqrt(p * (2.0 * p + (1.0 - p) * e2 / (24.0 * k2 * s2))));
  plan.alpha = lead * std::min({t1, t2, t3, t4});

  const double b1 = 12.0 * d0 * kappa * L * s2 / (p * e2);
  const double b2 = 48.0 * std::sqrt(3.0) * d0 * k3 * L * s2 * s / ((1.0 - p) * e3);
  const double b3 = 12.0 * std::sqrt(2.0) * d0 * k2 * L * s2 /
                    (std::sqrt(p * (1.0 - p)) * e2);
  const double b4 = 8.0 * k2 * L *
                    std::sqrt(2.0 + (1.0 - p) * e2 / (24.0 * p * k2 * s2)) /
                    (1.0 - p);
  const double b5 = k2 * L * L * r0 / (1.0 - p);
  plan.k_min = 12.0 / e2 * std::max({b1, b2, b3, b4, b5});
  return plan;
}

// ---------------------------------------------------------------------------
// Large minibatch regime: constant steps from rgda_constant, and the smallest
// minibatch size M making the variance contribution of the telescoped bound
// at most epsilon^2/2; the deterministic terms then fix the iteration count.

struct LargeBatchPlan {
  double alpha = 0.0;
  double eta = 0.0;
  long batch_size = 1;
  long iterations = 1;
  double total_oracle_budget = 0.0;  // batch_size * iterations
};

inline LargeBatchPlan rsgda_large_batch(const SmoothnessSpec& spec, double p,
                                        double epsilon, double d0, double r0) {
  require_probability(p);
  if (!(epsilon > 0.0)) throw ScheduleError("epsilon must be > 0");
  if (!spec.sigma_bar_sq)
    throw ScheduleError("large-batch regime requires the two-sided variance "
                        "bound sigma_bar_sq");
  const double kappa = spec.kappa();
  const double L = spec.L;
  const double k2 = kappa * kappa;
  const double e2 = epsilon * epsilon;
  const double sbar2 = *spec.sigma_bar_sq;

  LargeBatchPlan plan;
  const RgdaSteps steps = rgda_constant(spec, p);
  plan.alpha = steps.alpha;
  plan.eta = steps.eta;

  const double variance_coeff =
      2.0 * kappa * sbar2 *
      ((1.0 - p) / (2.0 * k2 * std::sqrt(p * (2.0 * p + (1.0 - p) / (2.0 * kappa)))) +
       4.0);
  plan.batch_size = std::max<long>(1, static_cast<long>(std::ceil(variance_coeff / (e2 / 2.0))));

  const double det_term =
      (8.0 * k2 * L * std::sqrt(2.0 + (1.0 - p) / (2.0 * p * kappa)) * d0 +
       2.0 * kappa * L * L * r0) /
      (1.0 - p);
  plan.iterations = std::max<long>(1, static_cast<long>(std::ceil(det_term / (e2 / 2.0))));
  plan.total_oracle_budget =
      static_cast<double>(plan.batch_size) * static_cast<double>(plan.iterations);
  return plan;
}

// ---------------------------------------------------------------------------
// Interpolation regimes (finite sums whose components share a maximizer, so
// sigma_tilde = 0): eta = 1/(2L) throughout.

enum class InterpVariant { AlmostSure, Anytime, Fixed };

inline StepPair interpolation_steps(const SmoothnessSpec& spec, double p,
                                    InterpVariant variant, double zeta, long k) {
  require_probability(p);
  if (k < 0) throw ScheduleError("iteration index must be >= 0");
  StepPair out;
  out.eta = 1.0 / (2.0 * spec.L);
  const double root = std::sqrt(p * (2.0 * p + (1.0 - p) * out.eta * spec.mu));
  const double kp1 = static_cast<double>(k) + 1.0;
  switch (variant) {
    case InterpVariant::AlmostSure:
      if (!(zeta > 0.0))
        throw ScheduleError("zeta must be > 0 for the a.s. interpolation regime");
      out.alpha = out.eta / (4.0 * std::pow(kp1, 0.5 + zeta) * root);
      break;
    case InterpVariant::Anytime:
      out.alpha = out.eta / (4.0 * std::sqrt(kp1) * root);
      break;
    case InterpVariant::Fixed:
      throw ScheduleError("use interpolation_fixed_precision for the fixed regime");
  }
  return out;
}

inline SummabilityReport interp_as_summability(double zeta, bool has_sigma) {
  // constant eta: e_eta = 0; sigma_tilde = 0 by assumption in this regime
  return summability_from_exponents(-(0.5 + zeta), 0.0, has_sigma, false);
}

inline FixedPrecisionPlan interpolation_fixed_precision(const SmoothnessSpec& spec,
                                                        double p, double epsilon,
                                                        double d0, double r0) {
  require_probability(p);
  if (!(epsilon > 0.0)) throw ScheduleError("epsilon must be > 0");
  const double kappa = spec.kappa();
  const double L = spec.L;
  const double k2 = kappa * kappa;
  const double s2 = std::max(spec.sigma_sq, 1.0);
  const double s = std::sqrt(s2);
  const double e2 = epsilon * epsilon;

  FixedPrecisionPlan plan;
  plan.eta = 1.0 / (2.0 * L);
  const double t1 = e2 / (10.0 * kappa * L * s2);
  const double t2 = (1.0 - p) * epsilon / (2.0 * std::sqrt(10.0) * k2 * L * p * s);
  const double t3 =
      std::sqrt((1.0 - p) / p) * e2 / (2.0 * std::sqrt(5.0) * kappa * std::sqrt(kappa) * L * s);
  const double t4 =
      (1.0 - p) / (8.0 * k2 * L * std::sqrt(p * (2.0 * p + (1.0 - p) / kappa)));
  plan.alpha = std::min({t1, t2, t3, t4});

  const double e3 = e2 * epsilon;
  const double e4 = e2 * e2;
  const double b1 = 100.0 * d0 * kappa * L * s2 / (p * e2);
  const double b2 = 20.0 * std::sqrt(10.0) * d0 * k2 * L * s / ((1.0 - p) * e3);
  const double b3 = 20.0 * std::sqrt(5.0) * d0 * kappa * std::sqrt(kappa) * L * s /
                    (std::sqrt(p * (1.0 - p)) * e4);
  const double b4 = 80.0 * d0 * k2 * L /
                    ((1.0 - p) * e2 * std::sqrt(2.0 + (1.0 - p) / (p * kappa)));
  const double b5 = 20.0 * kappa * L * L * r0 / ((1.0 - p) * e2);
  plan.k_min = std::max({b1, b2, b3, b4, b5});
  return plan;
}

// ---------------------------------------------------------------------------
// Schedule object consumed by the solvers: a regime plus its parameters,
// evaluated as a pure function of the iteration index.

enum class Regime {
  RgdaConstant,
  RsgdaDecreasing,
  RsgdaAs,
  RsgdaFixedPrecision,
  RsgdaLargeBatch,
  InterpAs,
  InterpAnytime,
  InterpFixed,
  Custom,
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::RgdaConstant: return "rgda_constant";
    case Regime::RsgdaDecreasing: return "rsgda_decreasing";
    case Regime::RsgdaAs: return "rsgda_as";
    case Regime::RsgdaFixedPrecision: return "rsgda_fixed_precision";
    case Regime::RsgdaLargeBatch: return "rsgda_large_batch";
    case Regime::InterpAs: return "interp_as";
    case Regime::InterpAnytime: return "interp_anytime";
    case Regime::InterpFixed: return "interp_fixed";
    case Regime::Custom: return "custom";
  }
  return "?";
}

inline Regime regime_from_name(const std::string& name) {
  for (Regime r : {Regime::RgdaConstant, Regime::RsgdaDecreasing, Regime::RsgdaAs,
                   Regime::RsgdaFixedPrecision, Regime::RsgdaLargeBatch,
                   Regime::InterpAs, Regime::InterpAnytime, Regime::InterpFixed,
                   Regime::Custom}) {
    if (name == regime_name(r)) return r;
  }
  throw ScheduleError("unknown schedule regime: " + name);
}

class StepSchedule {
public:
  struct Params {
    double p = 0.5;
    double zeta = 0.1;
    double epsilon_target = 0.1;
    double d0 = 1.0;
    double r0 = 0.0;
    double custom_alpha = 0.0;
    double custom_eta = 0.0;
    double alpha_scale = 1.0;  // multiplies the regime's alpha (stress tests)
    bool strict = true;        // clamp alpha to the admissibility bound
    bool appendix_variant = false;
  };

  StepSchedule() = default;
  StepSchedule(Regime regime, SmoothnessSpec spec, Params params)
      : regime_(regime), spec_(std::move(spec)), params_(params) {
    require_probability(params_.p);
    spec_.validate();
  }

  Regime regime() const { return regime_; }
  double p() const { return params_.p; }
  const Params& params() const { return params_; }
  const SmoothnessSpec& spec() const { return spec_; }
  bool strict() const { return params_.strict; }

  // Regime constants as published, before scaling or clamping.
  StepPair raw(long k) const {
    switch (regime_) {
      case Regime::RgdaConstant: {
        const RgdaSteps s = rgda_constant(spec_, params_.p, params_.appendix_variant);
        return {s.alpha, s.eta};
      }
      case Regime::RsgdaDecreasing:
        return rsgda_decreasing(spec_, params_.p, k, params_.appendix_variant);
      case Regime::RsgdaAs:
        return rsgda_as_steps(spec_, params_.p, params_.zeta, k);
      case Regime::RsgdaFixedPrecision: {
        const FixedPrecisionPlan plan = rsgda_fixed_precision(
            spec_, params_.p, params_.epsilon_target, params_.d0, params_.r0);
        return {plan.alpha, plan.eta};
      }
      case Regime::RsgdaLargeBatch: {
        const LargeBatchPlan plan = rsgda_large_batch(
            spec_, params_.p, params_.epsilon_target, params_.d0, params_.r0);
        return {plan.alpha, plan.eta};
      }
      case Regime::InterpAs:
        return interpolation_steps(spec_, params_.p, InterpVariant::AlmostSure,
                                   params_.zeta, k);
      case Regime::InterpAnytime:
        return interpolation_steps(spec_, params_.p, InterpVariant::Anytime,
                                   params_.zeta, k);
      case Regime::InterpFixed: {
        const FixedPrecisionPlan plan = interpolation_fixed_precision(
            spec_, params_.p, params_.epsilon_target, params_.d0, params_.r0);
        return {plan.alpha, plan.eta};
      }
      case Regime::Custom:
        return {params_.custom_alpha, params_.custom_eta};
    }
    throw ScheduleError("invalid regime");
  }

  // Steps actually handed to the solver: alpha_scale applied, then the strict
  // clamp when enabled.
  //
  // The clamp rescales the whole alpha sequence by the k=0 violation factor
  // rather than taking a per-k min with the bound: the violation factor of
  // every built-in regime is largest at k=0 and non-increasing afterwards, so
  // the rescale keeps alpha_k admissible at every k while preserving the
  // monotonicity of alpha_k and alpha_k/eta_k that the one-step inequality
  // also requires (a per-k min would make alpha_k/eta_k increase over the
  // clamped prefix).
  StepPair at(long k) const {
    StepPair s = raw(k);
    s.alpha *= params_.alpha_scale;
    if (params_.strict) {
      const double vf0 = violation_factor(0);
      if (vf0 > 1.0) s.alpha /= vf0;
    }
    return s;
  }

  // Ratio of the unclamped alpha to the admissibility bound at index k;
  // > 1 means the published constant alone would violate the bound.
  double violation_factor(long k) const {
    StepPair s = raw(k);
    s.alpha *= params_.alpha_scale;
    return s.alpha / admissible_alpha_bound(spec_, params_.p, s.eta);
  }

private:
  Regime regime_ = Regime::RgdaConstant;
  SmoothnessSpec spec_;
  Params params_;
};

} // namespace saddle
