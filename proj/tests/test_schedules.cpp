#include <doctest.h>

#include <cmath>

#include "saddle/schedules.hpp"

using namespace saddle;

namespace {
SmoothnessSpec unit_spec(double sigma_sq = 1.0, double sigma_tilde_sq = 1.0) {
  SmoothnessSpec s;
  s.L = 1.0;
  s.mu = 1.0;
  s.sigma_sq = sigma_sq;
  s.sigma_tilde_sq = sigma_tilde_sq;
  return s;
}
} // namespace

TEST_CASE("admissibility bound: closed-form values") {
  const auto spec = unit_spec();
  // (1-p) eta / (4 kappa^2 sqrt(p(2p+(1-p) eta mu))) at p=1/2, eta=1/2
  // = 0.25 / (4 sqrt(0.625)) = 0.25 / sqrt(10)
  const auto res = check_step_admissibility(spec, 0.5, 0.01, 0.5);
  CHECK(res.ok);
  CHECK(res.alpha_bound == doctest::Approx(0.07905694150420949).epsilon(1e-12));
  CHECK(res.margin == doctest::Approx(7.905694150420949).epsilon(1e-12));
}

TEST_CASE("admissibility bound: eta above 1/(2L) fails") {
  const auto res = check_step_admissibility(unit_spec(), 0.5, 0.01, 0.6);
  CHECK_FALSE(res.ok);
  CHECK_FALSE(res.eta_ok);
}

TEST_CASE("admissibility bound: alpha equal to the bound passes with margin 1") {
  const auto spec = unit_spec();
  const double eta = 0.5;
  const double bound = admissible_alpha_bound(spec, 0.5, eta);
  const auto res = check_step_admissibility(spec, 0.5, bound, eta);
  CHECK(res.ok);
  CHECK(res.margin == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("constant-step randomized GDA: main-text values") {
  const auto steps = rgda_constant(unit_spec(), 0.5);
  CHECK(steps.eta == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(steps.alpha == doctest::Approx(0.15811388300841897).epsilon(1e-12));
  CHECK_FALSE(steps.rate_constant_degrades);
}

TEST_CASE("constant-step randomized GDA: p at the boundary is rejected, degraded p flagged") {
  CHECK_THROWS_AS(rgda_constant(unit_spec(), 1.0), ScheduleError);
  CHECK_THROWS_AS(rgda_constant(unit_spec(), 0.0), ScheduleError);
  // kappa = 2: best range is [1/2, 1/2]; p = 0.1 is below it
  SmoothnessSpec spec = unit_spec();
  spec.L = 2.0;
  CHECK(rgda_constant(spec, 0.1).rate_constant_degrades);
  CHECK_FALSE(rgda_constant(spec, 0.5).rate_constant_degrades);
}

TEST_CASE("constant-step randomized GDA: L scaling") {
  SmoothnessSpec spec = unit_spec();
  spec.L = 2.0;
  spec.mu = 1.0;  // kappa = 2
  const auto steps = rgda_constant(spec, 0.5);
  CHECK(steps.eta == doctest::Approx(0.25).epsilon(1e-15));
  // same closed form, kappa = 2
  const double expect =
      0.5 / (4.0 * 4.0 * 2.0 * std::sqrt(0.5 * (1.0 + 0.5 / 4.0)));
  CHECK(steps.alpha == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("decreasing schedule: first step matches the constant-step value") {
  const auto s0 = rsgda_decreasing(unit_spec(), 0.5, 0);
  CHECK(s0.eta == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s0.alpha == doctest::Approx(0.15811388300841897).epsilon(1e-12));
}

TEST_CASE("decreasing schedule: eta shrinks by 4^{2/5} when k+1 quadruples") {
  const auto spec = unit_spec();
  for (long k : {0L, 9L, 999L}) {
    const auto a = rsgda_decreasing(spec, 0.5, k);
    const auto b = rsgda_decreasing(spec, 0.5, 4 * k + 3);  // k+1 -> 4(k+1)
    CHECK(a.eta / b.eta == doctest::Approx(std::pow(4.0, 0.4)).epsilon(1e-12));
  }
}

TEST_CASE("decreasing schedule: alpha, eta and alpha/eta are non-increasing") {
  for (double p : {0.3, 0.5, 0.7}) {
    for (double L : {1.0, 5.0}) {
      SmoothnessSpec spec = unit_spec();
      spec.L = L;
      double prev_alpha = 1e300, prev_eta = 1e300, prev_ratio = 1e300;
      long k = 0;
      long stride = 1;
      while (k <= 100000) {
        const auto s = rsgda_decreasing(spec, p, k);
        CHECK(s.alpha <= prev_alpha * (1 + 1e-15));
        CHECK(s.eta <= prev_eta * (1 + 1e-15));
        CHECK(s.alpha / s.eta <= prev_ratio * (1 + 1e-15));
        prev_alpha = s.alpha;
        prev_eta = s.eta;
        prev_ratio = s.alpha / s.eta;
        k += stride;
        if (k > 100) stride = 7;
        if (k > 10000) stride = 131;
      }
    }
  }
}

TEST_CASE("almost-sure schedule: summability bookkeeping by exponents") {
  // zeta = 0.1: alpha exponent -0.7 -> sum diverges, squares converge
  auto r = rsgda_as_summability(0.1, true, true);
  CHECK(r.sum_alpha_diverges);
  CHECK(r.sum_alpha_sq_finite);
  CHECK(r.sum_eta_alpha_finite);
  CHECK(r.sum_alpha3_over_eta2_finite);
  CHECK(r.all());

  // zeta = 0: eta*alpha exponent is exactly -1, the borderline divergent case
  r = rsgda_as_summability(0.0, true, true);
  CHECK_FALSE(r.sum_eta_alpha_finite);
  CHECK_FALSE(r.all());

  // no v-noise: the eta*alpha condition is vacuous
  r = rsgda_as_summability(0.0, true, false);
  CHECK(r.sum_eta_alpha_finite);
}

TEST_CASE("almost-sure schedule: zeta must be positive, k=0 matches decreasing") {
  CHECK_THROWS_AS(rsgda_as_steps(unit_spec(), 0.5, 0.0, 0), ScheduleError);
  CHECK_THROWS_AS(rsgda_as_steps(unit_spec(), 0.5, -0.1, 0), ScheduleError);
  const auto as = rsgda_as_steps(unit_spec(), 0.5, 0.3, 0);
  const auto dec = rsgda_decreasing(unit_spec(), 0.5, 0);
  CHECK(as.alpha == doctest::Approx(dec.alpha).epsilon(1e-15));
  CHECK(as.eta == doctest::Approx(dec.eta).epsilon(1e-15));
}

TEST_CASE("fixed-precision plan: eta formula and scaling") {
  const auto spec = unit_spec();
  const auto plan = rsgda_fixed_precision(spec, 0.5, 0.1, 1.0, 1.0);
  CHECK(plan.eta == doctest::Approx(0.01 / 24.0).epsilon(1e-14));

  // alpha = lead * min of the four bracketed terms; at these values the
  // second term wins: (1-p)/p * eps^3/(48 sqrt(3) kappa^3 L sigma^3)
  const double lead = 0.01 / 12.0;
  const double t2 = 1.0 * 1e-3 / (48.0 * std::sqrt(3.0));
  CHECK(plan.alpha == doctest::Approx(lead * t2).epsilon(1e-12));
  CHECK(plan.alpha == doctest::Approx(1.0023442173852852e-08).epsilon(1e-9));
  CHECK(plan.k_min > 0.0);

  // halving eps quarters eta exactly
  const auto plan2 = rsgda_fixed_precision(spec, 0.5, 0.05, 1.0, 1.0);
  CHECK(plan2.eta == doctest::Approx(plan.eta / 4.0).epsilon(1e-13));
}

TEST_CASE("fixed-precision plan: noiseless problems are redirected") {
  auto spec = unit_spec(0.0, 0.0);
  CHECK_THROWS_WITH_AS(rsgda_fixed_precision(spec, 0.5, 0.1, 1.0, 1.0),
                       doctest::Contains("rgda_constant"), ScheduleError);
}

TEST_CASE("large-batch plan: batch size and budget") {
  SmoothnessSpec spec = unit_spec();

  SUBCASE("missing sigma_bar is an error") {
    CHECK_THROWS_AS(rsgda_large_batch(spec, 0.5, 0.1, 1.0, 1.0), ScheduleError);
  }

  spec.sigma_bar_sq = 0.0;
  SUBCASE("no noise reduces to the deterministic budget") {
    const auto plan = rsgda_large_batch(spec, 0.5, 0.1, 1.0, 1.0);
    CHECK(plan.batch_size == 1);
    CHECK(plan.total_oracle_budget == doctest::Approx(plan.iterations));
  }

  spec.sigma_bar_sq = 1.0;
  SUBCASE("unit-noise closed form") {
    const auto plan = rsgda_large_batch(spec, 0.5, 0.1, 1.0, 1.0);
    // 2 kappa sbar^2 ((1-p)/(2 kappa^2 sqrt(p(2p+(1-p)/(2 kappa)))) + 4) / (eps^2/2)
    const double coeff = 2.0 * (0.5 / (2.0 * std::sqrt(0.5 * 1.25)) + 4.0);
    CHECK(plan.batch_size == static_cast<long>(std::ceil(coeff / 0.005)));
    CHECK(plan.batch_size == 1727);
    CHECK(plan.total_oracle_budget ==
          doctest::Approx(static_cast<double>(plan.batch_size) * plan.iterations));
  }

  SUBCASE("doubling the variance doubles the batch size up to rounding") {
    const auto plan1 = rsgda_large_batch(spec, 0.5, 0.1, 1.0, 1.0);
    spec.sigma_bar_sq = 2.0;
    const auto plan2 = rsgda_large_batch(spec, 0.5, 0.1, 1.0, 1.0);
    CHECK(std::abs(plan2.batch_size - 2 * plan1.batch_size) <= 1);
  }
}

TEST_CASE("interpolation schedule: anytime first step") {
  const auto s = interpolation_steps(unit_spec(), 0.5, InterpVariant::Anytime, 0.0, 0);
  CHECK(s.eta == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.alpha == doctest::Approx(0.15811388300841897).epsilon(1e-12));
}

TEST_CASE("interpolation schedule: a.s. variant needs zeta > 0 and is square-summable") {
  CHECK_THROWS_AS(interpolation_steps(unit_spec(), 0.5, InterpVariant::AlmostSure, 0.0, 0),
                  ScheduleError);
  const auto r = interp_as_summability(0.1, true);
  CHECK(r.sum_alpha_diverges);
  CHECK(r.sum_alpha_sq_finite);
  CHECK(r.all());
}

TEST_CASE("interpolation fixed-precision: four-way minimum") {
  const auto spec = unit_spec();
  const auto plan = interpolation_fixed_precision(spec, 0.5, 0.1, 1.0, 0.0);
  CHECK(plan.eta == doctest::Approx(0.5).epsilon(1e-15));
  const double t1 = 0.01 / 10.0;
  const double t2 = 0.5 * 0.1 / (2.0 * std::sqrt(10.0) * 0.5);
  const double t3 = 1.0 * 0.01 / (2.0 * std::sqrt(5.0));
  const double t4 = 0.5 / (8.0 * std::sqrt(0.5 * (1.0 + 0.5)));
  CHECK(plan.alpha == doctest::Approx(std::min({t1, t2, t3, t4})).epsilon(1e-13));
  CHECK(plan.k_min > 0.0);
}

TEST_CASE("strict mode clamps the published constants to the admissibility bound") {
  const auto spec = unit_spec();
  StepSchedule::Params params;
  params.p = 0.5;

  SUBCASE("constant regime violates by exactly 2") {
    params.strict = false;
    StepSchedule loose(Regime::RgdaConstant, spec, params);
    CHECK(loose.violation_factor(0) == doctest::Approx(2.0).epsilon(1e-12));

    params.strict = true;
    StepSchedule strict(Regime::RgdaConstant, spec, params);
    const auto s = strict.at(0);
    CHECK(check_step_admissibility(spec, 0.5, s.alpha, s.eta).ok);
    CHECK(s.alpha == doctest::Approx(loose.at(0).alpha / 2.0).epsilon(1e-12));
  }

  SUBCASE("decreasing regime violates by 2 (k+1)^{-1/5}, worst at k = 0") {
    params.strict = false;
    StepSchedule sched(Regime::RsgdaDecreasing, spec, params);
    for (long k : {0L, 10L, 1000L, 100000L}) {
      const double expect = 2.0 * std::pow(static_cast<double>(k) + 1.0, -0.2);
      CHECK(sched.violation_factor(k) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("violation factors are non-increasing in k for every regime") {
    params.strict = false;
    SmoothnessSpec s = spec;
    s.L = 3.0;
    s.sigma_bar_sq = 1.0;
    for (Regime regime : {Regime::RgdaConstant, Regime::RsgdaDecreasing,
                          Regime::RsgdaAs, Regime::InterpAs, Regime::InterpAnytime}) {
      StepSchedule sched(regime, s, params);
      double prev = 1e300;
      for (long k = 0; k <= 4096; k = (k == 0 ? 1 : 4 * k)) {
        CHECK(sched.violation_factor(k) <= prev * (1 + 1e-14));
        prev = sched.violation_factor(k);
      }
    }
  }

  SUBCASE("anytime interpolation regime violates by kappa^2/(1-p)") {
    SmoothnessSpec s5 = spec;
    s5.L = 5.0;  // kappa = 5
    params.strict = false;
    StepSchedule sched(Regime::InterpAnytime, s5, params);
    CHECK(sched.violation_factor(0) == doctest::Approx(25.0 / 0.5).epsilon(1e-12));
  }
}

TEST_CASE("every strict schedule emits admissible, monotone steps") {
  SmoothnessSpec spec = unit_spec();
  spec.L = 2.5;
  spec.mu = 0.5;
  StepSchedule::Params params;
  params.p = 0.4;
  params.zeta = 0.1;
  params.epsilon_target = 0.3;
  params.d0 = 2.0;
  params.r0 = 1.0;
  spec.sigma_bar_sq = 1.0;

  for (Regime regime : {Regime::RgdaConstant, Regime::RsgdaDecreasing, Regime::RsgdaAs,
                        Regime::RsgdaFixedPrecision, Regime::RsgdaLargeBatch,
                        Regime::InterpAs, Regime::InterpAnytime, Regime::InterpFixed}) {
    const std::string name = regime_name(regime);
    CAPTURE(name);
    StepSchedule sched(regime, spec, params);
    double prev_alpha = 1e300, prev_eta = 1e300, prev_ratio = 1e300;
    for (long k = 0; k <= 100000; k += (k < 100 ? 1 : 997)) {
      const auto s = sched.at(k);
      const auto adm = check_step_admissibility(spec, params.p, s.alpha, s.eta);
      CHECK(adm.ok);
      CHECK(s.alpha <= prev_alpha * (1 + 1e-15));
      CHECK(s.eta <= prev_eta * (1 + 1e-15));
      CHECK(s.alpha / s.eta <= prev_ratio * (1 + 1e-14));
      prev_alpha = s.alpha;
      prev_eta = s.eta;
      prev_ratio = s.alpha / s.eta;
    }
  }
}

TEST_CASE("scaling L and mu together fixes kappa and scales eta by 1/c") {
  SmoothnessSpec spec = unit_spec();
  const auto base = rgda_constant(spec, 0.4);
  SmoothnessSpec scaled = spec;
  scaled.L *= 8.0;
  scaled.mu *= 8.0;
  const auto s = rgda_constant(scaled, 0.4);
  CHECK(scaled.kappa() == doctest::Approx(spec.kappa()));
  CHECK(s.eta == doctest::Approx(base.eta / 8.0).epsilon(1e-14));
  CHECK(s.alpha == doctest::Approx(base.alpha / 8.0).epsilon(1e-14));
}

TEST_CASE("regime names round-trip") {
  for (Regime r : {Regime::RgdaConstant, Regime::RsgdaDecreasing, Regime::RsgdaAs,
                   Regime::RsgdaFixedPrecision, Regime::RsgdaLargeBatch,
                   Regime::InterpAs, Regime::InterpAnytime, Regime::InterpFixed,
                   Regime::Custom})
    CHECK(regime_from_name(regime_name(r)) == r);
  CHECK_THROWS_AS(regime_from_name("bogus"), ScheduleError);
}
