#pragma once

// Sinkhorn matrix scaling with the all-ones marginal normalization:
//
//   K_ij = exp(-C_ij / eps),  a <- 1_m ./ (K b),  b <- 1_n ./ (K' a).
//
// Each a-update enforces a .* (K b) = 1 exactly (up to rounding); that
// residual is tracked every iteration. Kernel-domain iteration by default; a
// max-shifted log-domain evaluation of the same recursion is selected
// automatically when eps < 0.05 * median(C), where the kernel would
// underflow. Potentials f = eps log a, g = eps log b are carried in both
// modes so warm starts and scalings stay available even when the scalings
// themselves would overflow.
//
// The reported value is the entropic transport objective of the normalized
// plan against uniform marginals, shifted by the same +/- eps convention
// constant as the semi-dual h, so the two routes to the value are comparable.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "saddle/ot/semidual.hpp"
#include "saddle/types.hpp"

namespace saddle {

struct SinkhornError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SinkhornDomain { Auto, Kernel, Log };

struct SinkhornResult {
  Vec f;  // eps log a, size m
  Vec g;  // eps log b, size n
  Vec a;  // kernel-domain scalings (exp(f/eps); may overflow for tiny eps)
  Vec b;
  Mat plan;  // normalized to total mass 1
  int iterations = 0;
  bool used_log_domain = false;
  double max_marginal_residual = 0.0;  // max_i |a_i (K b)_i - 1| per a-update

  double transport_cost = 0.0;  // sum P C
  double kl = 0.0;              // KL(P | uniform x uniform)

  double value(double eps, HConvention conv = HConvention::MainText) const {
    return transport_cost + eps * kl + h_offset(conv, eps);
  }

  // sup-norm distance of the normalized plan's marginals from uniform
  double marginal_error() const {
    const Eigen::Index m = plan.rows(), n = plan.cols();
    const double row = (plan.rowwise().sum().array() - 1.0 / static_cast<double>(m))
                           .abs()
                           .maxCoeff();
    const double col = (plan.colwise().sum().array() - 1.0 / static_cast<double>(n))
                           .abs()
                           .maxCoeff();
    return std::max(row, col);
  }
};

namespace detail {

inline double median_of(const Mat& c) {
  std::vector<double> vals(c.data(), c.data() + c.size());
  const auto mid = vals.begin() + vals.size() / 2;
  std::nth_element(vals.begin(), mid, vals.end());
  return *mid;
}

// log sum_j exp(x_j), max-shifted
inline double lse(const Vec& x) {
  const double shift = x.maxCoeff();
  return shift + std::log((x.array() - shift).exp().sum());
}

} // namespace detail

inline SinkhornResult sinkhorn_from_potentials(const Mat& cost, double eps,
                                               int iterations, const Vec* f0,
                                               const Vec* g0,
                                               SinkhornDomain domain) {
  if (!(eps > 0.0)) throw SinkhornError("sinkhorn: eps must be > 0");
  if (iterations < 1) throw SinkhornError("sinkhorn: need at least one iteration");
  const Eigen::Index m = cost.rows(), n = cost.cols();

  SinkhornResult res;
  res.f = f0 ? *f0 : Vec::Zero(m);
  res.g = g0 ? *g0 : Vec::Zero(n);
  if (!res.f.allFinite() || !res.g.allFinite())
    throw SinkhornError("sinkhorn: warm-start scalings must be positive and finite");

  bool use_log = domain == SinkhornDomain::Log;
  if (domain == SinkhornDomain::Auto)
    use_log = eps < 0.05 * detail::median_of(cost);
  res.used_log_domain = use_log;

  // The all-ones normalization has no joint fixed point when m != n (the two
  // marginal sums disagree), so the raw scalings drift geometrically along the
  // gauge direction (a, b) -> (a/c, c b) while the plan stays put. Pinning
  // mean(g) to zero after each iteration removes the drift; the plan, the
  // enforced marginal identity and everything derived from v up to a constant
  // shift are invariant to it.
  auto recenter = [&res]() {
    const double c = res.g.mean();
    res.g.array() -= c;
    res.f.array() += c;
  };

  if (!use_log) {
    const Mat kernel = (-cost / eps).array().exp();
    // an all-denormal row or column cannot be rescaled faithfully in the
    // kernel domain
    const double row_floor = kernel.rowwise().maxCoeff().minCoeff();
    const double col_floor = kernel.colwise().maxCoeff().minCoeff();
    if (std::min(row_floor, col_floor) < 1e-300)
      throw SinkhornError(
          "sinkhorn: kernel underflows at this eps/cost scale; use the "
          "log-domain mode");
    Vec a = (res.f / eps).array().exp();
    Vec b = (res.g / eps).array().exp();
    for (int it = 0; it < iterations; ++it) {
      const Vec kb = kernel * b;
      a = kb.cwiseInverse();
      if (!a.allFinite())
        throw SinkhornError(
            "sinkhorn: kernel-domain scaling overflowed (eps too small for "
            "this cost scale); use the log-domain mode");
      res.max_marginal_residual =
          std::max(res.max_marginal_residual,
                   (a.cwiseProduct(kb).array() - 1.0).abs().maxCoeff());
      b = (kernel.transpose() * a).cwiseInverse();
      if (!b.allFinite())
        throw SinkhornError(
            "sinkhorn: kernel-domain scaling overflowed (eps too small for "
            "this cost scale); use the log-domain mode");
      res.f = eps * a.array().log();
      res.g = eps * b.array().log();
      recenter();
      a = (res.f / eps).array().exp();
      b = (res.g / eps).array().exp();
      ++res.iterations;
    }
    res.a = a;
    res.b = b;
  } else {
    for (int it = 0; it < iterations; ++it) {
      for (Eigen::Index i = 0; i < m; ++i)
        res.f[i] = -eps * detail::lse((res.g - cost.row(i).transpose()) / eps);
      // residual of the enforced row identity, evaluated in the log domain
      double resid = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double row =
            std::exp(detail::lse((res.f[i] + res.g.array() - cost.row(i).transpose().array()).matrix() / eps));
        resid = std::max(resid, std::abs(row - 1.0));
      }
      res.max_marginal_residual = std::max(res.max_marginal_residual, resid);
      for (Eigen::Index j = 0; j < n; ++j)
        res.g[j] = -eps * detail::lse((res.f - cost.col(j)) / eps);
      recenter();
      ++res.iterations;
    }
    res.a = (res.f / eps).array().exp();
    res.b = (res.g / eps).array().exp();
  }

  // normalized plan and objective, computed stably from the potentials
  Mat expo = (-cost).rowwise() + res.g.transpose();
  expo.colwise() += res.f;
  expo /= eps;
  const double shift = expo.maxCoeff();
  res.plan = (expo.array() - shift).exp();
  res.plan /= res.plan.sum();

  res.transport_cost = (res.plan.array() * cost.array()).sum();
  const double mn = static_cast<double>(m) * static_cast<double>(n);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = res.plan(i, j);
      if (p > 0.0) kl += p * std::log(p * mn);
    }
  res.kl = kl;
  return res;
}

// Warm start expressed as positive scalings, matching the algorithm box.
inline SinkhornResult sinkhorn(const Mat& cost, double eps, int iterations,
                               const Vec* a0 = nullptr, const Vec* b0 = nullptr,
                               SinkhornDomain domain = SinkhornDomain::Auto) {
  Vec f0, g0;
  if (a0) f0 = eps * a0->array().log();
  if (b0) g0 = eps * b0->array().log();
  return sinkhorn_from_potentials(cost, eps, iterations, a0 ? &f0 : nullptr,
                                  b0 ? &g0 : nullptr, domain);
}

// Iterate until the normalized plan's marginals are uniform to tolerance.
inline SinkhornResult sinkhorn_to_tolerance(const Mat& cost, double eps, double tol,
                                            int max_iterations = 100000,
                                            SinkhornDomain domain = SinkhornDomain::Auto) {
  SinkhornResult res;
  Vec f, g;
  const Vec *pf = nullptr, *pg = nullptr;
  int done = 0;
  int chunk = 32;
  while (done < max_iterations) {
    const int todo = std::min(chunk, max_iterations - done);
    res = sinkhorn_from_potentials(cost, eps, todo, pf, pg, domain);
    done += todo;
    res.iterations = done;
    if (res.marginal_error() <= tol) return res;
    f = res.f;
    g = res.g;
    pf = &f;
    pg = &g;
    chunk = std::min(2 * chunk, 4096);
  }
  return res;
}

} // namespace saddle
