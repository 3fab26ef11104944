#pragma once

// Finite sum whose components share one inner maximizer:
//
//   F_i(theta, v) = f_i(theta) + theta' B v - mu/2 ||v||^2,
//   f_i(theta)    = 1/2 theta' Q theta + c_i' theta,  mean_i c_i = 0.
//
// Every component has the same v-gradient B' theta - mu v, so
// v*(theta) = B' theta / mu is shared and the ascent noise vanishes there
// (sigma_tilde = 0), while the c_i spread keeps the descent noise positive:
// sigma^2 = mean_i ||c_i||^2 exactly, uniformly in (theta, v).

#include <utility>
#include <vector>

#include "saddle/problems/quadratic.hpp"

namespace saddle {

class InterpolatingFiniteSum : public ProblemOracle {
public:
  InterpolatingFiniteSum(QuadraticSaddle base, Mat shifts)
      : base_(std::move(base)), shifts_(std::move(shifts)) {
    if (shifts_.rows() != base_.theta_dim())
      throw SpecError("InterpolatingFiniteSum: shift dimension mismatch");
    if (shifts_.cols() < 2)
      throw SpecError("InterpolatingFiniteSum: need at least 2 components");
    const Vec mean = shifts_.rowwise().mean();
    if (mean.norm() > 1e-10 * (1.0 + shifts_.norm()))
      throw SpecError("InterpolatingFiniteSum: component shifts must average to 0");
    sigma_sq_ = shifts_.squaredNorm() / static_cast<double>(shifts_.cols());
  }

  // base quadratic plus n_components mean-zero shifts scaled so that the
  // component gradient variance is exactly sigma_sq
  static InterpolatingFiniteSum make(QuadraticSaddle base, int n_components,
                                     double sigma_sq, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "interp-shifts"));
    Mat shifts(base.theta_dim(), n_components);
    for (int j = 0; j < n_components; ++j)
      shifts.col(j) = rng.gaussian_vec(base.theta_dim());
    shifts.colwise() -= Vec(shifts.rowwise().mean());
    const double now = shifts.squaredNorm() / static_cast<double>(n_components);
    shifts *= std::sqrt(sigma_sq / now);
    return InterpolatingFiniteSum(std::move(base), std::move(shifts));
  }

  Eigen::Index theta_dim() const override { return base_.theta_dim(); }
  Eigen::Index v_dim() const override { return base_.v_dim(); }
  int n_components() const { return static_cast<int>(shifts_.cols()); }

  CapabilityMask capabilities() const override { return base_.capabilities(); }

  SmoothnessSpec smoothness() const override {
    SmoothnessSpec s = base_.smoothness();
    s.sigma_sq = sigma_sq_;
    s.sigma_tilde_sq = 0.0;  // shared maximizer: every component is flat there
    s.sigma_bar_sq = sigma_sq_;
    return s;
  }

  // gradient of one component
  void component_grad(int i, const Vec& theta, const Vec& v, Vec& g_theta,
                      Vec& g_v) const {
    base_.exact_grad(theta, v, g_theta, g_v);
    g_theta += shifts_.col(i);
  }

  void stoch_grad(const Vec& theta, const Vec& v, int batch, RngStreams& rng,
                  Vec* g_theta, Vec* g_v) const override {
    // indices are always drawn so stream positions do not depend on which
    // outputs were requested
    Vec shift = Vec::Zero(theta.size());
    for (int b = 0; b < batch; ++b) {
      const auto i = rng.sample.uniform_index(static_cast<std::uint64_t>(shifts_.cols()));
      shift += shifts_.col(static_cast<Eigen::Index>(i));
    }
    shift /= static_cast<double>(batch);
    Vec gt, gv;
    base_.exact_grad(theta, v, gt, gv);
    if (g_theta) *g_theta = gt + shift;
    if (g_v) *g_v = gv;
  }

  void exact_grad(const Vec& theta, const Vec& v, Vec& g_theta, Vec& g_v) const override {
    base_.exact_grad(theta, v, g_theta, g_v);
  }
  double exact_value(const Vec& theta, const Vec& v) const override {
    return base_.exact_value(theta, v);
  }
  double exact_phi(const Vec& theta) const override { return base_.exact_phi(theta); }
  Vec exact_vstar(const Vec& theta) const override { return base_.exact_vstar(theta); }
  Vec exact_grad_phi(const Vec& theta) const override {
    return base_.exact_grad_phi(theta);
  }
  double min_phi() const override { return base_.min_phi(); }
  Vec initial_theta() const override { return base_.initial_theta(); }

  const QuadraticSaddle& base() const { return base_; }

private:
  QuadraticSaddle base_;
  Mat shifts_;
  double sigma_sq_ = 0.0;
};

} // namespace saddle
