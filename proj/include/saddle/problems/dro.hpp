#pragma once

// Distributionally robust logistic regression on a small synthetic dataset.
//
//   F(theta, v) = 1/n sum_j [ loss(f_theta(v_j), y_j) - gamma ||v_j - x_j||^2 ]
//
// theta = (w, b) is a binary logistic classifier, v stacks one adversarial
// input v_j per training point, and gamma prices the adversary's distance to
// the data. loss is the smooth logistic loss; for 2 gamma > sup loss'' ||w||^2
// the inner problem is strongly concave, and separability across j makes the
// per-sample v-gradients vanish at the shared maximizer (the interpolation
// property).
//
// No closed-form phi or v* exists; phi is evaluated on demand by per-sample
// Newton ascent (each 2-d block is concave inside the trust region on w).
// The smoothness constants are numerically estimated over a stated region
// ||w|| <= w_region at construction; the instance is rejected when the
// implied strong-concavity modulus mu = (2 gamma - w_region^2/4)/n is not
// positive.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "saddle/core.hpp"

namespace saddle {

struct DroDataset {
  Mat x;  // n x p feature rows
  Vec y;  // labels in {-1, +1}

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index feature_dim() const { return x.cols(); }
};

// Two Gaussian blobs in 2-d, one per class.
inline DroDataset make_blobs(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "dro-blobs"));
  DroDataset data;
  data.x.resize(n, 2);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    const double cx = label * 1.0;
    const double cy = label * 0.6;
    data.x(i, 0) = cx + 0.8 * rng.gaussian();
    data.x(i, 1) = cy + 0.8 * rng.gaussian();
    data.y[i] = label;
  }
  return data;
}

inline void save_dataset_csv(const DroDataset& data, const std::string& path);
inline DroDataset load_dataset_csv(const std::string& path);

class ToyDro : public ProblemOracle {
public:
  ToyDro(DroDataset data, double gamma, double w_region = 3.0)
      : data_(std::move(data)), gamma_(gamma), w_region_(w_region) {
    if (data_.size() < 2) throw SpecError("ToyDro: dataset too small");
    n_ = data_.size();
    p_ = data_.feature_dim();
    mu_ = (2.0 * gamma_ - w_region_ * w_region_ / 4.0) / static_cast<double>(n_);
    if (mu_ <= 0.0)
      throw SpecError("ToyDro: gamma too small for strong concavity on "
                      "||w|| <= " + std::to_string(w_region_));
    estimate_constants();
  }

  Eigen::Index theta_dim() const override { return p_ + 1; }  // (w, b)
  Eigen::Index v_dim() const override { return n_ * p_; }

  CapabilityMask capabilities() const override {
    return Capability::StochGradTheta | Capability::StochGradV |
           Capability::ExactGrad;
  }

  SmoothnessSpec smoothness() const override {
    SmoothnessSpec s;
    s.L = L_hat_;
    s.mu = mu_;
    s.sigma_sq = sigma_sq_hat_;
    s.sigma_tilde_sq = 0.0;  // separable components share their maximizer
    return s;
  }

  double gamma() const { return gamma_; }
  const DroDataset& dataset() const { return data_; }

  // v stacked row-major: block j occupies [j*p, (j+1)*p)
  Eigen::Index block_offset(Eigen::Index j) const { return j * p_; }

  Vec initial_v() const override {
    Vec v(v_dim());
    for (Eigen::Index j = 0; j < n_; ++j)
      v.segment(block_offset(j), p_) = data_.x.row(j).transpose();
    return v;
  }

  void exact_grad(const Vec& theta, const Vec& v, Vec& g_theta, Vec& g_v) const override {
    g_theta = Vec::Zero(theta_dim());
    g_v.resize(v_dim());
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const auto vj = v.segment(block_offset(j), p_);
      const double lp = loss_prime(theta, vj, data_.y[j]);
      g_theta.head(p_) += inv_n * lp * vj;
      g_theta[p_] += inv_n * lp;
      g_v.segment(block_offset(j), p_) =
          inv_n * (lp * theta.head(p_) -
                   2.0 * gamma_ * (vj - data_.x.row(j).transpose()));
    }
  }

  double exact_value(const Vec& theta, const Vec& v) const override {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      const auto vj = v.segment(block_offset(j), p_);
      acc += loss(theta, vj, data_.y[j]) -
             gamma_ * (vj - data_.x.row(j).transpose()).squaredNorm();
    }
    return acc / static_cast<double>(n_);
  }

  // Minibatch with replacement; the sampled index also selects the v-block,
  // scaled to stay unbiased for grad_v F. Index draws happen regardless of
  // which outputs are requested.
  void stoch_grad(const Vec& theta, const Vec& v, int batch, RngStreams& rng,
                  Vec* g_theta, Vec* g_v) const override {
    std::vector<Eigen::Index> idx(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b)
      idx[static_cast<size_t>(b)] = static_cast<Eigen::Index>(
          rng.sample.uniform_index(static_cast<std::uint64_t>(n_)));
    if (g_theta) *g_theta = Vec::Zero(theta_dim());
    if (g_v) *g_v = Vec::Zero(v_dim());
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (const Eigen::Index j : idx) {
      const auto vj = v.segment(block_offset(j), p_);
      const double lp = loss_prime(theta, vj, data_.y[j]);
      if (g_theta) {
        g_theta->head(p_) += inv_b * lp * vj;
        (*g_theta)[p_] += inv_b * lp;
      }
      if (g_v) {
        g_v->segment(block_offset(j), p_) +=
            inv_b * (lp * theta.head(p_) -
                     2.0 * gamma_ * (vj - data_.x.row(j).transpose()));
      }
    }
  }

  // Gradient of the j-th summand f_j = loss_j - gamma ||v_j - x_j||^2.
  void sample_grad(Eigen::Index j, const Vec& theta, const Vec& v, Vec& g_theta,
                   Vec& g_v_block) const {
    const auto vj = v.segment(block_offset(j), p_);
    const double lp = loss_prime(theta, vj, data_.y[j]);
    g_theta.resize(theta_dim());
    g_theta.head(p_) = lp * vj;
    g_theta[p_] = lp;
    g_v_block = lp * theta.head(p_) - 2.0 * gamma_ * (vj - data_.x.row(j).transpose());
  }

  // phi(theta) by running each 2-d inner maximization to tolerance with
  // damped Newton ascent (unique maximizer while 2 gamma > loss'' ||w||^2).
  double approx_phi(const Vec& theta, double tol = 1e-11, Vec* vstar_out = nullptr) const {
    double acc = 0.0;
    Vec vstar(v_dim());
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Vec vj = maximize_block(theta, j, tol);
      vstar.segment(block_offset(j), p_) = vj;
      acc += loss(theta, vj, data_.y[j]) -
             gamma_ * (vj - data_.x.row(j).transpose()).squaredNorm();
    }
    if (vstar_out) *vstar_out = vstar;
    return acc / static_cast<double>(n_);
  }

  double loss(const Vec& theta, const Eigen::Ref<const Vec>& input, double label) const {
    const double s = theta.head(p_).dot(input) + theta[p_];
    return softplus(-label * s);
  }

  double loss_prime(const Vec& theta, const Eigen::Ref<const Vec>& input,
                    double label) const {
    const double s = theta.head(p_).dot(input) + theta[p_];
    return -label * logistic(-label * s);
  }

  double loss_second(const Vec& theta, const Eigen::Ref<const Vec>& input,
                     double label) const {
    const double s = theta.head(p_).dot(input) + theta[p_];
    const double sig = logistic(label * s);
    return sig * (1.0 - sig);
  }

  static double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  static double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }

private:
  Vec maximize_block(const Vec& theta, Eigen::Index j, double tol) const {
    const Vec xj = data_.x.row(j).transpose();
    const Vec w = theta.head(p_);
    Vec vj = xj;
    double gnorm = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double lp = loss_prime(theta, vj, data_.y[j]);
      const Vec grad = lp * w - 2.0 * gamma_ * (vj - xj);
      gnorm = grad.norm();
      if (gnorm <= tol) break;
      const double lpp = loss_second(theta, vj, data_.y[j]);
      // H = lpp w w' - 2 gamma I, inverted via Sherman-Morrison
      const double c = -2.0 * gamma_;
      const double denom = 1.0 + lpp * w.squaredNorm() / c;
      Vec step;
      if (denom > 1e-12) {
        step = grad / c - (lpp / (c * denom)) * w * (w.dot(grad) / c);
      } else {
        step = -grad / (2.0 * gamma_);  // fall back to a plain ascent step
      }
      // halve the Newton step until the gradient norm decreases
      Vec trial = vj - step;
      for (int halving = 0; halving < 30; ++halving) {
        const double lt = loss_prime(theta, trial, data_.y[j]);
        const Vec gt = lt * w - 2.0 * gamma_ * (trial - xj);
        if (gt.norm() < gnorm) break;
        step *= 0.5;
        trial = vj - step;
      }
      vj = trial;
    }
    return vj;
  }

  // Numeric constants over the stated region: L from power iterations on the
  // full Hessian (finite differences of the exact gradient) at a few probe
  // points, sigma^2 from the worst sampled minibatch variance.
  void estimate_constants() {
    Rng rng(derive_seed(0xd60, "dro-probes"));
    const Eigen::Index dim = theta_dim() + v_dim();
    double worst_l = 0.0, worst_var = 0.0;
    for (int probe = 0; probe < 6; ++probe) {
      Vec theta(theta_dim());
      theta.head(p_) = rng.gaussian_vec(p_);
      if (theta.head(p_).norm() > w_region_)
        theta.head(p_) *= w_region_ / theta.head(p_).norm();
      theta[p_] = rng.gaussian();
      Vec v = initial_v();
      v += 0.5 * rng.gaussian_vec(v_dim());

      // power iteration on H(theta, v) through central differences
      Vec dir = rng.gaussian_vec(dim);
      dir.normalize();
      double lam = 0.0;
      const double h = 1e-5;
      Vec gp_t, gp_v, gm_t, gm_v;
      for (int it = 0; it < 25; ++it) {
        const Vec tp = theta + h * dir.head(theta_dim());
        const Vec vp = v + h * dir.tail(v_dim());
        const Vec tm = theta - h * dir.head(theta_dim());
        const Vec vm = v - h * dir.tail(v_dim());
        exact_grad(tp, vp, gp_t, gp_v);
        exact_grad(tm, vm, gm_t, gm_v);
        Vec hd(dim);
        hd.head(theta_dim()) = (gp_t - gm_t) / (2.0 * h);
        hd.tail(v_dim()) = (gp_v - gm_v) / (2.0 * h);
        lam = hd.norm();
        if (lam == 0.0) break;
        dir = hd / lam;
      }
      worst_l = std::max(worst_l, lam);

      Vec g(theta_dim()), g_exact, gv_exact;
      exact_grad(theta, v, g_exact, gv_exact);
      RngStreams streams(probe + 1);
      double var = 0.0;
      const int samples = 256;
      for (int s = 0; s < samples; ++s) {
        stoch_grad(theta, v, 1, streams, &g, nullptr);
        var += (g - g_exact).squaredNorm();
      }
      worst_var = std::max(worst_var, var / samples);
    }
    L_hat_ = 1.2 * std::max(worst_l, mu_);
    sigma_sq_hat_ = 1.5 * worst_var;
  }

  DroDataset data_;
  double gamma_ = 1.3;
  double w_region_ = 3.0;
  Eigen::Index n_ = 0, p_ = 0;
  double mu_ = 0.0;
  double L_hat_ = 1.0;
  double sigma_sq_hat_ = 0.0;
};

// CSV layout: one row per point, feature columns then the label.
inline void save_dataset_csv(const DroDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open " + path + " for writing");
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index c = 0; c < data.feature_dim(); ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", data.x(i, c));
      out << buf << ',';
    }
    out << (data.y[i] > 0 ? 1 : -1) << '\n';
  }
}

inline DroDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open dataset " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SpecError(path + ":" + std::to_string(lineno) + ": bad number '" +
                        cell + "'");
      }
    if (fields.size() < 2)
      throw SpecError(path + ":" + std::to_string(lineno) + ": need features,label");
    if (!rows.empty() && fields.size() != rows.front().size())
      throw SpecError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw SpecError(path + ": empty dataset");
  DroDataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(rows.front().size() - 1);
  data.x.resize(n, p);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < p; ++c) data.x(i, c) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
    data.y[i] = rows[static_cast<size_t>(i)].back() > 0 ? 1.0 : -1.0;
  }
  return data;
}

} // namespace saddle
