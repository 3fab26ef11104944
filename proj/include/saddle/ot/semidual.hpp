#pragma once

// Semi-dual entropic optimal transport with a discrete target measure
// nu = sum_j nu_j delta_{y_j}:
//
//   h(x, v) = sum_j v_j nu_j
//             - eps log( sum_j nu_j exp((v_j - c(x, y_j))/eps) )  + const,
//
// whose expectation over x ~ mu is maximized by the entropic dual potential.
// The additive constant is a convention: the compact form subtracts eps, an
// alternative adds it; neither affects gradients or the argmax, and the flag
// is threaded through so value comparisons stay consistent.
//
// The maximization can be restricted to the ball
//   V = { v : ||v||_2 <= beta, sum v = 0 },
//   beta = (L_c/n) sum_{i,k} ||y_k - y_i||_inf,
// on which the semi-dual is xi-strongly concave with
//   xi = exp(-2 (n+2) L_c Delta / eps) min_k nu_k / (2 n eps).
// L_c is a Lipschitz constant of the cost in its target argument w.r.t. the
// sup norm; Delta the largest pairwise sup-norm distance among the y_j.

#include <cmath>
#include <stdexcept>

#include "saddle/types.hpp"

namespace saddle {

enum class HConvention {
  MainText,  // subtract eps
  Appendix,  // add eps
};

inline double h_offset(HConvention conv, double eps) {
  return conv == HConvention::MainText ? -eps : eps;
}

// squared Euclidean cost rows: c_j = ||x - y_j||^2
inline Vec cost_row_sqeuclidean(const Vec& x, const Mat& targets) {
  return (targets.rowwise() - x.transpose()).rowwise().squaredNorm();
}

inline Mat cost_matrix_sqeuclidean(const Mat& source, const Mat& targets) {
  Mat c(source.rows(), targets.rows());
  for (Eigen::Index i = 0; i < source.rows(); ++i)
    c.row(i) = cost_row_sqeuclidean(source.row(i).transpose(), targets).transpose();
  return c;
}

// softmax weights w_j = nu_j exp((v_j - c_j)/eps) / sum_k ..., max-shifted
inline Vec semidual_weights(const Vec& cost_row, const Vec& nu, const Vec& v,
                            double eps) {
  const Vec t = (v - cost_row) / eps;
  const double shift = t.maxCoeff();
  Vec w = nu.array() * (t.array() - shift).exp();
  w /= w.sum();
  return w;
}

inline double h_value(const Vec& cost_row, const Vec& nu, const Vec& v, double eps,
                      HConvention conv = HConvention::MainText) {
  const Vec t = (v - cost_row) / eps;
  const double shift = t.maxCoeff();
  const double lse = shift + std::log((nu.array() * (t.array() - shift).exp()).sum());
  return nu.dot(v) - eps * lse + h_offset(conv, eps);
}

// grad_v h = nu - w; components sum to zero up to rounding
inline Vec grad_v_h(const Vec& cost_row, const Vec& nu, const Vec& v, double eps) {
  return nu - semidual_weights(cost_row, nu, v, eps);
}

struct DualBall {
  double beta = 0.0;
  bool zero_sum = true;
};

// beta = (L_c/n) sum over ordered pairs (diagonal included, trivially zero)
inline DualBall dual_ball(const Mat& targets, double cost_lipschitz) {
  const Eigen::Index n = targets.rows();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      acc += (targets.row(k) - targets.row(i)).cwiseAbs().maxCoeff();
  return DualBall{cost_lipschitz / static_cast<double>(n) * acc, true};
}

// radial projection onto { ||v|| <= beta }; the zero-sum constraint is
// preserved automatically since scaling keeps component sums proportional
inline Vec project_ball(const Vec& v, double beta) {
  const double norm = v.norm();
  return norm > beta ? Vec(beta / norm * v) : v;
}

inline double max_pairwise_inf_dist(const Mat& points) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index k = i + 1; k < points.rows(); ++k)
      d = std::max(d, (points.row(k) - points.row(i)).cwiseAbs().maxCoeff());
  return d;
}

// Sup-norm Lipschitz constant of y -> ||x - y||^2 over the hull of the two
// clouds: |c(x,y) - c(x,y')| <= 2 diam_2 ||y - y'||_2
//                            <= 2 sqrt(dim) diam_2 ||y - y'||_inf.
// (The bare 2*diam_2 is the l2 constant; the sqrt(dim) factor converts it to
// the sup norm the ball and strong-concavity formulas are stated in.)
inline double cost_lipschitz_sqeuclidean(const Mat& cloud_a, const Mat& cloud_b) {
  Mat all(cloud_a.rows() + cloud_b.rows(), cloud_a.cols());
  all << cloud_a, cloud_b;
  double diam = 0.0;
  for (Eigen::Index i = 0; i < all.rows(); ++i)
    for (Eigen::Index k = i + 1; k < all.rows(); ++k)
      diam = std::max(diam, (all.row(k) - all.row(i)).norm());
  return 2.0 * std::sqrt(static_cast<double>(all.cols())) * diam;
}

inline double strong_concavity_xi(int n, double cost_lipschitz, double delta_inf,
                                  double eps, double nu_min) {
  if (n < 1 || !(eps > 0.0) || !(nu_min > 0.0) || cost_lipschitz < 0.0 ||
      delta_inf < 0.0)
    throw std::invalid_argument("strong_concavity_xi: bad arguments");
  return std::exp(-2.0 * (n + 2) * cost_lipschitz * delta_inf / eps) * nu_min /
         (2.0 * static_cast<double>(n) * eps);
}

struct SemidualSmoothness {
  double l_vv = 0.0;          // 1/eps
  double l_theta_theta = 0.0; // (curly_L_c + 2 L_c^2)/eps
  double l_cross = 0.0;       // 2 L_c/eps

  double overall() const { return std::max({l_vv, l_theta_theta, l_cross}); }
};

inline SemidualSmoothness semidual_smoothness(double cost_lipschitz,
                                              double cost_smoothness, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("semidual_smoothness: eps <= 0");
  SemidualSmoothness s;
  s.l_vv = 1.0 / eps;
  s.l_theta_theta = (cost_smoothness + 2.0 * cost_lipschitz * cost_lipschitz) / eps;
  s.l_cross = 2.0 * cost_lipschitz / eps;
  return s;
}

// Full-batch projected gradient ascent of the semi-dual over the dual ball;
// ascent steps of length eps (the inverse of the 1/eps smoothness).
struct SemidualAscentResult {
  Vec v;
  double value = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
};

inline SemidualAscentResult maximize_semidual(const Mat& cost, const Vec& mu_weights,
                                              const Vec& nu, double eps, double beta,
                                              double tol = 1e-10,
                                              long max_iters = 200000,
                                              HConvention conv = HConvention::MainText) {
  const Eigen::Index m = cost.rows(), n = cost.cols();
  SemidualAscentResult res;
  res.v = Vec::Zero(n);
  Vec grad(n);
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    grad.setZero();
    for (Eigen::Index i = 0; i < m; ++i)
      grad += mu_weights[i] * grad_v_h(cost.row(i).transpose(), nu, res.v, eps);
    res.grad_norm = grad.norm();
    if (res.grad_norm <= tol) break;
    res.v = project_ball(res.v + eps * grad, beta);
  }
  res.value = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    res.value += mu_weights[i] * h_value(cost.row(i).transpose(), nu, res.v, eps, conv);
  return res;
}

} // namespace saddle
