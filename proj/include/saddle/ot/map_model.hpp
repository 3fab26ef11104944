#pragma once

// Parametric point-cloud maps with hand-written reverse-mode accumulation:
// an affine map A y + b, and a one-hidden-layer perceptron with GELU
// activation W2 gelu(W1 y + b1) + b2. Parameters travel as a flat vector so
// the maps plug into the generic solvers; vjp accumulates J(y)' u into a
// gradient buffer.

#include <cmath>
#include <stdexcept>

#include "saddle/rng.hpp"
#include "saddle/types.hpp"

namespace saddle {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double gelu_prime(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * phi;
}

struct MapModel {
  enum class Kind { Affine, Perceptron };

  Kind kind = Kind::Affine;
  int in_dim = 2;
  int out_dim = 2;
  int hidden = 0;

  static MapModel affine(int in, int out) { return MapModel{Kind::Affine, in, out, 0}; }
  static MapModel perceptron(int in, int out, int width) {
    if (width < 1 || width > 64)
      throw std::invalid_argument("perceptron width must be in [1, 64]");
    return MapModel{Kind::Perceptron, in, out, width};
  }

  Eigen::Index param_dim() const {
    if (kind == Kind::Affine) return static_cast<Eigen::Index>(out_dim) * in_dim + out_dim;
    return static_cast<Eigen::Index>(hidden) * in_dim + hidden +
           static_cast<Eigen::Index>(out_dim) * hidden + out_dim;
  }

  // affine starts at the (truncated) identity; perceptron at small random
  // weights with an identity-ish skip through the first columns
  Vec init_params(std::uint64_t seed = 0) const {
    Vec theta = Vec::Zero(param_dim());
    if (kind == Kind::Affine) {
      for (int c = 0; c < std::min(in_dim, out_dim); ++c)
        theta[static_cast<Eigen::Index>(c) * out_dim + c] = 1.0;
    } else {
      Rng rng(derive_seed(seed, "perceptron-init"));
      const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
      const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
      Eigen::Index at = 0;
      for (int i = 0; i < hidden * in_dim; ++i) theta[at++] = s1 * rng.gaussian();
      at += hidden;  // b1 = 0
      for (int i = 0; i < out_dim * hidden; ++i) theta[at++] = s2 * rng.gaussian();
    }
    return theta;
  }

  Vec forward(const Vec& theta, const Vec& y) const {
    if (kind == Kind::Affine) {
      const auto a = Eigen::Map<const Mat>(theta.data(), out_dim, in_dim);
      const auto b = theta.tail(out_dim);
      return a * y + b;
    }
    const auto w1 = Eigen::Map<const Mat>(theta.data(), hidden, in_dim);
    const auto b1 = theta.segment(static_cast<Eigen::Index>(hidden) * in_dim, hidden);
    const auto w2 = Eigen::Map<const Mat>(
        theta.data() + hidden * in_dim + hidden, out_dim, hidden);
    const auto b2 = theta.tail(out_dim);
    const Vec z1 = w1 * y + b1;
    const Vec a1 = z1.unaryExpr([](double x) { return gelu(x); });
    return w2 * a1 + b2;
  }

  Mat map_cloud(const Vec& theta, const Mat& inputs) const {
    Mat out(inputs.rows(), out_dim);
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
      out.row(i) = forward(theta, inputs.row(i).transpose()).transpose();
    return out;
  }

  // grad += J_theta(y)' u
  void vjp(const Vec& theta, const Vec& y, const Vec& u, Vec& grad) const {
    if (kind == Kind::Affine) {
      auto ga = Eigen::Map<Mat>(grad.data(), out_dim, in_dim);
      ga.noalias() += u * y.transpose();
      grad.tail(out_dim) += u;
      return;
    }
    const auto w1 = Eigen::Map<const Mat>(theta.data(), hidden, in_dim);
    const auto b1 = theta.segment(static_cast<Eigen::Index>(hidden) * in_dim, hidden);
    const auto w2 = Eigen::Map<const Mat>(
        theta.data() + hidden * in_dim + hidden, out_dim, hidden);
    const Vec z1 = w1 * y + b1;
    const Vec a1 = z1.unaryExpr([](double x) { return gelu(x); });
    const Vec delta1 =
        (w2.transpose() * u).cwiseProduct(z1.unaryExpr([](double x) { return gelu_prime(x); }));

    auto g_w1 = Eigen::Map<Mat>(grad.data(), hidden, in_dim);
    g_w1.noalias() += delta1 * y.transpose();
    grad.segment(static_cast<Eigen::Index>(hidden) * in_dim, hidden) += delta1;
    auto g_w2 = Eigen::Map<Mat>(grad.data() + hidden * in_dim + hidden, out_dim, hidden);
    g_w2.noalias() += u * a1.transpose();
    grad.tail(out_dim) += u;
  }
};

} // namespace saddle
