#pragma once

// Shared vocabulary for the min-max solvers: problem constants, the oracle
// interface every concrete problem implements, and per-trajectory state.
//
// Conventions used throughout:
//   F(theta, v)   smooth in both arguments, mu-strongly concave in v
//   phi(theta)    = max_v F(theta, v)
//   v*(theta)     = argmax_v F(theta, v)
// With kappa = L/mu, v* is kappa-Lipschitz and phi is 2*kappa*L-smooth.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "saddle/rng.hpp"
#include "saddle/types.hpp"

namespace saddle {

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CapabilityError : std::logic_error {
  using std::logic_error::logic_error;
};

// Problem constants. kappa is always derived from (L, mu); it cannot be set
// independently, so inconsistent triples cannot be constructed.
//
// Noise conventions: sigma_sq bounds the total variance of the stochastic
// theta-gradient, sigma_tilde_sq is the second moment of the stochastic
// v-gradient at v*(theta) (treated as a uniform-in-theta bound supplied by
// the problem), sigma_bar_sq optionally bounds both gradients' variance for
// the large-minibatch regime.
struct SmoothnessSpec {
  double L = 1.0;
  double mu = 1.0;
  double sigma_sq = 0.0;
  double sigma_tilde_sq = 0.0;
  std::optional<double> sigma_bar_sq;

  void validate() const {
    if (!(L > 0.0)) throw SpecError("SmoothnessSpec: L must be > 0");
    if (!(mu > 0.0)) throw SpecError("SmoothnessSpec: mu must be > 0");
    if (mu > L) throw SpecError("SmoothnessSpec: mu must not exceed L");
    if (sigma_sq < 0.0 || sigma_tilde_sq < 0.0)
      throw SpecError("SmoothnessSpec: variance bounds must be >= 0");
    if (sigma_bar_sq && *sigma_bar_sq < 0.0)
      throw SpecError("SmoothnessSpec: sigma_bar_sq must be >= 0");
  }

  double kappa() const { return L / mu; }
};

struct DerivedConstants {
  double phi_smoothness;   // 2*kappa*L
  double vstar_lipschitz;  // kappa
};

inline DerivedConstants derive_constants(const SmoothnessSpec& spec) {
  spec.validate();
  const double kappa = spec.kappa();
  return DerivedConstants{2.0 * kappa * spec.L, kappa};
}

enum class Capability : unsigned {
  StochGradTheta = 1u << 0,
  StochGradV = 1u << 1,
  ExactGrad = 1u << 2,
  ExactPhi = 1u << 3,
  ExactVstar = 1u << 4,
  Projection = 1u << 5,
};

using CapabilityMask = unsigned;

constexpr CapabilityMask operator|(Capability a, Capability b) {
  return static_cast<unsigned>(a) | static_cast<unsigned>(b);
}
constexpr CapabilityMask operator|(CapabilityMask a, Capability b) {
  return a | static_cast<unsigned>(b);
}
constexpr bool has_capability(CapabilityMask mask, Capability c) {
  return (mask & static_cast<unsigned>(c)) != 0;
}

struct CapabilityReport {
  bool stoch_grad_theta = false;
  bool stoch_grad_v = false;
  bool exact_grad = false;
  bool exact_phi = false;
  bool exact_vstar = false;
  bool projection = false;

  std::string to_string() const {
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    std::string s;
    s += "stoch_grad_theta=";
    s += yn(stoch_grad_theta);
    s += " stoch_grad_v=";
    s += yn(stoch_grad_v);
    s += " exact_grad=";
    s += yn(exact_grad);
    s += " exact_phi=";
    s += yn(exact_phi);
    s += " exact_vstar=";
    s += yn(exact_vstar);
    s += " projection=";
    s += yn(projection);
    return s;
  }
};

// Oracle interface driven by the solvers.
//
// stoch_grad contract: either output pointer may be null when the caller only
// needs one side, and implementations must consume their RNG streams
// identically no matter which outputs are requested. That keeps trajectories
// bit-equal between "compute both candidates" and "flip the coin first"
// solver modes, and keeps paired runs on one sample stream aligned.
class ProblemOracle {
public:
  virtual ~ProblemOracle() = default;

  virtual Eigen::Index theta_dim() const = 0;
  virtual Eigen::Index v_dim() const = 0;
  virtual CapabilityMask capabilities() const = 0;
  virtual SmoothnessSpec smoothness() const = 0;

  virtual void stoch_grad(const Vec& theta, const Vec& v, int batch,
                          RngStreams& rng, Vec* g_theta, Vec* g_v) const = 0;

  virtual void exact_grad(const Vec& /*theta*/, const Vec& /*v*/, Vec& /*g_theta*/,
                          Vec& /*g_v*/) const {
    throw CapabilityError("exact_grad not supported by this problem");
  }
  virtual double exact_value(const Vec& /*theta*/, const Vec& /*v*/) const {
    throw CapabilityError("exact F value not supported by this problem");
  }
  virtual double exact_phi(const Vec& /*theta*/) const {
    throw CapabilityError("exact_phi not supported by this problem");
  }
  virtual Vec exact_vstar(const Vec& /*theta*/) const {
    throw CapabilityError("exact_vstar not supported by this problem");
  }
  virtual Vec exact_grad_phi(const Vec& /*theta*/) const {
    throw CapabilityError("exact_grad_phi not supported by this problem");
  }
  // min_theta phi(theta); needed for suboptimality tracking.
  virtual double min_phi() const {
    throw CapabilityError("min_phi not supported by this problem");
  }

  // Identity unless the problem declares a constraint set.
  virtual Vec project_v(const Vec& v) const { return v; }

  virtual Vec initial_theta() const { return Vec::Zero(theta_dim()); }
  virtual Vec initial_v() const { return Vec::Zero(v_dim()); }
};

inline CapabilityReport problem_oracle_contract(const ProblemOracle& problem) {
  const CapabilityMask m = problem.capabilities();
  CapabilityReport r;
  r.stoch_grad_theta = has_capability(m, Capability::StochGradTheta);
  r.stoch_grad_v = has_capability(m, Capability::StochGradV);
  r.exact_grad = has_capability(m, Capability::ExactGrad);
  r.exact_phi = has_capability(m, Capability::ExactPhi);
  r.exact_vstar = has_capability(m, Capability::ExactVstar);
  r.projection = has_capability(m, Capability::Projection);
  return r;
}

inline void require_capability(const ProblemOracle& problem, Capability c,
                               const char* what) {
  if (!has_capability(problem.capabilities(), c))
    throw CapabilityError(std::string(what) + ": problem lacks required capability");
}

// Current iterates plus update counters; iter always equals
// theta_updates + v_updates, i.e. iterations are counted in gradient
// updates so runs of different algorithms align on oracle work.
struct IterateState {
  Vec theta;
  Vec v;
  long iter = 0;
  long theta_updates = 0;
  long v_updates = 0;

  IterateState() = default;
  IterateState(Vec theta0, Vec v0) : theta(std::move(theta0)), v(std::move(v0)) {}

  void count_theta_update() {
    ++theta_updates;
    ++iter;
  }
  void count_v_update() {
    ++v_updates;
    ++iter;
  }
};

} // namespace saddle
