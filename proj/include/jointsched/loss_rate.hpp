#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/loss_model.hpp"
#include "jointsched/rng.hpp"

namespace jointsched {

/// Rate delivered to one eMBB user in one slot.
struct RateResult {
  double rate = 0.0;
  double loss_fraction = 0.0;
};

namespace detail {
inline constexpr double kEdgeTol = 1e-12;

inline void require_fraction(double x, const char* what) {
  if (!(x >= -kEdgeTol && x <= 1.0 + kEdgeTol)) throw Error(std::string(what) + " outside [0,1]");
}
}  // namespace detail

/// h(x) for non-threshold models. Threshold models need phi and the state to
/// evaluate t(phi).
inline double loss_fraction(const LossModel& model, double x, double phi = 1.0,
                            std::size_t state = 0) {
  detail::require_fraction(x, "relative load");
  x = std::clamp(x, 0.0, 1.0);
  if (model.is_threshold()) return x >= model.threshold(phi, state) ? 1.0 : 0.0;
  return std::clamp(model.h(x), 0.0, 1.0);
}

inline RateResult realized_rate(double r_hat, double phi, double load, const LossModel& model,
                                std::size_t state = 0) {
  if (!(phi > 0.0)) {
    if (load > detail::kEdgeTol) throw Error("load on a user with no allocation");
    return {0.0, 0.0};
  }
  if (load < -detail::kEdgeTol) throw Error("negative load");
  if (load > phi * (1.0 + 1e-9) + detail::kEdgeTol) throw Error("load exceeds allocation");
  const double x = std::clamp(load / phi, 0.0, 1.0);
  if (model.is_threshold()) {
    // strict: loss when x reaches the threshold
    const bool lost = x >= model.threshold(phi, state);
    return {lost ? 0.0 : r_hat * phi, lost ? 1.0 : 0.0};
  }
  const double lf = std::clamp(model.h(x), 0.0, 1.0);
  return {r_hat * phi * (1.0 - lf), lf};
}

inline void require_coupling(double phi, double gamma, double delta) {
  if (phi < -detail::kEdgeTol || gamma < -detail::kEdgeTol) throw Error("negative share");
  if ((1.0 - delta) * gamma > phi + 1e-9) throw Error("infeasible (phi, gamma): (1-delta) gamma > phi");
}

/// E[r_hat phi (1 - h(gamma D / phi))] for a non-threshold model.
inline double expected_rate_convex(double r_hat, double phi, double gamma, const DemandLaw& law,
                                   const LossModel& model) {
  if (model.is_threshold()) throw Error("threshold model passed to expected_rate_convex");
  require_coupling(phi, gamma, law.delta());
  if (gamma <= 0.0) return r_hat * std::max(phi, 0.0);
  const double x = gamma / phi;
  if (auto p = model.homogeneity_degree()) {
    const auto* m = std::get_if<Monomial>(&model.family());
    const double k = m != nullptr ? m->k : 1.0;
    return r_hat * (phi - phi * k * std::pow(x, *p) * law.moment(*p));
  }
  const double eh = law.expect([&](double d) { return model.h(std::min(1.0, x * d)); });
  return r_hat * phi * (1.0 - eh);
}

/// r_hat phi P(D < phi t / gamma). Any law type with cdf_left works.
template <typename Law>
double expected_rate_threshold(double r_hat, double phi, double gamma, double t, const Law& law) {
  if (phi <= 0.0) return 0.0;
  if (gamma <= 0.0) return r_hat * phi;
  return r_hat * phi * law.cdf_left(phi * t / gamma);
}

template <typename Law>
double expected_rate_threshold(double r_hat, double phi, double gamma, const LossModel& model,
                               std::size_t state, const Law& law) {
  if (phi <= 0.0) return 0.0;
  return expected_rate_threshold(r_hat, phi, gamma, model.threshold(phi, state), law);
}

/// Threshold function of (user, phi).
using UserThreshold = std::function<double(std::size_t user, double phi)>;

inline UserThreshold constant_threshold(double alpha) {
  return [alpha](std::size_t, double) { return alpha; };
}
inline UserThreshold per_user_threshold(std::vector<double> t) {
  return [t = std::move(t)](std::size_t u, double) { return t.at(u); };
}

/// Threshold-proportional placement: gamma_u proportional to phi_u t_u(phi_u).
inline std::vector<double> tp_weights(std::span<const double> phi, const UserThreshold& t) {
  std::vector<double> w(phi.size());
  double total = 0.0;
  for (std::size_t u = 0; u < phi.size(); ++u) {
    w[u] = phi[u] > 0.0 ? phi[u] * t(u, phi[u]) : 0.0;
    if (w[u] < 0.0) throw Error("negative threshold");
    total += w[u];
  }
  if (!(total > 0.0)) throw Error("TP undefined: all thresholds zero");
  for (double& x : w) x /= total;
  return w;
}

/// Per-user P(gamma_u D >= phi_u t_u(phi_u)).
template <typename Law>
std::vector<double> loss_probability(std::span<const double> phi, std::span<const double> gamma,
                                     const UserThreshold& t, const Law& law) {
  if (phi.size() != gamma.size()) throw Error("phi/gamma size mismatch");
  std::vector<double> eps(phi.size(), 0.0);
  for (std::size_t u = 0; u < phi.size(); ++u) {
    if (gamma[u] <= 0.0 || phi[u] <= 0.0) continue;
    eps[u] = 1.0 - law.cdf_left(phi[u] * t(u, phi[u]) / gamma[u]);
  }
  return eps;
}

/// P(D >= sum_u phi_u t_u(phi_u)): no placement does better on any-loss.
template <typename Law>
double pooled_loss_bound(std::span<const double> phi, const UserThreshold& t, const Law& law) {
  double z = 0.0;
  for (std::size_t u = 0; u < phi.size(); ++u)
    if (phi[u] > 0.0) z += phi[u] * t(u, phi[u]);
  return 1.0 - law.cdf_left(z);
}

/// Value and gradient of g(phi, gamma) for one user in one state.
class ExpectedRate {
 public:
  static constexpr double kFdStep = 1e-6;

  ExpectedRate(double r_hat, const LossModel& model, const DemandLaw& law, std::size_t state)
      : r_hat_(r_hat), model_(&model), law_(&law), state_(state) {
    if (auto p = model.homogeneity_degree()) {
      mono_ = true;
      q_ = *p;
      k_ = std::holds_alternative<Monomial>(model.family())
               ? std::get<Monomial>(model.family()).k
               : 1.0;
      mq_ = law.moment(q_);
    }
    if (const auto* e = std::get_if<Exponential>(&model.family())) {
      expo_ = true;
      kappa_ = e->kappa;
    }
  }

  double r_hat() const noexcept { return r_hat_; }

  double value(double phi, double gamma) const {
    if (phi <= 0.0) return 0.0;
    gamma = std::max(gamma, 0.0);
    if (model_->is_threshold())
      return expected_rate_threshold(r_hat_, phi, gamma, model_->threshold(phi, state_), *law_);
    const double x = gamma / phi;
    if (mono_) return r_hat_ * phi * (1.0 - k_ * std::pow(x, q_) * mq_);
    if (gamma <= 0.0) return r_hat_ * phi * (1.0 - model_->h(0.0));
    const double eh = law_->expect([&](double d) { return model_->h(std::min(1.0, x * d)); });
    return r_hat_ * phi * (1.0 - eh);
  }

  /// Value and both partials in one pass over the atoms.
  double value_and_gradient(double phi, double gamma, double& dphi, double& dgamma) const {
    if (model_->is_threshold() || mono_ || phi <= 0.0) {
      gradient(phi, gamma, dphi, dgamma);
      return value(phi, gamma);
    }
    gamma = std::max(gamma, 0.0);
    const double x = gamma / phi;
    double eh = 0.0, edh = 0.0;
    moments(x, eh, edh);
    dphi = r_hat_ * (1.0 - eh + x * edh);
    dgamma = -r_hat_ * edh;
    return r_hat_ * phi * (1.0 - eh);
  }

  /// Partial derivatives in phi and gamma.
  void gradient(double phi, double gamma, double& dphi, double& dgamma) const {
    phi = std::max(phi, 0.0);
    gamma = std::max(gamma, 0.0);
    if (model_->is_threshold()) {
      fd_gradient(phi, gamma, dphi, dgamma);
      return;
    }
    const double x = phi > 0.0 ? gamma / phi : 0.0;
    if (mono_) {
      const double xq = q_ == 1.0 ? x : std::pow(x, q_);
      const double xq1 = q_ == 1.0 ? 1.0 : (x > 0.0 ? std::pow(x, q_ - 1.0) : 0.0);
      dphi = r_hat_ * (1.0 + (q_ - 1.0) * k_ * xq * mq_);
      dgamma = -r_hat_ * k_ * q_ * xq1 * mq_;
      return;
    }
    double eh = 0.0, edh = 0.0;
    moments(x, eh, edh);
    dphi = r_hat_ * (1.0 - eh + x * edh);
    dgamma = -r_hat_ * edh;
  }

 private:
  // E[h(xD)] and E[D h'(xD)]
  void moments(double x, double& eh, double& edh) const {
    eh = 0.0;
    edh = 0.0;
    if (expo_) {
      // h = exp(kappa (z - 1)), h' = kappa h
      const double base = std::exp(-kappa_);
      for (const Atom& a : law_->atoms()) {
        const double hz = base * std::exp(kappa_ * std::min(1.0, x * a.value));
        eh += a.prob * hz;
        edh += a.prob * a.value * kappa_ * hz;
      }
      return;
    }
    for (const Atom& a : law_->atoms()) {
      const double z = std::min(1.0, x * a.value);
      eh += a.prob * model_->h(z);
      edh += a.prob * a.value * model_->dh(z);
    }
  }

  void fd_gradient(double phi, double gamma, double& dphi, double& dgamma) const {
    const double h = kFdStep;
    const double p0 = std::max(0.0, phi - h), p1 = phi + h;
    dphi = (value(p1, gamma) - value(p0, gamma)) / (p1 - p0);
    const double g0 = std::max(0.0, gamma - h), g1 = gamma + h;
    dgamma = (value(phi, g1) - value(phi, g0)) / (g1 - g0);
  }

  double r_hat_;
  const LossModel* model_;
  const DemandLaw* law_;
  std::size_t state_;
  bool mono_ = false;
  bool expo_ = false;
  double q_ = 1.0, k_ = 1.0, mq_ = 0.0, kappa_ = 0.0;
};

/// Outcome of a midpoint-concavity probe.
struct ConcavityReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_violation = 0.0;  // max of (g(x)+g(y))/2 - g(mid), clipped at 0
};

/// Samples feasible single-user pairs (phi, gamma) with (1-delta) gamma <= phi
/// and tests g at midpoints.
inline ConcavityReport concavity_probe(const std::function<double(double, double)>& g,
                                       double delta, std::size_t num_pairs, double tol,
                                       Rng& rng) {
  auto draw = [&](double& phi, double& gamma) {
    phi = 1.0 - rng.uniform();  // (0, 1]
    gamma = rng.uniform(0.0, std::min(1.0, phi / (1.0 - delta)));
  };
  ConcavityReport rep;
  rep.pairs = num_pairs;
  for (std::size_t i = 0; i < num_pairs; ++i) {
    double p1, g1, p2, g2;
    draw(p1, g1);
    draw(p2, g2);
    const double gap = 0.5 * (g(p1, g1) + g(p2, g2)) - g(0.5 * (p1 + p2), 0.5 * (g1 + g2));
    if (gap > tol) ++rep.violations;
    rep.worst_violation = std::max(rep.worst_violation, gap);
  }
  return rep;
}

}  // namespace jointsched
