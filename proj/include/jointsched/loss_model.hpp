#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "jointsched/error.hpp"

namespace jointsched {

/// h(x) = x
struct Linear {};

/// h(x) = k x^q, q >= 1
struct Monomial {
  double k = 1.0;
  double q = 1.0;
};

/// h(x) = exp(kappa (x - 1))
struct Exponential {
  double kappa = 1.0;
};

/// h(x) = min((x / tau)^2, 1). With paper_literal set, h drops back to 0
/// above tau instead of saturating at 1.
struct PiecewiseQuadratic {
  double tau = 0.7;
  bool paper_literal = false;
};

/// Relative threshold t(phi, state); the eMBB block is lost when the relative
/// URLLC load reaches it.
using ThresholdFn = std::function<double(double phi, std::size_t state)>;

/// h(x) = 1(x >= t(phi)). Either constant per-state thresholds `alpha`
/// (a single entry applies to every state) or a general `fn`.
struct Threshold {
  std::vector<double> alpha;
  ThresholdFn fn;
};

/// Per-user rate loss model.
class LossModel {
 public:
  using Family =
      std::variant<Linear, Monomial, Exponential, PiecewiseQuadratic, Threshold>;

  LossModel() : family_(Linear{}) {}
  LossModel(Family family) : family_(std::move(family)) {}  // NOLINT

  static LossModel linear() { return LossModel(Linear{}); }
  static LossModel monomial(double k, double q) { return LossModel(Monomial{k, q}); }
  static LossModel exponential(double kappa) { return LossModel(Exponential{kappa}); }
  static LossModel piecewise_quadratic(double tau, bool paper_literal = false) {
    return LossModel(PiecewiseQuadratic{tau, paper_literal});
  }
  static LossModel threshold(std::vector<double> alpha) {
    return LossModel(Threshold{std::move(alpha), {}});
  }
  static LossModel threshold(ThresholdFn fn) { return LossModel(Threshold{{}, std::move(fn)}); }

  const Family& family() const noexcept { return family_; }

  bool is_threshold() const noexcept { return std::holds_alternative<Threshold>(family_); }
  bool is_linear() const noexcept {
    if (std::holds_alternative<Linear>(family_)) return true;
    if (auto* m = std::get_if<Monomial>(&family_)) return m->q == 1.0 && m->k == 1.0;
    return false;
  }

  /// Convex on [0, 1]; expected rates are then jointly concave.
  bool is_convex() const noexcept {
    return std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Linear> || std::is_same_v<T, Monomial> ||
                        std::is_same_v<T, Exponential>)
            return true;
          else
            return false;
        },
        family_);
  }

  /// Degree p with h(kx) = k^p h(x), when the family is homogeneous.
  std::optional<double> homogeneity_degree() const noexcept {
    if (std::holds_alternative<Linear>(family_)) return 1.0;
    if (auto* m = std::get_if<Monomial>(&family_)) return m->q;
    return std::nullopt;
  }

  /// Loss fraction at relative load x for the non-threshold families.
  double h(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Linear>) {
            return x;
          } else if constexpr (std::is_same_v<T, Monomial>) {
            return f.k * std::pow(x, f.q);
          } else if constexpr (std::is_same_v<T, Exponential>) {
            return std::exp(f.kappa * (x - 1.0));
          } else if constexpr (std::is_same_v<T, PiecewiseQuadratic>) {
            if (x <= f.tau) return (x / f.tau) * (x / f.tau);
            return f.paper_literal ? 0.0 : 1.0;
          } else {
            throw Error("threshold loss needs an allocation; use loss_fraction");
          }
        },
        family_);
  }

  /// dh/dx for the non-threshold families (right derivative at kinks).
  double dh(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Linear>) {
            return 1.0;
          } else if constexpr (std::is_same_v<T, Monomial>) {
            if (f.q == 1.0) return f.k;
            return f.k * f.q * std::pow(x, f.q - 1.0);
          } else if constexpr (std::is_same_v<T, Exponential>) {
            return f.kappa * std::exp(f.kappa * (x - 1.0));
          } else if constexpr (std::is_same_v<T, PiecewiseQuadratic>) {
            return x < f.tau ? 2.0 * x / (f.tau * f.tau) : 0.0;
          } else {
            throw Error("threshold loss has no derivative");
          }
        },
        family_);
  }

  /// t(phi) in the given state for threshold models.
  double threshold(double phi, std::size_t state) const {
    const auto* t = std::get_if<Threshold>(&family_);
    if (t == nullptr) throw Error("loss model is not a threshold model");
    if (t->fn) return t->fn(phi, state);
    if (t->alpha.empty()) throw Error("threshold model has no thresholds");
    if (t->alpha.size() == 1) return t->alpha.front();
    if (state >= t->alpha.size()) throw Error("threshold state index out of range");
    return t->alpha[state];
  }

  std::string name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Linear>) return "linear";
          else if constexpr (std::is_same_v<T, Monomial>) return "monomial";
          else if constexpr (std::is_same_v<T, Exponential>) return "exponential";
          else if constexpr (std::is_same_v<T, PiecewiseQuadratic>) return "piecewise_quadratic";
          else return "threshold";
        },
        family_);
  }

  friend bool operator==(const LossModel& a, const LossModel& b) {
    if (a.family_.index() != b.family_.index()) return false;
    return std::visit(
        [&b](const auto& fa) -> bool {
          using T = std::decay_t<decltype(fa)>;
          const auto& fb = std::get<T>(b.family_);
          if constexpr (std::is_same_v<T, Linear>) return true;
          else if constexpr (std::is_same_v<T, Monomial>) return fa.k == fb.k && fa.q == fb.q;
          else if constexpr (std::is_same_v<T, Exponential>) return fa.kappa == fb.kappa;
          else if constexpr (std::is_same_v<T, PiecewiseQuadratic>)
            return fa.tau == fb.tau && fa.paper_literal == fb.paper_literal;
          else return fa.alpha == fb.alpha && static_cast<bool>(fa.fn) == static_cast<bool>(fb.fn);
        },
        a.family_);
  }

 private:
  Family family_;
};

}  // namespace jointsched
