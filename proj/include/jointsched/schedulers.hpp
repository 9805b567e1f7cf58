#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/inner_solver.hpp"
#include "jointsched/loss_rate.hpp"
#include "jointsched/rng.hpp"

namespace jointsched {

/// Constant epsilon, or a / (b + t).
struct StepSchedule {
  enum class Kind { kConstant, kDecaying };
  Kind kind = Kind::kDecaying;
  double epsilon = 0.01;
  double a = 1.0;
  double b = 9.0;

  static StepSchedule constant(double eps) { return {Kind::kConstant, eps, 1.0, 0.0}; }
  static StepSchedule decaying(double a, double b) { return {Kind::kDecaying, 0.0, a, b}; }
};

inline double step_size(std::size_t t, const StepSchedule& sched) {
  if (t < 1) throw Error("step index starts at 1");
  if (sched.kind == StepSchedule::Kind::kConstant) {
    if (!(sched.epsilon > 0.0 && sched.epsilon <= 1.0)) throw Error("epsilon outside (0,1]");
    return sched.epsilon;
  }
  if (!(sched.a > 0.0)) throw Error("step size numerator a must be positive");
  if (!(sched.b + 1.0 > 0.0)) throw Error("step size offset b must exceed -1");
  return std::min(1.0, sched.a / (sched.b + static_cast<double>(t)));
}

/// Running average rates; r_tilde is the within-slot estimate of the
/// RB-level gradient scheduler.
struct RateEstimates {
  static constexpr double kFloor = 1e-3;
  std::vector<double> r_bar;
  std::vector<double> r_tilde;

  explicit RateEstimates(std::size_t users = 0, double init = kFloor)
      : r_bar(users, init), r_tilde(users, init) {}

  /// r_bar <- (1 - eps) r_bar + eps r, floored.
  void update(std::span<const double> rates, double eps) {
    for (std::size_t u = 0; u < r_bar.size(); ++u)
      r_bar[u] = std::max(kFloor, (1.0 - eps) * r_bar[u] + eps * rates[u]);
  }
};

/// Shares implied by an RB assignment.
inline std::vector<double> shares_from_owners(std::span<const std::size_t> owners,
                                              std::size_t users) {
  std::vector<double> phi(users, 0.0);
  for (std::size_t o : owners) phi[o] += 1.0;
  for (double& p : phi) p /= static_cast<double>(owners.size());
  return phi;
}

struct RbAssignment {
  std::vector<std::size_t> owner;  // per RB
  std::vector<double> phi;
};

/// Per-RB argmax of r_hat U'(r_tilde). r_tilde starts at r_bar and, after each
/// RB, decays by (1 - eps) with eps r_hat factor / B added for the chosen
/// user. factor[u] is (1 - rho), or F_D(alpha) for threshold losses.
inline RbAssignment gradient_rb_slot(std::size_t s, RateEstimates& est,
                                     std::span<const double> factor, std::size_t rb_count,
                                     double eps, const SystemConfig& cfg) {
  const std::size_t n = cfg.num_users;
  if (rb_count == 0) throw Error("rb_count must be positive");
  RbAssignment out;
  out.owner.resize(rb_count);
  est.r_tilde = est.r_bar;
  const double inv_b = 1.0 / static_cast<double>(rb_count);
  for (std::size_t b = 0; b < rb_count; ++b) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t u = 0; u < n; ++u) {
      const double v = cfg.peak_rates[u][s] * cfg.utilities[u].derivative(est.r_tilde[u]);
      if (v > best_v) {  // strict: ties keep the smallest index
        best_v = v;
        best = u;
      }
    }
    out.owner[b] = best;
    for (std::size_t u = 0; u < n; ++u) {
      const double inc = u == best ? cfg.peak_rates[u][s] * inv_b * factor[u] : 0.0;
      est.r_tilde[u] = (1.0 - eps) * est.r_tilde[u] + eps * inc;
    }
  }
  out.phi = shares_from_owners(out.owner, n);
  return out;
}

inline RbAssignment linear_gradient_slot(std::size_t s, RateEstimates& est, double rho,
                                         std::size_t rb_count, double eps,
                                         const SystemConfig& cfg) {
  if (!(rho >= 0.0 && rho < 1.0)) throw Error("rho outside [0,1)");
  std::vector<double> factor(cfg.num_users, 1.0 - rho);
  return gradient_rb_slot(s, est, factor, rb_count, eps, cfg);
}

/// Threshold variant: user u's increment is scaled by P(D < alpha_u^s).
template <typename Law>
RbAssignment threshold_gradient_slot(std::size_t s, RateEstimates& est, const Law& law,
                                     std::size_t rb_count, double eps, const SystemConfig& cfg) {
  std::vector<double> factor(cfg.num_users);
  for (std::size_t u = 0; u < cfg.num_users; ++u)
    factor[u] = law.cdf_left(cfg.loss_models[u].threshold(1.0, s));
  return gradient_rb_slot(s, est, factor, rb_count, eps, cfg);
}

inline std::vector<double> rp_placement(std::span<const double> phi) {
  return {phi.begin(), phi.end()};
}

/// Circular frequency band [0, 1) cut into owned segments.
struct BandMap {
  struct Segment {
    double lo, hi;
    std::size_t owner;
  };
  std::vector<Segment> segments;
  std::size_t users = 0;

  /// One segment per run of equal owners, each RB of width 1/B.
  static BandMap from_owners(std::span<const std::size_t> owners, std::size_t users) {
    BandMap m;
    m.users = users;
    const double w = 1.0 / static_cast<double>(owners.size());
    for (std::size_t b = 0; b < owners.size(); ++b) {
      if (!m.segments.empty() && m.segments.back().owner == owners[b])
        m.segments.back().hi = (b + 1) * w;
      else
        m.segments.push_back({b * w, (b + 1) * w, owners[b]});
    }
    return m;
  }

  /// Contiguous segments in user order.
  static BandMap from_shares(std::span<const double> phi) {
    BandMap m;
    m.users = phi.size();
    double at = 0.0;
    for (std::size_t u = 0; u < phi.size(); ++u) {
      if (phi[u] > 0.0) m.segments.push_back({at, at + phi[u], u});
      at += phi[u];
    }
    if (!m.segments.empty()) m.segments.back().hi = 1.0;
    return m;
  }
};

/// Each minislot's demand d occupies a contiguous arc of width d / f placed at
/// a uniform offset; a user's load is the overlap with its segments times f.
inline std::vector<double> uniform_random_placement(std::span<const double> demand,
                                                    const BandMap& band,
                                                    double minislot_fraction, Rng& rng) {
  std::vector<double> load(band.users, 0.0);
  for (double d : demand) {
    if (d <= 0.0) continue;
    const double width = std::min(1.0, d / minislot_fraction);
    if (width > 1.0 + 1e-12) throw Error("minislot demand above minislot capacity");
    const double start = rng.uniform();
    const double end = start + width;
    double placed = 0.0;
    for (const auto& seg : band.segments) {
      // arc may wrap past 1
      double ov = std::max(0.0, std::min(end, seg.hi) - std::max(start, seg.lo));
      if (end > 1.0) ov += std::max(0.0, std::min(end - 1.0, seg.hi) - seg.lo);
      load[seg.owner] += ov * minislot_fraction;
      placed += ov;
    }
    (void)placed;
  }
  return load;
}

/// Minislot-homogeneous placement: L_u = gamma_u D.
inline std::vector<double> homogeneous_loads(std::span<const double> gamma, double total) {
  std::vector<double> load(gamma.size());
  for (std::size_t u = 0; u < gamma.size(); ++u) load[u] = gamma[u] * total;
  return load;
}

enum class SchedulerKind {
  kConvexSA,
  kGradientRP,
  kGradientRandom,
  kThresholdTP,
  kStaticRandom,
  kStaticOpportunistic,
};

inline std::string scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kConvexSA: return "convex-sa";
    case SchedulerKind::kGradientRP: return "gradient-rp";
    case SchedulerKind::kGradientRandom: return "gradient-random";
    case SchedulerKind::kThresholdTP: return "threshold-tp";
    case SchedulerKind::kStaticRandom: return "static-random";
    case SchedulerKind::kStaticOpportunistic: return "static-opportunistic";
  }
  return "unknown";
}

inline SchedulerKind parse_scheduler(const std::string& name) {
  for (auto k : {SchedulerKind::kConvexSA, SchedulerKind::kGradientRP,
                 SchedulerKind::kGradientRandom, SchedulerKind::kThresholdTP,
                 SchedulerKind::kStaticRandom, SchedulerKind::kStaticOpportunistic})
    if (scheduler_name(k) == name) return k;
  throw ConfigError("scheduler", "unknown scheduler '" + name + "'");
}

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::kConvexSA;
  /// Fixed step of the gradient schedulers.
  double epsilon = 0.01;
  /// Decaying step of the SA scheduler (and running means of static ones).
  StepSchedule sa_steps = StepSchedule::decaying(1.0, 9.0);
  double solver_tol = 1e-9;
  std::size_t solver_max_iters = 5000;
  bool warm_start = true;
  /// Demand law the scheduler plans with; defaults to the config's own.
  std::optional<DemandSpec> planning_demand;
};

/// What the scheduler decided for one slot.
struct SlotDecision {
  std::vector<double> phi;
  std::vector<double> gamma;                // used when !random_placement
  std::vector<std::size_t> rb_owner;        // RB schedulers only
  bool random_placement = false;
  std::size_t solver_iterations = 0;
  SolveStatus solver_status = SolveStatus::kConverged;
};

/// Opportunistic puncturing: demand goes to the lowest-rate users first, up
/// to each user's coupling cap; equal rates share evenly.
inline std::vector<double> opportunistic_placement(std::span<const double> phi,
                                                   std::span<const double> r_hat, double delta) {
  const std::size_t n = phi.size();
  std::vector<std::size_t> order(n);
  for (std::size_t u = 0; u < n; ++u) order[u] = u;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r_hat[a] < r_hat[b]; });
  std::vector<double> gamma(n, 0.0);
  double left = 1.0;
  for (std::size_t i = 0; i < n && left > 0.0;) {
    std::size_t j = i;
    while (j < n && r_hat[order[j]] == r_hat[order[i]]) ++j;
    // water-fill the tied group
    std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(i),
                                   order.begin() + static_cast<std::ptrdiff_t>(j));
    while (left > 1e-15 && !group.empty()) {
      const double share = left / static_cast<double>(group.size());
      std::vector<std::size_t> open;
      double used = 0.0;
      for (std::size_t u : group) {
        const double cap = phi[u] / (1.0 - delta) - gamma[u];
        const double give = std::min(cap, share);
        gamma[u] += give;
        used += give;
        if (cap > share) open.push_back(u);
      }
      left -= used;
      if (open.size() == group.size()) break;
      group = std::move(open);
    }
    i = j;
  }
  if (left > 1e-12) throw Error("opportunistic placement cannot fit demand");
  return gamma;
}

/// A scheduler instance owns its rate estimates. Not thread-safe.
class Scheduler {
 public:
  Scheduler(const SystemConfig& cfg, SchedulerSpec spec)
      : cfg_(&cfg),
        spec_(std::move(spec)),
        law_(spec_.planning_demand ? *spec_.planning_demand : cfg.demand, cfg.num_minislots,
             cfg.delta),
        est_(cfg.num_users) {
    evaluators_.resize(cfg.num_states);
    warm_.resize(cfg.num_states);
  }

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  const SchedulerSpec& spec() const noexcept { return spec_; }
  const RateEstimates& estimates() const noexcept { return est_; }
  RateEstimates& estimates() noexcept { return est_; }
  const DemandLaw& planning_law() const noexcept { return law_; }

  SlotDecision decide(std::size_t s) {
    const SystemConfig& cfg = *cfg_;
    const std::size_t n = cfg.num_users;
    SlotDecision d;
    switch (spec_.kind) {
      case SchedulerKind::kConvexSA: {
        SlotProblem prob;
        prob.delta = cfg.delta;
        prob.weights.resize(n);
        for (std::size_t u = 0; u < n; ++u)
          prob.weights[u] = cfg.utilities[u].derivative(std::max(est_.r_bar[u], RateEstimates::kFloor));
        prob.rates = evaluators(s);
        SolveOptions opt;
        opt.tol = spec_.solver_tol;
        opt.max_iters = spec_.solver_max_iters;
        if (spec_.warm_start && warm_[s]) opt.warm_start = warm_[s];
        SlotSolution sol = solve_per_slot(prob, opt);
        if (spec_.warm_start) warm_[s] = std::make_pair(sol.phi, sol.gamma);
        d.phi = std::move(sol.phi);
        d.gamma = std::move(sol.gamma);
        d.solver_iterations = sol.iterations;
        d.solver_status = sol.status;
        break;
      }
      case SchedulerKind::kGradientRP:
      case SchedulerKind::kGradientRandom: {
        auto a = linear_gradient_slot(s, est_, law_.rho(), cfg.rb_count, spec_.epsilon, cfg);
        d.phi = std::move(a.phi);
        d.rb_owner = std::move(a.owner);
        d.random_placement = spec_.kind == SchedulerKind::kGradientRandom;
        if (!d.random_placement) d.gamma = rp_placement(d.phi);
        break;
      }
      case SchedulerKind::kThresholdTP: {
        auto a = threshold_gradient_slot(s, est_, law_, cfg.rb_count, spec_.epsilon, cfg);
        d.phi = std::move(a.phi);
        d.rb_owner = std::move(a.owner);
        d.gamma = tp_weights(d.phi, [&](std::size_t u, double p) {
          return cfg.loss_models[u].threshold(p, s);
        });
        break;
      }
      case SchedulerKind::kStaticRandom: {
        d.phi.assign(n, 1.0 / static_cast<double>(n));
        d.random_placement = true;
        break;
      }
      case SchedulerKind::kStaticOpportunistic: {
        d.phi.assign(n, 1.0 / static_cast<double>(n));
        std::vector<double> r(n);
        for (std::size_t u = 0; u < n; ++u) r[u] = cfg.peak_rates[u][s];
        d.gamma = opportunistic_placement(d.phi, r, cfg.delta);
        break;
      }
    }
    return d;
  }

  /// Feeds back realized rates of slot t (t starts at 1).
  void feedback(std::span<const double> rates, std::size_t t) {
    double eps = 0.0;
    switch (spec_.kind) {
      case SchedulerKind::kGradientRP:
      case SchedulerKind::kGradientRandom:
      case SchedulerKind::kThresholdTP:
        eps = spec_.epsilon;
        break;
      case SchedulerKind::kConvexSA:
        eps = step_size(t, spec_.sa_steps);
        break;
      default:
        eps = 1.0 / static_cast<double>(t);
    }
    est_.update(rates, eps);
  }

 private:
  const std::vector<ExpectedRate>& evaluators(std::size_t s) {
    if (evaluators_[s].empty()) evaluators_[s] = rate_evaluators(*cfg_, law_, s);
    return evaluators_[s];
  }

  const SystemConfig* cfg_;
  SchedulerSpec spec_;
  DemandLaw law_;
  RateEstimates est_;
  std::vector<std::vector<ExpectedRate>> evaluators_;
  std::vector<std::optional<std::pair<std::vector<double>, std::vector<double>>>> warm_;
};

/// One SA step in isolation: weights from r_bar, solve, realize loads L = gamma D
/// from the given demand total, update r_bar with eps.
struct SaSlotResult {
  std::vector<double> phi, gamma, loads, rates;
};

inline SaSlotResult convex_sa_slot(std::size_t s, RateEstimates& est, const SystemConfig& cfg,
                                   const DemandLaw& law, double demand_total, double eps,
                                   const SolveOptions& opt = {}) {
  SlotProblem prob;
  prob.delta = cfg.delta;
  prob.rates = rate_evaluators(cfg, law, s);
  for (std::size_t u = 0; u < cfg.num_users; ++u)
    prob.weights.push_back(cfg.utilities[u].derivative(std::max(est.r_bar[u], RateEstimates::kFloor)));
  SlotSolution sol = solve_per_slot(prob, opt);
  SaSlotResult r;
  r.loads = homogeneous_loads(sol.gamma, demand_total);
  for (std::size_t u = 0; u < cfg.num_users; ++u)
    r.rates.push_back(realized_rate(cfg.peak_rates[u][s], sol.phi[u], std::min(r.loads[u], sol.phi[u]),
                                    cfg.loss_models[u], s)
                          .rate);
  est.update(r.rates, eps);
  r.phi = std::move(sol.phi);
  r.gamma = std::move(sol.gamma);
  return r;
}

}  // namespace jointsched
