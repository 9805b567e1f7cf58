#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/inner_solver.hpp"
#include "jointsched/loss_rate.hpp"
#include "jointsched/rng.hpp"
#include "jointsched/schedulers.hpp"

namespace jointsched {

struct OfflineOptimum {
  AllocationMatrix phi;
  PlacementMatrix gamma;
  std::vector<double> r_star;
  double utility = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

/// Long-run optimum: maximize sum_u U_u(sum_s p_s g_u^s) over per-state
/// feasible (phi, gamma), all states jointly.
inline OfflineOptimum offline_optimum(const SystemConfig& cfg, const DemandLaw& law,
                                      double tol = 1e-13, std::size_t max_iters = 20000) {
  const std::size_t n = cfg.num_users, ns = cfg.num_states;
  const double delta = cfg.delta;
  std::vector<std::vector<ExpectedRate>> ev(ns);
  for (std::size_t s = 0; s < ns; ++s) ev[s] = rate_evaluators(cfg, law, s);

  // blocks: state s holds gamma at [2ns, 2ns+n) and psi at [2ns+n, 2ns+2n)
  std::vector<double> phi(n), gamma(n), r(n);
  auto rates_of = [&](std::span<const double> x) {
    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      detail::unpack(x.subspan(2 * n * s, 2 * n), n, delta, phi, gamma);
      for (std::size_t u = 0; u < n; ++u) r[u] += cfg.state_probs[s] * ev[s][u].value(phi[u], gamma[u]);
    }
  };
  BlockObjective f = [&](std::span<const double> x, std::span<double> grad) {
    rates_of(x);
    double acc = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!(r[u] > 0.0)) return -std::numeric_limits<double>::infinity();
      acc += cfg.utilities[u].value(r[u]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      auto xs = x.subspan(2 * n * s, 2 * n);
      detail::unpack(xs, n, delta, phi, gamma);
      for (std::size_t u = 0; u < n; ++u)
        detail::accumulate_gradient(ev[s][u], cfg.state_probs[s] * cfg.utilities[u].derivative(r[u]),
                                    phi[u], gamma[u], delta, u, n, grad.subspan(2 * n * s, 2 * n));
    }
    return acc;
  };
  std::vector<double> x0(2 * n * ns, 1.0 / static_cast<double>(n));
  AscentResult res = n == 1 ? AscentResult{x0, 0.0, 0, SolveStatus::kConverged, {}}
                            : simplex_product_ascent(f, x0, n, {tol, max_iters, false});

  OfflineOptimum out;
  out.phi = AllocationMatrix(n, ns);
  out.gamma = PlacementMatrix(n, ns);
  for (std::size_t s = 0; s < ns; ++s) {
    detail::unpack(std::span<const double>(res.x).subspan(2 * n * s, 2 * n), n, delta, phi, gamma);
    out.phi.set_column(s, phi);
    out.gamma.set_column(s, gamma);
  }
  rates_of(res.x);
  out.r_star = r;
  out.utility = 0.0;
  for (std::size_t u = 0; u < n; ++u) out.utility += cfg.utilities[u].value(r[u]);
  out.iterations = res.iterations;
  out.status = res.status;
  return out;
}

inline OfflineOptimum offline_optimum(const SystemConfig& cfg) {
  const DemandLaw law = cfg.demand_law();
  return offline_optimum(cfg, law);
}

/// Per-user rates of the three policies of the two-user linear-loss example.
struct TwoUserExample {
  double static_no_puncture = 0.0;
  double random_puncture = 0.0;
  double opportunistic_puncture = 0.0;
};

/// Two users, rates {2, 4} i.i.d. equiprobable, equal static split, URLLC
/// load 0.5, linear loss. Evaluated by enumerating the four joint states.
inline TwoUserExample two_user_linear_example() {
  const std::array<double, 2> levels{2.0, 4.0};
  const double load = 0.5, delta = 0.5;
  const std::vector<double> phi{0.5, 0.5};
  TwoUserExample ex;
  for (double a : levels) {
    for (double b : levels) {
      const std::vector<double> r{a, b};
      const auto gamma_opp = opportunistic_placement(phi, r, delta);
      // user 0; user 1 is symmetric
      ex.static_no_puncture += 0.25 * r[0] * phi[0];
      ex.random_puncture += 0.25 * r[0] * phi[0] * (1.0 - load);
      ex.opportunistic_puncture += 0.25 * r[0] * (phi[0] - gamma_opp[0] * load);
    }
  }
  return ex;
}

/// phi' = (phi - lbar) / (1 - rho), per state. Uniform random placement on
/// phi' then yields the same mean rates as (phi, lbar).
inline AllocationMatrix theorem1_construction(const AllocationMatrix& phi,
                                              const std::vector<std::vector<double>>& lbar,
                                              double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw Error("rho outside [0,1)");
  if (lbar.size() != phi.users()) throw Error("lbar shape mismatch");
  AllocationMatrix out(phi.users(), phi.states());
  for (std::size_t u = 0; u < phi.users(); ++u) {
    if (lbar[u].size() != phi.states()) throw Error("lbar shape mismatch");
    for (std::size_t s = 0; s < phi.states(); ++s) {
      if (phi(u, s) < lbar[u][s] - 1e-15) throw Error("mean load exceeds allocation");
      out(u, s) = (phi(u, s) - lbar[u][s]) / (1.0 - rho);
    }
  }
  return out;
}

/// Two users, two minislots, minislot demand in {0, d}.
struct TinyInstance {
  LossModel loss = LossModel::monomial(1.0, 2.0);
  double d = 0.35;
  double p_d = 0.5;  // P(D(m) = d)
  double delta = 0.3;
  std::array<double, 2> weights{1.0, 1.0};
  std::array<double, 2> r_hat{1.0, 1.0};
  double grid = 0.02;
};

struct BruteForceResult {
  double dependent_best = -std::numeric_limits<double>::infinity();
  double homogeneous_best = -std::numeric_limits<double>::infinity();
  /// max over grid phi of (dependent optimum - homogeneous optimum) at that phi
  double max_gap = -std::numeric_limits<double>::infinity();
  std::size_t policies = 0;
};

/// Enumerates causal minislot-dependent placements on a grid: gamma of user 1
/// in minislot 1, and in minislot 2 as a function of D(1). Each phi on the
/// grid is compared with the best homogeneous placement at that phi.
inline BruteForceResult minislot_dependent_bruteforce(const TinyInstance& inst) {
  if (inst.loss.is_threshold()) throw Error("brute force needs a non-threshold loss");
  const double f = 0.5;
  if (inst.d > (1.0 - inst.delta) * f + 1e-12) throw Error("d exceeds minislot cap");
  if (!(inst.grid > 0.0 && inst.grid <= 0.5)) throw Error("grid step outside (0, 0.5]");
  const int steps = static_cast<int>(std::lround(1.0 / inst.grid));
  const double c = 1.0 - inst.delta;

  auto value = [&](double phi1, double g11, double g12_0, double g12_d) {
    const double phi[2] = {phi1, 1.0 - phi1};
    double acc = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double pa = a ? inst.p_d : 1.0 - inst.p_d;
        const double pb = b ? inst.p_d : 1.0 - inst.p_d;
        const double d1 = a ? inst.d : 0.0, d2 = b ? inst.d : 0.0;
        const double g2 = a ? g12_d : g12_0;
        const double l1 = g11 * d1 + g2 * d2;
        const double l2 = (1.0 - g11) * d1 + (1.0 - g2) * d2;
        const double load[2] = {l1, l2};
        for (int u = 0; u < 2; ++u) {
          if (phi[u] <= 0.0) continue;
          const double x = std::clamp(load[u] / phi[u], 0.0, 1.0);
          acc += pa * pb * inst.weights[u] * inst.r_hat[u] * phi[u] * (1.0 - inst.loss.h(x));
        }
      }
    }
    return acc;
  };

  BruteForceResult res;
  for (int i = 0; i <= steps; ++i) {
    const double phi1 = i * inst.grid;
    const double lo = std::max(0.0, 1.0 - (1.0 - phi1) / c), hi = std::min(1.0, phi1 / c);
    if (lo > hi + 1e-12) continue;
    double dep = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= steps; ++j) {
      const double g11 = j * inst.grid;
      if (g11 < lo - 1e-12 || g11 > hi + 1e-12) continue;
      for (int k = 0; k <= steps; ++k) {
        const double g0 = k * inst.grid;
        if (g0 < lo - 1e-12 || g0 > hi + 1e-12) continue;
        for (int l = 0; l <= steps; ++l) {
          const double gd = l * inst.grid;
          if (gd < lo - 1e-12 || gd > hi + 1e-12) continue;
          ++res.policies;
          dep = std::max(dep, value(phi1, g11, g0, gd));
        }
      }
    }
    // homogeneous: concave in gamma, golden section on [lo, hi]
    auto hom_at = [&](double g) { return value(phi1, g, g, g); };
    double a = lo, b = std::min(hi, std::max(lo, hi));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = hom_at(x1), f2 = hom_at(x2);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = hom_at(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = hom_at(x1);
      }
    }
    const double hom = std::max({f1, f2, hom_at(lo), hom_at(hi)});
    res.dependent_best = std::max(res.dependent_best, dep);
    res.homogeneous_best = std::max(res.homogeneous_best, hom);
    res.max_gap = std::max(res.max_gap, dep - hom);
  }
  return res;
}

struct SlicingResult {
  double lhs = 0.0;    // E h(sum of the first m1 minislot demands)
  double rhs = 0.0;    // E h(phi1 * sum of all minislot demands)
  double sigma = 0.0;  // standard error of lhs - rhs; 0 when enumerated
  bool exact = false;
  bool holds = false;
};

/// Time slicing (user 1 owns m1 whole minislots) against frequency slicing
/// (user 1 owns share m1/(m1+m2) of every minislot). Exact for small finite
/// laws, Monte Carlo with paired samples otherwise.
inline SlicingResult slicing_comparison(const LossModel& h, std::size_t m1, std::size_t m2,
                                        const DemandSpec& minislot_law, std::size_t samples,
                                        Rng& rng) {
  if (h.is_threshold()) throw Error("slicing comparison needs a non-threshold loss");
  if (m1 == 0) throw Error("m1 must be positive");
  const std::size_t m = m1 + m2;
  const double phi1 = static_cast<double>(m1) / static_cast<double>(m);
  SlicingResult out;

  if (const auto* disc = std::get_if<DiscreteMinislot>(&minislot_law)) {
    const std::size_t k = disc->values.size();
    double combos = std::pow(static_cast<double>(k), static_cast<double>(m));
    if (combos <= 2e6) {
      std::vector<std::size_t> idx(m, 0);
      for (;;) {
        double p = 1.0, head = 0.0, all = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          p *= disc->probs[idx[i]];
          all += disc->values[idx[i]];
          if (i < m1) head += disc->values[idx[i]];
        }
        out.lhs += p * h.h(head);
        out.rhs += p * h.h(phi1 * all);
        std::size_t pos = 0;
        while (pos < m && ++idx[pos] == k) idx[pos++] = 0;
        if (pos == m) break;
      }
      out.exact = true;
      out.holds = out.lhs >= out.rhs - 1e-12;
      return out;
    }
  } else if (!std::holds_alternative<UniformMinislot>(minislot_law)) {
    throw Error("slicing comparison takes a discrete or uniform minislot law");
  }

  if (samples < 2) throw Error("need at least two samples");
  double sl = 0.0, sr = 0.0, sd = 0.0, sd2 = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    double head = 0.0, all = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double v;
      if (const auto* u = std::get_if<UniformMinislot>(&minislot_law)) {
        v = rng.uniform(u->lo, u->hi);
      } else {
        const auto& dd = std::get<DiscreteMinislot>(minislot_law);
        v = dd.values[rng.categorical(dd.probs)];
      }
      all += v;
      if (i < m1) head += v;
    }
    const double a = h.h(head), b = h.h(phi1 * all);
    sl += a;
    sr += b;
    sd += a - b;
    sd2 += (a - b) * (a - b);
  }
  const double ns = static_cast<double>(samples);
  out.lhs = sl / ns;
  out.rhs = sr / ns;
  const double mean = sd / ns;
  const double var = std::max(0.0, (sd2 / ns - mean * mean) * ns / (ns - 1.0));
  out.sigma = std::sqrt(var / ns);
  out.holds = out.lhs >= out.rhs - 3.0 * out.sigma;
  return out;
}

}  // namespace jointsched
