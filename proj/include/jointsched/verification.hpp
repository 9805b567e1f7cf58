#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/inner_solver.hpp"
#include "jointsched/loss_rate.hpp"
#include "jointsched/oracle.hpp"
#include "jointsched/rng.hpp"
#include "jointsched/schedulers.hpp"

namespace jointsched {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Point on the simplex: normalized uniforms, optionally with some zeros.
inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.uniform());
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

/// Random (phi, lbar, rho) with lbar <= phi and common per-state sum rho.
struct MeanLoadInstance {
  AllocationMatrix phi;
  std::vector<std::vector<double>> lbar;
  double rho = 0.0;
};

inline MeanLoadInstance random_mean_load_instance(std::size_t users, std::size_t states, Rng& rng) {
  MeanLoadInstance in;
  in.phi = AllocationMatrix(users, states);
  in.lbar.assign(users, std::vector<double>(states));
  std::vector<double> sums(states, 0.0);
  for (std::size_t s = 0; s < states; ++s) {
    const auto col = random_simplex(users, rng);
    in.phi.set_column(s, col);
    for (std::size_t u = 0; u < users; ++u) {
      in.lbar[u][s] = col[u] * rng.uniform(0.0, 0.95);
      sums[s] += in.lbar[u][s];
    }
  }
  in.rho = *std::min_element(sums.begin(), sums.end());
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t u = 0; u < users; ++u) in.lbar[u][s] *= in.rho / sums[s];
  return in;
}

/// A random single-state problem whose g are concave: monomial, linear or
/// exponential losses on binomial or uniform minislot demand.
struct RandomSlotInstance {
  SystemConfig cfg;
  std::vector<double> weights;
};

inline RandomSlotInstance random_concave_instance(std::size_t users, Rng& rng) {
  RandomSlotInstance in;
  SystemConfig& c = in.cfg;
  c.num_users = users;
  c.num_states = 1;
  c.num_minislots = 8;
  c.delta = rng.uniform(0.1, 0.6);
  c.state_probs = {1.0};
  c.peak_rates.resize(users);
  c.utilities.assign(users, Utility{});
  for (std::size_t u = 0; u < users; ++u) {
    c.peak_rates[u] = {rng.uniform(1.0, 10.0)};
    const double pick = rng.uniform();
    if (pick < 0.25) c.loss_models.push_back(LossModel::linear());
    else if (pick < 0.6)
      c.loss_models.push_back(LossModel::monomial(rng.uniform(0.5, 1.0), 1.0 + std::floor(rng.uniform(0.0, 3.0))));
    else c.loss_models.push_back(LossModel::exponential(rng.uniform(0.1, 2.0)));
    in.weights.push_back(rng.uniform(0.2, 2.0));
  }
  if (rng.uniform() < 0.5) c.demand = BinomialMinislot{rng.uniform(0.1, 0.9)};
  else c.demand = UniformMinislot{0.0, rng.uniform(0.02, 0.2)};
  return in;
}

inline std::vector<CheckResult> verify_theorems(std::uint64_t seed = 7) {
  std::vector<CheckResult> out;
  Rng rng(seed, 101);
  {
    double worst = 0.0, worst_sum = 0.0;
    bool ok = true;
    for (int i = 0; i < 200; ++i) {
      auto in = random_mean_load_instance(3, 4, rng);
      const auto p2 = theorem1_construction(in.phi, in.lbar, in.rho);
      for (std::size_t s = 0; s < 4; ++s) {
        double sum = 0.0;
        for (std::size_t u = 0; u < 3; ++u) {
          sum += p2(u, s);
          if (p2(u, s) < 0.0) ok = false;
          worst = std::max(worst, std::abs((in.phi(u, s) - in.lbar[u][s]) - p2(u, s) * (1.0 - in.rho)));
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }
    }
    ok = ok && worst <= 1e-12 && worst_sum <= 1e-12;
    std::ostringstream d;
    d << "max identity error " << worst << ", max row-sum error " << worst_sum;
    out.push_back({"mean-rate construction", ok, d.str()});
  }
  {
    double gap = -1.0;
    for (auto loss : {LossModel::linear(), LossModel::monomial(1.0, 2.0)}) {
      TinyInstance t;
      t.loss = loss;
      gap = std::max(gap, minislot_dependent_bruteforce(t).max_gap);
    }
    std::ostringstream d;
    d << "max(dependent - homogeneous) " << gap;
    out.push_back({"minislot-homogeneous optimality", gap <= 1e-9, d.str()});
  }
  {
    const DemandSpec coin = DiscreteMinislot{{0.0, 1.0}, {0.5, 0.5}};
    auto e = slicing_comparison(LossModel::monomial(1.0, 2.0), 1, 1, coin, 0, rng);
    bool ok = std::abs(e.lhs - 0.5) <= 1e-12 && std::abs(e.rhs - 0.375) <= 1e-12;
    auto lin = slicing_comparison(LossModel::linear(), 2, 3,
                                  DiscreteMinislot{{0.0, 0.05, 0.1}, {0.3, 0.3, 0.4}}, 0, rng);
    ok = ok && std::abs(lin.lhs - lin.rhs) <= 1e-12;
    int held = 0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t m1 = 1 + static_cast<std::size_t>(rng.uniform() * 4);
      const std::size_t m2 = 1 + static_cast<std::size_t>(rng.uniform() * 4);
      const double hi = 1.0 / static_cast<double>(m1 + m2);
      const LossModel h = rng.uniform() < 0.5 ? LossModel::monomial(1.0, 1.0 + rng.uniform(0.0, 2.0))
                                              : LossModel::exponential(rng.uniform(0.1, 2.0));
      held += slicing_comparison(h, m1, m2, UniformMinislot{0.0, hi}, 20000, rng).holds;
    }
    ok = ok && held == 100;
    std::ostringstream d;
    d << "coin case " << e.lhs << "/" << e.rhs << ", linear gap " << lin.lhs - lin.rhs << ", "
      << held << "/100 random instances hold";
    out.push_back({"time vs frequency slicing", ok, d.str()});
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 4);
      const auto phi = random_simplex(n, rng);
      std::vector<double> t(n);
      for (double& x : t) x = rng.uniform(0.05, 1.0);
      const DemandLaw law(TruncatedParetoAggregate{2.0, rng.uniform(0.05, 0.5)}, 8, rng.uniform(0.05, 0.5));
      const auto thr = per_user_threshold(t);
      const auto gamma = tp_weights(phi, thr);
      const auto eps = loss_probability(phi, gamma, thr, law);
      const double bound = pooled_loss_bound(phi, thr, law);
      for (double e : eps) worst = std::max(worst, std::abs(e - bound));
    }
    std::ostringstream d;
    d << "max |eps_TP - bound| " << worst;
    out.push_back({"threshold-proportional placement", worst <= 1e-12, d.str()});
  }
  return out;
}

inline std::vector<CheckResult> verify_solver(std::uint64_t seed = 11) {
  std::vector<CheckResult> out;
  Rng rng(seed, 202);
  {
    double worst = 0.0;
    bool feasible = true;
    for (int i = 0; i < 50; ++i) {
      auto in = random_concave_instance(2, rng);
      const DemandLaw law = in.cfg.demand_law();
      SlotProblem p{in.weights, rate_evaluators(in.cfg, law, 0), in.cfg.delta};
      const auto sol = solve_per_slot(p);
      const auto grid = grid_oracle(p, 0.01);
      worst = std::max(worst, grid.objective - sol.objective);
      feasible = feasible && jointly_feasible(sol.phi, sol.gamma, in.cfg.delta);
    }
    std::ostringstream d;
    d << "max(grid - solver) " << worst << (feasible ? ", all feasible" : ", INFEASIBLE output");
    out.push_back({"solver vs grid", worst <= 1e-3 && feasible, d.str()});
  }
  {
    bool ok = true;
    for (int i = 0; i < 50; ++i) {
      std::vector<double> phi(3), gamma(3);
      for (double& x : phi) x = rng.uniform(-1.0, 2.0);
      for (double& x : gamma) x = rng.uniform(-1.0, 2.0);
      const double delta = rng.uniform(0.05, 0.95);
      auto [p, g] = project_feasible(phi, gamma, delta);
      ok = ok && jointly_feasible(p, g, delta);
      auto [p2, g2] = project_feasible(p, g, delta);
      for (std::size_t u = 0; u < 3; ++u)
        ok = ok && std::abs(p2[u] - p[u]) <= 1e-9 && std::abs(g2[u] - g[u]) <= 1e-9;
    }
    out.push_back({"feasibility projection", ok, ok ? "feasible and idempotent" : "failed"});
  }
  return out;
}

}  // namespace jointsched
