#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jointsched/config.hpp"
#include "jointsched/error.hpp"
#include "jointsched/loss_rate.hpp"

namespace jointsched {

/// Euclidean projection of v onto the probability simplex, in place.
inline void project_simplex(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0) return;
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (i + 1 == n || s[i + 1] <= t) {
      theta = t;
      break;
    }
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

/// Nearest point to (phi, gamma) with both rows on the simplex and
/// phi >= (1 - delta) gamma. Dykstra's method over two convex sets: the
/// simplex product and the per-user coupling halfspaces.
inline std::pair<std::vector<double>, std::vector<double>> project_feasible(
    std::span<const double> phi, std::span<const double> gamma, double delta) {
  const std::size_t n = phi.size();
  if (gamma.size() != n) throw Error("phi/gamma size mismatch");
  for (std::size_t u = 0; u < n; ++u)
    if (!std::isfinite(phi[u]) || !std::isfinite(gamma[u])) throw Error("non-finite input");
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error("delta outside [0,1]");

  const double c = 1.0 - delta;
  const double norm2 = 1.0 + c * c;
  std::vector<double> z(2 * n), p(2 * n, 0.0), q(2 * n, 0.0), y(2 * n), prev(2 * n);
  std::copy(phi.begin(), phi.end(), z.begin());
  std::copy(gamma.begin(), gamma.end(), z.begin() + static_cast<std::ptrdiff_t>(n));

  constexpr std::size_t kMaxCycles = 10000;
  double move = 0.0;
  for (std::size_t cycle = 0; cycle < kMaxCycles; ++cycle) {
    prev = z;
    for (std::size_t i = 0; i < 2 * n; ++i) y[i] = z[i] + p[i];
    std::vector<double> w = y;
    project_simplex(std::span<double>(w.data(), n));
    project_simplex(std::span<double>(w.data() + n, n));
    for (std::size_t i = 0; i < 2 * n; ++i) p[i] = y[i] - w[i];

    for (std::size_t i = 0; i < 2 * n; ++i) y[i] = w[i] + q[i];
    z = y;
    for (std::size_t u = 0; u < n; ++u) {
      const double slack = z[u] - c * z[n + u];
      if (slack < 0.0) {
        z[u] -= slack / norm2;
        z[n + u] += c * slack / norm2;
      }
    }
    for (std::size_t i = 0; i < 2 * n; ++i) q[i] = y[i] - z[i];

    move = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) move = std::max(move, std::abs(z[i] - prev[i]));
    if (move < 1e-10 && jointly_feasible(std::span<const double>(z.data(), n),
                                         std::span<const double>(z.data() + n, n), delta, 1e-9))
      return {std::vector<double>(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n)),
              std::vector<double>(z.begin() + static_cast<std::ptrdiff_t>(n), z.end())};
  }
  throw Error("project_feasible did not converge, residual " + std::to_string(move));
}

enum class SolveStatus { kConverged, kMaxIterations, kLineSearchFailed };

struct AscentOptions {
  double tol = 1e-9;
  std::size_t max_iters = 5000;
  bool record_history = false;
};

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
  std::vector<double> history;
};

/// Objective callback: returns F(x) and writes dF/dx into grad.
using BlockObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Projected gradient ascent over a product of simplices of equal size
/// `block`. Barzilai-Borwein trial steps, Armijo backtracking, so the
/// objective never decreases.
inline AscentResult simplex_product_ascent(const BlockObjective& f, std::vector<double> x,
                                           std::size_t block, const AscentOptions& opt = {}) {
  if (block == 0 || x.size() % block != 0) throw Error("bad block layout");
  const std::size_t n = x.size();
  auto project = [&](std::vector<double>& v) {
    for (std::size_t b = 0; b < n; b += block) project_simplex(std::span<double>(v.data() + b, block));
  };
  project(x);
  std::vector<double> g(n), y(n), gy(n);
  AscentResult res;
  double F = f(x, g);
  if (opt.record_history) res.history.push_back(F);

  constexpr double kSigma = 1e-4;
  double gnorm = 0.0;
  for (double v : g) gnorm += v * v;
  double alpha = 1.0 / std::max(1e-12, std::sqrt(gnorm));
  int small = 0;
  res.status = SolveStatus::kMaxIterations;

  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    res.iterations = it + 1;
    double Fy = 0.0, lin = 0.0, step2 = 0.0;
    bool accepted = false, stationary = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + alpha * g[i];
      project(y);
      lin = 0.0;
      step2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = y[i] - x[i];
        lin += g[i] * d;
        step2 += d * d;
      }
      if (step2 < 1e-28) {
        stationary = true;
        break;
      }
      Fy = f(y, gy);
      if (Fy >= F + kSigma * lin) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (stationary) {
      res.status = SolveStatus::kConverged;
      break;
    }
    if (!accepted) {
      res.status = SolveStatus::kLineSearchFailed;
      break;
    }
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) sy += (y[i] - x[i]) * (gy[i] - g[i]);
    const double gain = Fy - F;
    x.swap(y);
    g.swap(gy);
    F = Fy;
    if (opt.record_history) res.history.push_back(F);
    // ascent: curvature is s.(g_new - g_old) < 0
    alpha = sy < 0.0 ? std::clamp(step2 / -sy, 1e-10, 1e10) : std::min(alpha * 4.0, 1e10);
    if (gain <= opt.tol * (1.0 + std::abs(F))) {
      if (++small >= 3) {
        res.status = SolveStatus::kConverged;
        break;
      }
    } else {
      small = 0;
    }
  }
  res.x = std::move(x);
  res.value = F;
  return res;
}

/// Weighted per-slot problem: maximize sum_u w_u g_u(phi_u, gamma_u).
struct SlotProblem {
  std::vector<double> weights;
  std::vector<ExpectedRate> rates;  // one evaluator per user, all for one state
  double delta = 0.3;

  std::size_t users() const noexcept { return rates.size(); }

  double objective(std::span<const double> phi, std::span<const double> gamma) const {
    double acc = 0.0;
    for (std::size_t u = 0; u < rates.size(); ++u) acc += weights[u] * rates[u].value(phi[u], gamma[u]);
    return acc;
  }
};

/// Evaluators for every user in state s. cfg and law must outlive the result.
inline std::vector<ExpectedRate> rate_evaluators(const SystemConfig& cfg, const DemandLaw& law,
                                                 std::size_t s) {
  std::vector<ExpectedRate> out;
  out.reserve(cfg.num_users);
  for (std::size_t u = 0; u < cfg.num_users; ++u)
    out.emplace_back(cfg.peak_rates[u][s], cfg.loss_models[u], law, s);
  return out;
}

struct SlotSolution {
  std::vector<double> phi;
  std::vector<double> gamma;
  double objective = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
  std::vector<double> history;  // objective per accepted iterate, when requested
};

struct SolveOptions {
  double tol = 1e-9;
  std::size_t max_iters = 5000;
  bool record_history = false;
  /// Optional starting point (phi, gamma); sanitized onto the feasible set.
  std::optional<std::pair<std::vector<double>, std::vector<double>>> warm_start;
};

namespace detail {

// phi = (1 - delta) gamma + delta psi, with gamma and psi on the simplex.
// x packs [gamma | psi].
inline void unpack(std::span<const double> x, std::size_t n, double delta, std::vector<double>& phi,
                   std::vector<double>& gamma) {
  phi.resize(n);
  gamma.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t u = 0; u < n; ++u) phi[u] = (1.0 - delta) * x[u] + delta * x[n + u];
}

inline std::vector<double> pack(std::span<const double> phi, std::span<const double> gamma,
                                double delta) {
  const std::size_t n = phi.size();
  std::vector<double> x(2 * n);
  for (std::size_t u = 0; u < n; ++u) {
    x[u] = gamma[u];
    x[n + u] = delta > 0.0 ? std::max(0.0, (phi[u] - (1.0 - delta) * gamma[u]) / delta)
                           : 1.0 / static_cast<double>(n);
  }
  return x;
}

/// Adds w * d/d(gamma, psi) of g at (phi_u, gamma_u) into grad.
inline void accumulate_gradient(const ExpectedRate& g, double w, double phi, double gamma,
                                double delta, std::size_t u, std::size_t n,
                                std::span<double> grad) {
  double dphi = 0.0, dgamma = 0.0;
  g.gradient(phi, gamma, dphi, dgamma);
  grad[u] += w * ((1.0 - delta) * dphi + dgamma);
  grad[n + u] += w * delta * dphi;
}

/// Same, returning w * g as well.
inline double accumulate_value_gradient(const ExpectedRate& g, double w, double phi, double gamma,
                                        double delta, std::size_t u, std::size_t n,
                                        std::span<double> grad) {
  double dphi = 0.0, dgamma = 0.0;
  const double v = g.value_and_gradient(phi, gamma, dphi, dgamma);
  grad[u] += w * ((1.0 - delta) * dphi + dgamma);
  grad[n + u] += w * delta * dphi;
  return w * v;
}

}  // namespace detail

inline SlotSolution solve_per_slot(const SlotProblem& problem, const SolveOptions& opt = {}) {
  const std::size_t n = problem.users();
  if (n == 0) throw Error("empty slot problem");
  if (problem.weights.size() != n) throw Error("weights/users size mismatch");
  for (double w : problem.weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("weights must be positive and finite");
  const double delta = problem.delta;

  SlotSolution sol;
  if (n == 1) {
    sol.phi = {1.0};
    sol.gamma = {1.0};
    sol.objective = problem.objective(sol.phi, sol.gamma);
    if (opt.record_history) sol.history = {sol.objective};
    return sol;
  }

  std::vector<double> x0;
  if (opt.warm_start) {
    auto [p, g] = project_feasible(opt.warm_start->first, opt.warm_start->second, delta);
    x0 = detail::pack(p, g, delta);
  } else {
    x0.assign(2 * n, 1.0 / static_cast<double>(n));
  }

  std::vector<double> phi, gamma;
  BlockObjective f = [&](std::span<const double> x, std::span<double> grad) {
    detail::unpack(x, n, delta, phi, gamma);
    std::fill(grad.begin(), grad.end(), 0.0);
    double acc = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      acc += detail::accumulate_value_gradient(problem.rates[u], problem.weights[u], phi[u],
                                               gamma[u], delta, u, n, grad);
    }
    return acc;
  };
  AscentResult r = simplex_product_ascent(f, std::move(x0), n,
                                          {opt.tol, opt.max_iters, opt.record_history});
  detail::unpack(r.x, n, delta, sol.phi, sol.gamma);
  sol.objective = r.value;
  sol.iterations = r.iterations;
  sol.status = r.status;
  sol.history = std::move(r.history);
  return sol;
}

/// Exhaustive scan of feasible grid points. Up to three users.
inline SlotSolution grid_oracle(const SlotProblem& problem, double resolution) {
  const std::size_t n = problem.users();
  if (n == 0 || n > 3) throw Error("grid_oracle supports 1 to 3 users");
  if (!(resolution > 0.0 && resolution <= 1.0)) throw Error("resolution must lie in (0,1]");
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  const double h = 1.0 / steps;
  const double c = 1.0 - problem.delta;

  // table[u][i][j] = w_u g_u(i h, j h)
  const std::size_t m = static_cast<std::size_t>(steps) + 1;
  std::vector<std::vector<double>> table(n, std::vector<double>(m * m, 0.0));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (c * j <= i + 1e-9)
          table[u][i * m + j] = problem.weights[u] * problem.rates[u].value(i * h, j * h);

  auto compositions = [&](std::size_t parts) {
    std::vector<std::vector<int>> out;
    if (parts == 1) {
      out.push_back({steps});
    } else if (parts == 2) {
      for (int a = 0; a <= steps; ++a) out.push_back({a, steps - a});
    } else {
      for (int a = 0; a <= steps; ++a)
        for (int b = 0; a + b <= steps; ++b) out.push_back({a, b, steps - a - b});
    }
    return out;
  };
  const auto comps = compositions(n);

  SlotSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (const auto& pi : comps) {
    for (const auto& gj : comps) {
      double acc = 0.0;
      bool ok = true;
      for (std::size_t u = 0; u < n && ok; ++u) {
        if (c * gj[u] > pi[u] + 1e-9) ok = false;
        else acc += table[u][static_cast<std::size_t>(pi[u]) * m + static_cast<std::size_t>(gj[u])];
      }
      if (ok && acc > best.objective) {
        best.objective = acc;
        best.phi.assign(n, 0.0);
        best.gamma.assign(n, 0.0);
        for (std::size_t u = 0; u < n; ++u) {
          best.phi[u] = pi[u] * h;
          best.gamma[u] = gj[u] * h;
        }
      }
    }
  }
  return best;
}

}  // namespace jointsched
