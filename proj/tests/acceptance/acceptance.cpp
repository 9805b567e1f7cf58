// Acceptance checks. Usage: acceptance <criterion number> [...]
// Prints one "criterion N: PASS|FAIL ..." line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jointsched/jointsched.hpp"
#include "oracles.hpp"

using namespace jointsched;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct MeanSd {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

MeanSd mean_se(const std::vector<double>& x) {
  MeanSd m;
  const double n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double v = 0.0;
  for (double a : x) v += (a - m.mean) * (a - m.mean);
  m.se = x.size() > 1 ? std::sqrt(v / (n - 1) / n) : 0.0;
  return m;
}

// --------------------------------------------------------------------------

Outcome c01() {
  const auto ex = two_user_linear_example();
  bool exact = ex.static_no_puncture == 1.5 && ex.random_puncture == 0.75 && ex.opportunistic_puncture == 0.875;
  const auto rows = run_linear_sanity(100000, 1);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(r.simulated - r.analytic));
  std::string d = fmt("analytic %.6g/%.6g/%.6g, simulated %.4f/%.4f/%.4f, max dev %.4f", ex.static_no_puncture,
                      ex.random_puncture, ex.opportunistic_puncture, rows[0].simulated, rows[1].simulated,
                      rows[2].simulated, worst);
  return {exact && worst <= 0.01, d};
}

// Two-user, two-state instance.
SystemConfig c02_config() {
  SystemConfig c;
  c.num_users = 2;
  c.num_states = 2;
  c.delta = 0.3;
  c.state_probs = {0.5, 0.5};
  c.peak_rates = {{1.5, 1.0}, {1.0, 1.5}};
  c.utilities.assign(2, Utility{});
  c.loss_models = {LossModel::monomial(1, 2), LossModel::piecewise_quadratic(0.7)};
  c.demand = BinomialMinislot{0.5};
  return c;
}

Outcome c02() {
  const SystemConfig cfg = c02_config();
  const DemandLaw law = cfg.demand_law();
  const auto opt = offline_optimum(cfg, law);

  // Grid check: per-state achievable (g1, g2) on a 0.01 grid, Pareto frontier,
  // then the best state combination under the log utility.
  const int n = 100;
  std::vector<std::vector<std::pair<double, double>>> front(2);
  for (std::size_t s = 0; s < 2; ++s) {
    ExpectedRate g0(cfg.peak_rates[0][s], cfg.loss_models[0], law, s);
    ExpectedRate g1(cfg.peak_rates[1][s], cfg.loss_models[1], law, s);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double p = i / double(n), y = j / double(n);
        if ((1 - cfg.delta) * y > p + 1e-12 || (1 - cfg.delta) * (1 - y) > 1 - p + 1e-12) continue;
        pts.emplace_back(g0.value(p, y), g1.value(1 - p, 1 - y));
      }
    front[s] = oracle::pareto_frontier(pts);
  }
  double grid_best = -INFINITY;
  for (auto& a : front[0])
    for (auto& b : front[1]) {
      const double r0 = 0.5 * a.first + 0.5 * b.first, r1 = 0.5 * a.second + 0.5 * b.second;
      if (r0 > 0 && r1 > 0) grid_best = std::max(grid_best, std::log(r0) + std::log(r1));
    }
  const bool verified = opt.utility >= grid_best - 1e-9 && opt.utility <= grid_best + 1e-2;

  const double rs = std::max(opt.r_star[0], opt.r_star[1]);
  int ok = 0;
  std::ostringstream devs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SchedulerSpec spec;
    spec.kind = SchedulerKind::kConvexSA;
    SimOptions o;
    o.slots = 10000;
    o.seed = seed;
    const auto tr = run_simulation(cfg, spec, o);
    double dev = 0.0;
    for (std::size_t u = 0; u < 2; ++u) dev = std::max(dev, std::abs(tr.summary.final_r_bar[u] - opt.r_star[u]));
    ok += dev <= 0.02 * rs;
    devs << (seed > 1 ? "," : "") << fmt("%.4f", dev / rs);
  }
  return {verified && ok == 5,
          fmt("r*=(%.5f,%.5f) U*=%.6f grid U=%.6f; %d/5 seeds within 2%% (rel dev ", opt.r_star[0],
              opt.r_star[1], opt.utility, grid_best, ok) +
              devs.str() + ")"};
}

Outcome c03() {
  Rng rng(303);
  double worst = 0.0, worst_simplex = 0.0;
  bool nonneg = true;
  for (int i = 0; i < 200; ++i) {
    const std::size_t users = 2 + static_cast<std::size_t>(rng.uniform() * 5);
    const std::size_t states = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    auto in = random_mean_load_instance(users, states, rng);
    const auto p2 = theorem1_construction(in.phi, in.lbar, in.rho);
    for (std::size_t s = 0; s < states; ++s) {
      double sum = 0.0;
      for (std::size_t u = 0; u < users; ++u) {
        const double r_hat = rng.uniform(0.5, 10.0);
        nonneg = nonneg && p2(u, s) >= 0.0;
        sum += p2(u, s);
        worst = std::max(worst, std::abs(r_hat * (in.phi(u, s) - in.lbar[u][s]) - r_hat * p2(u, s) * (1 - in.rho)));
      }
      worst_simplex = std::max(worst_simplex, std::abs(sum - 1.0));
    }
  }
  return {nonneg && worst <= 1e-12 && worst_simplex <= 1e-12,
          fmt("max rate error %.3g, max simplex error %.3g, nonnegative %s", worst, worst_simplex,
              nonneg ? "yes" : "no")};
}

Outcome c04() {
  Rng rng(404);
  double worst = 0.0;
  int rp_ok = 0, rand_ok = 0;
  const std::size_t slots = 100000;
  double worst_margin = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 4);
    const auto phi = random_simplex(n, rng);
    std::vector<double> t(n);
    for (double& x : t) x = rng.uniform(0.05, 1.0);
    const double delta = rng.uniform(0.05, 0.5);
    const DemandLaw law(TruncatedParetoAggregate{2.0, rng.uniform(0.05, 0.5)}, 8, delta);
    const auto thr = per_user_threshold(t);
    const auto gamma = tp_weights(phi, thr);
    const auto eps = loss_probability(phi, gamma, thr, law);
    const double bound = pooled_loss_bound(phi, thr, law);
    for (double e : eps) worst = std::max(worst, std::abs(e - bound));

    Rng drng(404, static_cast<std::uint64_t>(i));
    const BandMap band = BandMap::from_shares(phi);
    const double f = (1.0 - delta) / 8.0;
    std::vector<double> demand(8);
    std::size_t rp_hits = 0, rand_hits = 0;
    for (std::size_t k = 0; k < slots; ++k) {
      double blocked = 0.0;
      law.sample_into(drng, demand, blocked);
      const double total = std::accumulate(demand.begin(), demand.end(), 0.0);
      bool rp_loss = false, rand_loss = false;
      const auto loads = uniform_random_placement(demand, band, f, drng);
      for (std::size_t u = 0; u < n; ++u) {
        const double lrp = phi[u] * total;
        if (lrp > 0.0 && lrp >= phi[u] * t[u]) rp_loss = true;
        if (loads[u] > 0.0 && loads[u] >= phi[u] * t[u]) rand_loss = true;
      }
      rp_hits += rp_loss;
      rand_hits += rand_loss;
    }
    auto check = [&](std::size_t hits) {
      const double p = static_cast<double>(hits) / slots;
      const double sigma = std::sqrt(std::max(p * (1 - p), bound * (1 - bound)) / slots);
      worst_margin = std::min(worst_margin, (p - bound) / std::max(sigma, 1e-300));
      return p >= bound - 3.0 * sigma;
    };
    rp_ok += check(rp_hits);
    rand_ok += check(rand_hits);
  }
  return {worst <= 1e-12 && rp_ok == 100 && rand_ok == 100,
          fmt("max |eps_TP - bound| %.3g; RP %d/100, random %d/100 at or above TP-3sigma (min margin %.2f sigma)",
              worst, rp_ok, rand_ok, worst_margin)};
}

Outcome c05() {
  Rng rng(505);
  const DemandSpec coin = DiscreteMinislot{{0.0, 1.0}, {0.5, 0.5}};
  const auto e = slicing_comparison(LossModel::monomial(1.0, 2.0), 1, 1, coin, 0, rng);
  const bool coin_ok = std::abs(e.lhs - 0.5) <= 1e-12 && std::abs(e.rhs - 0.375) <= 1e-12;
  double lin_gap = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t m1 = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const std::size_t m2 = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const double hi = 1.0 / static_cast<double>(m1 + m2);
    const auto lin = slicing_comparison(LossModel::linear(), m1, m2,
                                        DiscreteMinislot{{0.0, hi * rng.uniform(), hi}, {0.3, 0.3, 0.4}}, 0, rng);
    lin_gap = std::max(lin_gap, std::abs(lin.lhs - lin.rhs));
  }
  int held = 0;
  double worst_z = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const std::size_t m1 = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const std::size_t m2 = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const double hi = 1.0 / static_cast<double>(m1 + m2);
    const LossModel h = rng.uniform() < 0.5 ? LossModel::monomial(rng.uniform(0.2, 1.0), 1.0 + rng.uniform(0.0, 2.0))
                                            : LossModel::exponential(rng.uniform(0.1, 2.0));
    const auto r = slicing_comparison(h, m1, m2, UniformMinislot{0.0, hi * rng.uniform(0.3, 1.0)}, 20000, rng);
    held += r.holds;
    if (r.sigma > 0) worst_z = std::min(worst_z, (r.lhs - r.rhs) / r.sigma);
  }
  return {coin_ok && lin_gap <= 1e-12 && held == 100,
          fmt("coin lhs=%.12g rhs=%.12g; linear max gap %.3g; %d/100 convex instances hold (min z %.2f)", e.lhs,
              e.rhs, lin_gap, held, worst_z)};
}

Outcome c06() {
  std::ostringstream d;
  bool ok = true;
  for (auto [name, loss] : {std::pair{"linear", LossModel::linear()}, std::pair{"monomial(1,2)", LossModel::monomial(1, 2)}}) {
    TinyInstance t;
    t.loss = loss;
    const auto r = minislot_dependent_bruteforce(t);
    ok = ok && r.max_gap <= 1e-9;
    d << name << fmt(" gap %.3g over %zu policies; ", r.max_gap, r.policies);
  }
  return {ok, d.str()};
}

Outcome c07() {
  Rng rng(707);
  std::ostringstream d;
  bool ok = true;
  const DemandLaw bin(BinomialMinislot{0.5}, 8, 0.3);
  for (auto [k, q] : {std::pair{1.0, 2.0}, std::pair{0.5, 1.5}, std::pair{1.0, 3.0}}) {
    const LossModel m = LossModel::monomial(k, q);
    ExpectedRate g(1.0, m, bin, 0);
    const auto rep = concavity_probe([&](double p, double y) { return g.value(p, y); }, 0.3, 10000, 1e-9, rng);
    ok = ok && rep.violations == 0;
    d << fmt("monomial(%g,%g) %zu violations; ", k, q, rep.violations);
  }
  // the lemma's law itself: Pareto renormalized on [x_min, 1], no atoms
  struct ParetoLaw {
    double x_min, eta;
    double cdf_left(double x) const { return truncated_pareto_cdf(x, x_min, eta); }
  } par{0.1, 2.0};
  for (double t : {0.3, 0.7}) {
    const auto rep = concavity_probe([&](double p, double y) { return expected_rate_threshold(1.0, p, y, t, par); },
                                     0.1, 10000, 1e-9, rng);
    ok = ok && rep.violations == 0;
    d << fmt("threshold(%g)+pareto %zu violations; ", t, rep.violations);
  }
  // informational: served law min(D, 1 - delta) carries an atom at the cap
  const DemandLaw served(TruncatedParetoAggregate{2.0, 0.1}, 8, 0.1);
  const auto cap_rep = concavity_probe(
      [&](double p, double y) { return expected_rate_threshold(1.0, p, y, 0.7, served); }, 0.1, 10000, 1e-9, rng);
  d << fmt("(capped served law, not gated: %zu violations, worst %.3g); ", cap_rep.violations, cap_rep.worst_violation);
  const DemandLaw step(EmpiricalAggregate{{0.5}, {1.0}}, 8, 0.3);
  const LossModel thr = LossModel::threshold(std::vector<double>{0.4});
  ExpectedRate gs(1.0, thr, step, 0);
  const auto rep = concavity_probe([&](double p, double y) { return gs.value(p, y); }, 0.3, 10000, 1e-9, rng);
  ok = ok && rep.violations > 0;
  d << fmt("step-CDF counterexample %zu violations (worst %.3g)", rep.violations, rep.worst_violation);
  return {ok, d.str()};
}

Outcome c08() {
  Rng rng(808);
  double worst = -INFINITY;
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
  return {worst <= 1e-3 && feasible, fmt("max(grid - solver) %.3g, %s", worst, feasible ? "all feasible" : "INFEASIBLE")};
}

// Seed means per (scheduler, param) of a preset sweep.
using Cell = std::map<std::pair<std::string, double>, std::vector<ExperimentRow>>;

Cell run_cells(Preset p) {
  ExperimentOptions opt;
  Cell cells;
  for (auto& r : run_experiment(p, opt)) cells[{r.scheduler, r.rho_or_delta}].push_back(r);
  return cells;
}

std::vector<double> field(const std::vector<ExperimentRow>& rows, double ExperimentRow::*f) {
  std::vector<double> v;
  for (auto& r : rows) v.push_back(r.*f);
  return v;
}

// Per-seed paired differences a - b.
MeanSd paired(const std::vector<ExperimentRow>& a, const std::vector<ExperimentRow>& b, double ExperimentRow::*f) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(a[i].*f - b[i].*f);
  return mean_se(d);
}

Outcome c09() {
  const auto cells = run_cells(Preset::kConvexVsRp);
  const auto rhos = preset_sweep(Preset::kConvexVsRp);
  std::ostringstream d;
  bool dominate = true, increasing = true;
  std::vector<MeanSd> gaps;
  for (double rho : rhos) {
    const auto& sa = cells.at({"convex-sa", rho});
    const auto& rp = cells.at({"gradient-rp", rho});
    const auto g = paired(sa, rp, &ExperimentRow::sum_utility);
    gaps.push_back(g);
    dominate = dominate && g.mean >= -3.0 * g.se;
    d << fmt("rho %.1f gap %.3f+-%.3f; ", rho, g.mean, g.se);
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    const double tol = 3.0 * std::hypot(gaps[i].se, gaps[i - 1].se);
    increasing = increasing && gaps[i].mean >= gaps[i - 1].mean - tol;
  }
  const double sa_rob = mean_se(field(cells.at({"convex-sa", 0.6}), &ExperimentRow::mean_rate_robust)).mean;
  const double rp_rob = mean_se(field(cells.at({"gradient-rp", 0.6}), &ExperimentRow::mean_rate_robust)).mean;
  const double drop = 1.0 - rp_rob / sa_rob;
  d << fmt("robust rate at rho 0.6: SA %.3f, RP %.3f (drop %.1f%%)", sa_rob, rp_rob, 100 * drop);
  d << (dominate ? "" : "; SA below RP somewhere") << (increasing ? "" : "; gap not increasing");
  return {dominate && increasing && drop >= 0.20, d.str()};
}

Outcome c10() {
  const auto cells = run_cells(Preset::kThreshold);
  std::ostringstream d;
  bool ok = true;
  double worst = 0.0;
  for (double rho : preset_sweep(Preset::kThreshold)) {
    const double sa = mean_se(field(cells.at({"convex-sa", rho}), &ExperimentRow::sum_utility)).mean;
    const double tp = mean_se(field(cells.at({"threshold-tp", rho}), &ExperimentRow::sum_utility)).mean;
    const double rel = std::abs(tp - sa) / std::abs(sa);
    worst = std::max(worst, rel);
    ok = ok && rel <= 0.05;
    d << fmt("rho %.1f SA %.3f TP %.3f (%.2f%%); ", rho, sa, tp, 100 * rel);
  }
  d << fmt("max rel diff %.2f%%", 100 * worst);
  return {ok, d.str()};
}

Outcome c11() {
  const auto cells = run_cells(Preset::kDeltaTradeoff);
  const auto deltas = preset_sweep(Preset::kDeltaTradeoff);
  std::ostringstream d;
  bool util_ok = true, tail_ok = true;
  for (double x : deltas) {
    const auto& r = cells.at({"convex-sa", x});
    d << fmt("delta %.1f U %.3f tail %.4f; ", x, mean_se(field(r, &ExperimentRow::sum_utility)).mean,
             mean_se(field(r, &ExperimentRow::urllc_delay_tail)).mean);
  }
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    const auto& prev = cells.at({"convex-sa", deltas[i - 1]});
    const auto& cur = cells.at({"convex-sa", deltas[i]});
    const auto du = paired(cur, prev, &ExperimentRow::sum_utility);
    const auto dt = paired(cur, prev, &ExperimentRow::urllc_delay_tail);
    util_ok = util_ok && du.mean <= 3.0 * du.se;
    tail_ok = tail_ok && dt.mean <= 3.0 * dt.se;
  }
  d << "utility " << (util_ok ? "non-increasing" : "INCREASES") << ", delay tail "
    << (tail_ok ? "non-increasing" : "INCREASES");
  return {util_ok && tail_ok, d.str()};
}

Outcome c12() {
  auto csv = [](Preset p, std::size_t threads) {
    ExperimentOptions o;
    o.slots = 300;
    o.seeds = {1, 2};
    o.threads = threads;
    std::ostringstream os;
    write_experiment_csv(os, run_experiment(p, o));
    return os.str();
  };
  bool ok = true;
  for (auto p : {Preset::kConvexVsRp, Preset::kThreshold, Preset::kDeltaTradeoff}) {
    const auto a = csv(p, 1), b = csv(p, 1), c = csv(p, 3);
    ok = ok && a == b && a == c;
  }
  auto sanity = [] {
    std::ostringstream os;
    write_sanity_csv(os, run_linear_sanity(2000, 5));
    return os.str();
  };
  ok = ok && sanity() == sanity();
  auto trace = [] {
    const SystemConfig cfg = c02_config();
    SchedulerSpec spec;
    SimOptions o;
    o.slots = 500;
    o.seed = 42;
    o.record_slots = true;
    std::ostringstream os;
    write_trace_csv(os, run_simulation(cfg, spec, o), cfg.num_users);
    return os.str();
  };
  ok = ok && trace() == trace();
  return {ok, ok ? "experiment, sanity and trace CSVs byte-identical across runs and thread counts"
                 : "CSV bytes differ between identical runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> table{
      {1, c01}, {2, c02}, {3, c03}, {4, c04}, {5, c05}, {6, c06},
      {7, c07}, {8, c08}, {9, c09}, {10, c10}, {11, c11}, {12, c12}};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (auto& [k, v] : table) which.push_back(k);
  int failed = 0;
  for (int k : which) {
    auto it = table.find(k);
    if (it == table.end()) {
      std::printf("criterion %d: FAIL unknown criterion\n", k);
      ++failed;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s %s [%.1fs]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
