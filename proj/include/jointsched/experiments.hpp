#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/oracle.hpp"
#include "jointsched/rng.hpp"
#include "jointsched/schedulers.hpp"
#include "jointsched/sim_harness.hpp"

namespace jointsched {

enum class Preset { kConvexVsRp, kThreshold, kDeltaTradeoff, kLinearSanity };

inline std::string preset_name(Preset p) {
  switch (p) {
    case Preset::kConvexVsRp: return "convex-vs-rp";
    case Preset::kThreshold: return "threshold";
    case Preset::kDeltaTradeoff: return "delta-tradeoff";
    case Preset::kLinearSanity: return "linear-sanity";
  }
  return "unknown";
}

inline Preset parse_preset(const std::string& name) {
  for (auto p : {Preset::kConvexVsRp, Preset::kThreshold, Preset::kDeltaTradeoff,
                 Preset::kLinearSanity})
    if (preset_name(p) == name) return p;
  throw ConfigError("preset", "unknown preset '" + name +
                                  "'; known: convex-vs-rp, threshold, delta-tradeoff, linear-sanity");
}

namespace preset {
inline constexpr std::size_t kUsers = 20;
inline constexpr std::size_t kRobust = 10;  // users [0, kRobust) are robust
inline constexpr std::size_t kStates = 100;
inline constexpr std::size_t kRbs = 100;
inline constexpr std::size_t kMinislots = 8;
}  // namespace preset

/// Sweep values of the preset's load (rho) or sharing (delta) parameter.
inline std::vector<double> preset_sweep(Preset p) {
  switch (p) {
    case Preset::kConvexVsRp:
    case Preset::kThreshold: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    case Preset::kDeltaTradeoff: return {0.1, 0.2, 0.3, 0.4, 0.5};
    case Preset::kLinearSanity: return {0.5};
  }
  return {};
}

inline std::vector<SchedulerKind> preset_schedulers(Preset p) {
  switch (p) {
    case Preset::kConvexVsRp: return {SchedulerKind::kConvexSA, SchedulerKind::kGradientRP};
    case Preset::kThreshold: return {SchedulerKind::kConvexSA, SchedulerKind::kThresholdTP};
    case Preset::kDeltaTradeoff: return {SchedulerKind::kConvexSA};
    case Preset::kLinearSanity:
      return {SchedulerKind::kStaticRandom, SchedulerKind::kStaticOpportunistic};
  }
  return {};
}

/// Peak rates [user][state]: robust users uniform on {4..10} (mean 7),
/// sensitive users uniform on {1..5} (mean 3), drawn once per seed.
inline std::vector<std::vector<double>> synthesize_rates(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0, kRateMatrixStream);
  std::vector<std::vector<double>> r(preset::kUsers, std::vector<double>(preset::kStates));
  for (std::size_t u = 0; u < preset::kUsers; ++u) {
    const bool robust = u < preset::kRobust;
    const int lo = robust ? 4 : 1, span = robust ? 7 : 5;
    for (double& x : r[u]) x = lo + static_cast<int>(rng.uniform() * span);
  }
  return r;
}

inline bool preset_is_robust(std::size_t u) { return u < preset::kRobust; }

/// Materialized scenario. `param` is rho for the load sweeps and delta for
/// the sharing sweep; ignored by linear-sanity.
inline SystemConfig preset_config(Preset p, double param, std::uint64_t seed) {
  SystemConfig c;
  if (p == Preset::kLinearSanity) {
    c.num_users = 2;
    c.num_states = 4;
    c.num_minislots = 8;
    c.delta = 0.5;
    c.rb_count = 100;
    c.state_probs.assign(4, 0.25);
    c.peak_rates = {{2, 2, 4, 4}, {2, 4, 2, 4}};
    c.utilities.assign(2, Utility{});
    c.loss_models.assign(2, LossModel::linear());
    c.demand = DiscreteMinislot{{0.0625}, {1.0}};
    return c;
  }
  c.num_users = preset::kUsers;
  c.num_states = preset::kStates;
  c.num_minislots = preset::kMinislots;
  c.rb_count = preset::kRbs;
  c.state_probs.assign(preset::kStates, 1.0 / static_cast<double>(preset::kStates));
  // keep the sum exactly 1
  c.state_probs.back() = 1.0 - std::accumulate(c.state_probs.begin(), c.state_probs.end() - 1, 0.0);
  c.peak_rates = synthesize_rates(seed);
  c.loss_models.resize(preset::kUsers);
  switch (p) {
    case Preset::kConvexVsRp: {
      const double rho = param;
      c.delta = 0.3;
      c.utilities.assign(preset::kUsers, Utility{});
      for (std::size_t u = 0; u < preset::kUsers; ++u)
        c.loss_models[u] = preset_is_robust(u) ? LossModel::monomial(1.0, 2.0)
                                               : LossModel::piecewise_quadratic(0.7);
      c.demand = BinomialMinislot{1.0 - rho / (1.0 - c.delta)};
      break;
    }
    case Preset::kThreshold: {
      const double rho = param;
      c.delta = 0.1;
      c.utilities.assign(preset::kUsers, Utility{6.5, 1.0});
      std::vector<double> alpha(preset::kStates);
      for (std::size_t s = 0; s < preset::kStates; ++s) alpha[s] = s < preset::kStates / 2 ? 0.3 : 0.7;
      c.loss_models.assign(preset::kUsers, LossModel::threshold(alpha));
      c.demand = TruncatedParetoAggregate{2.0, rho / (2.0 - rho)};
      break;
    }
    case Preset::kDeltaTradeoff: {
      c.delta = param;
      c.utilities.assign(preset::kUsers, Utility{4.2, 1.0});
      for (std::size_t u = 0; u < preset::kUsers; ++u)
        c.loss_models[u] = LossModel::exponential(preset_is_robust(u) ? 0.2 : 0.7);
      c.demand = UniformMinislot{0.0, 0.125};
      break;
    }
    default:
      break;
  }
  return c;
}

/// Histogram law of the per-slot served URLLC total of the FCFS queue, from
/// a standalone queue run. Bin values are within-bin sample means.
inline EmpiricalAggregate queue_served_law(const SystemConfig& cfg, std::uint64_t seed,
                                           std::size_t slots = 20000, std::size_t bins = 100) {
  const auto* uni = std::get_if<UniformMinislot>(&cfg.demand);
  if (uni == nullptr) throw ConfigError("demand", "queue law needs uniform_minislot");
  Rng rng = Rng::derive(seed, 0xC0FFEE, kDemandStream);
  const double cap = (1.0 - cfg.delta) / static_cast<double>(cfg.num_minislots);
  const double top = 1.0 - cfg.delta;
  UrllcQueue q;
  std::vector<double> sum(bins, 0.0), count(bins, 0.0);
  const std::size_t burn = slots / 20;
  for (std::size_t t = 0; t < burn + slots; ++t) {
    double total = 0.0;
    for (std::size_t m = 0; m < cfg.num_minislots; ++m)
      total += urllc_queue_step(q, rng.uniform(uni->lo, uni->hi), cap).served;
    if (t < burn) continue;
    total = std::min(total, top);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(total / top * static_cast<double>(bins)));
    sum[b] += total;
    count[b] += 1.0;
  }
  EmpiricalAggregate law;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    law.values.push_back(sum[b] / count[b]);
    law.probs.push_back(count[b] / static_cast<double>(slots));
  }
  return law;
}

inline SchedulerSpec preset_scheduler_spec(Preset p, SchedulerKind kind, const SystemConfig& cfg,
                                           std::uint64_t seed) {
  SchedulerSpec spec;
  spec.kind = kind;
  if (p == Preset::kDeltaTradeoff) spec.planning_demand = queue_served_law(cfg, seed);
  return spec;
}

struct ExperimentRow {
  std::string preset;
  std::string scheduler;
  double rho_or_delta = 0.0;
  std::uint64_t seed = 0;
  double sum_utility = 0.0;
  double mean_rate_robust = 0.0;
  double mean_rate_sensitive = 0.0;
  double any_loss_prob = 0.0;
  double urllc_delay_tail = 0.0;
};

struct ExperimentOptions {
  std::size_t slots = 10000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t threads = 0;  // 0: SCHED_SIM_THREADS or hardware concurrency
};

/// Worker count: SCHED_SIM_THREADS when set, else hardware concurrency.
inline std::size_t worker_count(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SCHED_SIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs jobs[i]() on a small pool; results stay in job order.
template <typename R>
std::vector<R> run_parallel(const std::vector<std::function<R()>>& jobs, std::size_t threads) {
  std::vector<R> out(jobs.size());
  std::vector<std::exception_ptr> errs(jobs.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= jobs.size()) return;
        i = next++;
      }
      try {
        out[i] = jobs[i]();
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::min(threads, jobs.size());
  if (k <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

inline ExperimentRow run_preset_point(Preset p, SchedulerKind kind, double param,
                                      std::uint64_t seed, std::size_t slots) {
  const SystemConfig cfg = preset_config(p, param, seed);
  const SchedulerSpec spec = preset_scheduler_spec(p, kind, cfg, seed);
  SimOptions opt;
  opt.slots = slots;
  opt.seed = seed;
  opt.urllc_queue = p == Preset::kDeltaTradeoff;
  const SimTrace tr = run_simulation(cfg, spec, opt);
  ExperimentRow row;
  row.preset = preset_name(p);
  row.scheduler = scheduler_name(kind);
  row.rho_or_delta = param;
  row.seed = seed;
  row.sum_utility = tr.summary.sum_utility;
  double rob = 0.0, sen = 0.0;
  std::size_t nr = 0, ns = 0;
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    if (preset_is_robust(u)) {
      rob += tr.summary.mean_rates[u];
      ++nr;
    } else {
      sen += tr.summary.mean_rates[u];
      ++ns;
    }
  }
  row.mean_rate_robust = nr ? rob / static_cast<double>(nr) : 0.0;
  row.mean_rate_sensitive = ns ? sen / static_cast<double>(ns) : 0.0;
  row.any_loss_prob = tr.summary.any_loss_prob;
  row.urllc_delay_tail = tr.summary.delay_tail;
  return row;
}

/// Every (param, scheduler, seed) point of a sweep preset, in that order.
inline std::vector<ExperimentRow> run_experiment(Preset p, const ExperimentOptions& opt) {
  if (p == Preset::kLinearSanity) throw Error("linear-sanity has its own runner");
  std::vector<std::function<ExperimentRow()>> jobs;
  for (double param : preset_sweep(p))
    for (SchedulerKind k : preset_schedulers(p))
      for (std::uint64_t seed : opt.seeds)
        jobs.push_back([=] { return run_preset_point(p, k, param, seed, opt.slots); });
  return run_parallel(jobs, worker_count(opt.threads));
}

inline void write_experiment_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  os << "preset,scheduler,rho_or_delta,seed,sum_utility,mean_rate_robust,mean_rate_sensitive,"
        "any_loss_prob,urllc_delay_tail\n";
  for (const auto& r : rows)
    os << r.preset << ',' << r.scheduler << ',' << fmt_num(r.rho_or_delta) << ',' << r.seed << ','
       << fmt_num(r.sum_utility) << ',' << fmt_num(r.mean_rate_robust) << ','
       << fmt_num(r.mean_rate_sensitive) << ',' << fmt_num(r.any_loss_prob) << ','
       << fmt_num(r.urllc_delay_tail) << '\n';
}

struct SanityRow {
  std::string policy;
  double analytic = 0.0;
  double simulated = 0.0;
};

/// Per-user rate of the two-user example policies, analytic and simulated.
inline std::vector<SanityRow> run_linear_sanity(std::size_t slots, std::uint64_t seed) {
  const TwoUserExample ex = two_user_linear_example();
  auto simulate = [&](SchedulerKind kind, bool zero_demand) {
    SystemConfig cfg = preset_config(Preset::kLinearSanity, 0.5, seed);
    if (zero_demand) cfg.demand = DiscreteMinislot{{0.0}, {1.0}};
    SchedulerSpec spec;
    spec.kind = kind;
    SimOptions opt;
    opt.slots = slots;
    opt.seed = seed;
    opt.warmup_fraction = 0.0;
    const SimTrace tr = run_simulation(cfg, spec, opt);
    return 0.5 * (tr.summary.mean_rates[0] + tr.summary.mean_rates[1]);
  };
  return {
      {"static-no-puncture", ex.static_no_puncture, simulate(SchedulerKind::kStaticRandom, true)},
      {"static-random-puncture", ex.random_puncture, simulate(SchedulerKind::kStaticRandom, false)},
      {"static-opportunistic-puncture", ex.opportunistic_puncture,
       simulate(SchedulerKind::kStaticOpportunistic, false)},
  };
}

inline void write_sanity_csv(std::ostream& os, const std::vector<SanityRow>& rows) {
  os << "policy,analytic,simulated\n";
  for (const auto& r : rows) os << r.policy << ',' << fmt_num(r.analytic) << ',' << fmt_num(r.simulated) << '\n';
}

}  // namespace jointsched
