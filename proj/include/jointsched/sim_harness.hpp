#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/loss_rate.hpp"
#include "jointsched/rng.hpp"
#include "jointsched/schedulers.hpp"

namespace jointsched {

/// Fluid FCFS queue for URLLC demand. Delay is counted in whole minislots
/// between arrival and service.
struct UrllcQueue {
  struct Chunk {
    std::size_t arrived;
    double amount;
  };
  std::deque<Chunk> fifo;
  double backlog = 0.0;
  double arrivals = 0.0;
  double served = 0.0;
  std::size_t now = 0;  // minislot counter
  std::map<std::size_t, double> delay_volume;  // delay -> served volume

  /// Share of served volume delayed by more than `minislots`.
  double delay_tail(std::size_t minislots = 2) const {
    double tail = 0.0;
    for (const auto& [d, v] : delay_volume)
      if (d > minislots) tail += v;
    return served > 0.0 ? tail / served : 0.0;
  }
};

struct QueueStep {
  double served = 0.0;
  std::vector<std::pair<std::size_t, double>> delays;  // (delay, volume)
};

/// One minislot: enqueue the arrival, serve up to capacity in FIFO order.
inline QueueStep urllc_queue_step(UrllcQueue& q, double arrival, double capacity) {
  if (arrival < 0.0) throw Error("negative arrival");
  if (capacity < 0.0) throw Error("negative capacity");
  if (arrival > 0.0) {
    q.fifo.push_back({q.now, arrival});
    q.backlog += arrival;
    q.arrivals += arrival;
  }
  QueueStep step;
  double room = capacity;
  while (room > 0.0 && !q.fifo.empty()) {
    auto& c = q.fifo.front();
    const double take = std::min(room, c.amount);
    const std::size_t delay = q.now - c.arrived;
    step.delays.emplace_back(delay, take);
    q.delay_volume[delay] += take;
    step.served += take;
    room -= take;
    c.amount -= take;
    // absorb rounding crumbs so chunks do not linger
    if (c.amount <= 1e-15 * std::max(1.0, take)) {
      step.served += c.amount;
      q.delay_volume[delay] += c.amount;
      q.fifo.pop_front();
    }
  }
  q.backlog = 0.0;
  for (const auto& c : q.fifo) q.backlog += c.amount;
  q.served += step.served;
  ++q.now;
  return step;
}

inline double sum_utility(std::span<const double> r_bar, std::span<const Utility> utilities) {
  if (r_bar.size() != utilities.size()) throw Error("rates/utilities size mismatch");
  double acc = 0.0;
  for (std::size_t u = 0; u < r_bar.size(); ++u) {
    if (!(r_bar[u] > 0.0)) throw Error("utility of a nonpositive rate");
    acc += utilities[u].value(r_bar[u]);
  }
  return acc;
}

struct SimOptions {
  std::size_t slots = 10000;
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  /// Arrivals go through a FCFS queue at the minislot cap instead of being
  /// truncated.
  bool urllc_queue = false;
  bool record_slots = false;
  double warmup_fraction = 0.1;
};

struct SlotRecord {
  std::size_t t = 0;
  std::size_t state = 0;
  std::vector<double> phi, gamma, demand, loads, rates, r_bar;
};

struct SimSummary {
  std::size_t slots = 0;
  std::size_t measured_slots = 0;
  std::vector<double> final_r_bar;
  std::vector<double> mean_rates;  // time average after warm-up
  double sum_utility = 0.0;        // of mean_rates; -inf if a user starves
  double any_loss_prob = 0.0;
  double delay_tail = 0.0;
  std::map<std::size_t, double> delay_histogram;
  double arrivals = 0.0;
  double served = 0.0;
  double blocked = 0.0;
  double backlog = 0.0;
  std::size_t solver_line_search_failures = 0;
};

struct SimTrace {
  std::vector<SlotRecord> slots;
  SimSummary summary;
};

/// Seeded slot loop: state, decision, minislot demand, placement, rates,
/// feedback. Deterministic in (cfg, spec, opts).
inline SimTrace run_simulation(const SystemConfig& cfg, const SchedulerSpec& spec,
                               const SimOptions& opts) {
  require_valid(cfg);
  const std::size_t n = cfg.num_users, m = cfg.num_minislots;
  const DemandLaw law = cfg.demand_law();
  Scheduler sched(cfg, spec);
  Rng state_rng = Rng::derive(opts.seed, opts.replication, kStateStream);
  Rng demand_rng = Rng::derive(opts.seed, opts.replication, kDemandStream);
  Rng place_rng = Rng::derive(opts.seed, opts.replication, kPlacementStream);
  const double cap = law.minislot_cap();
  const double f = cfg.minislot_fraction();

  SimTrace trace;
  SimSummary& sum = trace.summary;
  UrllcQueue queue;
  const auto* uni = std::get_if<UniformMinislot>(&cfg.demand);
  if (opts.urllc_queue && uni == nullptr) throw ConfigError("demand", "queue mode needs uniform_minislot");

  const std::size_t warm = static_cast<std::size_t>(std::floor(opts.warmup_fraction * opts.slots));
  std::vector<double> rate_acc(n, 0.0), demand(m), rates(n), loads(n);
  std::size_t loss_slots = 0;

  for (std::size_t t = 1; t <= opts.slots; ++t) {
    const std::size_t s = sample_channel_state(cfg.state_probs, state_rng);
    SlotDecision dec;
    try {
      dec = sched.decide(s);
    } catch (const std::exception& e) {
      throw Error("slot " + std::to_string(t) + ": " + e.what());
    }
    if (dec.solver_status == SolveStatus::kLineSearchFailed) ++sum.solver_line_search_failures;

    if (opts.urllc_queue) {
      for (std::size_t k = 0; k < m; ++k) {
        const double arrival = demand_rng.uniform(uni->lo, uni->hi);
        demand[k] = urllc_queue_step(queue, arrival, cap).served;
      }
    } else {
      double blocked = 0.0;
      law.sample_into(demand_rng, demand, blocked);
      double slot_total = blocked;
      for (double d : demand) slot_total += d;
      sum.blocked += blocked;
      sum.arrivals += slot_total;
      sum.served += slot_total - blocked;
    }
    double total = 0.0;
    for (double d : demand) total += d;

    if (dec.random_placement) {
      const BandMap band = dec.rb_owner.empty() ? BandMap::from_shares(dec.phi)
                                                : BandMap::from_owners(dec.rb_owner, n);
      loads = uniform_random_placement(demand, band, f, place_rng);
    } else {
      loads = homogeneous_loads(dec.gamma, total);
    }

    bool any_loss = false;
    for (std::size_t u = 0; u < n; ++u) {
      const double r_hat = cfg.peak_rates[u][s];
      const double l = std::min(loads[u], dec.phi[u]);
      RateResult rr = realized_rate(r_hat, dec.phi[u], l, cfg.loss_models[u], s);
      rates[u] = rr.rate;
      if (l > 0.0 && rr.loss_fraction > 0.0) any_loss = true;
    }
    sched.feedback(rates, t);

    if (t > warm) {
      for (std::size_t u = 0; u < n; ++u) rate_acc[u] += rates[u];
      if (any_loss) ++loss_slots;
      ++sum.measured_slots;
    }
    if (opts.record_slots) {
      SlotRecord rec;
      rec.t = t;
      rec.state = s;
      rec.phi = dec.phi;
      rec.gamma = dec.random_placement ? std::vector<double>() : dec.gamma;
      rec.demand = demand;
      rec.loads = loads;
      rec.rates = rates;
      rec.r_bar = sched.estimates().r_bar;
      trace.slots.push_back(std::move(rec));
    }
  }

  sum.slots = opts.slots;
  sum.final_r_bar = sched.estimates().r_bar;
  sum.mean_rates.resize(n);
  const double ms = static_cast<double>(std::max<std::size_t>(1, sum.measured_slots));
  bool starved = false;
  for (std::size_t u = 0; u < n; ++u) {
    sum.mean_rates[u] = rate_acc[u] / ms;
    if (!(sum.mean_rates[u] > 0.0)) starved = true;
  }
  sum.sum_utility = starved ? -std::numeric_limits<double>::infinity()
                            : jointsched::sum_utility(sum.mean_rates, cfg.utilities);
  sum.any_loss_prob = static_cast<double>(loss_slots) / ms;
  if (opts.urllc_queue) {
    sum.arrivals = queue.arrivals;
    sum.served = queue.served;
    sum.backlog = queue.backlog;
    sum.delay_tail = queue.delay_tail(2);
    sum.delay_histogram = queue.delay_volume;
  }
  return trace;
}

/// Fixed-format number for CSV output.
inline std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// One row per slot.
inline void write_trace_csv(std::ostream& os, const SimTrace& trace, std::size_t users) {
  os << "t,state,demand_total";
  for (const char* col : {"phi", "gamma", "load", "rate", "rbar"})
    for (std::size_t u = 0; u < users; ++u) os << ',' << col << '_' << u;
  os << '\n';
  for (const auto& r : trace.slots) {
    double total = 0.0;
    for (double d : r.demand) total += d;
    os << r.t << ',' << r.state << ',' << fmt_num(total);
    for (const auto* v : {&r.phi, &r.gamma, &r.loads, &r.rates, &r.r_bar})
      for (std::size_t u = 0; u < users; ++u)
        os << ',' << (u < v->size() ? fmt_num((*v)[u]) : std::string());
    os << '\n';
  }
}

inline nlohmann::json summary_json(const SimSummary& s) {
  nlohmann::json j;
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return fmt_num(v);
  };
  j["slots"] = s.slots;
  j["measured_slots"] = s.measured_slots;
  j["final_r_bar"] = s.final_r_bar;
  j["mean_rates"] = s.mean_rates;
  j["sum_utility"] = num(s.sum_utility);
  j["any_loss_prob"] = s.any_loss_prob;
  j["urllc_delay_tail"] = s.delay_tail;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [d, v] : s.delay_histogram) hist[std::to_string(d)] = v;
  j["delay_histogram"] = hist;
  j["urllc_arrivals"] = s.arrivals;
  j["urllc_served"] = s.served;
  j["urllc_blocked"] = s.blocked;
  j["urllc_backlog"] = s.backlog;
  j["solver_line_search_failures"] = s.solver_line_search_failures;
  return j;
}

}  // namespace jointsched
