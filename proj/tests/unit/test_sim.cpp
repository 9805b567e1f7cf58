#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "jointsched/oracle.hpp"
#include "jointsched/sim_harness.hpp"

using namespace jointsched;

TEST(Queue, BurstDrainsInOrder) {
  UrllcQueue q;
  const double c = 0.1;
  auto a = urllc_queue_step(q, 3 * c, c);
  auto b = urllc_queue_step(q, 0.0, c);
  auto d = urllc_queue_step(q, 0.0, c);
  EXPECT_NEAR(a.served, c, 1e-15);
  ASSERT_EQ(d.delays.size(), 1u);
  EXPECT_EQ(a.delays[0].first, 0u);
  EXPECT_EQ(b.delays[0].first, 1u);
  EXPECT_EQ(d.delays[0].first, 2u);
  EXPECT_NEAR(q.backlog, 0.0, 1e-15);
  EXPECT_NEAR(q.delay_tail(1), 1.0 / 3, 1e-12);
  EXPECT_DOUBLE_EQ(q.delay_tail(2), 0.0);
}

TEST(Queue, ConservesVolume) {
  UrllcQueue q;
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) urllc_queue_step(q, rng.uniform(0, 0.15), 0.0875);
  EXPECT_NEAR(q.arrivals, q.served + q.backlog, 1e-9);
  EXPECT_THROW(urllc_queue_step(q, -1, 1), Error);
}

TEST(Utility, SumExamples) {
  const std::vector<Utility> u{Utility{}, Utility{2.0, 1.0}};
  EXPECT_NEAR(sum_utility(std::vector<double>{1.0, std::exp(1.0)}, u), 3.0, 1e-15);
  EXPECT_THROW(sum_utility(std::vector<double>{0.0, 1.0}, u), Error);
}

namespace {

SystemConfig small_cfg() {
  SystemConfig c;
  c.num_users = 2;
  c.num_states = 2;
  c.delta = 0.3;
  c.rb_count = 50;
  c.state_probs = {0.5, 0.5};
  c.peak_rates = {{4.0, 1.0}, {1.0, 4.0}};
  c.utilities.assign(2, Utility{});
  c.loss_models = {LossModel::monomial(1, 2), LossModel::piecewise_quadratic(0.7)};
  c.demand = BinomialMinislot{0.5};
  return c;
}

std::string trace_csv(const SystemConfig& c, SchedulerKind k, std::uint64_t seed) {
  SchedulerSpec spec;
  spec.kind = k;
  SimOptions o;
  o.slots = 300;
  o.seed = seed;
  o.record_slots = true;
  std::ostringstream os;
  write_trace_csv(os, run_simulation(c, spec, o), c.num_users);
  return os.str();
}

}  // namespace

TEST(Simulation, DeterministicTraces) {
  const auto c = small_cfg();
  for (auto k : {SchedulerKind::kConvexSA, SchedulerKind::kGradientRandom}) {
    EXPECT_EQ(trace_csv(c, k, 9), trace_csv(c, k, 9));
    EXPECT_NE(trace_csv(c, k, 9), trace_csv(c, k, 10));
  }
}

TEST(Simulation, TraceHeader) {
  const auto csv = trace_csv(small_cfg(), SchedulerKind::kGradientRP, 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,state,demand_total,phi_0,phi_1,gamma_0,gamma_1,load_0,load_1,rate_0,rate_1,rbar_0,rbar_1");
}

TEST(Simulation, NoLoadGradientMatchesProportionalFair) {
  // one state, so the PF optimum does not depend on the sampled state mix
  SystemConfig c;
  c.num_users = 3;
  c.num_states = 1;
  c.delta = 0.3;
  c.rb_count = 60;
  c.state_probs = {1.0};
  c.peak_rates = {{4.0}, {1.0}, {2.0}};
  c.utilities.assign(3, Utility{});
  c.loss_models.assign(3, LossModel::linear());
  c.demand = DiscreteMinislot{{0.0}, {1.0}};
  const auto opt = offline_optimum(c);
  SchedulerSpec spec;
  spec.kind = SchedulerKind::kGradientRP;
  SimOptions o;
  o.slots = 20000;
  const auto tr = run_simulation(c, spec, o);
  for (std::size_t u = 0; u < 3; ++u) {
    EXPECT_NEAR(opt.r_star[u], c.peak_rates[u][0] / 3, 1e-6);
    EXPECT_NEAR(tr.summary.mean_rates[u], opt.r_star[u], 0.01 * opt.r_star[u]) << u;
  }
}

TEST(Simulation, QueueModeNeedsUniform) {
  SchedulerSpec spec;
  SimOptions o;
  o.urllc_queue = true;
  EXPECT_THROW(run_simulation(small_cfg(), spec, o), ConfigError);
}

TEST(Simulation, QueueModeConserves) {
  auto c = small_cfg();
  c.demand = UniformMinislot{0.0, 0.125};
  SchedulerSpec spec;
  spec.kind = SchedulerKind::kGradientRP;
  SimOptions o;
  o.slots = 2000;
  o.urllc_queue = true;
  const auto s = run_simulation(c, spec, o).summary;
  EXPECT_NEAR(s.arrivals, s.served + s.backlog, 1e-8);
  EXPECT_GE(s.delay_tail, 0.0);
  EXPECT_LE(s.delay_tail, 1.0);
  const auto j = summary_json(s);
  EXPECT_TRUE(j.contains("urllc_delay_tail"));
}

TEST(Format, Numbers) {
  EXPECT_EQ(fmt_num(0.1), "0.1");
  EXPECT_EQ(fmt_num(-INFINITY), "-inf");
  EXPECT_EQ(fmt_num(1.0 / 3), "0.3333333333");
}
