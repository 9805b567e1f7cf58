#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "jointsched/experiments.hpp"

using namespace jointsched;

TEST(Presets, AllValidate) {
  for (auto p : {Preset::kConvexVsRp, Preset::kThreshold, Preset::kDeltaTradeoff})
    for (double x : preset_sweep(p)) EXPECT_TRUE(validate_config(preset_config(p, x, 1)).empty()) << preset_name(p) << x;
  EXPECT_TRUE(validate_config(preset_config(Preset::kLinearSanity, 0.5, 1)).empty());
}

TEST(Presets, NamesRoundTrip) {
  for (auto p : {Preset::kConvexVsRp, Preset::kThreshold, Preset::kDeltaTradeoff, Preset::kLinearSanity})
    EXPECT_EQ(parse_preset(preset_name(p)), p);
  EXPECT_THROW(parse_preset("nope"), Error);
}

TEST(Presets, ClassMeans) {
  const auto r = synthesize_rates(1);
  double rob = 0, sen = 0;
  for (std::size_t u = 0; u < r.size(); ++u)
    for (double x : r[u]) (preset_is_robust(u) ? rob : sen) += x;
  const double n = preset::kRobust * preset::kStates;
  EXPECT_NEAR(rob / n, 7.0, 0.25);
  EXPECT_NEAR(sen / n, 3.0, 0.15);
  EXPECT_EQ(synthesize_rates(1), synthesize_rates(1));
  EXPECT_NE(synthesize_rates(1), synthesize_rates(2));
}

TEST(Presets, ConvexLoadMatchesRho) {
  for (double rho : preset_sweep(Preset::kConvexVsRp))
    EXPECT_NEAR(preset_config(Preset::kConvexVsRp, rho, 1).demand_law().rho(), rho, 1e-12);
}

TEST(Presets, QueueLawIsProbability) {
  const auto c = preset_config(Preset::kDeltaTradeoff, 0.3, 1);
  const auto law = queue_served_law(c, 1, 2000, 20);
  double s = 0;
  for (double p : law.probs) s += p;
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (double v : law.values) EXPECT_LE(v, 1.0 - c.delta + 1e-12);
}

TEST(Csv, ExperimentHeader) {
  std::ostringstream os;
  write_experiment_csv(os, {});
  EXPECT_EQ(os.str(),
            "preset,scheduler,rho_or_delta,seed,sum_utility,mean_rate_robust,mean_rate_sensitive,"
            "any_loss_prob,urllc_delay_tail\n");
}

TEST(Parallel, KeepsJobOrder) {
  std::vector<std::function<int()>> jobs;
  for (int i = 0; i < 20; ++i) jobs.push_back([i] { return i * i; });
  const auto out = run_parallel(jobs, 4);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(out[i], i * i);
  EXPECT_EQ(worker_count(3), 3u);
}

TEST(Parallel, EnvOverride) {
  setenv("SCHED_SIM_THREADS", "2", 1);
  EXPECT_EQ(worker_count(), 2u);
  unsetenv("SCHED_SIM_THREADS");
}

TEST(Sanity, ShortRunIsClose) {
  const auto rows = run_linear_sanity(20000, 3);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_NEAR(r.simulated, r.analytic, 0.03) << r.policy;
}
