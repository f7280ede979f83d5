#include <gtest/gtest.h>

#include "support/fixtures.hpp"

using namespace groupcast;

namespace {

std::vector<UserLink> steady_users(int seconds, std::vector<double> rates) {
  std::vector<UserLink> users;
  for (std::size_t u = 0; u < rates.size(); ++u) {
    users.push_back(fixtures::link(static_cast<int>(u) + 1, 1, 2, std::vector<double>(static_cast<std::size_t>(seconds), rates[u])));
  }
  return users;
}

VideoSpec three_layer_video(int chunks) {
  VideoSpec v;
  v.chunk_count = chunks;
  v.chunk_seconds = 1;
  v.startup_seconds = 2;
  v.layer_sizes = {1.0, 1.0, 1.0};
  return v;
}

}  // namespace

TEST(HarmonicPredict, RecentSamples) {
  const std::vector<double> s{100.0, 1.0, 2.0, 4.0};
  EXPECT_NEAR(*harmonic_predict(s, 3), 3.0 / (1.0 + 0.5 + 0.25), 1e-12);
  const std::vector<double> few{2.0, 2.0};
  EXPECT_DOUBLE_EQ(*harmonic_predict(few, 5), 2.0);
  EXPECT_FALSE(harmonic_predict({}, 5).has_value());
  const std::vector<double> zero{0.0, 2.0};
  EXPECT_DOUBLE_EQ(*harmonic_predict(zero, 5), 0.0);
}

TEST(WindowContribution, ProportionalShare) {
  const auto cap = ContributionCap::megabits(100.0);
  // Five 1 s chunks of a 50 s horizon at the first replan: a tenth.
  EXPECT_DOUBLE_EQ(window_contribution(cap, 5, 1, 50.0, 0, 4, 0.0).value(), 10.0);
  EXPECT_DOUBLE_EQ(window_contribution(cap, 5, 1, 50.0, 1, 4, 3.0).value(), 18.0 - 3.0);
  EXPECT_DOUBLE_EQ(window_contribution(cap, 5, 1, 50.0, 100, 4, 0.0).value(), 100.0);
  EXPECT_DOUBLE_EQ(window_contribution(cap, 5, 1, 50.0, 0, 4, 50.0).value(), 0.0);
  EXPECT_TRUE(window_contribution(ContributionCap::unlimited(), 5, 1, 50.0, 0, 4, 0.0).is_unlimited());
  // Two-second chunks: the share grows with elapsed seconds, not chunks.
  EXPECT_DOUBLE_EQ(window_contribution(cap, 5, 2, 50.0, 1, 4, 0.0).value(), 28.0);
}

TEST(Online, ExampleOneFeasible) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  for (auto mode : {OnlineMode::NoPref, OnlineMode::Pref}) {
    const auto log = run_online(v, users, OnlineConfig{}, mode);
    EXPECT_TRUE(check_feasibility(log, v, users).empty());
  }
}

TEST(Online, SteadyLinksFetchEverything) {
  auto v = three_layer_video(30);
  v.startup_seconds = 5;  // room for the first informed replan
  const auto users = steady_users(40, {2.0, 2.0});
  const auto log = run_online(v, users, OnlineConfig{}, OnlineMode::NoPref);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  auto m = compute_metrics(log, v, users, PlaybackMode::Skip);
  EXPECT_DOUBLE_EQ(m.skip_pct, 0.0);
  EXPECT_GT(m.apbr, 2.5);
}

TEST(Online, BootstrapSendsOneBaseLayerPerUser) {
  const auto v = three_layer_video(10);
  const auto users = steady_users(20, {5.0, 5.0, 5.0});
  const auto log = run_online(v, users, OnlineConfig{}, OnlineMode::NoPref);
  std::vector<std::size_t> first_second;
  for (const auto& t : log.transfers) {
    if (t.second == 1) {
      EXPECT_EQ(t.layer, 0);
      first_second.push_back(t.user);
    }
  }
  EXPECT_EQ(first_second.size(), 3u);
}

TEST(Online, PerfectPredictorCloseToOffline) {
  SplitMix64 rng(3);
  VideoSpec v = three_layer_video(40);
  std::vector<UserLink> users;
  for (int u = 0; u < 2; ++u) {
    auto t = synthetic_trace(rng(), 60, 1.5);
    users.push_back(fixtures::link(u + 1, 1, 2, t.samples));
  }
  OnlineConfig cfg;
  cfg.predictor = PredictorKind::Perfect;
  const auto w = make_weights(v, std::span<const UserLink>(users));
  const double offline = objective_value(execute_plan(plan_offline_nopref(v, users), v, users), users, v, w, PlaybackMode::Skip);
  const auto log = run_online(v, users, cfg, OnlineMode::NoPref);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  EXPECT_LE(objective_value(log, users, v, w, PlaybackMode::Skip), offline);
}

TEST(Online, ContributionCapsHold) {
  SplitMix64 rng(4);
  VideoSpec v = three_layer_video(30);
  std::vector<UserLink> users;
  for (int u = 0; u < 3; ++u) users.push_back(fixtures::link(u + 1, 1, 2, synthetic_trace(rng(), 40, 2.0).samples));
  users[1].cap = ContributionCap::megabits(10.0);
  users[2].cap = ContributionCap::megabits(0.0);
  const auto log = run_online(v, users, OnlineConfig{}, OnlineMode::NoPref);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  EXPECT_LE(log.user_megabits[1], 10.0 + 1e-9);
  EXPECT_DOUBLE_EQ(log.user_megabits[2], 0.0);
}

TEST(Online, PreferenceKeepsEnhancementsOffLowerSets) {
  SplitMix64 rng(6);
  VideoSpec v = three_layer_video(30);
  std::vector<UserLink> users{fixtures::link(1, 1, 2, synthetic_trace(rng(), 40, 1.2).samples),
                              fixtures::link(2, 2, 0, synthetic_trace(rng(), 40, 1.2).samples)};
  const auto log = run_online(v, users, OnlineConfig{}, OnlineMode::Pref);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  for (const auto& t : log.transfers) {
    if (t.user == 1) {
      EXPECT_EQ(t.layer, 0);
    }
  }
}

TEST(Online, NoSkipDeliversEveryBaseLayer) {
  SplitMix64 rng(8);
  VideoSpec v = three_layer_video(30);
  std::vector<UserLink> users;
  for (int u = 0; u < 2; ++u) users.push_back(fixtures::link(u + 1, 1, 2, synthetic_trace(rng(), 200, 0.6).samples));
  const auto log = run_online(v, users, OnlineConfig{}, OnlineMode::NoSkip);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  for (int i = 1; i <= v.chunk_count; ++i) EXPECT_NE(log.delivered_level(i), kSkipped) << i;
  for (int i = 2; i <= v.chunk_count; ++i) EXPECT_GE(log.stall[i - 1], log.stall[i - 2]);
}

TEST(Online, NoSkipThrowsWhenTracesRunOut) {
  VideoSpec v = three_layer_video(10);
  auto users = steady_users(5, {0.5});
  EXPECT_THROW(run_online(v, users, OnlineConfig{}, OnlineMode::NoSkip), InfeasibleError);
}

TEST(Online, RejectsShortTracesInSkipMode) {
  VideoSpec v = three_layer_video(10);
  auto users = steady_users(5, {3.0});
  EXPECT_THROW(run_online(v, users, OnlineConfig{}, OnlineMode::NoPref), Error);
}

TEST(Online, RejectsBadConfig) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  OnlineConfig cfg;
  cfg.window = 0;
  EXPECT_THROW(run_online(v, users, cfg, OnlineMode::NoPref), Error);
  cfg = OnlineConfig{};
  cfg.buffer_limit = 2;
  EXPECT_THROW(run_online(v, users, cfg, OnlineMode::NoPref), Error);
}

TEST(Online, ReplansEveryAlphaSeconds) {
  const auto v = three_layer_video(20);
  const auto users = steady_users(30, {3.0});
  OnlineTelemetry tel;
  OnlineConfig cfg;
  cfg.alpha = 3;
  run_online(v, users, cfg, OnlineMode::NoPref, &tel);
  // The last chunk resolves at second 21; replans at 0, 3, ..., 18.
  EXPECT_EQ(tel.replan_seconds.size(), 7u);
}

TEST(Online, Deterministic) {
  SplitMix64 rng(10);
  VideoSpec v = three_layer_video(25);
  std::vector<UserLink> users;
  for (int u = 0; u < 3; ++u) users.push_back(fixtures::link(u + 1, 1, 2, synthetic_trace(rng(), 40, 1.0).samples));
  EXPECT_EQ(run_online(v, users, OnlineConfig{}, OnlineMode::NoPref), run_online(v, users, OnlineConfig{}, OnlineMode::NoPref));
}
