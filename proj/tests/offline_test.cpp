#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"

using namespace groupcast;
using fixtures::chunks_on;
using fixtures::skipped;
using Chunks = std::vector<int>;

TEST(CumulativeBandwidth, PrefixSums) {
  const std::vector<double> s{2, 2, 0, 0, 3};
  auto r = cumulative_bandwidth(std::span<const double>(s));
  EXPECT_EQ(r, (std::vector<double>{2, 4, 4, 4, 7}));
  EXPECT_DOUBLE_EQ(cumulative_at(r, 0), 0.0);
  EXPECT_DOUBLE_EQ(cumulative_at(r, 5), 7.0);
  EXPECT_DOUBLE_EQ(cumulative_at(r, 9), 7.0);
}

TEST(CapacityCount, FloorsPerUser) {
  const std::vector<double> at{3.0, 3.0};
  const std::vector<ContributionCap> open{ContributionCap::unlimited(), ContributionCap::unlimited()};
  EXPECT_EQ(capacity_count(at, open, 2.0), 2);  // not floor(6/2) = 3
  const std::vector<ContributionCap> capped{ContributionCap::megabits(1.0), ContributionCap::unlimited()};
  EXPECT_EQ(capacity_count(at, capped, 2.0), 1);
  EXPECT_THROW(capacity_count(at, open, 0.0), Error);
}

TEST(CapacityCount, ExampleOneBaseLayer) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto r1 = cumulative_bandwidth(users[0].trace);
  const auto r2 = cumulative_bandwidth(users[1].trace);
  const std::vector<ContributionCap> open(2, ContributionCap::unlimited());
  std::vector<int> v0;
  for (int i = 1; i <= 10; ++i) {
    const std::vector<double> at{cumulative_at(r1, v.deadline(i)), cumulative_at(r2, v.deadline(i))};
    v0.push_back(capacity_count(at, open, 2.0));
  }
  EXPECT_EQ(v0, (std::vector<int>{1, 2, 2, 3, 4, 7, 7, 9, 10, 11}));
}

TEST(ForwardScan, EarliestEligibleSkipped) {
  const std::vector<int> cap{1, 2, 2, 3, 4, 7, 7, 9, 10, 11};
  auto scan = forward_skip_scan(cap, std::vector<bool>(10, true));
  EXPECT_EQ(scan.capacity_skips, 1);
  EXPECT_EQ(scan.skipped, (Chunks{1}));
  EXPECT_EQ(scan.first_fetch, std::optional<int>(2));
  EXPECT_EQ(scan.skip.back(), 1);
}

TEST(ForwardScan, IneligibleChunksAreNotCounted) {
  const std::vector<int> cap{0, 0, 1, 1};
  auto scan = forward_skip_scan(cap, {false, true, true, true});
  // Chunk 1 is out; chunk 2 has no room, chunk 3 fits one, chunk 4 needs two.
  EXPECT_EQ(scan.skipped, (Chunks{2, 3}));
  EXPECT_EQ(scan.first_fetch, std::optional<int>(4));
  EXPECT_THROW(forward_skip_scan(cap, {true}), Error);
}

TEST(BackwardFetch, CostCountsOnlyBeforeBoundary) {
  const std::vector<double> residual{1, 1, 1, 1};
  auto f = backward_fetch(0, 4, residual, 3.0, 2, ContributionCap::unlimited());
  ASSERT_TRUE(f.finite());
  EXPECT_DOUBLE_EQ(f.cost, 1.0);
  ASSERT_EQ(f.draws.size(), 3u);
  EXPECT_EQ(f.draws.front().first, 4);
  EXPECT_EQ(f.draws.back().first, 2);
}

TEST(BackwardFetch, InfiniteWhenOutOfTimeOrBudget) {
  const std::vector<double> residual{1, 1};
  auto late = backward_fetch(0, 2, residual, 3.0, 0, ContributionCap::unlimited());
  EXPECT_FALSE(late.finite());
  EXPECT_TRUE(late.draws.empty());
  auto poor = backward_fetch(0, 2, residual, 2.0, 0, ContributionCap::megabits(1.5));
  EXPECT_FALSE(poor.finite());
  auto fine = backward_fetch(0, 2, residual, 2.0, 0, ContributionCap::megabits(2.5));
  ASSERT_TRUE(fine.finite());
  EXPECT_NEAR(fine.budget.value(), 0.5, 1e-12);
}

TEST(AssignLayer, CheapestThenLowerSetThenId) {
  std::vector<UserLink> users{fixtures::link(2, 1, 1, {}), fixtures::link(1, 1, 1, {}), fixtures::link(3, 2, 0, {})};
  std::vector<FetchCost> costs(3);
  for (std::size_t u = 0; u < 3; ++u) costs[u].user = u;
  costs[0].cost = 1.0;
  costs[1].cost = 1.0;
  costs[2].cost = 0.0;
  EXPECT_EQ(assign_layer(costs, users), std::optional<std::size_t>(2));
  costs[2].cost = 1.0;
  EXPECT_EQ(assign_layer(costs, users), std::optional<std::size_t>(2));  // set 2 takes the tie
  costs[2].cost = 2.0;
  EXPECT_EQ(assign_layer(costs, users), std::optional<std::size_t>(1));  // id 1 beats id 2
  costs[1].cost = kInfiniteCost;
  EXPECT_EQ(assign_layer(costs, users), std::optional<std::size_t>(0));
  for (auto& c : costs) c.cost = kInfiniteCost;
  EXPECT_EQ(assign_layer(costs, users), std::nullopt);
}

TEST(ExampleOne, BaseLayerDecisions) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto plan = plan_offline_nopref(v, users);
  EXPECT_EQ(skipped(plan, 0), (Chunks{1}));
  EXPECT_EQ(chunks_on(plan, 0, 0), (Chunks{2, 3, 5, 6, 8}));
  EXPECT_EQ(chunks_on(plan, 0, 1), (Chunks{4, 7, 9, 10}));
}

TEST(ExampleOne, EnhancementDecisions) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto plan = plan_offline_nopref(v, users);
  EXPECT_EQ(skipped(plan, 1), (Chunks{1, 2, 3, 4}));
  EXPECT_EQ(chunks_on(plan, 1, 0), (Chunks{5, 6, 8}));
  EXPECT_EQ(chunks_on(plan, 1, 1), (Chunks{7, 9, 10}));
}

TEST(ExampleOne, DownloadOrder) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto order = materialize_download_order(plan_offline_nopref(v, users), 2);
  const std::vector<DownloadRequest> user1{{2, 0}, {3, 0}, {5, 0}, {5, 1}, {6, 0}, {6, 1}, {8, 0}, {8, 1}};
  EXPECT_EQ(order[0], user1);
}

TEST(ExampleOne, ExecutesAsPlanned) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto plan = plan_offline_nopref(v, users);
  const auto log = execute_plan(plan, v, users);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  for (int i = 1; i <= 10; ++i) {
    for (int n = 0; n < 2; ++n) EXPECT_EQ(log.delivered(i, n), plan.link(i, n)) << i << "," << n;
  }
  EXPECT_DOUBLE_EQ(log.user_megabits[0], 13.0);
  EXPECT_DOUBLE_EQ(log.user_megabits[1], 11.0);
}

TEST(ExampleOne, UnderTenMilliseconds) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto start = std::chrono::steady_clock::now();
  auto plan = plan_offline_nopref(v, users);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(plan.skip_count(0), 1);
  EXPECT_LT(elapsed, 0.010);
}

TEST(ExampleOne, PlanSerialization) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  const auto doc = plan_to_json(plan_offline_nopref(v, users), users);
  std::ifstream in(std::string(GROUPCAST_TEST_DATA) + "/example1_plan.json");
  ASSERT_TRUE(in) << "golden plan missing";
  const auto golden = nlohmann::json::parse(in);
  EXPECT_EQ(doc, golden);
}

TEST(ExampleTwo, FirstRunUsesThirdLinkForFour) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example2_users();
  const auto first = plan_offline_nopref(v, users);
  EXPECT_TRUE(skipped(first, 0).empty());
  EXPECT_EQ(chunks_on(first, 0, 2), (Chunks{3, 4, 5, 7}));
}

TEST(ExampleTwo, SecondRunMovesLaterChunks) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example2_users();
  const auto plan = plan_offline_pref(v, users);
  EXPECT_TRUE(skipped(plan, 0).empty());
  EXPECT_EQ(chunks_on(plan, 0, 2), (Chunks{3}));
  for (int i : {4, 5, 7}) EXPECT_EQ(plan.link(i, 0), std::optional<std::size_t>(1)) << "chunk " << i;
  EXPECT_TRUE(chunks_on(plan, 1, 2).empty());
  EXPECT_TRUE(check_feasibility(execute_plan(plan, v, users), v, users).empty());
}

TEST(Pref, CostlyLinkTakesTheEarlierBaseLayer) {
  VideoSpec v;
  v.chunk_count = 3;
  v.startup_seconds = 0;
  v.layer_sizes = {2.0, 0.5, 2.0};
  const std::vector<UserLink> users{fixtures::link(1, 1, 2, {2, 1}), fixtures::link(2, 2, 0, {3, 2})};
  const auto plan = plan_offline_pref(v, users);
  EXPECT_EQ(plan.link(2, 0), std::optional<std::size_t>(1));
  EXPECT_EQ(plan.link(3, 0), std::optional<std::size_t>(0));
  EXPECT_EQ(skipped(plan, 1), (Chunks{1}));
}

TEST(Pref, SingleSetMatchesNoPref) {
  SplitMix64 rng(11);
  fixtures::RandomShape shape;
  for (int k = 0; k < 100; ++k) {
    auto inst = fixtures::random_instance(rng, shape);
    EXPECT_EQ(plan_offline_pref(inst.video, inst.users), plan_offline_nopref(inst.video, inst.users));
  }
}

TEST(Pref, NeverPutsLayersAboveTheLinkCap) {
  SplitMix64 rng(12);
  fixtures::RandomShape shape;
  shape.preference = true;
  shape.caps = true;
  for (int k = 0; k < 200; ++k) {
    auto inst = fixtures::random_instance(rng, shape);
    auto plan = plan_offline_pref(inst.video, inst.users);
    for (int i = 1; i <= inst.video.chunk_count; ++i) {
      for (int n = 0; n < inst.video.layer_count(); ++n) {
        if (auto u = plan.link(i, n)) {
          EXPECT_LE(n, inst.users[*u].max_layer);
        }
      }
    }
    EXPECT_TRUE(check_feasibility(execute_plan(plan, inst.video, inst.users), inst.video, inst.users).empty());
  }
}

TEST(NoPref, FixedDecisionsAreKept) {
  const auto v = fixtures::example_video();
  const auto users = fixtures::example1_users();
  FetchPlan fixed(v);
  fixed.assign(1, 0, 1);
  const auto plan = plan_offline_nopref(v, users, fixed);
  EXPECT_EQ(plan.link(1, 0), std::optional<std::size_t>(1));
}

TEST(NoPref, EmptyBandwidthSkipsAll) {
  const auto v = fixtures::example_video();
  std::vector<UserLink> users{fixtures::link(1, 1, 1, std::vector<double>(10, 0.0))};
  const auto plan = plan_offline_nopref(v, users);
  EXPECT_EQ(plan.skip_count(0), 10);
  EXPECT_EQ(plan.skip_count(1), 10);
}

TEST(NoSkip, StallsInsteadOfSkipping) {
  const auto v = fixtures::example_video();
  auto users = fixtures::example1_users();
  users[0].trace.samples.resize(30, 1.0);
  users[1].trace.samples.resize(30, 1.0);
  const auto plan = plan_offline_noskip(v, users);
  EXPECT_EQ(plan.skip_count(0), 0);
  EXPECT_GE(plan.final_stall(), 1);
  for (int i = 1; i <= 10; ++i) {
    EXPECT_EQ(plan.stall(i), plan.final_stall());
    EXPECT_EQ(plan.deadline(i), v.deadline(i, plan.final_stall()));
  }
  const auto log = execute_plan(plan, v, users);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  for (int i = 1; i <= 10; ++i) EXPECT_NE(log.delivered_level(i), kSkipped);
}

TEST(NoSkip, NoStallWhenBandwidthIsAmple) {
  const auto v = fixtures::example_video();
  std::vector<UserLink> users{fixtures::link(1, 1, 1, std::vector<double>(12, 5.0))};
  const auto plan = plan_offline_noskip(v, users);
  EXPECT_EQ(plan.final_stall(), 0);
  EXPECT_EQ(plan.skip_count(1), 0);
}

TEST(NoSkip, ThrowsWhenNoLinkCanEverFinish) {
  const auto v = fixtures::example_video();
  std::vector<UserLink> users{fixtures::link(1, 1, 1, {1, 1, 1})};
  EXPECT_THROW(plan_offline_noskip(v, users), InfeasibleError);
}

TEST(NoSkip, RandomPropertiesHold) {
  SplitMix64 rng(21);
  fixtures::RandomShape shape;
  shape.extra_seconds = 20;
  shape.max_chunk_seconds = 2;
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    auto inst = fixtures::random_instance(rng, shape);
    FetchPlan plan;
    try {
      plan = plan_offline_noskip(inst.video, inst.users);
    } catch (const InfeasibleError&) {
      continue;
    }
    ++checked;
    EXPECT_EQ(plan.skip_count(0), 0);
    for (int i = 2; i <= inst.video.chunk_count; ++i) EXPECT_GE(plan.stall(i), plan.stall(i - 1));
    EXPECT_TRUE(check_feasibility(execute_plan(plan, inst.video, inst.users), inst.video, inst.users).empty());
  }
  EXPECT_GT(checked, 200);
}

TEST(ExecutePlan, CapExhaustionDropsLayer) {
  const auto v = fixtures::example_video();
  auto users = fixtures::example1_users();
  auto plan = plan_offline_nopref(v, users);
  users[0].cap = ContributionCap::megabits(3.0);  // plan was made without the cap
  const auto log = execute_plan(plan, v, users);
  EXPECT_TRUE(check_feasibility(log, v, users).empty());
  EXPECT_LE(log.user_megabits[0], 3.0 + 1e-9);
}

TEST(Determinism, SamePlanTwice) {
  SplitMix64 rng(5);
  fixtures::RandomShape shape;
  shape.preference = true;
  for (int k = 0; k < 50; ++k) {
    auto inst = fixtures::random_instance(rng, shape);
    EXPECT_EQ(plan_offline_pref(inst.video, inst.users), plan_offline_pref(inst.video, inst.users));
  }
}
