#pragma once

// Offline planners: per-layer forward skip scan plus chunk-ordered backward
// assignment, the preference-aware variant that pushes work off
// lower-priority sets, and the no-skip variant that moves all stalls to
// startup.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "model.hpp"

namespace groupcast {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// Prefix sums R(j) for j = 1..T; R(0) = 0 is implicit.
inline std::vector<double> cumulative_bandwidth(std::span<const double> samples) {
  std::vector<double> out(samples.size());
  double total = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    total += samples[j];
    out[j] = total;
  }
  return out;
}

inline std::vector<double> cumulative_bandwidth(const BandwidthTrace& trace) {
  return cumulative_bandwidth(std::span<const double>(trace.samples));
}

/// R(j) with R(0) = 0 and R held flat past the end of the series.
inline double cumulative_at(std::span<const double> cumulative, int second) {
  if (second < 1 || cumulative.empty()) return 0.0;
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(second), cumulative.size());
  return cumulative[idx - 1];
}

/// Number of whole layers of `layer_size` the users can fetch before a
/// deadline, given each user's cumulative bandwidth at that deadline and
/// its remaining contribution. Floors per user before summing.
inline int capacity_count(std::span<const double> cumulative_at_deadline, std::span<const ContributionCap> budgets,
                          double layer_size) {
  if (!(layer_size > 0.0)) throw Error("layer size must be positive");
  if (budgets.size() != cumulative_at_deadline.size()) throw Error("one budget per user is required");
  int total = 0;
  for (std::size_t u = 0; u < budgets.size(); ++u) {
    const double usable = budgets[u].clamp(cumulative_at_deadline[u]);
    total += static_cast<int>(std::floor(usable / layer_size + kEpsilon));
  }
  return total;
}

struct SkipScan {
  std::vector<int> skip;      // skip(i) for i = 1..C, index i-1
  std::vector<int> skipped;   // chunks dropped for lack of capacity (ascending)
  int capacity_skips = 0;
  std::optional<int> first_fetch;
};

/// Forward scan over chunks 1..C. skip(i) grows when chunk i is not
/// eligible or when fewer than i - skip(i-1) layers fit before its deadline.
/// The chunks dropped for capacity are the earliest eligible ones.
inline SkipScan forward_skip_scan(std::span<const int> capacity, const std::vector<bool>& eligible) {
  if (capacity.size() != eligible.size()) throw Error("capacity and eligibility disagree on chunk count");
  SkipScan scan;
  scan.skip.resize(capacity.size());
  int skip = 0;
  int ineligible = 0;
  for (std::size_t k = 0; k < capacity.size(); ++k) {
    const int i = static_cast<int>(k) + 1;
    if (!eligible[k]) {
      ++skip;
      ++ineligible;
    } else if (capacity[k] < i - skip) {
      ++skip;
    }
    scan.skip[k] = skip;
  }
  scan.capacity_skips = skip - ineligible;
  int left = scan.capacity_skips;
  for (std::size_t k = 0; k < capacity.size(); ++k) {
    if (!eligible[k]) continue;
    if (left > 0) {
      scan.skipped.push_back(static_cast<int>(k) + 1);
      --left;
    } else if (!scan.first_fetch) {
      scan.first_fetch = static_cast<int>(k) + 1;
    }
  }
  return scan;
}

struct FetchCost {
  std::size_t user = 0;
  double cost = kInfiniteCost;
  std::vector<std::pair<int, double>> draws;  // (second, megabits), latest second first
  ContributionCap budget = ContributionCap::unlimited();

  bool finite() const { return std::isfinite(cost); }
};

/// Fills one layer backward from second `start` over the residual per-second
/// bandwidth. Only megabits drawn at seconds <= `boundary` count toward the
/// cost. Running out of seconds or contribution gives an infinite cost and
/// no draws.
inline FetchCost backward_fetch(std::size_t user, int start, std::span<const double> residual, double layer_size,
                                int boundary, ContributionCap budget) {
  FetchCost out;
  out.user = user;
  out.budget = budget;
  double remaining = layer_size;
  double cost = 0.0;
  double allowance = budget.is_unlimited() ? kInfiniteCost : budget.value();
  int j = std::min<int>(start, static_cast<int>(residual.size()));
  while (remaining > kEpsilon) {
    if (j < 1 || allowance <= kEpsilon) {
      out.draws.clear();
      return out;
    }
    const double fetched = std::min({residual[static_cast<std::size_t>(j - 1)], allowance, remaining});
    if (fetched > 0.0) {
      out.draws.emplace_back(j, fetched);
      remaining -= fetched;
      allowance -= fetched;
      if (j <= boundary) cost += fetched;
    }
    if (remaining > kEpsilon) --j;
  }
  out.cost = cost;
  out.budget = budget.minus(layer_size - std::max(remaining, 0.0));
  return out;
}

/// Cheapest finite candidate; ties go to the lower-priority set, then the
/// lower user id.
inline std::optional<std::size_t> assign_layer(std::span<const FetchCost> costs, std::span<const UserLink> users) {
  const FetchCost* best = nullptr;
  for (const auto& c : costs) {
    if (!c.finite()) continue;
    if (!best) {
      best = &c;
      continue;
    }
    const auto& a = users[c.user];
    const auto& b = users[best->user];
    if (c.cost < best->cost - kEpsilon ||
        (c.cost <= best->cost + kEpsilon && std::pair(-a.set, a.id) < std::pair(-b.set, b.id))) {
      best = &c;
    }
  }
  if (!best) return std::nullopt;
  return best->user;
}

/// Residual per-second bandwidth and contribution of every user while a
/// plan is being built.
struct LayerPassState {
  std::vector<std::vector<double>> bandwidth;
  std::vector<ContributionCap> budget;

  static LayerPassState from(std::span<const UserLink> users) {
    LayerPassState s;
    for (const auto& u : users) {
      s.bandwidth.push_back(u.trace.samples);
      s.budget.push_back(u.cap);
    }
    return s;
  }

  void apply(const FetchCost& fetch) {
    auto& b = bandwidth[fetch.user];
    for (auto [second, amount] : fetch.draws) {
      double& slot = b[static_cast<std::size_t>(second - 1)];
      slot = std::max(0.0, slot - amount);
      if (slot < kEpsilon) slot = 0.0;
    }
    budget[fetch.user] = fetch.budget;
  }
};

namespace detail {

struct LayerResult {
  SkipScan scan;
  std::vector<std::optional<std::size_t>> chosen;  // per chunk, index i-1
  std::vector<int> unplaced;                       // passed the scan but no user could take it
};

inline std::vector<int> capacity_series(const LayerPassState& state, const FetchPlan& plan, const VideoSpec& video,
                                        std::span<const UserLink> users, std::span<const std::size_t> participants,
                                        int layer) {
  std::vector<std::vector<double>> cumulative;
  std::vector<ContributionCap> budgets;
  for (auto u : participants) {
    if (users[u].max_layer < layer) continue;
    cumulative.push_back(cumulative_bandwidth(std::span<const double>(state.bandwidth[u])));
    budgets.push_back(state.budget[u]);
  }
  std::vector<int> capacity(static_cast<std::size_t>(plan.chunk_count()));
  std::vector<double> at(cumulative.size());
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    for (std::size_t k = 0; k < cumulative.size(); ++k) at[k] = cumulative_at(cumulative[k], plan.deadline(i));
    capacity[static_cast<std::size_t>(i - 1)] = capacity_count(at, budgets, video.layer_size(layer));
  }
  return capacity;
}

/// One forward scan plus backward assignment for `layer` over the chunks
/// flagged eligible, drawing only on `participants`.
inline LayerResult run_layer(LayerPassState& state, const FetchPlan& plan, const VideoSpec& video,
                             std::span<const UserLink> users, std::span<const std::size_t> participants, int layer,
                             const std::vector<bool>& eligible) {
  LayerResult result;
  result.chosen.resize(static_cast<std::size_t>(plan.chunk_count()));
  result.scan = forward_skip_scan(capacity_series(state, plan, video, users, participants, layer), eligible);
  std::vector<bool> dropped(eligible.size(), false);
  for (int i : result.scan.skipped) dropped[static_cast<std::size_t>(i - 1)] = true;

  const double size = video.layer_size(layer);
  std::vector<FetchCost> costs;
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    if (!eligible[k] || dropped[k]) continue;
    const int boundary = i > 1 ? plan.deadline(i - 1) : 0;
    costs.clear();
    for (auto u : participants) {
      if (users[u].max_layer < layer) continue;
      costs.push_back(backward_fetch(u, plan.deadline(i), state.bandwidth[u], size, boundary, state.budget[u]));
    }
    auto pick = assign_layer(costs, users);
    if (!pick) {
      result.unplaced.push_back(i);
      continue;
    }
    for (const auto& c : costs) {
      if (c.user == *pick) state.apply(c);
    }
    result.chosen[k] = pick;
  }
  return result;
}

inline std::vector<bool> layer_eligibility(const FetchPlan& plan, const FetchPlan* fixed, int layer) {
  std::vector<bool> eligible(static_cast<std::size_t>(plan.chunk_count()));
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    const bool chain = layer == 0 || plan.fetched(i, layer - 1);
    const bool pinned = fixed && fixed->fetched(i, layer);
    eligible[static_cast<std::size_t>(i - 1)] = chain && !pinned;
  }
  return eligible;
}

inline void apply_layer(FetchPlan& plan, const LayerResult& result, int layer) {
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    if (auto u = result.chosen[static_cast<std::size_t>(i - 1)]) plan.assign(i, layer, u);
  }
}

inline FetchPlan seed_plan(const VideoSpec& video, const FetchPlan* fixed) {
  FetchPlan plan(video);
  if (!fixed) return plan;
  if (fixed->chunk_count() != video.chunk_count || fixed->layer_count() != video.layer_count()) {
    throw Error("fixed decisions do not match the video shape");
  }
  for (int i = 1; i <= video.chunk_count; ++i) {
    for (int n = 0; n < video.layer_count(); ++n) plan.assign(i, n, fixed->link(i, n));
  }
  return plan;
}

inline std::vector<std::size_t> all_users(std::span<const UserLink> users) {
  std::vector<std::size_t> out(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) out[u] = u;
  return out;
}

inline std::vector<std::size_t> users_in_sets(std::span<const UserLink> users, std::span<const int> sets) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (std::find(sets.begin(), sets.end(), users[u].set) != sets.end()) out.push_back(u);
  }
  return out;
}

inline void check_inputs(const VideoSpec& video, std::span<const UserLink> users) {
  validate(video);
  validate(users, video);
}

inline FetchPlan nopref(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan* fixed) {
  check_inputs(video, users);
  auto state = LayerPassState::from(users);
  auto plan = seed_plan(video, fixed);
  auto everyone = all_users(users);
  for (int n = 0; n < video.layer_count(); ++n) {
    apply_layer(plan, run_layer(state, plan, video, users, everyone, n, layer_eligibility(plan, fixed, n)), n);
  }
  return plan;
}

inline FetchPlan pref(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan* fixed) {
  check_inputs(video, users);
  auto state = LayerPassState::from(users);
  auto plan = seed_plan(video, fixed);
  const auto sets = set_ids(users);
  auto max_layer_of = [&](int set) {
    for (const auto& u : users) {
      if (u.set == set) return u.max_layer;
    }
    return -1;
  };

  int p = 0;
  for (std::size_t lowest = sets.size() - 1; lowest >= 1; --lowest) {
    const int m = std::min(max_layer_of(sets[lowest]), video.top_layer());
    const auto active = users_in_sets(users, std::span<const int>(sets.data(), lowest + 1));
    const auto higher = users_in_sets(users, std::span<const int>(sets.data(), lowest));
    for (int n = p; n <= m; ++n) {
      apply_layer(plan, run_layer(state, plan, video, users, active, n, layer_eligibility(plan, fixed, n)), n);
    }
    // Re-plan the layers that landed on the lowest set using only the
    // higher sets; whatever fits moves, the rest stays put.
    for (int n = p; n <= m; ++n) {
      std::vector<bool> items(static_cast<std::size_t>(plan.chunk_count()), false);
      for (int i = 1; i <= plan.chunk_count(); ++i) {
        auto u = plan.link(i, n);
        const bool pinned = fixed && fixed->fetched(i, n);
        items[static_cast<std::size_t>(i - 1)] = u && !pinned && users[*u].set == sets[lowest];
      }
      apply_layer(plan, run_layer(state, plan, video, users, higher, n, items), n);
    }
    p = m + 1;
  }
  const auto top = users_in_sets(users, std::span<const int>(sets.data(), 1));
  for (int n = p; n < video.layer_count(); ++n) {
    apply_layer(plan, run_layer(state, plan, video, users, top, n, layer_eligibility(plan, fixed, n)), n);
  }
  return plan;
}

inline int latest_useful_second(std::span<const UserLink> users) {
  int last = 0;
  for (const auto& u : users) {
    for (int j = u.trace.length(); j >= 1; --j) {
      if (u.trace.at(j) > 0.0) {
        last = std::max(last, j);
        break;
      }
    }
  }
  return last;
}

inline FetchPlan noskip(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan* fixed) {
  check_inputs(video, users);
  const int horizon = latest_useful_second(users);
  auto everyone = all_users(users);
  auto needs_base = [&](int i) { return !(fixed && fixed->fetched(i, 0)); };

  // Smallest stall that lets every base layer meet its shifted deadline.
  int stall = 0;
  {
    auto state = LayerPassState::from(users);
    FetchPlan probe(video);
    std::vector<std::vector<double>> cumulative;
    for (const auto& u : users) cumulative.push_back(cumulative_bandwidth(u.trace));
    std::vector<double> at(users.size());
    int needed = 0;
    for (int i = 1; i <= video.chunk_count; ++i) {
      if (needs_base(i)) ++needed;
      for (;;) {
        const int deadline = video.deadline(i, stall);
        for (std::size_t u = 0; u < users.size(); ++u) at[u] = cumulative_at(cumulative[u], deadline);
        if (capacity_count(at, state.budget, video.layer_size(0)) >= needed) break;
        if (deadline >= horizon) {
          throw InfeasibleError("links never carry enough data to deliver every base layer");
        }
        ++stall;
      }
    }
  }

  for (;;) {
    auto state = LayerPassState::from(users);
    auto plan = seed_plan(video, fixed);
    for (int i = 1; i <= video.chunk_count; ++i) {
      plan.set_deadline(i, video.deadline(i, stall));
      plan.set_stall(i, stall);
    }
    // Users holding less than one whole base layer in total sit the pass out.
    std::vector<std::size_t> carriers;
    for (auto u : everyone) {
      double total = 0.0;
      for (double b : state.bandwidth[u]) total += b;
      if (state.budget[u].clamp(total) + kEpsilon >= video.layer_size(0)) carriers.push_back(u);
    }
    auto base = run_layer(state, plan, video, users, carriers, 0, layer_eligibility(plan, fixed, 0));
    if (!base.scan.skipped.empty() || !base.unplaced.empty()) {
      if (video.deadline(1, stall) >= horizon) {
        throw InfeasibleError("links never carry enough data to deliver every base layer");
      }
      ++stall;
      continue;
    }
    apply_layer(plan, base, 0);
    for (int n = 1; n < video.layer_count(); ++n) {
      apply_layer(plan, run_layer(state, plan, video, users, everyone, n, layer_eligibility(plan, fixed, n)), n);
    }
    return plan;
  }
}

}  // namespace detail

/// All users act as one set; contribution caps and per-link layer caps hold.
inline FetchPlan plan_offline_nopref(const VideoSpec& video, std::span<const UserLink> users) {
  return detail::nopref(video, users, nullptr);
}

/// Same, with some layers already decided; those are kept as they are,
/// count as present for the layer above, and draw no bandwidth.
inline FetchPlan plan_offline_nopref(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan& fixed) {
  return detail::nopref(video, users, &fixed);
}

inline FetchPlan plan_offline_pref(const VideoSpec& video, std::span<const UserLink> users) {
  return detail::pref(video, users, nullptr);
}

inline FetchPlan plan_offline_pref(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan& fixed) {
  return detail::pref(video, users, &fixed);
}

/// Every base layer is delivered; the shortest sufficient stall is paid
/// once before playback. Throws InfeasibleError when no stall suffices.
inline FetchPlan plan_offline_noskip(const VideoSpec& video, std::span<const UserLink> users) {
  return detail::noskip(video, users, nullptr);
}

inline FetchPlan plan_offline_noskip(const VideoSpec& video, std::span<const UserLink> users, const FetchPlan& fixed) {
  return detail::noskip(video, users, &fixed);
}

struct DownloadRequest {
  int chunk = 1;
  int layer = 0;

  friend bool operator==(const DownloadRequest&, const DownloadRequest&) = default;
  friend auto operator<=>(const DownloadRequest&, const DownloadRequest&) = default;
};

/// Per link, the layers it carries in (chunk, layer) order.
inline std::vector<std::vector<DownloadRequest>> materialize_download_order(const FetchPlan& plan,
                                                                            std::size_t user_count) {
  std::vector<std::vector<DownloadRequest>> order(user_count);
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    for (int n = 0; n < plan.layer_count(); ++n) {
      if (auto u = plan.link(i, n)) order.at(*u).push_back({i, n});
    }
  }
  return order;
}

/// Runs the materialized order against the users' traces. Each link works
/// through its list as fast as its bandwidth allows; a layer still
/// incomplete at its deadline is abandoned.
inline ExecutionLog execute_plan(const FetchPlan& plan, const VideoSpec& video, std::span<const UserLink> users) {
  ExecutionLog log(video, users.size());
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    log.deadline[static_cast<std::size_t>(i - 1)] = plan.deadline(i);
    log.stall[static_cast<std::size_t>(i - 1)] = plan.stall(i);
  }
  auto order = materialize_download_order(plan, users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    std::deque<DownloadRequest> queue(order[u].begin(), order[u].end());
    double remaining = queue.empty() ? 0.0 : video.layer_size(queue.front().layer);
    const int last = users[u].trace.length();
    double budget = users[u].cap.is_unlimited() ? kInfiniteCost : users[u].cap.value();
    for (int j = 1; j <= last && !queue.empty(); ++j) {
      double available = users[u].trace.at(j);
      while (!queue.empty()) {
        const auto& head = queue.front();
        if (j > plan.deadline(head.chunk) || budget <= kEpsilon) {
          queue.pop_front();
          if (!queue.empty()) remaining = video.layer_size(queue.front().layer);
          continue;
        }
        if (available <= kEpsilon) break;
        const double moved = std::min({available, remaining, budget});
        log.transfers.push_back({u, head.chunk, head.layer, j, moved});
        log.user_megabits[u] += moved;
        available -= moved;
        budget -= moved;
        remaining -= moved;
        if (remaining <= kEpsilon) {
          log.set_delivered(head.chunk, head.layer, u);
          queue.pop_front();
          if (!queue.empty()) remaining = video.layer_size(queue.front().layer);
        }
      }
    }
  }
  // A layer whose lower layer never arrived cannot be decoded.
  for (int i = 1; i <= log.chunk_count; ++i) {
    bool chain = true;
    for (int n = 0; n < log.layer_count; ++n) {
      if (!chain) log.set_delivered(i, n, std::nullopt);
      chain = chain && log.delivered(i, n).has_value();
    }
  }
  return log;
}

}  // namespace groupcast
