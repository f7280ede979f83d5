#pragma once

// Sliding-window re-planning: every alpha seconds the next W chunks are
// planned with the offline planners on a predicted trace, then executed
// over the true traces.

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "detail/session.hpp"
#include "model.hpp"
#include "offline.hpp"

namespace groupcast {

enum class OnlineMode { NoPref, Pref, NoSkip };

namespace detail {

/// Base layers of the first U playable chunks go one per user, in
/// ascending user id, before any throughput has been measured.
inline void bootstrap(Session& s) {
  std::vector<std::size_t> order(s.users().size());
  for (std::size_t u = 0; u < order.size(); ++u) order[u] = u;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.users()[a].id < s.users()[b].id; });
  std::size_t next = 0;
  for (int i = 1; i <= s.video().chunk_count && next < order.size(); ++i) {
    if (s.deadline(i) <= s.now() || !s.untouched(i)) continue;
    s.enqueue(order[next++], i, 0);
  }
}

inline std::vector<double> predicted_samples(const Session& s, std::size_t u, int length) {
  std::vector<double> samples(static_cast<std::size_t>(std::max(length, 0)));
  if (s.config().predictor == PredictorKind::Perfect) {
    for (int j = 1; j <= length; ++j) samples[static_cast<std::size_t>(j - 1)] = s.users()[u].trace.at(s.now() + j);
  } else {
    std::fill(samples.begin(), samples.end(), s.predicted_rate(u));
  }
  // What the queue already owes is served first.
  double owed = s.committed(u);
  for (auto& b : samples) {
    if (owed <= 0.0) break;
    const double take = std::min(b, owed);
    b -= take;
    owed -= take;
  }
  return samples;
}

inline void groupcast_replan(Session& s, OnlineMode mode) {
  if (s.config().predictor == PredictorKind::Harmonic && s.replan_index() == 0) {
    bootstrap(s);
    return;
  }
  auto window = s.window();
  if (!window) return;
  const auto [first, last] = *window;
  s.cancel_unstarted(first, last);

  const auto& video = s.video();
  VideoSpec sub;
  sub.chunk_count = last - first + 1;
  sub.chunk_seconds = video.chunk_seconds;
  sub.startup_seconds = s.deadline(first) - s.now();
  sub.layer_sizes = video.layer_sizes;

  FetchPlan fixed(sub);
  for (int k = 1; k <= sub.chunk_count; ++k) {
    for (int n = 0; n < video.layer_count(); ++n) {
      const auto st = s.state(first + k - 1, n);
      if (st == LayerState::Active || st == LayerState::Delivered) fixed.assign(k, n, s.owner(first + k - 1, n));
    }
  }

  int length = sub.deadline(sub.chunk_count);
  if (mode == OnlineMode::NoSkip) length += 4 * sub.chunk_count * sub.chunk_seconds + 4 * s.config().alpha;
  std::vector<UserLink> predicted(s.users().begin(), s.users().end());
  for (std::size_t u = 0; u < predicted.size(); ++u) {
    predicted[u].trace.samples = predicted_samples(s, u, length);
    predicted[u].cap = s.window_budget(u);
  }

  FetchPlan plan;
  try {
    switch (mode) {
      case OnlineMode::NoPref: plan = plan_offline_nopref(sub, predicted, fixed); break;
      case OnlineMode::Pref: plan = plan_offline_pref(sub, predicted, fixed); break;
      case OnlineMode::NoSkip: plan = plan_offline_noskip(sub, predicted, fixed); break;
    }
  } catch (const InfeasibleError&) {
    // No predicted link can carry the window's base layers in any time;
    // keep the base layers moving one per user in turn.
    plan = fixed;
    std::size_t next = 0;
    for (int k = 1; k <= sub.chunk_count; ++k) {
      if (!plan.fetched(k, 0)) plan.assign(k, 0, next++ % predicted.size());
    }
  }
  for (int k = 1; k <= sub.chunk_count; ++k) {
    for (int n = 0; n < video.layer_count(); ++n) {
      auto u = plan.link(k, n);
      if (u && !fixed.fetched(k, n) && s.state(first + k - 1, n) == LayerState::Idle) s.enqueue(*u, first + k - 1, n);
    }
  }
}

}  // namespace detail

inline PlaybackMode playback_mode(OnlineMode mode) {
  return mode == OnlineMode::NoSkip ? PlaybackMode::NoSkip : PlaybackMode::Skip;
}

/// Plays the whole video against the users' true traces, re-planning by
/// the selected offline planner every alpha seconds.
inline ExecutionLog run_online(const VideoSpec& video, std::span<const UserLink> users, const OnlineConfig& config,
                               OnlineMode mode, OnlineTelemetry* telemetry = nullptr) {
  detail::Session session(video, users, config, playback_mode(mode));
  return session.run([mode](detail::Session& s) { detail::groupcast_replan(s, mode); }, telemetry);
}

}  // namespace groupcast
