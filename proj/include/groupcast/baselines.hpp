#pragma once

// Buffer-based and prediction-based quality selection with round-robin
// distribution of layers over the cooperating links.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "detail/session.hpp"
#include "model.hpp"
#include "online.hpp"

namespace groupcast {

struct BBConfig {
  double low_threshold = 4.0;
  double high_threshold = 10.0;
};

enum class BaselineKind { BufferBased, PredictionBased };

/// Linear map from buffer occupancy to a layer index, floored.
inline int bb_quality(double occupancy, const BBConfig& cfg, int top_layer) {
  if (!(cfg.low_threshold > 0.0) || !(cfg.high_threshold > cfg.low_threshold)) {
    throw Error("buffer thresholds need 0 < low < high");
  }
  if (occupancy <= cfg.low_threshold) return 0;
  if (occupancy >= cfg.high_threshold) return top_layer;
  const double x = (occupancy - cfg.low_threshold) / (cfg.high_threshold - cfg.low_threshold) * top_layer;
  return std::clamp(static_cast<int>(std::floor(x + kEpsilon)), 0, top_layer);
}

/// Highest layer whose cumulative rate fits in 90% of the summed predictions.
inline int pb_quality(std::span<const double> predictions, std::span<const double> cumulative_rates) {
  if (predictions.empty()) throw Error("prediction-based quality needs at least one eligible user");
  const double budget = 0.9 * std::accumulate(predictions.begin(), predictions.end(), 0.0);
  int layer = 0;
  for (std::size_t n = 0; n < cumulative_rates.size(); ++n) {
    if (cumulative_rates[n] <= budget + kEpsilon) layer = static_cast<int>(n);
  }
  return layer;
}

namespace detail {

struct RoundRobin {
  std::vector<std::size_t> order;  // roster indices by ascending id
  std::size_t pointer = 0;
};

inline void baseline_replan(Session& s, RoundRobin& rr, BaselineKind kind, const BBConfig& bb, bool preference) {
  const auto users = s.users();
  const auto& video = s.video();
  const int top_set =
      std::min_element(users.begin(), users.end(), [](const auto& a, const auto& b) { return a.set < b.set; })->set;
  if (kind == BaselineKind::PredictionBased && s.config().predictor == PredictorKind::Harmonic &&
      s.replan_index() == 0) {
    bootstrap(s);
    return;
  }
  const auto chunks = s.fetch_ahead();
  if (chunks.empty()) return;

  int target = 0;
  if (kind == BaselineKind::BufferBased) {
    target = bb_quality(s.settled_buffer_seconds(), bb, video.top_layer());
  } else {
    std::vector<double> predictions;
    for (std::size_t u = 0; u < users.size(); ++u) {
      if (preference && users[u].set != top_set) continue;
      if (s.config().predictor == PredictorKind::Perfect) {
        predictions.push_back(users[u].trace.at(s.now() + 1));
      } else {
        predictions.push_back(s.predicted_rate(u));
      }
    }
    target = pb_quality(predictions, video.cumulative_rates());
  }

  std::vector<ContributionCap> budget;
  for (std::size_t u = 0; u < users.size(); ++u) budget.push_back(s.window_budget(u));

  for (int i : chunks) {
    for (int n = 0; n <= target; ++n) {
      const double size = video.layer_size(n);
      std::optional<std::size_t> pick;
      for (std::size_t step = 0; step < rr.order.size() && !pick; ++step) {
        const std::size_t u = rr.order[(rr.pointer + step) % rr.order.size()];
        if (users[u].max_layer < n) continue;
        if (preference && n > 0 && users[u].set != top_set) continue;
        if (!budget[u].covers(size)) continue;
        pick = u;
        rr.pointer = (rr.pointer + step + 1) % rr.order.size();
      }
      if (!pick) break;
      budget[*pick] = budget[*pick].minus(size);
      s.enqueue(*pick, i, n);
    }
  }
}

}  // namespace detail

struct BaselineConfig {
  BaselineKind kind = BaselineKind::BufferBased;
  BBConfig bb;
  bool preference = false;
};

/// Round-robin baseline run over the true traces in skip mode.
inline ExecutionLog run_baseline(const VideoSpec& video, std::span<const UserLink> users, const OnlineConfig& config,
                                 const BaselineConfig& baseline, OnlineTelemetry* telemetry = nullptr) {
  detail::Session session(video, users, config, PlaybackMode::Skip);
  detail::RoundRobin rr;
  rr.order.resize(users.size());
  std::iota(rr.order.begin(), rr.order.end(), std::size_t{0});
  std::sort(rr.order.begin(), rr.order.end(), [&](auto a, auto b) { return users[a].id < users[b].id; });
  return session.run(
      [&](detail::Session& s) { detail::baseline_replan(s, rr, baseline.kind, baseline.bb, baseline.preference); },
      telemetry);
}

}  // namespace groupcast
