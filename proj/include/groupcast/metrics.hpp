#pragma once

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

#include "model.hpp"

namespace groupcast {

struct MetricsReport {
  double skip_pct = 0.0;
  double apbr = 0.0;  // Mbps, skipped chunks count as zero
  double lsr = 0.0;   // Mbps
  std::vector<double> per_user_megabits;
  std::vector<double> per_user_pct;
  int stall_s = 0;
  double objective = 0.0;
  std::vector<double> layer_histogram;  // % of chunks whose top delivered layer is n
};

/// Cumulative nominal rate of a delivered level, 0 for a skipped chunk.
inline double playback_rate(const VideoSpec& video, int level) {
  return level == kSkipped ? 0.0 : video.cumulative_rate(level);
}

inline MetricsReport compute_metrics(const ExecutionLog& log, const VideoSpec& video, std::span<const UserLink> users,
                                     PlaybackMode mode) {
  MetricsReport r;
  const int c = log.chunk_count;
  if (c < 1) throw Error("log has no chunks");
  r.layer_histogram.assign(static_cast<std::size_t>(video.layer_count()), 0.0);
  int skipped = 0;
  double rate_sum = 0.0;
  double switching = 0.0;
  int previous_level = kSkipped;
  double previous_rate = 0.0;
  for (int i = 1; i <= c; ++i) {
    const int level = log.delivered_level(i);
    const double rate = playback_rate(video, level);
    if (level == kSkipped) {
      ++skipped;
    } else {
      r.layer_histogram[static_cast<std::size_t>(level)] += 1.0;
    }
    rate_sum += rate;
    if (i > 1 && level != previous_level) switching += std::abs(rate - previous_rate);
    previous_level = level;
    previous_rate = rate;
  }
  r.skip_pct = 100.0 * skipped / c;
  r.apbr = rate_sum / c;
  r.lsr = switching / c;
  for (auto& h : r.layer_histogram) h = 100.0 * h / c;

  r.per_user_megabits = log.user_megabits;
  const double total = std::accumulate(r.per_user_megabits.begin(), r.per_user_megabits.end(), 0.0);
  r.per_user_pct.resize(r.per_user_megabits.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t u = 0; u < r.per_user_pct.size(); ++u) r.per_user_pct[u] = 100.0 * r.per_user_megabits[u] / total;
  }
  r.stall_s = log.final_stall();
  r.objective = objective_value(log, users, video, make_weights(video, users), mode);
  return r;
}

}  // namespace groupcast
