#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "groupcast/groupcast.hpp"

namespace fixtures {

using namespace groupcast;

inline VideoSpec example_video() {
  VideoSpec v;
  v.chunk_count = 10;
  v.chunk_seconds = 1;
  v.startup_seconds = 1;
  v.layer_sizes = {2.0, 1.0};
  return v;
}

inline UserLink link(int id, int set, int max_layer, std::vector<double> samples) {
  UserLink u;
  u.id = id;
  u.set = set;
  u.max_layer = max_layer;
  u.trace.samples = std::move(samples);
  return u;
}

/// Two equal-priority links.
inline std::vector<UserLink> example1_users() {
  return {link(1, 1, 1, {2, 2, 0, 0, 3, 3, 0, 3, 0, 0}), link(2, 1, 1, {1, 0, 0, 1, 1, 1, 1, 2, 2, 2})};
}

/// Links 1 and 2 may carry everything; link 3 only base layers.
inline std::vector<UserLink> example2_users() {
  return {link(1, 1, 1, {2, 0, 0, 1, 0, 3, 0, 1, 0, 3}), link(2, 1, 1, {0, 2, 1, 2, 3, 1, 2, 2, 3, 3}),
          link(3, 2, 0, {0, 1, 3, 3, 2, 0, 2, 1, 0, 1})};
}

inline std::vector<int> chunks_on(const FetchPlan& plan, int layer, std::size_t user) {
  std::vector<int> out;
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    if (plan.link(i, layer) == user) out.push_back(i);
  }
  return out;
}

inline std::vector<int> skipped(const FetchPlan& plan, int layer) {
  std::vector<int> out;
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    if (!plan.fetched(i, layer)) out.push_back(i);
  }
  return out;
}

struct RandomShape {
  int max_chunks = 6;
  int max_layers = 3;
  int max_users = 3;
  int max_bandwidth = 3;   // samples drawn from {0..max_bandwidth}
  int max_startup = 2;
  int max_chunk_seconds = 1;
  bool preference = false;  // users spread over sets with decreasing layer caps
  bool caps = false;        // some users get a finite contribution
  int extra_seconds = 0;    // trace tail beyond the last deadline
};

inline double draw_size(SplitMix64& rng) { return 0.5 * static_cast<double>(1 + rng.below(4)); }

inline Instance random_instance(SplitMix64& rng, const RandomShape& shape) {
  Instance inst;
  auto& v = inst.video;
  v.chunk_count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.max_chunks)));
  v.chunk_seconds = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.max_chunk_seconds)));
  v.startup_seconds = static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.max_startup + 1)));
  const int layers = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.max_layers)));
  for (int n = 0; n < layers; ++n) v.layer_sizes.push_back(draw_size(rng));
  const int users = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.max_users)));
  const int seconds = v.deadline(v.chunk_count) + shape.extra_seconds;

  // Sets 1..K get strictly decreasing layer caps.
  std::vector<int> set_of(static_cast<std::size_t>(users), 1);
  if (shape.preference && users > 1) {
    for (int u = 1; u < users; ++u) {
      set_of[static_cast<std::size_t>(u)] = std::min(set_of[static_cast<std::size_t>(u - 1)] + static_cast<int>(rng.below(2)), layers);
    }
  }
  const int sets = set_of.back();
  for (int u = 0; u < users; ++u) {
    UserLink link;
    link.id = u + 1;
    link.set = set_of[static_cast<std::size_t>(u)];
    link.max_layer = sets > 1 ? (layers - 1) * (sets - link.set) / (sets - 1) : layers - 1;
    link.trace.samples.resize(static_cast<std::size_t>(seconds));
    for (auto& b : link.trace.samples) b = static_cast<double>(rng.below(static_cast<std::uint64_t>(shape.max_bandwidth + 1)));
    if (shape.caps && rng.below(2) == 0) link.cap = ContributionCap::megabits(static_cast<double>(rng.below(8)));
    inst.users.push_back(std::move(link));
  }
  return inst;
}

/// Independent optimum for small instances: enumerates every chunk level
/// and every carrier per layer, and accepts an assignment when, for each
/// link and each deadline, the work due by then fits the bandwidth so far.
inline double brute_force_optimum(const Instance& inst, const WeightTable& weights) {
  const auto& v = inst.video;
  const std::size_t users = inst.users.size();
  const int layers = v.layer_count();
  std::vector<std::vector<double>> supply(users);
  const int horizon = v.deadline(v.chunk_count);
  for (std::size_t u = 0; u < users; ++u) {
    supply[u].assign(static_cast<std::size_t>(horizon + 1), 0.0);
    for (int j = 1; j <= horizon; ++j) supply[u][static_cast<std::size_t>(j)] = supply[u][static_cast<std::size_t>(j - 1)] + inst.users[u].trace.at(j);
  }

  // Per chunk: a level and a carrier for each layer up to it.
  struct Choice {
    int level;
    std::vector<std::size_t> carriers;
  };
  std::vector<Choice> per_chunk{{kSkipped, {}}};
  for (int level = 0; level < layers; ++level) {
    std::vector<std::size_t> c(static_cast<std::size_t>(level + 1), 0);
    while (true) {
      per_chunk.push_back({level, c});
      std::size_t k = 0;
      while (k < c.size() && ++c[k] == users) c[k++] = 0;
      if (k == c.size()) break;
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(static_cast<std::size_t>(v.chunk_count), 0);
  while (true) {
    bool ok = true;
    double value = 0.0;
    std::vector<double> total(users, 0.0);
    for (std::size_t u = 0; u < users && ok; ++u) {
      double due = 0.0;
      for (int i = 1; i <= v.chunk_count && ok; ++i) {
        const auto& ch = per_chunk[pick[static_cast<std::size_t>(i - 1)]];
        for (int n = 0; n <= ch.level; ++n) {
          if (ch.carriers[static_cast<std::size_t>(n)] != u) continue;
          if (n > inst.users[u].max_layer) ok = false;
          due += v.layer_size(n);
          value += weights.weight(n, inst.users[u].set) * v.layer_size(n);
        }
        if (due > supply[u][static_cast<std::size_t>(v.deadline(i))] + 1e-9) ok = false;
      }
      if (!inst.users[u].cap.covers(due - 1e-9)) ok = false;
    }
    if (ok) best = std::max(best, value);
    std::size_t k = 0;
    while (k < pick.size() && ++pick[k] == per_chunk.size()) pick[k++] = 0;
    if (k == pick.size()) break;
  }
  return best;
}

inline SmallInstance small(const Instance& inst) { return {inst.video, inst.users}; }

}  // namespace fixtures
