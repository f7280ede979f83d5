#pragma once

// Core domain types for cooperative layered-video scheduling: the video,
// the cooperating user links, fetch plans, execution logs, the weighted
// objective and the constraint checker.
//
// Conventions used throughout the library:
//   * sizes are megabits, time is integer seconds, bandwidth is megabits
//     available in a one-second slot;
//   * chunks are 1-indexed (chunk 1 plays first), layers are 0-indexed
//     (layer 0 is the base layer), seconds are 1-indexed (second j covers
//     the interval (j-1, j]);
//   * users are referred to by their index in the roster span.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace groupcast {

inline constexpr double kEpsilon = 1e-9;

/// Delivered level of a chunk that has no base layer.
inline constexpr int kSkipped = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a planner cannot satisfy a hard requirement, e.g. no-skip
/// planning on links that never carry enough data for every base layer.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Per-user download allowance over the whole video. Unlimited is a
/// distinct state, never a large sentinel number.
class ContributionCap {
 public:
  static ContributionCap unlimited() { return ContributionCap{}; }
  static ContributionCap megabits(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw Error("contribution cap must be a finite nonnegative value");
    }
    ContributionCap cap;
    cap.value_ = value;
    return cap;
  }

  bool is_unlimited() const { return !value_.has_value(); }

  double value() const {
    if (!value_) throw Error("unlimited contribution has no finite value");
    return *value_;
  }

  /// Largest amount not exceeding `want` that this allowance permits.
  double clamp(double want) const { return value_ ? std::min(want, *value_) : want; }

  bool covers(double amount) const { return !value_ || *value_ + kEpsilon >= amount; }

  /// Allowance left after spending `amount`; never negative.
  ContributionCap minus(double amount) const {
    if (!value_) return *this;
    ContributionCap cap;
    cap.value_ = std::max(0.0, *value_ - amount);
    return cap;
  }

  friend bool operator==(const ContributionCap&, const ContributionCap&) = default;

 private:
  ContributionCap() = default;
  std::optional<double> value_;
};

/// Megabits available per one-second slot; slot j (1-indexed) is
/// samples[j-1]. Seconds past the end carry no bandwidth.
struct BandwidthTrace {
  std::vector<double> samples;

  int length() const { return static_cast<int>(samples.size()); }
  double at(int second) const {
    if (second < 1 || second > length()) return 0.0;
    return samples[static_cast<std::size_t>(second - 1)];
  }
};

struct VideoSpec {
  int chunk_count = 0;
  int chunk_seconds = 1;
  int startup_seconds = 0;
  std::vector<double> layer_sizes;  // Y_n in megabits

  int layer_count() const { return static_cast<int>(layer_sizes.size()); }
  int top_layer() const { return layer_count() - 1; }
  double layer_size(int layer) const { return layer_sizes.at(static_cast<std::size_t>(layer)); }

  /// Playback deadline of a chunk given the stall accumulated before it.
  int deadline(int chunk, int stall = 0) const {
    return (chunk - 1) * chunk_seconds + startup_seconds + stall;
  }

  /// Nominal cumulative rate in Mbps when layers 0..layer are delivered.
  double cumulative_rate(int layer) const {
    double total = 0.0;
    for (int n = 0; n <= layer; ++n) total += layer_size(n);
    return total / chunk_seconds;
  }

  std::vector<double> cumulative_rates() const {
    std::vector<double> rates;
    rates.reserve(layer_sizes.size());
    for (int n = 0; n < layer_count(); ++n) rates.push_back(cumulative_rate(n));
    return rates;
  }

  double total_layer_size() const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.end(), 0.0);
  }
};

inline void validate(const VideoSpec& video) {
  if (video.chunk_count < 1) throw Error("video needs at least one chunk");
  if (video.chunk_seconds < 1) throw Error("chunk duration must be a positive integer");
  if (video.startup_seconds < 0) throw Error("startup delay must be nonnegative");
  if (video.layer_sizes.empty()) throw Error("video needs a base layer");
  for (double y : video.layer_sizes) {
    if (!(y > 0.0) || !std::isfinite(y)) throw Error("layer sizes must be positive");
  }
}

struct UserLink {
  int id = 0;
  int set = 1;        // priority set, 1 = most preferred
  int max_layer = 0;  // highest layer this link may carry
  ContributionCap cap = ContributionCap::unlimited();
  BandwidthTrace trace;
};

/// Checks roster invariants: unique ids, positive set ids, layer caps
/// within the video, and strictly decreasing layer caps across sets.
inline void validate(std::span<const UserLink> users, const VideoSpec& video) {
  if (users.empty()) throw Error("roster is empty");
  std::map<int, int> set_cap;
  std::vector<int> ids;
  for (const auto& user : users) {
    if (user.set < 1) throw Error("set ids start at 1");
    if (user.max_layer < 0 || user.max_layer > video.top_layer()) {
      throw Error("user " + std::to_string(user.id) + " has max_layer outside the video");
    }
    auto [it, inserted] = set_cap.emplace(user.set, user.max_layer);
    if (!inserted && it->second != user.max_layer) {
      throw Error("users of set " + std::to_string(user.set) + " disagree on max_layer");
    }
    for (double b : user.trace.samples) {
      if (!(b >= 0.0) || !std::isfinite(b)) throw Error("bandwidth samples must be nonnegative");
    }
    ids.push_back(user.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw Error("duplicate user id");
  int previous = std::numeric_limits<int>::max();
  for (const auto& [set, cap] : set_cap) {
    if (cap >= previous) throw Error("max_layer must strictly decrease with set priority");
    previous = cap;
  }
}

/// Distinct set ids present in the roster, ascending (most preferred first).
inline std::vector<int> set_ids(std::span<const UserLink> users) {
  std::vector<int> sets;
  for (const auto& user : users) sets.push_back(user.set);
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  return sets;
}

/// Whole-layer decisions: which link (if any) carries layer n of chunk i,
/// plus per-chunk deadlines and accumulated stall.
class FetchPlan {
 public:
  FetchPlan() = default;
  explicit FetchPlan(const VideoSpec& video)
      : chunk_count_(video.chunk_count),
        layer_count_(video.layer_count()),
        link_(static_cast<std::size_t>(chunk_count_ * layer_count_)),
        deadline_(static_cast<std::size_t>(chunk_count_)),
        stall_(static_cast<std::size_t>(chunk_count_), 0) {
    for (int i = 1; i <= chunk_count_; ++i) deadline_[static_cast<std::size_t>(i - 1)] = video.deadline(i);
  }

  int chunk_count() const { return chunk_count_; }
  int layer_count() const { return layer_count_; }

  std::optional<std::size_t> link(int chunk, int layer) const { return link_[index(chunk, layer)]; }
  bool fetched(int chunk, int layer) const { return link_[index(chunk, layer)].has_value(); }
  void assign(int chunk, int layer, std::optional<std::size_t> user) { link_[index(chunk, layer)] = user; }

  int deadline(int chunk) const { return deadline_.at(static_cast<std::size_t>(chunk - 1)); }
  void set_deadline(int chunk, int value) { deadline_.at(static_cast<std::size_t>(chunk - 1)) = value; }
  int stall(int chunk) const { return stall_.at(static_cast<std::size_t>(chunk - 1)); }
  void set_stall(int chunk, int value) { stall_.at(static_cast<std::size_t>(chunk - 1)) = value; }
  int final_stall() const { return stall_.empty() ? 0 : stall_.back(); }

  /// Highest layer of the decode chain starting at the base layer, or kSkipped.
  int top_layer(int chunk) const {
    int level = kSkipped;
    for (int n = 0; n < layer_count_ && fetched(chunk, n); ++n) level = n;
    return level;
  }

  int skip_count(int layer) const {
    int count = 0;
    for (int i = 1; i <= chunk_count_; ++i) count += fetched(i, layer) ? 0 : 1;
    return count;
  }

  friend bool operator==(const FetchPlan&, const FetchPlan&) = default;

 private:
  std::size_t index(int chunk, int layer) const {
    if (chunk < 1 || chunk > chunk_count_ || layer < 0 || layer >= layer_count_) {
      throw std::out_of_range("chunk/layer outside the plan");
    }
    return static_cast<std::size_t>(layer * chunk_count_ + (chunk - 1));
  }

  int chunk_count_ = 0;
  int layer_count_ = 0;
  std::vector<std::optional<std::size_t>> link_;
  std::vector<int> deadline_;
  std::vector<int> stall_;
};

/// Megabits of one layer moved over one link in one second.
struct TransferRecord {
  std::size_t user = 0;
  int chunk = 1;
  int layer = 0;
  int second = 1;
  double megabits = 0.0;

  friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

/// What actually happened when a plan (or an online policy) was executed.
struct ExecutionLog {
  int chunk_count = 0;
  int layer_count = 0;
  std::vector<TransferRecord> transfers;
  std::vector<std::optional<std::size_t>> delivered_by;  // [layer * C + chunk - 1]
  std::vector<int> deadline;                            // final deadline per chunk
  std::vector<int> stall;                               // d(i) per chunk
  std::vector<double> user_megabits;                    // f_u
  std::vector<double> buffer_seconds;                   // occupancy after each second, online only

  ExecutionLog() = default;
  ExecutionLog(const VideoSpec& video, std::size_t user_count)
      : chunk_count(video.chunk_count),
        layer_count(video.layer_count()),
        delivered_by(static_cast<std::size_t>(video.chunk_count * video.layer_count())),
        deadline(static_cast<std::size_t>(video.chunk_count)),
        stall(static_cast<std::size_t>(video.chunk_count), 0),
        user_megabits(user_count, 0.0) {
    for (int i = 1; i <= chunk_count; ++i) deadline[static_cast<std::size_t>(i - 1)] = video.deadline(i);
  }

  std::optional<std::size_t> delivered(int chunk, int layer) const {
    return delivered_by.at(static_cast<std::size_t>(layer * chunk_count + chunk - 1));
  }
  void set_delivered(int chunk, int layer, std::optional<std::size_t> user) {
    delivered_by.at(static_cast<std::size_t>(layer * chunk_count + chunk - 1)) = user;
  }

  /// Highest layer delivered with its whole decode chain, or kSkipped.
  int delivered_level(int chunk) const {
    int level = kSkipped;
    for (int n = 0; n < layer_count && delivered(chunk, n); ++n) level = n;
    return level;
  }

  int final_stall() const { return stall.empty() ? 0 : stall.back(); }

  friend bool operator==(const ExecutionLog&, const ExecutionLog&) = default;
};

// ---------------------------------------------------------------------------
// Weights

/// lambda[n][k] for layer n and set position k (0-based position in the
/// ascending list of set ids), plus the stall penalty mu.
struct WeightTable {
  std::vector<std::vector<double>> lambda;
  std::vector<int> sets;  // set ids in ascending order, maps position -> id
  double mu = 0.0;

  int set_count() const { return static_cast<int>(sets.size()); }

  double weight(int layer, int set_id) const {
    auto it = std::lower_bound(sets.begin(), sets.end(), set_id);
    if (it == sets.end() || *it != set_id) throw Error("unknown set id " + std::to_string(set_id));
    return lambda.at(static_cast<std::size_t>(layer)).at(static_cast<std::size_t>(it - sets.begin()));
  }
};

namespace detail {

// Right-hand side of the dominance condition for layer a and set position k:
// C * (max over lower sets of sum_{n>=a} + max over sets up to k of sum_{n>a}).
inline double dominance_bound(const std::vector<std::vector<double>>& lambda, std::span<const double> sizes,
                              int chunk_count, int a, int k) {
  const int top = static_cast<int>(sizes.size()) - 1;
  const int set_count = static_cast<int>(lambda.front().size());
  auto tail = [&](int set, int from) {
    double sum = 0.0;
    for (int n = from; n <= top; ++n) sum += lambda[static_cast<std::size_t>(n)][static_cast<std::size_t>(set)] * sizes[static_cast<std::size_t>(n)];
    return sum;
  };
  double lower = 0.0;
  for (int kp = k + 1; kp < set_count; ++kp) lower = std::max(lower, tail(kp, a));
  double upper = 0.0;
  for (int kpp = 0; kpp <= k; ++kpp) upper = std::max(upper, tail(kpp, a + 1));
  return chunk_count * (lower + upper);
}

}  // namespace detail

/// Deterministic weights satisfying the strict dominance condition: one
/// more chunk at layer a on set k is worth more than every chunk's layers
/// >= a on any lower-priority set plus every chunk's layers > a on sets up
/// to k. Built from (last layer, last set) = 1 backwards, each weight twice
/// its lower bound.
inline WeightTable make_weights(const VideoSpec& video, std::span<const int> set_list) {
  validate(video);
  WeightTable table;
  table.sets.assign(set_list.begin(), set_list.end());
  std::sort(table.sets.begin(), table.sets.end());
  table.sets.erase(std::unique(table.sets.begin(), table.sets.end()), table.sets.end());
  if (table.sets.empty()) throw Error("make_weights needs at least one set");
  const int top = video.top_layer();
  const int set_count = table.set_count();
  table.lambda.assign(static_cast<std::size_t>(top + 1), std::vector<double>(static_cast<std::size_t>(set_count), 0.0));
  for (int a = top; a >= 0; --a) {
    for (int k = set_count - 1; k >= 0; --k) {
      const double bound = detail::dominance_bound(table.lambda, video.layer_sizes, video.chunk_count, a, k);
      table.lambda[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] =
          bound > 0.0 ? 2.0 * bound / video.layer_size(a) : 1.0;
    }
  }
  table.mu = 2.0 * table.lambda[0][0] * video.chunk_count * video.total_layer_size();
  return table;
}

inline WeightTable make_weights(const VideoSpec& video, std::span<const UserLink> users) {
  return make_weights(video, set_ids(users));
}

enum class PlaybackMode { Skip, NoSkip };

// ---------------------------------------------------------------------------
// Objective

inline double objective_value(const FetchPlan& plan, std::span<const UserLink> users, const VideoSpec& video,
                              const WeightTable& weights, PlaybackMode mode) {
  double total = 0.0;
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    for (int n = 0; n < plan.layer_count(); ++n) {
      auto user = plan.link(i, n);
      if (!user) continue;
      if (n > 0 && !plan.fetched(i, n - 1)) {
        throw Error("plan breaks the decode chain at chunk " + std::to_string(i) + " layer " + std::to_string(n));
      }
      total += weights.weight(n, users[*user].set) * video.layer_size(n);
    }
  }
  if (mode == PlaybackMode::NoSkip) total -= weights.mu * plan.final_stall();
  return total;
}

inline double objective_value(const ExecutionLog& log, std::span<const UserLink> users, const VideoSpec& video,
                              const WeightTable& weights, PlaybackMode mode) {
  std::map<std::pair<int, int>, std::size_t> carrier;
  for (const auto& record : log.transfers) {
    if (record.megabits <= 0.0) continue;
    auto key = std::make_pair(record.chunk, record.layer);
    auto [it, inserted] = carrier.emplace(key, record.user);
    if (!inserted && it->second != record.user && log.delivered(record.chunk, record.layer)) {
      throw Error("delivered layer moved over more than one link");
    }
  }
  double total = 0.0;
  for (int i = 1; i <= log.chunk_count; ++i) {
    for (int n = 0; n < log.layer_count; ++n) {
      auto user = log.delivered(i, n);
      if (!user) continue;
      if (n > 0 && !log.delivered(i, n - 1)) {
        throw Error("log breaks the decode chain at chunk " + std::to_string(i) + " layer " + std::to_string(n));
      }
      total += weights.weight(n, users[*user].set) * video.layer_size(n);
    }
  }
  if (mode == PlaybackMode::NoSkip) total -= weights.mu * log.final_stall();
  return total;
}

// ---------------------------------------------------------------------------
// Feasibility

enum class Constraint { DecodeChain, SingleLink, Bandwidth, Contribution, LayerCap, Deadline, Nonnegative, LayerSize };

inline const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::DecodeChain: return "decode-chain";
    case Constraint::SingleLink: return "single-link";
    case Constraint::Bandwidth: return "bandwidth";
    case Constraint::Contribution: return "contribution";
    case Constraint::LayerCap: return "layer-cap";
    case Constraint::Deadline: return "deadline";
    case Constraint::Nonnegative: return "nonnegative";
    case Constraint::LayerSize: return "layer-size";
  }
  return "unknown";
}

struct Violation {
  Constraint constraint;
  int chunk = 0;   // 0 when not applicable
  int layer = -1;  // -1 when not applicable
  std::optional<std::size_t> user;
  int second = 0;  // 0 when not applicable
  std::string detail;
};

/// Lists every constraint the log breaks; empty means the log is feasible.
inline std::vector<Violation> check_feasibility(const ExecutionLog& log, const VideoSpec& video,
                                                std::span<const UserLink> users) {
  std::vector<Violation> out;
  const double tol = 1e-6;
  std::map<std::pair<std::size_t, int>, double> per_slot;
  std::map<std::pair<int, int>, double> per_layer;
  std::map<std::pair<int, int>, std::vector<std::size_t>> layer_users;
  std::vector<double> per_user(users.size(), 0.0);

  for (const auto& r : log.transfers) {
    if (r.user >= users.size() || r.chunk < 1 || r.chunk > log.chunk_count || r.layer < 0 || r.layer >= log.layer_count) {
      out.push_back({Constraint::Nonnegative, r.chunk, r.layer, r.user, r.second, "record indexes outside the instance"});
      continue;
    }
    if (r.megabits < -tol) {
      out.push_back({Constraint::Nonnegative, r.chunk, r.layer, r.user, r.second, "negative transfer"});
    }
    const int deadline = log.deadline[static_cast<std::size_t>(r.chunk - 1)];
    if (r.megabits > tol && (r.second < 1 || r.second > deadline)) {
      out.push_back({Constraint::Deadline, r.chunk, r.layer, r.user, r.second,
                     "transfer at second " + std::to_string(r.second) + " after deadline " + std::to_string(deadline)});
    }
    if (r.megabits > tol && r.layer > users[r.user].max_layer) {
      out.push_back({Constraint::LayerCap, r.chunk, r.layer, r.user, r.second, "layer above the link's max layer"});
    }
    per_slot[{r.user, r.second}] += r.megabits;
    per_layer[{r.chunk, r.layer}] += r.megabits;
    per_user[r.user] += r.megabits;
    if (r.megabits > tol) {
      auto& carriers = layer_users[{r.chunk, r.layer}];
      if (std::find(carriers.begin(), carriers.end(), r.user) == carriers.end()) carriers.push_back(r.user);
    }
  }

  for (const auto& [slot, amount] : per_slot) {
    const double available = users[slot.first].trace.at(slot.second);
    if (amount > available + tol) {
      out.push_back({Constraint::Bandwidth, 0, -1, slot.first, slot.second,
                     "moved " + std::to_string(amount) + " Mb with " + std::to_string(available) + " available"});
    }
  }
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!users[u].cap.covers(per_user[u] - tol)) {
      out.push_back({Constraint::Contribution, 0, -1, u, 0, "user exceeds its contribution cap"});
    }
  }
  for (const auto& [key, carriers] : layer_users) {
    if (carriers.size() > 1) {
      out.push_back({Constraint::SingleLink, key.first, key.second, std::nullopt, 0, "layer carried by several links"});
    }
  }
  for (int i = 1; i <= log.chunk_count; ++i) {
    for (int n = 0; n < log.layer_count; ++n) {
      auto by = log.delivered(i, n);
      auto it = per_layer.find({i, n});
      const double moved = it == per_layer.end() ? 0.0 : it->second;
      const double size = video.layer_size(n);
      if (by) {
        if (std::abs(moved - size) > tol * std::max(1.0, size)) {
          out.push_back({Constraint::LayerSize, i, n, by, 0, "delivered layer does not match its size"});
        }
        auto carriers = layer_users.find({i, n});
        if (carriers != layer_users.end() && std::find(carriers->second.begin(), carriers->second.end(), *by) == carriers->second.end()) {
          out.push_back({Constraint::SingleLink, i, n, by, 0, "delivering link moved none of the layer"});
        }
        if (n > 0 && !log.delivered(i, n - 1)) {
          out.push_back({Constraint::DecodeChain, i, n, by, 0, "layer delivered without the layer below"});
        }
      }
    }
  }
  return out;
}

}  // namespace groupcast
