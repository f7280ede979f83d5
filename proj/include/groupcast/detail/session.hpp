#pragma once

// Second-by-second playback and download simulation shared by the online
// planner and the round-robin baselines. A policy is called every alpha
// seconds of download time and may cancel unstarted requests in the
// current window and queue new ones; the session then moves data over the
// true traces.

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "../model.hpp"

namespace groupcast {

enum class PredictorKind { Harmonic, Perfect };

struct OnlineConfig {
  int window = 5;
  int alpha = 4;
  int delta = 2;
  int beta = 5;
  std::optional<int> buffer_limit;  // seconds; defaults to the smallest value that fits a window
  PredictorKind predictor = PredictorKind::Harmonic;
};

/// Wall-clock cost of each policy call, for profiling.
struct OnlineTelemetry {
  std::vector<double> replan_seconds;
};

/// Most recent min(beta, n) samples, n / sum(1/x). Empty input gives no estimate.
inline std::optional<double> harmonic_predict(std::span<const double> throughputs, int beta) {
  if (throughputs.empty() || beta < 1) return std::nullopt;
  const std::size_t k = std::min<std::size_t>(throughputs.size(), static_cast<std::size_t>(beta));
  double inverse = 0.0;
  for (std::size_t x = throughputs.size() - k; x < throughputs.size(); ++x) {
    if (!(throughputs[x] > 0.0)) return 0.0;
    inverse += 1.0 / throughputs[x];
  }
  return static_cast<double>(k) / inverse;
}

/// Allowance for the window planned at the c-th replan: the share of the
/// total cap that corresponds to the time covered so far, minus what the
/// user already downloaded. Never negative.
inline ContributionCap window_contribution(const ContributionCap& cap, int window, int chunk_seconds, double horizon,
                                           int replan_index, int alpha, double downloaded) {
  if (cap.is_unlimited()) return cap;
  if (!(horizon > 0.0)) throw Error("window contribution needs a positive horizon");
  const double covered = std::min(static_cast<double>(window) * chunk_seconds +
                                      static_cast<double>(replan_index) * alpha,
                                  horizon);
  return ContributionCap::megabits(std::max(0.0, covered / horizon * cap.value() - downloaded));
}

namespace detail {

enum class LayerState { Idle, Queued, Active, Delivered, Abandoned };

class Session {
 public:
  Session(const VideoSpec& video, std::span<const UserLink> users, const OnlineConfig& config, PlaybackMode mode)
      : video_(video), users_(users.begin(), users.end()), config_(config), mode_(mode), log_(video, users.size()) {
    validate(video_);
    validate(std::span<const UserLink>(users_), video_);
    if (config.window < 1 || config.alpha < 1 || config.delta < 0 || config.beta < 1) {
      throw Error("online config needs window >= 1, alpha >= 1, delta >= 0, beta >= 1");
    }
    const int minimum = config.window * video.chunk_seconds + video.startup_seconds;
    buffer_limit_ = config.buffer_limit.value_or(config.window * video.chunk_seconds +
                                                 std::max(video.startup_seconds, config.delta + video.chunk_seconds));
    if (buffer_limit_ < minimum) throw Error("buffer limit must be at least W*L + s seconds");
    if (mode == PlaybackMode::Skip) {
      for (const auto& u : users_) {
        if (u.trace.length() < video.deadline(video.chunk_count)) {
          throw Error("trace of user " + std::to_string(u.id) + " is shorter than the playback horizon");
        }
      }
    }
    const auto cells = static_cast<std::size_t>(video.chunk_count * video.layer_count());
    state_.assign(cells, LayerState::Idle);
    owner_.assign(cells, 0);
    moved_.assign(cells, 0.0);
    head_time_.assign(cells, 0.0);
    queue_.resize(users.size());
    samples_.resize(users.size());
    played_stall_.assign(static_cast<std::size_t>(video.chunk_count), 0);
    resolved_.assign(static_cast<std::size_t>(video.chunk_count), false);
    for (const auto& u : users_) last_second_ = std::max(last_second_, u.trace.length());
  }

  using Policy = std::function<void(Session&)>;

  ExecutionLog run(const Policy& policy, OnlineTelemetry* telemetry) {
    finish_second(0);
    for (int j = 1; next_unresolved_ <= video_.chunk_count; ++j) {
      now_ = j - 1;
      if (now_ % config_.alpha == 0) {
        const auto start = std::chrono::steady_clock::now();
        policy(*this);
        if (telemetry) {
          telemetry->replan_seconds.push_back(
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        ++replans_;
      }
      for (std::size_t u = 0; u < users_.size(); ++u) transfer(u, j);
      finish_second(j);
      log_.buffer_seconds.push_back(buffer_occupancy(j));
    }
    for (int i = 1; i <= video_.chunk_count; ++i) {
      log_.deadline[static_cast<std::size_t>(i - 1)] = deadline(i);
      log_.stall[static_cast<std::size_t>(i - 1)] = played_stall_[static_cast<std::size_t>(i - 1)];
    }
    return log_;
  }

  // ---- queries for policies ------------------------------------------------

  const VideoSpec& video() const { return video_; }
  std::span<const UserLink> users() const { return users_; }
  const OnlineConfig& config() const { return config_; }
  PlaybackMode mode() const { return mode_; }
  int now() const { return now_; }
  int replan_index() const { return replans_; }
  int stall() const { return stall_; }

  int deadline(int chunk) const {
    const auto k = static_cast<std::size_t>(chunk - 1);
    return video_.deadline(chunk, resolved_[k] ? played_stall_[k] : stall_);
  }

  bool resolved(int chunk) const { return resolved_[static_cast<std::size_t>(chunk - 1)]; }

  LayerState state(int chunk, int layer) const { return state_[cell(chunk, layer)]; }
  std::size_t owner(int chunk, int layer) const { return owner_[cell(chunk, layer)]; }
  double moved(int chunk, int layer) const { return moved_[cell(chunk, layer)]; }

  bool untouched(int chunk) const {
    for (int n = 0; n < video_.layer_count(); ++n) {
      if (state(chunk, n) != LayerState::Idle) return false;
    }
    return true;
  }

  /// First and last chunk of the planning window at the current time, or
  /// nullopt when no chunk is far enough from its deadline.
  std::optional<std::pair<int, int>> window() const {
    for (int i = next_unresolved_; i <= video_.chunk_count; ++i) {
      if (deadline(i) > now_ + config_.delta) {
        return std::pair{i, std::min(video_.chunk_count, i + config_.window - 1)};
      }
    }
    return std::nullopt;
  }

  /// Up to W chunks nobody has requested yet, past the deadline margin and
  /// within the playback buffer.
  std::vector<int> fetch_ahead() const {
    std::vector<int> chunks;
    for (int i = next_unresolved_; i <= video_.chunk_count && chunks.size() < static_cast<std::size_t>(config_.window);
         ++i) {
      if (deadline(i) + video_.chunk_seconds - now_ > buffer_limit_) break;
      if (deadline(i) > now_ + config_.delta && untouched(i)) chunks.push_back(i);
    }
    return chunks;
  }

  int buffer_limit() const { return buffer_limit_; }

  double downloaded(std::size_t user) const { return log_.user_megabits[user]; }

  /// Megabits still owed to requests already in `user`'s queue.
  double committed(std::size_t user) const {
    double total = 0.0;
    for (const auto& r : queue_[user]) total += video_.layer_size(r.layer) - moved(r.chunk, r.layer);
    return total;
  }

  /// Allowance left for new requests on `user` in the current window.
  ContributionCap window_budget(std::size_t user) const {
    const auto& cap = users_[user].cap;
    if (cap.is_unlimited()) return cap;
    const double horizon = deadline(video_.chunk_count);
    const double f = downloaded(user);
    auto share = window_contribution(cap, config_.window, video_.chunk_seconds, std::max(horizon, 1.0),
                                     replans_, config_.alpha, f);
    const double spare = std::min(share.value(), cap.value() - f) - committed(user);
    return ContributionCap::megabits(std::max(0.0, spare));
  }

  /// Harmonic-mean throughput over the user's recent completed downloads,
  /// falling back to the request in progress, else zero.
  double predicted_rate(std::size_t user) const {
    if (auto p = harmonic_predict(samples_[user], config_.beta)) return *p;
    if (!queue_[user].empty()) {
      const auto& head = queue_[user].front();
      const auto k = cell(head.chunk, head.layer);
      if (head_time_[k] > 0.0 && moved_[k] > 0.0) return moved_[k] / head_time_[k];
    }
    return 0.0;
  }

  bool has_samples(std::size_t user) const { return !samples_[user].empty(); }

  /// Remaining seconds of playback held by chunks whose download is
  /// finished and whose base layer arrived.
  double settled_buffer_seconds() const {
    double total = 0.0;
    for (int i = 1; i <= video_.chunk_count; ++i) {
      if (state(i, 0) != LayerState::Delivered) continue;
      bool pending = false;
      for (int n = 1; n < video_.layer_count(); ++n) {
        const auto s = state(i, n);
        pending = pending || s == LayerState::Queued || s == LayerState::Active;
      }
      if (pending) continue;
      const double end = deadline(i) + video_.chunk_seconds;
      total += std::clamp(end - now_, 0.0, static_cast<double>(video_.chunk_seconds));
    }
    return total;
  }

  // ---- actions for policies ------------------------------------------------

  void enqueue(std::size_t user, int chunk, int layer) {
    const auto k = cell(chunk, layer);
    if (state_[k] != LayerState::Idle) throw std::logic_error("layer already has a request");
    if (layer > users_[user].max_layer) throw std::logic_error("layer above the link's max layer");
    state_[k] = LayerState::Queued;
    owner_[k] = user;
    auto& q = queue_[user];
    const DownloadKey key{chunk, layer};
    q.insert(std::upper_bound(q.begin(), q.end(), key), key);
  }

  /// Drops requests in chunks [first, last] that have not moved any data.
  void cancel_unstarted(int first, int last) {
    for (auto& q : queue_) {
      std::deque<DownloadKey> kept;
      for (const auto& r : q) {
        const auto k = cell(r.chunk, r.layer);
        if (r.chunk >= first && r.chunk <= last && state_[k] == LayerState::Queued) {
          state_[k] = LayerState::Idle;
        } else {
          kept.push_back(r);
        }
      }
      q = std::move(kept);
    }
  }

 private:
  struct DownloadKey {
    int chunk;
    int layer;
    friend bool operator<(const DownloadKey& a, const DownloadKey& b) {
      return std::pair(a.chunk, a.layer) < std::pair(b.chunk, b.layer);
    }
  };

  std::size_t cell(int chunk, int layer) const {
    return static_cast<std::size_t>(layer * video_.chunk_count + chunk - 1);
  }

  void record_sample(std::size_t user, std::size_t k) {
    if (moved_[k] <= 0.0 || head_time_[k] <= 0.0) return;
    auto& s = samples_[user];
    s.push_back(moved_[k] / head_time_[k]);
    if (s.size() > static_cast<std::size_t>(config_.beta)) s.erase(s.begin());
  }

  void abandon_head(std::size_t user) {
    const auto head = queue_[user].front();
    const auto k = cell(head.chunk, head.layer);
    state_[k] = LayerState::Abandoned;
    record_sample(user, k);
    queue_[user].pop_front();
  }

  void transfer(std::size_t u, int j) {
    const double capacity = users_[u].trace.at(j);
    double available = capacity;
    auto& q = queue_[u];
    while (!q.empty()) {
      const auto head = q.front();
      const auto k = cell(head.chunk, head.layer);
      const bool lower_lost = head.layer > 0 && (state(head.chunk, head.layer - 1) == LayerState::Abandoned ||
                                                 state(head.chunk, head.layer - 1) == LayerState::Idle);
      if (resolved(head.chunk) || j > deadline(head.chunk) || lower_lost) {
        abandon_head(u);
        continue;
      }
      const double allowance = users_[u].cap.is_unlimited() ? capacity : users_[u].cap.value() - log_.user_megabits[u];
      if (allowance <= kEpsilon) {
        abandon_head(u);
        continue;
      }
      // Content of this chunk would sit further ahead of the playhead than the buffer holds.
      if (deadline(head.chunk) + video_.chunk_seconds - (j - 1) > buffer_limit_) break;
      if (capacity <= 0.0) {
        head_time_[k] += 1.0;
        break;
      }
      if (available <= kEpsilon) break;
      const double need = video_.layer_size(head.layer) - moved_[k];
      const double step = std::min({available, need, allowance});
      state_[k] = LayerState::Active;
      moved_[k] += step;
      head_time_[k] += step / capacity;
      available -= step;
      log_.user_megabits[u] += step;
      log_.transfers.push_back({u, head.chunk, head.layer, j, step});
      if (need - step <= kEpsilon) {
        state_[k] = LayerState::Delivered;
        log_.set_delivered(head.chunk, head.layer, u);
        record_sample(u, k);
        q.pop_front();
      }
    }
  }

  void resolve(int chunk) {
    const auto k = static_cast<std::size_t>(chunk - 1);
    played_stall_[k] = stall_;
    resolved_[k] = true;
    bool chain = true;
    for (int n = 0; n < video_.layer_count(); ++n) {
      if (!chain) log_.set_delivered(chunk, n, std::nullopt);
      chain = chain && log_.delivered(chunk, n).has_value();
    }
    ++next_unresolved_;
  }

  void finish_second(int j) {
    while (next_unresolved_ <= video_.chunk_count && deadline(next_unresolved_) <= j) {
      if (mode_ == PlaybackMode::NoSkip && state(next_unresolved_, 0) != LayerState::Delivered) {
        if (j >= last_second_) throw InfeasibleError("traces end before every base layer could be delivered");
        ++stall_;
        break;
      }
      resolve(next_unresolved_);
    }
  }

  double buffer_occupancy(int j) const {
    double total = 0.0;
    for (int i = 1; i <= video_.chunk_count; ++i) {
      bool any = false;
      for (int n = 0; n < video_.layer_count() && !any; ++n) any = moved(i, n) > 0.0;
      if (!any) continue;
      if (resolved(i) && !log_.delivered(i, 0)) continue;
      const double end = deadline(i) + video_.chunk_seconds;
      total += std::clamp(end - j, 0.0, static_cast<double>(video_.chunk_seconds));
    }
    return total;
  }

  VideoSpec video_;
  std::vector<UserLink> users_;
  OnlineConfig config_;
  PlaybackMode mode_;
  ExecutionLog log_;
  int buffer_limit_ = 0;
  int last_second_ = 0;

  std::vector<LayerState> state_;
  std::vector<std::size_t> owner_;
  std::vector<double> moved_;
  std::vector<double> head_time_;
  std::vector<std::deque<DownloadKey>> queue_;
  std::vector<std::vector<double>> samples_;

  std::vector<int> played_stall_;
  std::vector<bool> resolved_;
  int next_unresolved_ = 1;
  int stall_ = 0;
  int now_ = 0;
  int replans_ = 0;
};

}  // namespace detail
}  // namespace groupcast
