#pragma once

// Exhaustive solvers for tiny instances. They are slow on purpose and
// share no code with the planners beyond the domain types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "model.hpp"

namespace groupcast {

struct SmallInstance {
  VideoSpec video;
  std::vector<UserLink> users;
};

inline constexpr int kOracleMaxChunks = 12;
inline constexpr int kOracleMaxLayers = 3;
inline constexpr std::size_t kOracleMaxUsers = 3;
inline constexpr std::uint64_t kOracleNodeBudget = 10'000'000;

/// Refuses instances outside the sizes the enumeration is meant for.
inline void check_small(const SmallInstance& instance) {
  validate(instance.video);
  validate(std::span<const UserLink>(instance.users), instance.video);
  if (instance.video.chunk_count > kOracleMaxChunks || instance.video.layer_count() > kOracleMaxLayers ||
      instance.users.size() > kOracleMaxUsers) {
    throw Error("instance too large for exhaustive search (limit: 12 chunks, 3 layers, 3 users)");
  }
}

struct EdfJob {
  double size = 0.0;
  int deadline = 0;
};

/// Single-link deadline feasibility with fluid per-second capacity:
/// serving jobs earliest-deadline-first meets every deadline iff, for
/// each deadline D, the work due by D fits in the bandwidth up to D.
inline bool edf_feasible(std::vector<EdfJob> jobs, const BandwidthTrace& trace) {
  std::sort(jobs.begin(), jobs.end(), [](const EdfJob& a, const EdfJob& b) { return a.deadline < b.deadline; });
  double demand = 0.0;
  double supply = 0.0;
  int second = 0;
  for (const auto& job : jobs) {
    demand += job.size;
    while (second < job.deadline) supply += trace.at(++second);
    if (demand > supply + 1e-9) return false;
  }
  return true;
}

namespace detail {

class Search {
 public:
  explicit Search(std::uint64_t budget) : budget_(budget) {}
  void tick() {
    if (++nodes_ > budget_) throw Error("exhaustive search exceeded its node budget");
  }
  std::uint64_t nodes() const { return nodes_; }

 private:
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
};

inline std::vector<std::vector<double>> prefix_supply(const SmallInstance& in) {
  std::vector<std::vector<double>> out;
  for (const auto& u : in.users) {
    std::vector<double> r(1, 0.0);
    const int last = std::max(u.trace.length(), in.video.deadline(in.video.chunk_count));
    for (int j = 1; j <= last; ++j) r.push_back(r.back() + u.trace.at(j));
    out.push_back(std::move(r));
  }
  return out;
}

inline double supply_at(const std::vector<double>& r, int second) {
  if (second <= 0) return 0.0;
  return r[static_cast<std::size_t>(std::min<int>(second, static_cast<int>(r.size()) - 1))];
}

inline bool within(const ContributionCap& cap, double amount) { return cap.covers(amount - 1e-9); }

// Per-position weight of sending layer n over user u; nullopt if not allowed.
using Valuation = std::function<std::optional<double>(int layer, std::size_t user)>;

struct PlanSearch {
  const SmallInstance& in;
  Valuation value;
  std::vector<std::vector<double>> supply;
  Search search{kOracleNodeBudget};

  int chunks = 0;
  int layers = 0;
  std::vector<std::optional<std::size_t>> current;  // [(i-1)*layers + n]
  std::vector<std::optional<std::size_t>> best_plan;
  std::vector<double> demand;  // per user, cumulative over decided chunks
  double best = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::vector<double> optimistic;  // bound on what positions from k onward can add

  PlanSearch(const SmallInstance& instance, Valuation v) : in(instance), value(std::move(v)) {
    supply = prefix_supply(in);
    chunks = in.video.chunk_count;
    layers = in.video.layer_count();
    const auto positions = static_cast<std::size_t>(chunks * layers);
    current.assign(positions, std::nullopt);
    demand.assign(in.users.size(), 0.0);
    optimistic.assign(positions + 1, 0.0);
    double scale = 0.0;
    for (std::size_t k = positions; k-- > 0;) {
      const int n = static_cast<int>(k) % layers;
      double top = 0.0;
      for (std::size_t u = 0; u < in.users.size(); ++u) {
        if (auto w = value(n, u)) top = std::max(top, *w);
      }
      optimistic[k] = optimistic[k + 1] + top;
      scale += top;
    }
    tolerance = 1e-9 * std::max(1.0, scale);
  }

  void run() { visit(0, 0.0); }

  void visit(std::size_t k, double score) {
    search.tick();
    if (score + optimistic[k] <= best + tolerance) return;
    if (k == current.size()) {
      best = score;
      best_plan = current;
      return;
    }
    const int i = static_cast<int>(k) / layers + 1;
    const int n = static_cast<int>(k) % layers;
    current[k] = std::nullopt;
    // Skipping a layer forces every layer above it in the same chunk off.
    {
      std::size_t next = k + 1;
      while (next < current.size() && static_cast<int>(next) % layers != 0) current[next++] = std::nullopt;
      visit(next, score);
    }
    if (n > 0 && !current[k - 1]) return;
    const double size = in.video.layer_size(n);
    const int deadline = in.video.deadline(i);
    for (std::size_t u = 0; u < in.users.size(); ++u) {
      auto w = value(n, u);
      if (!w) continue;
      const double after = demand[u] + size;
      if (after > supply_at(supply[u], deadline) + 1e-9 || !within(in.users[u].cap, after)) continue;
      demand[u] = after;
      current[k] = u;
      visit(k + 1, score + *w);
      current[k] = std::nullopt;
      demand[u] -= size;
    }
  }
};

}  // namespace detail

struct OracleResult {
  double objective = 0.0;
  FetchPlan plan;
  std::uint64_t nodes = 0;
};

namespace detail {

inline FetchPlan to_plan(const SmallInstance& in, const std::vector<std::optional<std::size_t>>& flat) {
  FetchPlan plan(in.video);
  const int layers = in.video.layer_count();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    plan.assign(static_cast<int>(k) / layers + 1, static_cast<int>(k) % layers, flat[k]);
  }
  return plan;
}

}  // namespace detail

/// Best skip-mode objective over every decode-chain-respecting choice of
/// layers and links that each link can serve in deadline order within its
/// bandwidth and contribution. Ties go to the plan that comes first when
/// positions are read chunk by chunk with "skip" before any link.
inline OracleResult oracle_optimal(const SmallInstance& instance, const WeightTable& weights) {
  check_small(instance);
  detail::PlanSearch search(instance, [&](int n, std::size_t u) -> std::optional<double> {
    const auto& user = instance.users[u];
    if (n > user.max_layer) return std::nullopt;
    return weights.weight(n, user.set) * instance.video.layer_size(n);
  });
  search.run();
  return {search.best, detail::to_plan(instance, search.best_plan), search.search.nodes()};
}

/// Fewest layer-n skips among chunks whose lower layers are fetched, with
/// layers below n held at `lower`'s decisions and links; any link may
/// reorder what it carries.
inline int oracle_min_skips(const SmallInstance& instance, int layer, const FetchPlan& lower) {
  check_small(instance);
  const auto& video = instance.video;
  const auto supply = detail::prefix_supply(instance);
  const std::size_t users = instance.users.size();
  const int chunks = video.chunk_count;

  // Work already committed by layers below n, per user and chunk.
  std::vector<std::vector<double>> fixed(users, std::vector<double>(static_cast<std::size_t>(chunks) + 1, 0.0));
  std::vector<double> fixed_total(users, 0.0);
  std::vector<int> candidates;
  for (int i = 1; i <= chunks; ++i) {
    for (int n = 0; n < layer; ++n) {
      if (auto u = lower.link(i, n)) {
        fixed[*u][static_cast<std::size_t>(i)] += video.layer_size(n);
        fixed_total[*u] += video.layer_size(n);
      }
    }
    if (layer == 0 || lower.fetched(i, layer - 1)) candidates.push_back(i);
  }
  for (std::size_t u = 0; u < users; ++u) {
    for (int i = 1; i <= chunks; ++i) fixed[u][static_cast<std::size_t>(i)] += fixed[u][static_cast<std::size_t>(i - 1)];
  }

  detail::Search search(kOracleNodeBudget);
  const double size = video.layer_size(layer);
  std::vector<double> added(users, 0.0);  // layer-n work placed so far, per user
  int best = static_cast<int>(candidates.size());

  // Every chunk's prefix constraint involves the fixed work of all chunks
  // up to it, including non-candidates, so checks run at each candidate.
  auto fits = [&](std::size_t u, int i) {
    const double need = fixed[u][static_cast<std::size_t>(i)] + added[u];
    return need <= detail::supply_at(supply[u], video.deadline(i)) + 1e-9 &&
           detail::within(instance.users[u].cap, fixed_total[u] + added[u]);
  };

  std::function<void(std::size_t, int)> visit = [&](std::size_t k, int skips) {
    search.tick();
    if (skips >= best) return;
    if (k == candidates.size()) {
      best = skips;
      return;
    }
    const int i = candidates[k];
    for (std::size_t u = 0; u < users; ++u) {
      if (instance.users[u].max_layer < layer) continue;
      added[u] += size;
      bool ok = fits(u, i);
      // Adding work to u can break the prefix constraint of later fixed
      // chunks of u, which are checked when those chunks come up; also
      // check the remaining fixed deadlines now so a dead branch stops early.
      for (int later = i + 1; ok && later <= chunks; ++later) {
        ok = fixed[u][static_cast<std::size_t>(later)] + added[u] <=
             detail::supply_at(supply[u], video.deadline(later)) + 1e-9;
      }
      if (ok) visit(k + 1, skips);
      added[u] -= size;
    }
    visit(k + 1, skips + 1);
  };
  visit(0, 0);
  return best;
}

struct PenaltyParams {
  double gamma = 0.5;
  double penalty = 2.0;  // D
  int m = 0;
  double delta = 0.0;    // smallest positive sum of c_n * Y_n over n <= m with |c_n| <= C
};

/// Smallest positive value of sum_{n<=m} c_n Y_n with integer c_n in [-C, C].
inline double penalty_delta(const VideoSpec& video, int m) {
  if (m < 0 || m > video.top_layer()) throw Error("penalty layer outside the video");
  std::set<double> sums{0.0};
  for (int n = 0; n <= m; ++n) {
    std::set<double> next;
    for (double s : sums) {
      for (int c = -video.chunk_count; c <= video.chunk_count; ++c) next.insert(s + c * video.layer_size(n));
    }
    sums = std::move(next);
  }
  double best = std::numeric_limits<double>::infinity();
  for (double s : sums) {
    if (s > 1e-9) best = std::min(best, s);
  }
  return best;
}

inline bool penalty_gamma_holds(const VideoSpec& video, const PenaltyParams& p) {
  const int top = video.top_layer();
  const int c = video.chunk_count;
  for (int a = 0; a <= p.m; ++a) {
    double lhs = 0.0;
    for (int j = 1; j <= top - a; ++j) lhs += c * std::pow(p.gamma, j) * video.layer_size(a + j);
    lhs += p.penalty * std::pow(p.gamma, p.m + 1 - a) * video.layer_size(a);
    if (!(lhs < video.layer_size(a))) return false;
  }
  return true;
}

inline bool penalty_delta_holds(const VideoSpec& video, const PenaltyParams& p) {
  double rhs = 0.0;
  for (int n = p.m + 1; n <= video.top_layer(); ++n) {
    rhs += video.chunk_count * std::pow(p.gamma, n - p.m - 1) * video.layer_size(n);
  }
  return p.penalty * p.delta > rhs;
}

/// D is at least 2 and large enough that the smallest possible saving on
/// the costly link outweighs every layer above m; gamma then halves from
/// 1/(2D) until lower layers stay worth their cost on that link.
inline PenaltyParams make_penalty_params(const VideoSpec& video, int m) {
  validate(video);
  PenaltyParams p;
  p.m = m;
  p.delta = penalty_delta(video, m);
  double above = 0.0;
  for (int n = m + 1; n <= video.top_layer(); ++n) above += video.layer_size(n);
  p.penalty = std::max(2.0, 2.0 * video.chunk_count * above / p.delta);
  p.gamma = 1.0 / (2.0 * p.penalty);
  for (int round = 0; round < 200 && !penalty_gamma_holds(video, p); ++round) p.gamma /= 2.0;
  if (!penalty_gamma_holds(video, p) || !penalty_delta_holds(video, p) || !(p.gamma > 0.0)) {
    throw Error("no penalty parameters satisfy both dominance conditions for this video");
  }
  return p;
}

struct PenalizedResult {
  double objective = 0.0;
  FetchPlan plan;
  double costly_megabits = 0.0;  // carried by the less-preferred link
  std::size_t costly_user = 0;
};

/// Two users, the one in the higher-numbered set is the costly link. The
/// costly link may carry any layer here; the penalty alone keeps it to
/// layers <= m, and that is checked on the result.
inline PenalizedResult oracle_pref_penalized(const SmallInstance& instance, const PenaltyParams& params) {
  check_small(instance);
  if (instance.users.size() != 2 || instance.users[0].set == instance.users[1].set) {
    throw Error("penalized search needs exactly two users in different sets");
  }
  if (!penalty_gamma_holds(instance.video, params) || !penalty_delta_holds(instance.video, params)) {
    throw Error("penalty parameters violate the dominance conditions");
  }
  const std::size_t costly = instance.users[0].set > instance.users[1].set ? 0 : 1;
  const auto& video = instance.video;
  detail::PlanSearch search(instance, [&](int n, std::size_t u) -> std::optional<double> {
    double w = std::pow(params.gamma, n) * video.layer_size(n);
    if (u == costly) return w - params.penalty * std::pow(params.gamma, params.m + 1) * video.layer_size(n);
    if (n > instance.users[u].max_layer) return std::nullopt;
    return w;
  });
  search.run();
  PenalizedResult out;
  out.objective = search.best;
  out.plan = detail::to_plan(instance, search.best_plan);
  out.costly_user = costly;
  for (int i = 1; i <= video.chunk_count; ++i) {
    for (int n = 0; n < video.layer_count(); ++n) {
      if (out.plan.link(i, n) == costly) {
        if (n > params.m) throw std::logic_error("penalized optimum uses the costly link above layer m");
        out.costly_megabits += video.layer_size(n);
      }
    }
  }
  return out;
}

}  // namespace groupcast
