#pragma once

// Experiment driver: load a video and roster, run one algorithm per trace
// profile, and write per-run rows plus aggregates.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "baselines.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "offline.hpp"
#include "online.hpp"
#include "oracle.hpp"
#include "trace_io.hpp"

namespace groupcast {

enum class Algorithm { OfflineNoPref, OfflinePref, OfflineNoSkip, Online, BB, PB, Oracle };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::OfflineNoPref: return "offline-nopref";
    case Algorithm::OfflinePref: return "offline-pref";
    case Algorithm::OfflineNoSkip: return "offline-noskip";
    case Algorithm::Online: return "online";
    case Algorithm::BB: return "bb";
    case Algorithm::PB: return "pb";
    case Algorithm::Oracle: return "oracle";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::OfflineNoPref, Algorithm::OfflinePref, Algorithm::OfflineNoSkip, Algorithm::Online,
                 Algorithm::BB, Algorithm::PB, Algorithm::Oracle}) {
    if (name == to_string(a)) return a;
  }
  throw Error("unknown algorithm '" + name + "'");
}

inline TraceUnit parse_unit(const std::string& name) {
  if (name == "mbps") return TraceUnit::Mbps;
  if (name == "bps" || name == "bytes_per_sec") return TraceUnit::BytesPerSecond;
  throw Error("unknown trace unit '" + name + "'");
}

struct Instance {
  VideoSpec video;
  std::vector<UserLink> users;
};

/// Reads {chunks, chunk_seconds, startup_seconds, layer_sizes_mb, users:[{id,
/// set, max_layer, cap_mb, trace}]}. Trace paths are relative to the
/// config file. A user without a trace gets an empty one, to be filled
/// from a profile suite.
inline Instance load_instance(const std::string& path, TraceUnit unit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  const auto base = std::filesystem::path(path).parent_path();
  Instance inst;
  try {
    inst.video.chunk_count = doc.at("chunks").get<int>();
    inst.video.chunk_seconds = doc.value("chunk_seconds", 1);
    inst.video.startup_seconds = doc.value("startup_seconds", 0);
    inst.video.layer_sizes = doc.at("layer_sizes_mb").get<std::vector<double>>();
    for (const auto& u : doc.at("users")) {
      UserLink link;
      link.id = u.at("id").get<int>();
      link.set = u.value("set", 1);
      link.max_layer = u.value("max_layer", static_cast<int>(inst.video.layer_sizes.size()) - 1);
      if (u.contains("cap_mb") && !u.at("cap_mb").is_null()) {
        link.cap = ContributionCap::megabits(u.at("cap_mb").get<double>());
      }
      if (u.contains("trace") && !u.at("trace").is_null()) {
        link.trace = parse_trace_file((base / u.at("trace").get<std::string>()).string(), unit);
      }
      inst.users.push_back(std::move(link));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  validate(inst.video);
  validate(std::span<const UserLink>(inst.users), inst.video);
  return inst;
}

struct ExperimentOptions {
  Algorithm algo = Algorithm::OfflineNoPref;
  OnlineConfig online;
  PlaybackMode mode = PlaybackMode::Skip;  // online only; offline-noskip implies no-skip
  std::uint64_t seed = 0;
  int profile_seconds = 360;
};

struct RunOutcome {
  ExecutionLog log;
  PlaybackMode mode = PlaybackMode::Skip;
};

inline bool has_preference(std::span<const UserLink> users) { return set_ids(users).size() > 1; }

inline RunOutcome run_algorithm(const ExperimentOptions& opt, const VideoSpec& video, std::span<const UserLink> users,
                                OnlineTelemetry* telemetry = nullptr) {
  switch (opt.algo) {
    case Algorithm::OfflineNoPref: return {execute_plan(plan_offline_nopref(video, users), video, users), PlaybackMode::Skip};
    case Algorithm::OfflinePref: return {execute_plan(plan_offline_pref(video, users), video, users), PlaybackMode::Skip};
    case Algorithm::OfflineNoSkip:
      return {execute_plan(plan_offline_noskip(video, users), video, users), PlaybackMode::NoSkip};
    case Algorithm::Online: {
      OnlineMode mode = opt.mode == PlaybackMode::NoSkip ? OnlineMode::NoSkip
                        : has_preference(users)         ? OnlineMode::Pref
                                                        : OnlineMode::NoPref;
      return {run_online(video, users, opt.online, mode, telemetry), playback_mode(mode)};
    }
    case Algorithm::BB:
    case Algorithm::PB: {
      BaselineConfig b;
      b.kind = opt.algo == Algorithm::BB ? BaselineKind::BufferBased : BaselineKind::PredictionBased;
      b.preference = has_preference(users);
      return {run_baseline(video, users, opt.online, b, telemetry), PlaybackMode::Skip};
    }
    case Algorithm::Oracle: {
      SmallInstance small{video, std::vector<UserLink>(users.begin(), users.end())};
      auto best = oracle_optimal(small, make_weights(video, users));
      return {execute_plan(best.plan, video, users), PlaybackMode::Skip};
    }
  }
  throw Error("unhandled algorithm");
}

struct RunRow {
  std::string trace_id;
  std::string algo;
  MetricsReport metrics;
};

/// One roster per run: run r gives each user the r-th profile dealt to it.
struct Suite {
  std::vector<std::string> ids;
  std::vector<std::vector<UserLink>> rosters;
};

inline Suite single_run_suite(const Instance& inst) {
  Suite s;
  s.ids.push_back("config");
  s.rosters.push_back(inst.users);
  return s;
}

inline Suite profile_suite(const Instance& inst, const TraceSet& profiles, std::uint64_t seed) {
  auto dealt = assign_profile_indices(profiles.profiles.size(), inst.users.size(), seed);
  Suite s;
  const std::size_t runs = dealt.front().size();
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<UserLink> roster = inst.users;
    std::string id;
    for (std::size_t u = 0; u < roster.size(); ++u) {
      const auto p = dealt[u][r];
      roster[u].trace = profiles.profiles[p];
      id += (u ? "+" : "") + std::to_string(p);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%04zu:", r);
    s.ids.push_back(buf + id);
    s.rosters.push_back(std::move(roster));
  }
  return s;
}

/// Every regular file in `dir` (sorted by name) cut into profiles.
inline TraceSet load_trace_dir(const std::string& dir, TraceUnit unit, int profile_seconds) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  TraceSet all;
  all.source = dir;
  all.profile_length = profile_seconds;
  for (const auto& f : files) {
    auto part = partition_profiles(parse_trace_file(f.string(), unit), profile_seconds, f.filename().string());
    for (std::size_t k = 0; k < part.profiles.size(); ++k) {
      all.profiles.push_back(std::move(part.profiles[k]));
      all.offsets.push_back(part.offsets[k]);
    }
  }
  if (all.profiles.empty()) throw Error("no profiles of " + std::to_string(profile_seconds) + " s in " + dir);
  return all;
}

inline std::vector<RunRow> run_suite(const ExperimentOptions& opt, const VideoSpec& video, const Suite& suite,
                                     OnlineTelemetry* telemetry = nullptr) {
  std::vector<RunRow> rows;
  for (std::size_t r = 0; r < suite.rosters.size(); ++r) {
    const auto& roster = suite.rosters[r];
    auto outcome = run_algorithm(opt, video, roster, telemetry);
    rows.push_back({suite.ids[r], to_string(opt.algo), compute_metrics(outcome.log, video, roster, outcome.mode)});
  }
  return rows;
}

/// Linear-interpolation quantiles at 0%, 1%, ..., 100%.
inline std::vector<double> cdf_quantiles(std::vector<double> values) {
  std::vector<double> q(101, 0.0);
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  for (int p = 0; p <= 100; ++p) {
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    q[static_cast<std::size_t>(p)] = values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  }
  return q;
}

struct Aggregate {
  std::size_t runs = 0;
  double skip_pct = 0.0;
  double apbr = 0.0;
  double lsr = 0.0;
  double stall_s = 0.0;
  double objective = 0.0;
  std::vector<double> per_user_pct;
  std::vector<double> skip_cdf, apbr_cdf, lsr_cdf;
};

inline Aggregate aggregate(const std::vector<RunRow>& rows) {
  Aggregate a;
  a.runs = rows.size();
  if (rows.empty()) return a;
  std::vector<double> skips, rates, switches;
  a.per_user_pct.assign(rows.front().metrics.per_user_pct.size(), 0.0);
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    skips.push_back(m.skip_pct);
    rates.push_back(m.apbr);
    switches.push_back(m.lsr);
    a.skip_pct += m.skip_pct;
    a.apbr += m.apbr;
    a.lsr += m.lsr;
    a.stall_s += m.stall_s;
    a.objective += m.objective;
    for (std::size_t u = 0; u < a.per_user_pct.size() && u < m.per_user_pct.size(); ++u) a.per_user_pct[u] += m.per_user_pct[u];
  }
  const double n = static_cast<double>(rows.size());
  a.skip_pct /= n;
  a.apbr /= n;
  a.lsr /= n;
  a.stall_s /= n;
  a.objective /= n;
  for (auto& p : a.per_user_pct) p /= n;
  a.skip_cdf = cdf_quantiles(skips);
  a.apbr_cdf = cdf_quantiles(rates);
  a.lsr_cdf = cdf_quantiles(switches);
  return a;
}

// ---- report writers ---------------------------------------------------------

inline std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format_objective(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Columns: trace_id, algo, skip_pct, apbr, lsr, stall_s, objective, u1_pct..uU_pct.
inline std::string runs_csv(const std::vector<RunRow>& rows) {
  std::size_t users = 0;
  for (const auto& r : rows) users = std::max(users, r.metrics.per_user_pct.size());
  std::string out = "trace_id,algo,skip_pct,apbr,lsr,stall_s,objective";
  for (std::size_t u = 1; u <= users; ++u) out += ",u" + std::to_string(u) + "_pct";
  out += "\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += r.trace_id + "," + r.algo + "," + format_fixed(m.skip_pct) + "," + format_fixed(m.apbr) + "," +
           format_fixed(m.lsr) + "," + std::to_string(m.stall_s) + "," + format_objective(m.objective);
    for (std::size_t u = 0; u < users; ++u) {
      out += "," + format_fixed(u < m.per_user_pct.size() ? m.per_user_pct[u] : 0.0);
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"skip_pct", m.skip_pct},
          {"apbr", m.apbr},
          {"lsr", m.lsr},
          {"stall_s", m.stall_s},
          {"objective", m.objective},
          {"per_user_megabits", m.per_user_megabits},
          {"per_user_pct", m.per_user_pct},
          {"layer_histogram", m.layer_histogram}};
}

inline nlohmann::json to_json(const Aggregate& a) {
  return {{"runs", a.runs},
          {"mean", {{"skip_pct", a.skip_pct},
                    {"apbr", a.apbr},
                    {"lsr", a.lsr},
                    {"stall_s", a.stall_s},
                    {"objective", a.objective},
                    {"per_user_pct", a.per_user_pct}}},
          {"cdf", {{"skip_pct", a.skip_cdf}, {"apbr", a.apbr_cdf}, {"lsr", a.lsr_cdf}}}};
}

inline nlohmann::json report_json(const std::vector<RunRow>& rows, const ExperimentOptions& opt) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rows) runs.push_back({{"trace_id", r.trace_id}, {"algo", r.algo}, {"metrics", to_json(r.metrics)}});
  return {{"algo", to_string(opt.algo)},
          {"seed", opt.seed},
          {"online", {{"window", opt.online.window},
                      {"alpha", opt.online.alpha},
                      {"delta", opt.online.delta},
                      {"beta", opt.online.beta}}},
          {"runs", runs},
          {"aggregate", to_json(aggregate(rows))}};
}

/// {"decisions": [{chunk, layer, user|null}]}, users by id, chunk-major.
inline nlohmann::json plan_to_json(const FetchPlan& plan, std::span<const UserLink> users) {
  nlohmann::json decisions = nlohmann::json::array();
  for (int i = 1; i <= plan.chunk_count(); ++i) {
    for (int n = 0; n < plan.layer_count(); ++n) {
      const auto u = plan.link(i, n);
      decisions.push_back({{"chunk", i}, {"layer", n}, {"user", u ? nlohmann::json(users[*u].id) : nlohmann::json()}});
    }
  }
  return {{"decisions", decisions}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---- sweeps -------------------------------------------------------------------

enum class SweepParam { Window, Alpha, Users, ChunkSeconds };

struct SweepSpec {
  SweepParam param = SweepParam::Window;
  std::vector<int> values;
};

inline SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error("sweep must look like param=v1,v2,...");
  const std::string name = text.substr(0, eq);
  SweepSpec s;
  if (name == "window") s.param = SweepParam::Window;
  else if (name == "alpha") s.param = SweepParam::Alpha;
  else if (name == "users") s.param = SweepParam::Users;
  else if (name == "chunk_seconds") s.param = SweepParam::ChunkSeconds;
  else throw Error("cannot sweep '" + name + "'");
  std::stringstream list(text.substr(eq + 1));
  std::string item;
  while (std::getline(list, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw Error("");
      s.values.push_back(v);
    } catch (const std::exception&) {
      throw Error("sweep value '" + item + "' is not a positive integer");
    }
  }
  if (s.values.empty()) throw Error("sweep needs at least one value");
  return s;
}

/// Same playback length, chunks of `seconds` each; layer sizes keep their
/// per-second rates.
inline VideoSpec with_chunk_seconds(const VideoSpec& video, int seconds) {
  const int total = video.chunk_count * video.chunk_seconds;
  if (total % seconds != 0) {
    throw Error("video length " + std::to_string(total) + " s is not a multiple of " + std::to_string(seconds) + " s");
  }
  VideoSpec v = video;
  v.chunk_count = total / seconds;
  v.chunk_seconds = seconds;
  for (auto& y : v.layer_sizes) y = y / video.chunk_seconds * seconds;
  return v;
}

struct SweepPoint {
  int value = 0;
  Aggregate aggregate;
  std::vector<RunRow> rows;
};

inline std::vector<SweepPoint> run_sweep(const ExperimentOptions& base, const VideoSpec& video, const Suite& suite,
                                         const SweepSpec& spec) {
  std::vector<SweepPoint> points;
  for (int value : spec.values) {
    ExperimentOptions opt = base;
    VideoSpec v = video;
    Suite s = suite;
    switch (spec.param) {
      case SweepParam::Window: opt.online.window = value; break;
      case SweepParam::Alpha: opt.online.alpha = value; break;
      case SweepParam::ChunkSeconds:
        // The window keeps its length in seconds, as a fixed playback buffer would.
        v = with_chunk_seconds(video, value);
        opt.online.window = std::max(1, base.online.window * video.chunk_seconds / value);
        break;
      case SweepParam::Users:
        for (auto& roster : s.rosters) {
          if (static_cast<std::size_t>(value) > roster.size()) {
            throw Error("users sweep value exceeds the roster size");
          }
          roster.resize(static_cast<std::size_t>(value));
        }
        break;
    }
    auto rows = run_suite(opt, v, s);
    for (auto& r : rows) r.trace_id += "@" + std::to_string(value);
    points.push_back({value, aggregate(rows), std::move(rows)});
  }
  return points;
}

inline std::string sweep_csv(const std::string& param, const std::vector<SweepPoint>& points) {
  std::string out = "param,value,runs,skip_pct,apbr,lsr,stall_s,objective\n";
  for (const auto& p : points) {
    const auto& a = p.aggregate;
    out += param + "," + std::to_string(p.value) + "," + std::to_string(a.runs) + "," + format_fixed(a.skip_pct) + "," +
           format_fixed(a.apbr) + "," + format_fixed(a.lsr) + "," + format_fixed(a.stall_s) + "," +
           format_objective(a.objective) + "\n";
  }
  return out;
}

// ---- synthetic suites ---------------------------------------------------------

/// `count` profiles of `seconds` each, means spread over 0.7..2.7 Mbps.
inline TraceSet synthetic_profiles(std::uint64_t seed, std::size_t count, int seconds) {
  TraceSet set;
  set.source = "synthetic";
  set.profile_length = seconds;
  SplitMix64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const double mean = 0.7 + 2.0 * rng.uniform();
    set.profiles.push_back(synthetic_trace(rng(), seconds, mean));
    set.offsets.push_back(1);
  }
  return set;
}

}  // namespace groupcast
