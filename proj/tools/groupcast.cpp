// groupcast: run a scheduler over a config (and optionally a trace suite)
// and write per-run CSV plus a JSON report.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "groupcast/groupcast.hpp"

namespace fs = std::filesystem;
using namespace groupcast;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("groupcast");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GROUPCAST_LOG")) {
    auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("GROUPCAST_LOG={} not recognised, keeping warn", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

std::optional<FetchPlan> offline_plan(Algorithm algo, const VideoSpec& video, std::span<const UserLink> users) {
  switch (algo) {
    case Algorithm::OfflineNoPref: return plan_offline_nopref(video, users);
    case Algorithm::OfflinePref: return plan_offline_pref(video, users);
    case Algorithm::OfflineNoSkip: return plan_offline_noskip(video, users);
    case Algorithm::Oracle: return oracle_optimal(SmallInstance{video, {users.begin(), users.end()}}, make_weights(video, users)).plan;
    default: return std::nullopt;
  }
}

struct Args {
  std::string algo = "offline-nopref";
  std::string config;
  std::string traces;
  std::string unit = "mbps";
  std::string mode = "skip";
  std::string predictor = "harmonic";
  std::string out;
  std::string sweep;
  std::string plan_out;
  int profile_seconds = 360;
  std::uint64_t seed = 0;
  OnlineConfig online;

  std::string synth_out;
  std::size_t synth_count = 50;
  int synth_seconds = 360;
};

int run(const Args& a) {
  ExperimentOptions opt;
  opt.algo = parse_algorithm(a.algo);
  opt.online = a.online;
  opt.online.predictor = a.predictor == "perfect" ? PredictorKind::Perfect : PredictorKind::Harmonic;
  opt.mode = a.mode == "noskip" ? PlaybackMode::NoSkip : PlaybackMode::Skip;
  opt.seed = a.seed;
  opt.profile_seconds = a.profile_seconds;

  const TraceUnit unit = parse_unit(a.unit);
  Instance inst = load_instance(a.config, unit);
  spdlog::info("{} chunks of {} s, {} layers, {} users", inst.video.chunk_count, inst.video.chunk_seconds,
               inst.video.layer_count(), inst.users.size());

  Suite suite;
  if (a.traces.empty()) {
    suite = single_run_suite(inst);
  } else {
    auto profiles = load_trace_dir(a.traces, unit, a.profile_seconds);
    spdlog::info("{} profiles of {} s from {}", profiles.profiles.size(), a.profile_seconds, a.traces);
    suite = profile_suite(inst, profiles, a.seed);
    if (suite.rosters.empty()) throw Error("not enough profiles for one run per user");
  }

  if (!a.plan_out.empty()) {
    auto plan = offline_plan(opt.algo, inst.video, suite.rosters.front());
    if (!plan) throw Error("--plan-out needs an offline algorithm or oracle");
    write_text(a.plan_out, plan_to_json(*plan, suite.rosters.front()).dump(2) + "\n");
  }

  if (!a.sweep.empty()) {
    const auto spec = parse_sweep(a.sweep);
    const auto points = run_sweep(opt, inst.video, suite, spec);
    const std::string param = a.sweep.substr(0, a.sweep.find('='));
    const std::string csv = sweep_csv(param, points);
    if (a.out.empty()) {
      std::cout << csv;
    } else {
      fs::create_directories(a.out);
      write_text(fs::path(a.out) / "sweep.csv", csv);
      nlohmann::json doc = nlohmann::json::array();
      for (const auto& p : points) doc.push_back({{"param", param}, {"value", p.value}, {"aggregate", to_json(p.aggregate)}});
      write_text(fs::path(a.out) / "sweep.json", doc.dump(2) + "\n");
    }
    return 0;
  }

  const auto rows = run_suite(opt, inst.video, suite);
  const std::string csv = runs_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "runs.csv", csv);
    write_text(fs::path(a.out) / "report.json", report_json(rows, opt).dump(2) + "\n");
    spdlog::info("wrote {} runs to {}", rows.size(), a.out);
  }
  return 0;
}

int synth(const Args& a) {
  fs::create_directories(a.synth_out);
  const auto set = synthetic_profiles(a.seed, a.synth_count, a.synth_seconds);
  for (std::size_t k = 0; k < set.profiles.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu.txt", k);
    write_trace_file((fs::path(a.synth_out) / name).string(), set.profiles[k]);
  }
  spdlog::info("wrote {} traces to {}", set.profiles.size(), a.synth_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Args a;
  CLI::App app{"Cooperative multi-link SVC chunk scheduler"};
  app.require_subcommand(0, 1);

  app.add_option("--algo", a.algo, "Scheduler")
      ->check(CLI::IsMember({"offline-nopref", "offline-pref", "offline-noskip", "online", "bb", "pb", "oracle"}));
  app.add_option("--config", a.config, "Video and roster JSON")->check(CLI::ExistingFile);
  app.add_option("--traces", a.traces, "Directory of bandwidth traces, one sample per line")->check(CLI::ExistingDirectory);
  app.add_option("--unit", a.unit, "Trace sample unit")->check(CLI::IsMember({"mbps", "bps"}));
  app.add_option("--window", a.online.window, "Online window, chunks")->check(CLI::PositiveNumber);
  app.add_option("--alpha", a.online.alpha, "Seconds between re-plans")->check(CLI::PositiveNumber);
  app.add_option("--delta", a.online.delta, "Seconds a chunk must be ahead of now to be re-planned")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--beta", a.online.beta, "Downloads averaged by the throughput predictor")->check(CLI::PositiveNumber);
  app.add_option("--mode", a.mode, "Online playback mode")->check(CLI::IsMember({"skip", "noskip"}));
  app.add_option("--predictor", a.predictor, "Online bandwidth predictor")->check(CLI::IsMember({"harmonic", "perfect"}));
  app.add_option("--profile-seconds", a.profile_seconds, "Profile length cut from each trace")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Profile shuffle seed");
  app.add_option("--out", a.out, "Output directory (stdout CSV if omitted)");
  app.add_option("--sweep", a.sweep, "param=v1,v2,... for window, alpha, users or chunk_seconds");
  app.add_option("--plan-out", a.plan_out, "Write the first run's plan as JSON");

  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic trace suite");
  synth_cmd->add_option("--out", a.synth_out, "Output directory")->required();
  synth_cmd->add_option("--count", a.synth_count, "Number of traces")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seconds", a.synth_seconds, "Trace length")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", a.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return synth(a);
    if (a.config.empty()) {
      spdlog::error("--config is required");
      return 2;
    }
    return run(a);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
