#include "wlsynth/log.hpp"
#include "wlsynth/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

namespace {

struct Flags {
  std::string config;
  std::string trace, catalog, out;
  std::optional<std::int64_t> seed, window_ms, interval_ms, cores, y, z, jobs;
  bool skip_ta = false, skip_augment = false, verbose = false;
  std::string query_level;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("-c,--config", f.config, "Configuration file");
  app->add_option("--trace", f.trace, "Input trace CSV");
  app->add_option("--catalog", f.catalog, "Component catalog CSV");
  app->add_option("-o,--out", f.out, "Output directory");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--window-ms", f.window_ms, "Window length in ms");
  app->add_option("--interval-ms", f.interval_ms, "Interval length in ms");
  app->add_option("--cores", f.cores, "Simulated cores");
  app->add_option("--y", f.y, "Maximum repetitions per component");
  app->add_option("--z", f.z, "Maximum instances per window");
  app->add_option("--jobs", f.jobs, "Parallel windows");
  app->add_flag("--skip-ta", f.skip_ta, "Random timestamps instead of annealing");
  app->add_flag("--skip-augment", f.skip_augment, "Do not augment the catalog");
  app->add_option("--query-level", f.query_level, "Query-level matching mode")
      ->check(CLI::IsMember({"one_to_one", "one_to_many"}));
  app->add_flag("-v,--verbose", f.verbose, "Log progress");
}

wlsynth::PipelineOptions resolve(const Flags& f) {
  namespace fs = std::filesystem;
  wlsynth::Config c = f.config.empty() ? wlsynth::Config{} : wlsynth::Config::load(f.config);
  auto path = [&](const char* key, const std::string& v) {
    if (!v.empty()) c.set(key, fs::absolute(v).string());
  };
  auto num = [&](const char* key, const std::optional<std::int64_t>& v) {
    if (v) c.set(key, std::to_string(*v));
  };
  path("trace", f.trace);
  path("catalog", f.catalog);
  path("output_dir", f.out);
  num("seed", f.seed);
  num("window_ms", f.window_ms);
  num("interval_ms", f.interval_ms);
  num("cores", f.cores);
  num("select.y", f.y);
  num("select.z", f.z);
  num("jobs", f.jobs);
  if (f.skip_ta) c.set("schedule.skip_ta", "true");
  if (f.skip_augment) c.set("augment.skip", "true");
  if (!f.query_level.empty()) c.set("query_level", f.query_level);
  return wlsynth::options_from_config(c);
}

void fail(const std::string& stage, const char* kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"stage", stage}, {"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workload synthesizer: fit benchmark components to a query trace and replay them."};
  app.require_subcommand(1);
  Flags flags;

  using Stage = std::function<void(const wlsynth::PipelineOptions&)>;
  const std::vector<std::tuple<const char*, const char*, Stage>> commands = {
      {"ingest", "Validate a trace and copy it into the output directory", wlsynth::stage_ingest},
      {"targets", "Aggregate the trace into window and interval targets", wlsynth::stage_targets},
      {"select", "Solve the per-window selection, or match single queries with --query-level", wlsynth::stage_select},
      {"augment", "Generate components for badly fitted windows and re-solve", wlsynth::stage_augment},
      {"schedule", "Assign start timestamps to the selected instances", wlsynth::stage_schedule},
      {"replay", "Simulate the schedule and write the replayed trace", wlsynth::stage_replay},
      {"evaluate", "Compare replayed and target features", wlsynth::stage_evaluate},
      {"pipeline", "Run every stage", wlsynth::run_pipeline},
  };
  std::vector<std::pair<CLI::App*, Stage>> subs;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(sub, flags);
    subs.emplace_back(sub, fn);
  }
  CLI11_PARSE(app, argc, argv);

  wlsynth::set_log_level(flags.verbose ? wlsynth::LogLevel::Info : wlsynth::LogLevel::Warning);
  try {
    const auto options = resolve(flags);
    for (const auto& [sub, fn] : subs) {
      if (!sub->parsed()) continue;
      if (sub->get_name() == "select" && options.query_level) wlsynth::stage_query_level(options);
      else fn(options);
    }
  } catch (const wlsynth::StageError& e) {
    fail(e.stage(), wlsynth::to_string(e.kind()), e.what());
    return 2;
  } catch (const wlsynth::Error& e) {
    fail("config", wlsynth::to_string(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    fail("unknown", "io", e.what());
    return 2;
  }
  return 0;
}
