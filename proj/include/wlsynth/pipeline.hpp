#pragma once

#include "wlsynth/augmenter.hpp"
#include "wlsynth/config.hpp"
#include "wlsynth/metrics.hpp"
#include "wlsynth/scheduler.hpp"
#include "wlsynth/selector.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace wlsynth {

/// Everything a pipeline run needs, resolved from a flat config file plus
/// command-line overrides.
struct PipelineOptions {
  std::filesystem::path trace_path;
  std::filesystem::path catalog_path;
  std::filesystem::path output_dir = "out";
  FeatureSchema schema;
  OperatorMode mode = OperatorMode::Counts;
  std::int64_t window_ms = 300'000;
  std::int64_t interval_ms = 30'000;
  std::optional<std::int64_t> origin_ts;
  std::optional<std::size_t> num_windows;
  int cores = 4;
  std::uint64_t seed = 42;
  SelectionConstraints selection;
  AnnealConfig anneal;
  bool skip_ta = false;
  bool skip_augment = false;
  AugmentConfig augment;
  SimulatedExecutor::Options executor;
  std::optional<QueryLevelMode> query_level;
  std::int64_t query_level_max_total = 5;
  /// Raw config, for the provider factory.
  Config config;
};

/// Reads every known key; unknown keys are ignored.
PipelineOptions options_from_config(const Config& config);

/// A failure inside a named stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Individual stages. Each reads its inputs from the artifacts of earlier
// stages under `output_dir` and writes its own.
void stage_ingest(const PipelineOptions& o);        ///< trace -> replay-independent copy in targets/trace.csv
void stage_targets(const PipelineOptions& o);       ///< targets/windows.csv, targets/intervals.csv
void stage_select(const PipelineOptions& o);        ///< plans/plan.csv, plans/summary.csv
void stage_augment(const PipelineOptions& o);       ///< augment/catalog.csv, augment/attempts.jsonl; re-solves plans
void stage_schedule(const PipelineOptions& o);      ///< schedule/schedule.csv, schedule/anneal.csv
void stage_replay(const PipelineOptions& o);        ///< replay/trace.csv
void stage_evaluate(const PipelineOptions& o);      ///< report/report.csv, report/plot.csv
void stage_query_level(const PipelineOptions& o);   ///< plans/query_plan.csv, report/query_report.csv

/// Base catalog plus augmented components from a previous augment stage.
Catalog effective_catalog(const PipelineOptions& o);

/// ingest -> targets -> select -> [augment] -> schedule -> replay -> evaluate,
/// or the query-level path when `query_level` is set. Errors are StageErrors.
void run_pipeline(const PipelineOptions& o);

}  // namespace wlsynth
