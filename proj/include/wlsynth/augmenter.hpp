#pragma once

#include "wlsynth/catalog.hpp"
#include "wlsynth/provider.hpp"
#include "wlsynth/selector.hpp"
#include "wlsynth/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wlsynth {

struct GenerationTarget {
  std::string target_id;
  PerformanceFeature feature;
  /// Mean duration of the clustered queries.
  double duration_ms = 0.0;
  std::vector<std::size_t> source_windows;
  std::size_t weight = 0;
};

/// Clusters `queries` (k-means on z-normalized stacked features) and returns
/// one target per non-empty cluster, centroid in native units.
/// `windows[i]` is the window that contributed query i (may be empty).
std::vector<GenerationTarget> find_generation_targets(const std::vector<QueryRecord>& queries,
                                                      const FeatureSchema& schema,
                                                      const std::vector<std::size_t>& windows, std::size_t k,
                                                      std::uint64_t seed);

struct Example {
  std::size_t index = 0;  ///< catalog position
  std::string component_id;
  double distance = 0.0;
};

struct ExampleSet {
  std::vector<Example> positives;  ///< ascending distance
  std::vector<Example> negatives;  ///< descending distance
};

/// N nearest and N farthest components on features z-normalized with the
/// catalog's statistics. The two sides never overlap.
ExampleSet retrieve_examples(const PerformanceFeature& target, const Catalog& catalog, std::size_t n);

/// Database used by the most positives; ties go to the smallest key.
DatabaseDescriptor choose_database(const ExampleSet& examples, const Catalog& catalog);

enum class Scenario { LowCpuLowSb, HighCpuLowSb, LowCpuHighSb, BothLowOrHigh, RatioOff };
enum class HintAction { RewriteQuery, ChangeDatabase };

struct HintScenario {
  Scenario id;
  std::string_view name;
  std::vector<std::string_view> hint_texts;
  HintAction action;
};

const HintScenario& hint_scenario(Scenario id);
std::string_view to_string(Scenario id);

struct PromptFeedback {
  PerformanceFeature profiled;
  Scenario scenario;
};

/// Deterministic generation prompt. The HINTS section appears only when
/// `hints` is non-empty.
std::string build_prompt(const GenerationTarget& target, const ExampleSet& examples, const Catalog& catalog,
                         const DatabaseDescriptor& database, const std::vector<std::string_view>& hints,
                         const std::optional<PromptFeedback>& feedback = std::nullopt);

struct GapConfig {
  double tolerance = 0.15;
  std::string cpu_metric = "cpu_time";
  std::string sb_metric = "scanned_bytes";
};

struct GapAssessment {
  /// (profiled - target) / |target| per metric.
  Eigen::VectorXd metric_deltas;
  double delta_cpu = 0.0;
  double delta_sb = 0.0;
  /// Relative error of the CPU / scanned-bytes ratio.
  double delta_ratio = 0.0;
  /// Empty when the profile is accepted.
  std::optional<Scenario> scenario;

  bool accepted() const { return !scenario.has_value(); }
};

/// Metric indices of the CPU and scanned-bytes dimensions: exact name, else
/// the first metric starting with the configured name.
std::pair<Eigen::Index, Eigen::Index> gap_dimensions(const FeatureSchema& schema, const GapConfig& config);

GapAssessment classify_gap(const FeatureSchema& schema, const PerformanceFeature& target,
                           const PerformanceFeature& profiled, const GapConfig& config = {});

/// Database to try next for a failed scenario: the nearest catalog database
/// in the needed direction, or a newly registered descriptor.
DatabaseDescriptor switch_database(const DatabaseDescriptor& current, const GapAssessment& gap,
                                   const Catalog& catalog);

enum class Verdict { Accepted, Retry, DatabaseSwitch, Failed };
std::string_view to_string(Verdict v);

struct GenerationAttempt {
  std::size_t attempt_index = 0;  ///< within the current database
  std::size_t sequence = 0;       ///< across the whole loop
  std::string target_id;
  std::string database;
  std::string prompt;
  std::string response;
  std::optional<PerformanceFeature> profiled;
  GapAssessment gap;
  Verdict verdict = Verdict::Retry;
  std::string error;
};

struct AugmentConfig {
  std::size_t clusters = 3;          ///< k
  std::size_t examples = 3;          ///< N per side
  std::size_t max_attempts = 5;
  std::size_t max_db_switches = 2;
  double bad_window_threshold = 0.2;  ///< theta
  int profile_repetitions = 3;
  GapConfig gap;
};

struct GenerationResult {
  std::optional<WorkloadComponent> component;
  std::vector<GenerationAttempt> attempts;
  std::size_t database_switches = 0;
  std::string failure;
};

/// Prompt, generate, profile, classify; retries with hints and switches
/// database after repeated failures in a database scenario. Provider
/// errors propagate with the attempt index; executor errors fail the attempt.
GenerationResult generate_component(const GenerationTarget& target, const Catalog& catalog, Provider& provider,
                                    Executor& executor, const AugmentConfig& config);

struct AugmentResult {
  Catalog catalog;  ///< input plus accepted components
  std::vector<std::size_t> bad_windows;
  std::vector<GenerationTarget> targets;
  std::vector<GenerationResult> results;
  std::vector<std::string> added;  ///< ids of the accepted components
};

/// Generates components for the windows whose plan objective exceeds the
/// threshold and appends them (origin = augmented).
AugmentResult augment_catalog(const Trace& trace, const Targets& targets, const std::vector<SelectionPlan>& plans,
                              const Catalog& catalog, Provider& provider, Executor& executor,
                              const AugmentConfig& config, std::uint64_t seed);

/// One JSON object per attempt: target, sequence, attempt, database,
/// prompt hash, scenario, deltas, verdict.
std::string export_attempts_jsonl(const std::vector<GenerationResult>& results, const FeatureSchema& schema);

}  // namespace wlsynth
