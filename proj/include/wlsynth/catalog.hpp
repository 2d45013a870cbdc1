#pragma once

#include "wlsynth/feature.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wlsynth {

struct TableSummary {
  std::string name;
  std::int64_t row_count = 0;
  std::vector<std::string> columns;
};

struct DatabaseDescriptor {
  std::string benchmark_name;
  double scale_factor = 1.0;
  int skewness = 0;  ///< 0 (uniform) .. 4 (most skewed)
  std::vector<TableSummary> schema_summary;

  /// "benchmark/sf=<x>/skew=<k>", unique per distinct database.
  std::string key() const;
  void validate() const;

  friend bool operator==(const DatabaseDescriptor& a, const DatabaseDescriptor& b) {
    return a.benchmark_name == b.benchmark_name && a.scale_factor == b.scale_factor && a.skewness == b.skewness;
  }
};

/// Descriptor with schema summary filled from the built-in TPC-H / TPC-DS
/// table lists (row counts scaled by `scale_factor`); other benchmarks get
/// an empty summary.
DatabaseDescriptor describe_database(std::string benchmark, double scale_factor, int skewness);

enum class ComponentOrigin { Benchmark, Augmented };
std::string_view to_string(ComponentOrigin origin);

struct WorkloadComponent {
  std::string component_id;
  /// SQL text or an opaque descriptor understood by the executor. Defaults to the id.
  std::string query_ref;
  DatabaseDescriptor database;
  double duration_ms = 0.0;
  PerformanceFeature feature;
  ComponentOrigin origin = ComponentOrigin::Benchmark;
  /// Fastest and slowest profiled run, when profiled.
  std::optional<double> duration_min_ms;
  std::optional<double> duration_max_ms;
};

/// Components with profiled features. Ids are unique; every feature matches
/// the catalog schema.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(FeatureSchema schema) : schema_(std::move(schema)) {}

  const FeatureSchema& schema() const { return schema_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }

  const std::vector<WorkloadComponent>& components() const { return components_; }
  const WorkloadComponent& operator[](std::size_t i) const { return components_[i]; }
  WorkloadComponent& mutable_component(std::size_t i) { return components_[i]; }

  /// Appends after validating id uniqueness, dimensions and duration.
  void add(WorkloadComponent component);

  const WorkloadComponent& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  /// Stacked features, one column per component.
  Eigen::MatrixXd feature_matrix() const;
  Eigen::VectorXd durations() const;

  /// Distinct databases referenced by the components, in first-use order.
  std::vector<DatabaseDescriptor> databases() const;

 private:
  FeatureSchema schema_;
  std::vector<WorkloadComponent> components_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Catalog CSV: `component_id,benchmark,scale_factor,skewness,duration_ms,<metrics>,<operators>`.
/// Optional `origin` and `query_ref` columns are honoured when present.
Catalog load_catalog(const std::filesystem::path& path, const FeatureSchema& schema);
Catalog parse_catalog(std::string_view csv_text, const FeatureSchema& schema);

struct CatalogCsvOptions {
  bool origin_column = false;
  bool query_ref_column = false;
};
std::string export_catalog_csv(const Catalog& catalog, CatalogCsvOptions options = {});
void write_catalog(const std::filesystem::path& path, const Catalog& catalog, CatalogCsvOptions options = {});

struct ExecutionResult {
  double duration_ms = 0.0;
  PerformanceFeature feature;
};

/// Runs one query against one database. `run_index` lets an implementation
/// model run-to-run variation (cold vs. warm cache).
class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecutionResult run(const std::string& query_ref, const DatabaseDescriptor& database, int run_index) = 0;
};

struct ProfileResult {
  PerformanceFeature feature;
  double duration_ms = 0.0;
  double duration_min_ms = 0.0;
  double duration_max_ms = 0.0;
};

/// Averages `repetitions` executor runs and writes the means back into
/// `component`. Any failed run raises a profiling error carrying the run
/// index and leaves `component` untouched.
ProfileResult profile_component(WorkloadComponent& component, Executor& executor, int repetitions = 3);

/// Table-driven executor. Known query refs answer from the fixture; SQL
/// carrying a `/* wlsynth-profile name=value; ... */` annotation answers
/// with the annotated values. Metrics may be capped per unit of scale factor
/// and perturbed by deterministic run-indexed multiplicative noise.
class SimulatedExecutor : public Executor {
 public:
  struct Options {
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    /// Per-metric cap per unit scale factor; <= 0 means unbounded.
    std::vector<double> metric_cap_per_sf;
  };

  SimulatedExecutor(FeatureSchema schema, Options options);

  /// Registers the ground-truth answer for `query_ref`.
  void set(const std::string& query_ref, ExecutionResult result);
  /// Registers every component of `catalog` under its query ref.
  void load(const Catalog& catalog);

  ExecutionResult run(const std::string& query_ref, const DatabaseDescriptor& database, int run_index) override;

  /// Ground truth before caps and noise, if the query is known.
  std::optional<ExecutionResult> ground_truth(const std::string& query_ref) const;

  const FeatureSchema& schema() const { return schema_; }

 private:
  FeatureSchema schema_;
  Options options_;
  std::map<std::string, ExecutionResult, std::less<>> table_;
};

/// Parses a `wlsynth-profile` annotation; nullopt if absent.
std::optional<ExecutionResult> parse_profile_annotation(std::string_view sql, const FeatureSchema& schema);
/// Renders the annotation for a feature and duration.
std::string format_profile_annotation(const ExecutionResult& result, const FeatureSchema& schema);

}  // namespace wlsynth
