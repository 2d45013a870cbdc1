#pragma once

#include "wlsynth/feature.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wlsynth {

/// How per-query operator statistics combine into a window value.
enum class OperatorMode {
  Counts,      ///< operator counts per query; windows sum them
  TimeShares,  ///< per-operator share of execution time; windows take a duration-weighted mean
};

OperatorMode parse_operator_mode(std::string_view text);
std::string_view to_string(OperatorMode mode);

struct QueryRecord {
  std::string query_id;
  std::int64_t arrival_ts = 0;
  std::int64_t duration_ms = 0;
  Eigen::VectorXd metrics;
  Eigen::VectorXd operators;
};

struct Trace {
  FeatureSchema schema;
  OperatorMode mode = OperatorMode::Counts;
  std::vector<QueryRecord> records;
};

/// Reads a trace CSV: `query_id,arrival_ts,duration_ms,<metrics...>,<operators...>`.
/// Columns are located by name; the schema decides which ones are required.
Trace ingest_trace(const std::filesystem::path& path, const FeatureSchema& schema, OperatorMode mode);
Trace parse_trace(std::string_view csv_text, const FeatureSchema& schema, OperatorMode mode);

std::string export_trace_csv(const Trace& trace);
void write_trace(const std::filesystem::path& path, const Trace& trace);

/// Window/interval partition of a time span. Windows are consecutive,
/// intervals evenly split each window.
struct TimeGrid {
  std::int64_t origin_ts = 0;
  std::int64_t window_len_ms = 300'000;
  std::int64_t interval_len_ms = 30'000;
  std::size_t num_windows = 0;

  std::size_t intervals_per_window() const {
    return static_cast<std::size_t>(window_len_ms / interval_len_ms);
  }
  std::size_t num_intervals() const { return num_windows * intervals_per_window(); }
  std::int64_t end_ts() const { return origin_ts + static_cast<std::int64_t>(num_windows) * window_len_ms; }
  std::int64_t window_start(std::size_t w) const {
    return origin_ts + static_cast<std::int64_t>(w) * window_len_ms;
  }
  std::int64_t interval_start(std::size_t global_interval) const {
    return origin_ts + static_cast<std::int64_t>(global_interval) * interval_len_ms;
  }

  /// Calls `f(global_interval_index, overlap_ms)` for every interval that
  /// overlaps [t0, t1), clipped to the grid.
  template <typename F>
  void for_each_overlap(double t0, double t1, F&& f) const {
    const double lo = static_cast<double>(origin_ts);
    const double hi = static_cast<double>(end_ts());
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (!(t1 > t0)) return;
    const double len = static_cast<double>(interval_len_ms);
    auto k = static_cast<std::size_t>((t0 - lo) / len);
    const std::size_t n = num_intervals();
    for (; k < n; ++k) {
      double a = lo + static_cast<double>(k) * len;
      double b = a + len;
      if (a >= t1) break;
      double ov = std::min(b, t1) - std::max(a, t0);
      if (ov > 0.0) f(k, ov);
    }
  }

  /// Global interval containing `ts`, if inside the grid.
  std::optional<std::size_t> interval_of(std::int64_t ts) const {
    if (ts < origin_ts || ts >= end_ts()) return std::nullopt;
    return static_cast<std::size_t>((ts - origin_ts) / interval_len_ms);
  }
  std::optional<std::size_t> window_of(std::int64_t ts) const {
    if (ts < origin_ts || ts >= end_ts()) return std::nullopt;
    return static_cast<std::size_t>((ts - origin_ts) / window_len_ms);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct AggregationSpec {
  OperatorMode mode = OperatorMode::Counts;
  /// Grid origin; defaults to the earliest arrival rounded down to a window boundary.
  std::optional<std::int64_t> origin_ts;
  /// Number of windows; defaults to enough windows to contain every arrival.
  std::optional<std::size_t> num_windows;
};

struct WindowTarget {
  std::size_t window_index = 0;
  std::int64_t window_start_ts = 0;
  std::int64_t window_len_ms = 0;
  PerformanceFeature feature;
  /// Queries with apportioned mass inside the window.
  std::int64_t query_count = 0;
  /// Total duration of the queries arriving in the window (time-share weights).
  double busy_ms = 0.0;
};

struct IntervalTarget {
  std::size_t window_index = 0;
  std::size_t interval_index = 0;
  std::int64_t interval_start_ts = 0;
  Eigen::VectorXd metrics;
};

struct Targets {
  FeatureSchema schema;
  OperatorMode mode = OperatorMode::Counts;
  TimeGrid grid;
  std::vector<WindowTarget> windows;
  /// Window-major: interval (w, j) sits at w * intervals_per_window + j.
  std::vector<IntervalTarget> intervals;
  /// Metric mass of queries overhanging the grid, discarded.
  Eigen::VectorXd clipped_mass;

  const IntervalTarget& interval(std::size_t w, std::size_t j) const {
    return intervals[w * grid.intervals_per_window() + j];
  }
};

/// Spreads each query's metric mass uniformly over its execution span and
/// sums per interval; window metrics are interval sums. Operator statistics
/// are attributed to the window holding the query's arrival.
Targets build_targets(const std::vector<QueryRecord>& records, const FeatureSchema& schema,
                      std::int64_t window_len_ms, std::int64_t interval_len_ms,
                      const AggregationSpec& spec);

inline Targets build_targets(const Trace& trace, std::int64_t window_len_ms, std::int64_t interval_len_ms,
                             AggregationSpec spec = {}) {
  spec.mode = trace.mode;
  return build_targets(trace.records, trace.schema, window_len_ms, interval_len_ms, spec);
}

/// Window and interval target CSVs (targets/windows.csv, targets/intervals.csv).
std::string export_windows_csv(const Targets& targets);
std::string export_intervals_csv(const Targets& targets);
void write_targets(const std::filesystem::path& dir, const Targets& targets);
Targets read_targets(const std::filesystem::path& dir, const FeatureSchema& schema, OperatorMode mode,
                     std::int64_t interval_len_ms);

}  // namespace wlsynth
