#pragma once

#include "wlsynth/catalog.hpp"
#include "wlsynth/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wlsynth {

/// One unit of work for the processor-sharing engine.
struct Job {
  double start_ms = 0.0;
  double work_ms = 0.0;  ///< profiled duration when running alone
  Eigen::VectorXd mass;  ///< metric mass deposited over the job's progress
};

struct SimulationResult {
  std::vector<double> completion_ms;  ///< per job, input order
  /// Metric mass per grid interval: rows = metrics, cols = global intervals.
  Eigen::MatrixXd interval_mass;
  /// Mass deposited outside the grid.
  Eigen::VectorXd overflow_mass;
  /// Integral of min(P, cores) over time.
  double busy_capacity_ms = 0.0;
};

/// Fair-share processor sharing: with P jobs in the system each progresses
/// at rate min(1, cores / P). A job deposits its mass uniformly per unit of
/// its own progress, so the deposit rate follows its slowdown.
SimulationResult simulate(const std::vector<Job>& jobs, int cores, const TimeGrid& grid, Eigen::Index num_metrics);

struct ScheduleEntry {
  std::size_t window_index = 0;
  std::string component_id;
  std::int64_t instance_index = 0;
  std::int64_t start_ts = 0;
};

/// Start timestamps for every selected component instance.
struct Schedule {
  std::vector<ScheduleEntry> entries;
};

/// Checks that every entry names a catalog component and starts inside its window.
void validate_schedule(const Schedule& schedule, const Catalog& catalog, const TimeGrid& grid);

std::vector<Job> jobs_for(const Schedule& schedule, const Catalog& catalog);

/// Processor-sharing estimate of per-interval metrics for a schedule.
std::vector<IntervalTarget> estimate_interval_features(const Schedule& schedule, const Catalog& catalog,
                                                       const TimeGrid& grid, int cores);

/// Replayed trace: one record per schedule entry, arrival = start, duration
/// = simulated completion - start (rounded to the millisecond), feature = the
/// component's profiled feature.
struct ReplayedTrace {
  Trace trace;
  std::vector<double> completion_ms;
};

ReplayedTrace replay(const Schedule& schedule, const Catalog& catalog, int cores, OperatorMode mode);

std::string export_schedule_csv(const Schedule& schedule);
void write_schedule(const std::filesystem::path& path, const Schedule& schedule);
Schedule read_schedule(const std::filesystem::path& path);

}  // namespace wlsynth
