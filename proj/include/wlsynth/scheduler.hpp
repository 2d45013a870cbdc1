#pragma once

#include "wlsynth/selector.hpp"
#include "wlsynth/simulator.hpp"

#include <cstdint>
#include <vector>

namespace wlsynth {

struct AnnealConfig {
  /// Stop after this many consecutive steps that do not lower the current energy.
  std::int64_t no_improve_steps = 100;
  std::int64_t step_cap = 20'000;
  /// Geometric cooling spreads V_max -> V_min over this many steps.
  std::int64_t cooling_steps = 10'000;
  bool auto_temperature = true;
  /// Used when auto_temperature is off.
  double v_max = 1.0;
  double v_min = 1e-3;
  int tuning_samples = 100;
  double accept_hot = 0.98;   ///< acceptance of the median uphill move at V_max
  double accept_cold = 1e-4;  ///< ... and at V_min
  std::int64_t granularity_ms = 1000;
  double denom_floor = 1.0;
};

/// Per-window annealing diagnostics.
struct AnnealReport {
  std::size_t window_index = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double v_max = 0.0;
  double v_min = 0.0;
  double alpha = 1.0;
  std::int64_t steps = 0;
  /// Best energy after each step.
  std::vector<double> best_energy;
  /// Energy after each accepted move.
  std::vector<double> accepted_energy;
};

/// Sum over intervals and metrics of |achieved - target| / max(target, eps),
/// with achieved from the processor-sharing simulation of `schedule`.
double energy(const Schedule& schedule, const std::vector<IntervalTarget>& interval_targets, const Catalog& catalog,
              const TimeGrid& grid, int cores, double denom_floor = 1.0);

/// Energy of precomputed interval features against targets.
double interval_energy(const Eigen::MatrixXd& achieved, const Eigen::MatrixXd& target, double denom_floor);

/// Instances of `plans` with start times left at their window start.
Schedule expand_plans(const std::vector<SelectionPlan>& plans, const TimeGrid& grid);

/// Uniformly random start per instance at `granularity_ms` resolution.
Schedule random_timestamps(const std::vector<SelectionPlan>& plans, const TimeGrid& grid,
                           std::int64_t granularity_ms, std::uint64_t seed);

/// Simulated-annealing timestamp assignment, one independent annealer per
/// window. Each window is simulated on its own with its own interval
/// targets; mass spilling past the window end counts as missing.
Schedule assign_timestamps(const std::vector<SelectionPlan>& plans, const Targets& targets, const Catalog& catalog,
                           int cores, const AnnealConfig& config, std::uint64_t seed,
                           std::vector<AnnealReport>* reports = nullptr, unsigned jobs = 1);

}  // namespace wlsynth
