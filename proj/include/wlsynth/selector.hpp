#pragma once

#include "wlsynth/catalog.hpp"
#include "wlsynth/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wlsynth {

struct SolverBudget {
  std::int64_t node_limit = 200'000;
  double time_limit_s = 30.0;
};

/// One window's component-selection problem: choose integer repetition
/// counts x_j minimizing the summed relative error of the achieved feature
/// against the target, subject to x_j <= y, sum x_j <= z and
/// sum x_j * T'_j <= l.
struct SelectionProblem {
  std::size_t window_index = 0;
  PerformanceFeature target;
  const Catalog* catalog = nullptr;
  std::int64_t max_repetitions = 10;  ///< y
  std::int64_t max_total = 1;         ///< z
  double duration_budget_ms = 0.0;    ///< l; +inf disables the constraint
  /// Denominator floor per stacked dimension (metrics then operators).
  Eigen::VectorXd denom_floor;
  /// Optional per-dimension weights; empty means all ones.
  Eigen::VectorXd weights;
  OperatorMode mode = OperatorMode::Counts;
  /// Time-share mode only: total query time behind the target shares.
  double target_busy_ms = 0.0;
  SolverBudget budget;
  /// Optional feasible count vectors (catalog order) offered as starting incumbents.
  std::vector<std::vector<std::int64_t>> hints;

  void validate() const;
};

struct SelectionPlan {
  std::size_t window_index = 0;
  /// Nonzero counts in catalog order.
  std::vector<std::pair<std::string, std::int64_t>> counts;
  PerformanceFeature achieved;
  double objective = 0.0;
  /// Set when the node or time budget ran out before optimality was proven.
  bool approximate = false;
  std::int64_t nodes = 0;

  std::int64_t count_of(std::string_view id) const;
  std::int64_t total_count() const;
};

/// Linearized error model of a problem: error_d = |G_d x - g_d| / den_d,
/// objective = sum_d w_d error_d.
struct ErrorModel {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::VectorXd den;
  Eigen::VectorXd w;

  static ErrorModel build(const SelectionProblem& problem);
  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd errors(const Eigen::VectorXd& x) const;
};

/// Feature produced by repeating each component `counts[j]` times: sums in
/// counts mode; operator shares become a duration-weighted mean in time-share mode.
PerformanceFeature achieved_feature(const Catalog& catalog, const Eigen::VectorXd& counts, OperatorMode mode);

/// Branch-and-bound over the LP relaxation with one slack pair per
/// dimension. Optimal unless `approximate` is set on the result.
SelectionPlan solve_window(const SelectionProblem& problem);

struct SelectionConstraints {
  std::int64_t max_repetitions = 10;
  /// Fixed z; when unset, z = ceil(total_count_factor * query_count), at least 1.
  std::optional<std::int64_t> max_total;
  double total_count_factor = 2.0;
  std::int64_t max_concurrency = 4;
  double denom_floor = 1.0;
  Eigen::VectorXd weights;
  SolverBudget budget;
  unsigned jobs = 1;
};

SelectionProblem make_problem(const WindowTarget& target, const Catalog& catalog,
                              const SelectionConstraints& constraints, OperatorMode mode);

/// Solves every window independently, `constraints.jobs` at a time.
/// Plans in `warm_start` whose components all exist in `catalog` seed the
/// search of their window, so a re-solve never returns a worse plan.
std::vector<SelectionPlan> solve_all_windows(const Targets& targets, const Catalog& catalog,
                                             const SelectionConstraints& constraints,
                                             const std::vector<SelectionPlan>* warm_start = nullptr);

enum class QueryLevelMode { OneToOne, OneToMany };
QueryLevelMode parse_query_level_mode(std::string_view text);

struct QueryMatch {
  SelectionPlan plan;
  /// Euclidean distance on z-normalized features (one-to-one only).
  double distance = 0.0;
};

/// Fits a single query. One-to-one picks the nearest component on
/// z-normalized features; one-to-many solves the selection problem with the
/// query as target, total count capped at `max_total` and no duration budget.
QueryMatch match_query(const PerformanceFeature& query_feature, double query_duration_ms, const Catalog& catalog,
                       QueryLevelMode mode, std::int64_t max_total, const SelectionConstraints& constraints,
                       OperatorMode op_mode = OperatorMode::Counts);

/// plans/plan.csv: `window_index,component_id,count`.
std::string export_plan_csv(const std::vector<SelectionPlan>& plans);
/// plans/summary.csv: `window_index,dimension,target,achieved,error,objective,approximate`.
std::string export_summary_csv(const std::vector<SelectionPlan>& plans, const Targets& targets,
                               const std::vector<SelectionProblem>& problems);
void write_plans(const std::filesystem::path& dir, const std::vector<SelectionPlan>& plans, const Targets& targets,
                 const Catalog& catalog, const SelectionConstraints& constraints);
/// Reads plan.csv back; achieved features and objectives are recomputed.
std::vector<SelectionPlan> read_plans(const std::filesystem::path& path, const Targets& targets,
                                      const Catalog& catalog, const SelectionConstraints& constraints);

}  // namespace wlsynth
