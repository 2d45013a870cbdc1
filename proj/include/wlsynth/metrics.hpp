#pragma once

#include "wlsynth/error.hpp"
#include "wlsynth/trace.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace wlsynth {

namespace detail {
template <typename DA, typename DB>
void check_series(const Eigen::MatrixBase<DA>& target, const Eigen::MatrixBase<DB>& achieved) {
  if (target.size() != achieved.size())
    throw Error(ErrorKind::Validation, "series lengths differ");
  if (target.size() == 0) throw Error(ErrorKind::Validation, "series must not be empty");
}
}  // namespace detail

/// Mean absolute error, (1/n) sum |F - F~|.
template <typename DA, typename DB>
typename DA::Scalar mae(const Eigen::MatrixBase<DA>& target, const Eigen::MatrixBase<DB>& achieved) {
  detail::check_series(target, achieved);
  return (target.derived().array() - achieved.derived().array()).abs().mean();
}

/// Geometric mean absolute percentage error:
/// (prod (|F - F~| / max(|F|, eps) + 1))^(1/n) - 1, accumulated in log space.
template <typename DA, typename DB>
typename DA::Scalar gmape(const Eigen::MatrixBase<DA>& target, const Eigen::MatrixBase<DB>& achieved,
                          typename DA::Scalar eps = typename DA::Scalar(1e-9)) {
  using Scalar = typename DA::Scalar;
  detail::check_series(target, achieved);
  const auto t = target.derived().array();
  const auto a = achieved.derived().array();
  const Scalar mean_log = ((t - a).abs() / t.abs().max(eps)).log1p().mean();
  return std::expm1(mean_log);
}

/// Geometric mean q-error: (prod max(F/F~, F~/F))^(1/n), both values floored at eps.
template <typename DA, typename DB>
typename DA::Scalar gmqe(const Eigen::MatrixBase<DA>& target, const Eigen::MatrixBase<DB>& achieved,
                         typename DA::Scalar eps = typename DA::Scalar(1e-9)) {
  using Scalar = typename DA::Scalar;
  detail::check_series(target, achieved);
  const auto t = target.derived().array().max(eps).log();
  const auto a = achieved.derived().array().max(eps).log();
  const Scalar mean_log = (t - a).abs().mean();
  return std::exp(mean_log);
}

struct MetricTriple {
  double mae = 0.0;
  double gmape = 0.0;
  double gmqe = 1.0;
  std::size_t n = 0;
};

struct FidelityRow {
  std::string level;  ///< "window", "interval" or "query"
  std::string dimension;
  MetricTriple values;
};

struct FidelityReport {
  std::vector<FidelityRow> rows;

  const FidelityRow* find(std::string_view level, std::string_view dimension) const;
};

struct ReportConfig {
  double eps = 1e-9;
};

/// Window-level MAE/GMAPE/GMQE for every dimension and interval-level for
/// every metric, comparing `targets` against `achieved` on the same grid.
FidelityReport compare_targets(const Targets& targets, const Targets& achieved, const ReportConfig& config = {});

/// Rebuilds targets from `replayed` on the grid of `targets`, then compares.
FidelityReport report(const Targets& targets, const Trace& replayed, const ReportConfig& config = {});

/// Query-level metrics over paired per-query features.
FidelityReport query_level_report(const FeatureSchema& schema, const std::vector<PerformanceFeature>& targets,
                                  const std::vector<PerformanceFeature>& achieved, const ReportConfig& config = {});

/// report.csv: `level,dimension,metric,value,n`.
std::string export_report_csv(const FidelityReport& report);
/// plot.csv: `ts,dimension,target,replayed` at interval resolution for every metric.
std::string export_plot_csv(const Targets& targets, const Targets& replayed);

}  // namespace wlsynth
