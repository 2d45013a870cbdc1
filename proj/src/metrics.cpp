#include "wlsynth/metrics.hpp"

#include "wlsynth/csv.hpp"

#include <fmt/format.h>

#include <sstream>

namespace wlsynth {

const FidelityRow* FidelityReport::find(std::string_view level, std::string_view dimension) const {
  for (const auto& r : rows)
    if (r.level == level && r.dimension == dimension) return &r;
  return nullptr;
}

namespace {

MetricTriple triple(const Eigen::VectorXd& t, const Eigen::VectorXd& a, double eps) {
  return {mae(t, a), gmape(t, a, eps), gmqe(t, a, eps), static_cast<std::size_t>(t.size())};
}

void check_grids(const Targets& a, const Targets& b) {
  if (!(a.grid == b.grid) || a.windows.size() != b.windows.size() || a.intervals.size() != b.intervals.size())
    throw Error(ErrorKind::Validation, "window grids of target and replayed features differ");
  if (!(a.schema == b.schema)) throw Error(ErrorKind::Schema, "feature schemas of target and replayed differ");
}

}  // namespace

FidelityReport compare_targets(const Targets& targets, const Targets& achieved, const ReportConfig& config) {
  check_grids(targets, achieved);
  FidelityReport out;
  const auto nw = static_cast<Eigen::Index>(targets.windows.size());
  const auto ni = static_cast<Eigen::Index>(targets.intervals.size());
  const auto& schema = targets.schema;

  for (std::size_t h = 0; h < schema.num_metrics(); ++h) {
    const auto hh = static_cast<Eigen::Index>(h);
    Eigen::VectorXd t(nw), a(nw);
    for (Eigen::Index w = 0; w < nw; ++w) {
      t(w) = targets.windows[static_cast<std::size_t>(w)].feature.metrics(hh);
      a(w) = achieved.windows[static_cast<std::size_t>(w)].feature.metrics(hh);
    }
    out.rows.push_back({"window", schema.metrics[h], triple(t, a, config.eps)});
  }
  for (std::size_t u = 0; u < schema.num_operators(); ++u) {
    const auto uu = static_cast<Eigen::Index>(u);
    Eigen::VectorXd t(nw), a(nw);
    for (Eigen::Index w = 0; w < nw; ++w) {
      t(w) = targets.windows[static_cast<std::size_t>(w)].feature.operators(uu);
      a(w) = achieved.windows[static_cast<std::size_t>(w)].feature.operators(uu);
    }
    out.rows.push_back({"window", schema.operators[u], triple(t, a, config.eps)});
  }
  for (std::size_t h = 0; h < schema.num_metrics(); ++h) {
    const auto hh = static_cast<Eigen::Index>(h);
    Eigen::VectorXd t(ni), a(ni);
    for (Eigen::Index k = 0; k < ni; ++k) {
      t(k) = targets.intervals[static_cast<std::size_t>(k)].metrics(hh);
      a(k) = achieved.intervals[static_cast<std::size_t>(k)].metrics(hh);
    }
    out.rows.push_back({"interval", schema.metrics[h], triple(t, a, config.eps)});
  }
  return out;
}

FidelityReport report(const Targets& targets, const Trace& replayed, const ReportConfig& config) {
  if (!(replayed.schema == targets.schema))
    throw Error(ErrorKind::Schema, "replayed trace schema differs from the targets");
  AggregationSpec spec;
  spec.mode = targets.mode;
  spec.origin_ts = targets.grid.origin_ts;
  spec.num_windows = targets.grid.num_windows;
  const Targets rebuilt = build_targets(replayed.records, replayed.schema, targets.grid.window_len_ms,
                                        targets.grid.interval_len_ms, spec);
  return compare_targets(targets, rebuilt, config);
}

FidelityReport query_level_report(const FeatureSchema& schema, const std::vector<PerformanceFeature>& targets,
                                  const std::vector<PerformanceFeature>& achieved, const ReportConfig& config) {
  if (targets.size() != achieved.size()) throw Error(ErrorKind::Validation, "query series lengths differ");
  FidelityReport out;
  const auto n = static_cast<Eigen::Index>(targets.size());
  const auto nm = static_cast<Eigen::Index>(schema.num_metrics());
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto dd = static_cast<Eigen::Index>(d);
    Eigen::VectorXd t(n), a(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      t(q) = targets[static_cast<std::size_t>(q)].stacked()(dd);
      a(q) = achieved[static_cast<std::size_t>(q)].stacked()(dd);
    }
    const std::string& name = dd < nm ? schema.metrics[d] : schema.operators[d - schema.num_metrics()];
    out.rows.push_back({"query", name, triple(t, a, config.eps)});
  }
  return out;
}

std::string export_report_csv(const FidelityReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"level", "dimension", "metric", "value", "n"});
  for (const auto& r : report.rows) {
    const auto n = std::to_string(r.values.n);
    csv::write_row(out, {r.level, r.dimension, "MAE", csv::format_double(r.values.mae), n});
    csv::write_row(out, {r.level, r.dimension, "GMAPE", csv::format_double(r.values.gmape), n});
    csv::write_row(out, {r.level, r.dimension, "GMQE", csv::format_double(r.values.gmqe), n});
  }
  return out.str();
}

std::string export_plot_csv(const Targets& targets, const Targets& replayed) {
  check_grids(targets, replayed);
  std::ostringstream out;
  csv::write_row(out, {"ts", "dimension", "target", "replayed"});
  for (std::size_t h = 0; h < targets.schema.num_metrics(); ++h) {
    const auto hh = static_cast<Eigen::Index>(h);
    for (std::size_t k = 0; k < targets.intervals.size(); ++k)
      csv::write_row(out, {std::to_string(targets.intervals[k].interval_start_ts), targets.schema.metrics[h],
                           csv::format_double(targets.intervals[k].metrics(hh)),
                           csv::format_double(replayed.intervals[k].metrics(hh))});
  }
  return out.str();
}

}  // namespace wlsynth
