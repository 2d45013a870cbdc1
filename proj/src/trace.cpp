#include "wlsynth/trace.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/error.hpp"
#include "wlsynth/log.hpp"

#include <fmt/format.h>

#include <fstream>
#include <limits>
#include <sstream>

namespace wlsynth {

OperatorMode parse_operator_mode(std::string_view text) {
  if (text == "counts") return OperatorMode::Counts;
  if (text == "time_shares") return OperatorMode::TimeShares;
  throw Error(ErrorKind::Config, fmt::format("unknown operator mode \"{}\" (counts | time_shares)", text));
}

std::string_view to_string(OperatorMode mode) {
  return mode == OperatorMode::Counts ? "counts" : "time_shares";
}

namespace {

std::vector<std::size_t> require_columns(const csv::Table& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(table.require_column(n));
  return out;
}

double nonnegative(const csv::Table& table, std::size_t row, std::size_t col) {
  const auto& name = table.header[col];
  double v = csv::parse_double(table.rows[row][col], row + 1, name);
  if (!(v >= 0.0))
    throw Error(ErrorKind::Validation,
                fmt::format("row {}: column \"{}\" must be nonnegative, got {}", row + 1, name, v));
  return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Trace parse_trace(std::string_view csv_text, const FeatureSchema& schema, OperatorMode mode) {
  csv::Table table = csv::parse(csv_text);
  const auto id_col = table.require_column("query_id");
  const auto arrival_col = table.require_column("arrival_ts");
  const auto duration_col = table.require_column("duration_ms");
  const auto metric_cols = require_columns(table, schema.metrics);
  const auto op_cols = require_columns(table, schema.operators);

  Trace trace;
  trace.schema = schema;
  trace.mode = mode;
  trace.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size())
      throw Error(ErrorKind::Parse, fmt::format("row {}: expected {} fields, found {}", r + 1,
                                                table.header.size(), row.size()));
    QueryRecord rec;
    rec.query_id = row[id_col];
    rec.arrival_ts = csv::parse_int(row[arrival_col], r + 1, "arrival_ts");
    rec.duration_ms = csv::parse_int(row[duration_col], r + 1, "duration_ms");
    if (rec.duration_ms < 0)
      throw Error(ErrorKind::Validation,
                  fmt::format("row {}: column \"duration_ms\" must be nonnegative, got {}", r + 1, rec.duration_ms));
    rec.metrics.resize(static_cast<Eigen::Index>(metric_cols.size()));
    for (std::size_t k = 0; k < metric_cols.size(); ++k)
      rec.metrics[static_cast<Eigen::Index>(k)] = nonnegative(table, r, metric_cols[k]);
    rec.operators.resize(static_cast<Eigen::Index>(op_cols.size()));
    for (std::size_t k = 0; k < op_cols.size(); ++k)
      rec.operators[static_cast<Eigen::Index>(k)] = nonnegative(table, r, op_cols[k]);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

Trace ingest_trace(const std::filesystem::path& path, const FeatureSchema& schema, OperatorMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open trace {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str(), schema, mode);
}

std::string export_trace_csv(const Trace& trace) {
  std::ostringstream out;
  std::vector<std::string> header{"query_id", "arrival_ts", "duration_ms"};
  header.insert(header.end(), trace.schema.metrics.begin(), trace.schema.metrics.end());
  header.insert(header.end(), trace.schema.operators.begin(), trace.schema.operators.end());
  csv::write_row(out, header);
  std::vector<std::string> fields;
  for (const auto& r : trace.records) {
    fields.clear();
    fields.push_back(r.query_id);
    fields.push_back(std::to_string(r.arrival_ts));
    fields.push_back(std::to_string(r.duration_ms));
    for (Eigen::Index k = 0; k < r.metrics.size(); ++k) fields.push_back(csv::format_double(r.metrics[k]));
    for (Eigen::Index k = 0; k < r.operators.size(); ++k) fields.push_back(csv::format_double(r.operators[k]));
    csv::write_row(out, fields);
  }
  return out.str();
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  csv::write_text(path, export_trace_csv(trace));
}

Targets build_targets(const std::vector<QueryRecord>& records, const FeatureSchema& schema,
                      std::int64_t window_len_ms, std::int64_t interval_len_ms, const AggregationSpec& spec) {
  if (window_len_ms <= 0 || interval_len_ms <= 0)
    throw Error(ErrorKind::Config, "window and interval lengths must be positive");
  if (window_len_ms % interval_len_ms != 0)
    throw Error(ErrorKind::Config,
                fmt::format("window length {} ms is not a multiple of interval length {} ms", window_len_ms,
                            interval_len_ms));
  if (records.empty() && !(spec.origin_ts && spec.num_windows))
    throw Error(ErrorKind::Config, "cannot build targets from an empty trace without an explicit grid");

  const auto nm = static_cast<Eigen::Index>(schema.num_metrics());
  const auto no = static_cast<Eigen::Index>(schema.num_operators());
  for (const auto& r : records)
    if (r.metrics.size() != nm || r.operators.size() != no)
      throw Error(ErrorKind::Schema, fmt::format("query {} does not match the trace schema", r.query_id));

  Targets out;
  out.schema = schema;
  out.mode = spec.mode;
  out.grid.window_len_ms = window_len_ms;
  out.grid.interval_len_ms = interval_len_ms;
  if (spec.origin_ts) {
    out.grid.origin_ts = *spec.origin_ts;
  } else {
    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    for (const auto& r : records) first = std::min(first, r.arrival_ts);
    out.grid.origin_ts = floor_div(first, window_len_ms) * window_len_ms;
  }
  if (spec.num_windows) {
    out.grid.num_windows = *spec.num_windows;
  } else {
    std::int64_t last = out.grid.origin_ts;
    for (const auto& r : records) last = std::max(last, r.arrival_ts);
    out.grid.num_windows = static_cast<std::size_t>(floor_div(last - out.grid.origin_ts, window_len_ms) + 1);
  }

  const TimeGrid& grid = out.grid;
  const std::size_t ipw = grid.intervals_per_window();
  const std::size_t n_int = grid.num_intervals();

  Eigen::MatrixXd interval_mass = Eigen::MatrixXd::Zero(nm, static_cast<Eigen::Index>(n_int));
  Eigen::MatrixXd op_sum = Eigen::MatrixXd::Zero(no, static_cast<Eigen::Index>(grid.num_windows));
  Eigen::MatrixXd op_weighted = Eigen::MatrixXd::Zero(no, static_cast<Eigen::Index>(grid.num_windows));
  std::vector<double> busy(grid.num_windows, 0.0);
  std::vector<std::int64_t> arrivals(grid.num_windows, 0);
  std::vector<std::int64_t> counts(grid.num_windows, 0);
  out.clipped_mass = Eigen::VectorXd::Zero(nm);

  const std::int64_t lo = grid.origin_ts;
  const std::int64_t hi = grid.end_ts();
  for (const auto& r : records) {
    const std::int64_t a = r.arrival_ts;
    const std::int64_t d = r.duration_ms;
    if (d == 0) {
      if (auto k = grid.interval_of(a)) {
        interval_mass.col(static_cast<Eigen::Index>(*k)) += r.metrics;
        ++counts[*k / ipw];
      } else {
        out.clipped_mass += r.metrics;
      }
    } else {
      const std::int64_t s = std::max(a, lo);
      const std::int64_t e = std::min(a + d, hi);
      std::int64_t inside = 0;
      if (e > s) {
        auto k = static_cast<std::size_t>((s - lo) / grid.interval_len_ms);
        std::size_t last_window = std::numeric_limits<std::size_t>::max();
        for (; k < n_int; ++k) {
          const std::int64_t ia = grid.interval_start(k);
          if (ia >= e) break;
          const std::int64_t ov = std::min(ia + grid.interval_len_ms, e) - std::max(ia, s);
          if (ov <= 0) continue;
          inside += ov;
          interval_mass.col(static_cast<Eigen::Index>(k)) +=
              r.metrics * (static_cast<double>(ov) / static_cast<double>(d));
          if (k / ipw != last_window) {
            last_window = k / ipw;
            ++counts[last_window];
          }
        }
      }
      if (inside < d) out.clipped_mass += r.metrics * (static_cast<double>(d - inside) / static_cast<double>(d));
    }
    if (auto w = grid.window_of(a)) {
      const auto wi = static_cast<Eigen::Index>(*w);
      op_sum.col(wi) += r.operators;
      op_weighted.col(wi) += r.operators * static_cast<double>(d);
      busy[*w] += static_cast<double>(d);
      ++arrivals[*w];
    }
  }

  if ((out.clipped_mass.array() > 0.0).any()) {
    std::ostringstream msg;
    msg << "discarded mass of queries overhanging the trace span:";
    for (Eigen::Index h = 0; h < nm; ++h) msg << ' ' << schema.metrics[h] << '=' << out.clipped_mass[h];
    log_warning(msg.str());
  }

  out.intervals.reserve(n_int);
  for (std::size_t k = 0; k < n_int; ++k) {
    IntervalTarget it;
    it.window_index = k / ipw;
    it.interval_index = k % ipw;
    it.interval_start_ts = grid.interval_start(k);
    it.metrics = interval_mass.col(static_cast<Eigen::Index>(k));
    out.intervals.push_back(std::move(it));
  }

  out.windows.reserve(grid.num_windows);
  for (std::size_t w = 0; w < grid.num_windows; ++w) {
    WindowTarget wt;
    wt.window_index = w;
    wt.window_start_ts = grid.window_start(w);
    wt.window_len_ms = window_len_ms;
    wt.query_count = counts[w];
    wt.busy_ms = busy[w];
    wt.feature.metrics = interval_mass.middleCols(static_cast<Eigen::Index>(w * ipw), static_cast<Eigen::Index>(ipw))
                             .rowwise()
                             .sum();
    const auto wi = static_cast<Eigen::Index>(w);
    if (spec.mode == OperatorMode::Counts) {
      wt.feature.operators = op_sum.col(wi);
    } else if (busy[w] > 0.0) {
      wt.feature.operators = op_weighted.col(wi) / busy[w];
    } else if (arrivals[w] > 0) {
      wt.feature.operators = op_sum.col(wi) / static_cast<double>(arrivals[w]);
    } else {
      wt.feature.operators = Eigen::VectorXd::Zero(no);
    }
    out.windows.push_back(std::move(wt));
  }
  return out;
}

std::string export_windows_csv(const Targets& targets) {
  std::ostringstream out;
  std::vector<std::string> header{"window_index", "window_start_ts", "window_len_ms", "query_count", "busy_ms"};
  header.insert(header.end(), targets.schema.metrics.begin(), targets.schema.metrics.end());
  header.insert(header.end(), targets.schema.operators.begin(), targets.schema.operators.end());
  csv::write_row(out, header);
  for (const auto& w : targets.windows) {
    std::vector<std::string> f{std::to_string(w.window_index), std::to_string(w.window_start_ts),
                               std::to_string(w.window_len_ms), std::to_string(w.query_count),
                               csv::format_double(w.busy_ms)};
    for (Eigen::Index k = 0; k < w.feature.metrics.size(); ++k) f.push_back(csv::format_double(w.feature.metrics[k]));
    for (Eigen::Index k = 0; k < w.feature.operators.size(); ++k)
      f.push_back(csv::format_double(w.feature.operators[k]));
    csv::write_row(out, f);
  }
  return out.str();
}

std::string export_intervals_csv(const Targets& targets) {
  std::ostringstream out;
  std::vector<std::string> header{"window_index", "interval_index", "interval_start_ts"};
  header.insert(header.end(), targets.schema.metrics.begin(), targets.schema.metrics.end());
  csv::write_row(out, header);
  for (const auto& it : targets.intervals) {
    std::vector<std::string> f{std::to_string(it.window_index), std::to_string(it.interval_index),
                               std::to_string(it.interval_start_ts)};
    for (Eigen::Index k = 0; k < it.metrics.size(); ++k) f.push_back(csv::format_double(it.metrics[k]));
    csv::write_row(out, f);
  }
  return out.str();
}

void write_targets(const std::filesystem::path& dir, const Targets& targets) {
  csv::write_text(dir / "windows.csv", export_windows_csv(targets));
  csv::write_text(dir / "intervals.csv", export_intervals_csv(targets));
}

Targets read_targets(const std::filesystem::path& dir, const FeatureSchema& schema, OperatorMode mode,
                     std::int64_t interval_len_ms) {
  Targets out;
  out.schema = schema;
  out.mode = mode;
  out.clipped_mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema.num_metrics()));

  csv::Table wt = csv::read_file(dir / "windows.csv");
  const auto wi = wt.require_column("window_index");
  const auto ws = wt.require_column("window_start_ts");
  const auto wl = wt.require_column("window_len_ms");
  const auto qc = wt.require_column("query_count");
  const auto bm = wt.require_column("busy_ms");
  const auto mcols = require_columns(wt, schema.metrics);
  const auto ocols = require_columns(wt, schema.operators);
  for (std::size_t r = 0; r < wt.rows.size(); ++r) {
    const auto& row = wt.rows[r];
    WindowTarget w;
    w.window_index = static_cast<std::size_t>(csv::parse_int(row[wi], r + 1, "window_index"));
    w.window_start_ts = csv::parse_int(row[ws], r + 1, "window_start_ts");
    w.window_len_ms = csv::parse_int(row[wl], r + 1, "window_len_ms");
    w.query_count = csv::parse_int(row[qc], r + 1, "query_count");
    w.busy_ms = csv::parse_double(row[bm], r + 1, "busy_ms");
    w.feature = PerformanceFeature::zero(schema);
    for (std::size_t k = 0; k < mcols.size(); ++k)
      w.feature.metrics[static_cast<Eigen::Index>(k)] = csv::parse_double(row[mcols[k]], r + 1, schema.metrics[k]);
    for (std::size_t k = 0; k < ocols.size(); ++k)
      w.feature.operators[static_cast<Eigen::Index>(k)] =
          csv::parse_double(row[ocols[k]], r + 1, schema.operators[k]);
    if (w.window_index != out.windows.size())
      throw Error(ErrorKind::Validation, fmt::format("windows.csv row {}: windows must be listed in order", r + 1));
    out.windows.push_back(std::move(w));
  }
  if (out.windows.empty()) throw Error(ErrorKind::Validation, "windows.csv has no windows");

  out.grid.origin_ts = out.windows.front().window_start_ts;
  out.grid.window_len_ms = out.windows.front().window_len_ms;
  out.grid.interval_len_ms = interval_len_ms;
  out.grid.num_windows = out.windows.size();
  if (out.grid.window_len_ms % interval_len_ms != 0)
    throw Error(ErrorKind::Config, "window length is not a multiple of the interval length");

  csv::Table it = csv::read_file(dir / "intervals.csv");
  const auto iw = it.require_column("window_index");
  const auto ii = it.require_column("interval_index");
  const auto is = it.require_column("interval_start_ts");
  const auto imcols = require_columns(it, schema.metrics);
  if (it.rows.size() != out.grid.num_intervals())
    throw Error(ErrorKind::Validation,
                fmt::format("intervals.csv has {} rows, grid needs {}", it.rows.size(), out.grid.num_intervals()));
  for (std::size_t r = 0; r < it.rows.size(); ++r) {
    const auto& row = it.rows[r];
    IntervalTarget t;
    t.window_index = static_cast<std::size_t>(csv::parse_int(row[iw], r + 1, "window_index"));
    t.interval_index = static_cast<std::size_t>(csv::parse_int(row[ii], r + 1, "interval_index"));
    t.interval_start_ts = csv::parse_int(row[is], r + 1, "interval_start_ts");
    t.metrics.resize(static_cast<Eigen::Index>(imcols.size()));
    for (std::size_t k = 0; k < imcols.size(); ++k)
      t.metrics[static_cast<Eigen::Index>(k)] = csv::parse_double(row[imcols[k]], r + 1, schema.metrics[k]);
    if (t.window_index * out.grid.intervals_per_window() + t.interval_index != r)
      throw Error(ErrorKind::Validation, fmt::format("intervals.csv row {}: out of order", r + 1));
    out.intervals.push_back(std::move(t));
  }
  return out;
}

}  // namespace wlsynth
