#include "wlsynth/pipeline.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/log.hpp"
#include "wlsynth/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <sstream>

namespace wlsynth {

namespace fs = std::filesystem;

PipelineOptions options_from_config(const Config& c) {
  PipelineOptions o;
  o.config = c;
  if (c.has("trace")) o.trace_path = c.resolve_path("trace");
  if (c.has("catalog")) o.catalog_path = c.resolve_path("catalog");
  if (c.has("output_dir")) o.output_dir = c.resolve_path("output_dir");
  o.schema.metrics = c.get_list("schema.metrics");
  o.schema.operators = c.get_list("schema.operators");
  o.mode = parse_operator_mode(c.get_string("operator_mode", "counts"));
  o.window_ms = c.get_int("window_ms", o.window_ms);
  o.interval_ms = c.get_int("interval_ms", o.interval_ms);
  if (c.has("grid.origin_ts")) o.origin_ts = c.get_int("grid.origin_ts", 0);
  if (c.has("grid.num_windows")) o.num_windows = static_cast<std::size_t>(c.get_int("grid.num_windows", 0));
  o.cores = static_cast<int>(c.get_int("cores", o.cores));
  o.seed = static_cast<std::uint64_t>(c.get_int("seed", 42));

  auto& s = o.selection;
  s.max_repetitions = c.get_int("select.y", s.max_repetitions);
  if (c.has("select.z")) s.max_total = c.get_int("select.z", 0);
  s.total_count_factor = c.get_double("select.z_factor", s.total_count_factor);
  s.max_concurrency = c.get_int("select.max_concurrency", o.cores);
  s.denom_floor = c.get_double("select.denom_floor", s.denom_floor);
  s.budget.node_limit = c.get_int("select.node_limit", s.budget.node_limit);
  s.budget.time_limit_s = c.get_double("select.time_limit_s", s.budget.time_limit_s);
  s.jobs = static_cast<unsigned>(c.get_int("jobs", 1));
  if (auto w = c.get_list("select.weights"); !w.empty()) {
    s.weights.resize(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i)
      s.weights[static_cast<Eigen::Index>(i)] = csv::parse_double(w[i], 0, "select.weights");
  }

  auto& a = o.anneal;
  a.no_improve_steps = c.get_int("schedule.no_improve_steps", a.no_improve_steps);
  a.step_cap = c.get_int("schedule.step_cap", a.step_cap);
  a.cooling_steps = c.get_int("schedule.cooling_steps", a.cooling_steps);
  a.granularity_ms = c.get_int("schedule.granularity_ms", a.granularity_ms);
  a.denom_floor = c.get_double("schedule.denom_floor", a.denom_floor);
  a.auto_temperature = c.get_bool("schedule.auto_temperature", a.auto_temperature);
  a.v_max = c.get_double("schedule.v_max", a.v_max);
  a.v_min = c.get_double("schedule.v_min", a.v_min);
  o.skip_ta = c.get_bool("schedule.skip_ta", false);

  auto& g = o.augment;
  o.skip_augment = c.get_bool("augment.skip", false);
  g.clusters = static_cast<std::size_t>(c.get_int("augment.k", static_cast<std::int64_t>(g.clusters)));
  g.examples = static_cast<std::size_t>(c.get_int("augment.n", static_cast<std::int64_t>(g.examples)));
  g.max_attempts = static_cast<std::size_t>(c.get_int("augment.max_attempts", static_cast<std::int64_t>(g.max_attempts)));
  g.max_db_switches =
      static_cast<std::size_t>(c.get_int("augment.max_db_switches", static_cast<std::int64_t>(g.max_db_switches)));
  g.bad_window_threshold = c.get_double("augment.threshold", g.bad_window_threshold);
  g.profile_repetitions = static_cast<int>(c.get_int("augment.profile_repetitions", g.profile_repetitions));
  g.gap.tolerance = c.get_double("augment.tolerance", g.gap.tolerance);
  g.gap.cpu_metric = c.get_string("augment.cpu_metric", g.gap.cpu_metric);
  g.gap.sb_metric = c.get_string("augment.sb_metric", g.gap.sb_metric);

  o.executor.noise_sigma = c.get_double("executor.noise_sigma", 0.0);
  o.executor.seed = derive_seed(o.seed, "executor");
  for (const auto& v : c.get_list("executor.metric_cap_per_sf"))
    o.executor.metric_cap_per_sf.push_back(csv::parse_double(v, 0, "executor.metric_cap_per_sf"));

  const auto ql = c.get_string("query_level", "");
  if (!ql.empty() && ql != "none") o.query_level = parse_query_level_mode(ql);
  o.query_level_max_total = c.get_int("query_level.max_total", o.query_level_max_total);
  return o;
}

namespace {

template <typename F>
void stage(const char* name, F&& f) {
  try {
    f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, Error(ErrorKind::Io, e.what()));
  }
}

fs::path dir(const PipelineOptions& o, const char* sub) { return o.output_dir / sub; }

void require_schema(const PipelineOptions& o) {
  if (o.schema.metrics.empty()) throw Error(ErrorKind::Config, "schema.metrics must list at least one metric");
}

Trace ingested(const PipelineOptions& o) {
  return ingest_trace(dir(o, "targets") / "trace.csv", o.schema, o.mode);
}

Targets load_targets(const PipelineOptions& o) {
  return read_targets(dir(o, "targets"), o.schema, o.mode, o.interval_ms);
}

}  // namespace

Catalog effective_catalog(const PipelineOptions& o) {
  if (o.catalog_path.empty()) throw Error(ErrorKind::Config, "no catalog configured");
  Catalog cat = load_catalog(o.catalog_path, o.schema);
  const fs::path extra = dir(o, "augment") / "catalog.csv";
  if (fs::exists(extra)) {
    Catalog aug = load_catalog(extra, o.schema);
    for (const auto& c : aug.components()) cat.add(c);
  }
  return cat;
}

void stage_ingest(const PipelineOptions& o) {
  stage("ingest", [&] {
    require_schema(o);
    if (o.trace_path.empty()) throw Error(ErrorKind::Config, "no trace configured");
    Trace t = ingest_trace(o.trace_path, o.schema, o.mode);
    write_trace(dir(o, "targets") / "trace.csv", t);
  });
}

void stage_targets(const PipelineOptions& o) {
  stage("targets", [&] {
    AggregationSpec spec;
    spec.mode = o.mode;
    spec.origin_ts = o.origin_ts;
    spec.num_windows = o.num_windows;
    Targets t = build_targets(ingested(o), o.window_ms, o.interval_ms, spec);
    write_targets(dir(o, "targets"), t);
  });
}

void stage_select(const PipelineOptions& o) {
  stage("select", [&] {
    const Targets t = load_targets(o);
    const Catalog cat = effective_catalog(o);
    auto plans = solve_all_windows(t, cat, o.selection);
    for (const auto& p : plans)
      if (p.approximate) log_warning(fmt::format("window {}: solver budget exhausted, plan may be suboptimal", p.window_index));
    write_plans(dir(o, "plans"), plans, t, cat, o.selection);
  });
}

void stage_augment(const PipelineOptions& o) {
  stage("augment", [&] {
    const Targets t = load_targets(o);
    const Trace trace = ingested(o);
    const Catalog base = load_catalog(o.catalog_path, o.schema);
    const Catalog cat = effective_catalog(o);
    const auto plans = read_plans(dir(o, "plans") / "plan.csv", t, cat, o.selection);

    SimulatedExecutor executor(o.schema, o.executor);
    executor.load(cat);
    auto provider = make_provider(o.config, o.schema);
    auto res = augment_catalog(trace, t, plans, cat, *provider, executor, o.augment, o.seed);

    Catalog added(o.schema);
    for (std::size_t j = base.size(); j < res.catalog.size(); ++j) added.add(res.catalog[j]);
    write_catalog(dir(o, "augment") / "catalog.csv", added, {true, true});
    csv::write_text(dir(o, "augment") / "attempts.jsonl", export_attempts_jsonl(res.results, o.schema));
    log_info(fmt::format("augment: {} bad windows, {} targets, {} components added", res.bad_windows.size(),
                         res.targets.size(), res.added.size()));
    if (res.added.empty()) return;

    csv::write_text(dir(o, "plans") / "plan_initial.csv", export_plan_csv(plans));
    auto resolved = solve_all_windows(t, res.catalog, o.selection, &plans);
    write_plans(dir(o, "plans"), resolved, t, res.catalog, o.selection);
  });
}

void stage_schedule(const PipelineOptions& o) {
  stage("schedule", [&] {
    const Targets t = load_targets(o);
    const Catalog cat = effective_catalog(o);
    const auto plans = read_plans(dir(o, "plans") / "plan.csv", t, cat, o.selection);
    Schedule s;
    std::ostringstream summary;
    csv::write_row(summary, {"window_index", "initial_energy", "final_energy", "v_max", "v_min", "alpha", "steps"});
    std::ostringstream trace;
    csv::write_row(trace, {"window_index", "step", "best_energy"});
    if (o.skip_ta) {
      s = random_timestamps(plans, t.grid, o.anneal.granularity_ms, derive_seed(o.seed, "schedule"));
    } else {
      std::vector<AnnealReport> reports;
      s = assign_timestamps(plans, t, cat, o.cores, o.anneal, o.seed, &reports, o.selection.jobs);
      for (const auto& r : reports) {
        csv::write_row(summary, {std::to_string(r.window_index), csv::format_double(r.initial_energy),
                                 csv::format_double(r.final_energy), csv::format_double(r.v_max),
                                 csv::format_double(r.v_min), csv::format_double(r.alpha), std::to_string(r.steps)});
        for (std::size_t k = 0; k < r.best_energy.size(); ++k)
          csv::write_row(trace, {std::to_string(r.window_index), std::to_string(k + 1),
                                 csv::format_double(r.best_energy[k])});
      }
    }
    write_schedule(dir(o, "schedule") / "schedule.csv", s);
    csv::write_text(dir(o, "schedule") / "anneal.csv", summary.str());
    csv::write_text(dir(o, "schedule") / "anneal_trace.csv", trace.str());
  });
}

void stage_replay(const PipelineOptions& o) {
  stage("replay", [&] {
    const Catalog cat = effective_catalog(o);
    const Schedule s = read_schedule(dir(o, "schedule") / "schedule.csv");
    auto rep = replay(s, cat, o.cores, o.mode);
    write_trace(dir(o, "replay") / "trace.csv", rep.trace);
  });
}

void stage_evaluate(const PipelineOptions& o) {
  stage("evaluate", [&] {
    const Targets t = load_targets(o);
    const Trace rep = ingest_trace(dir(o, "replay") / "trace.csv", o.schema, o.mode);
    auto r = report(t, rep);
    AggregationSpec spec;
    spec.mode = o.mode;
    spec.origin_ts = t.grid.origin_ts;
    spec.num_windows = t.grid.num_windows;
    const Targets achieved = build_targets(rep, t.grid.window_len_ms, t.grid.interval_len_ms, spec);
    csv::write_text(dir(o, "report") / "report.csv", export_report_csv(r));
    csv::write_text(dir(o, "report") / "plot.csv", export_plot_csv(t, achieved));
  });
}

void stage_query_level(const PipelineOptions& o) {
  stage("query_level", [&] {
    if (!o.query_level) throw Error(ErrorKind::Config, "query_level mode not set");
    const Trace trace = ingested(o);
    const Catalog cat = effective_catalog(o);
    std::ostringstream plan;
    csv::write_row(plan, {"query_id", "component_id", "count", "objective"});
    std::vector<PerformanceFeature> targets, achieved;
    for (const auto& q : trace.records) {
      PerformanceFeature f(q.metrics, q.operators);
      auto m = match_query(f, static_cast<double>(q.duration_ms), cat, *o.query_level, o.query_level_max_total,
                           o.selection, o.mode);
      for (const auto& [id, n] : m.plan.counts)
        csv::write_row(plan, {q.query_id, id, std::to_string(n), csv::format_double(m.plan.objective)});
      targets.push_back(std::move(f));
      achieved.push_back(m.plan.achieved);
    }
    csv::write_text(dir(o, "plans") / "query_plan.csv", plan.str());
    csv::write_text(dir(o, "report") / "query_report.csv",
                    export_report_csv(query_level_report(o.schema, targets, achieved)));
  });
}

void run_pipeline(const PipelineOptions& o) {
  stage_ingest(o);
  if (o.query_level) {
    stage_query_level(o);
    return;
  }
  // A previous run's augmented components must not leak into this one.
  fs::remove(dir(o, "augment") / "catalog.csv");
  fs::remove(dir(o, "plans") / "plan_initial.csv");
  stage_targets(o);
  stage_select(o);
  if (!o.skip_augment) stage_augment(o);
  stage_schedule(o);
  stage_replay(o);
  stage_evaluate(o);
}

}  // namespace wlsynth
