#include "wlsynth/simulator.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace wlsynth {

SimulationResult simulate(const std::vector<Job>& jobs, int cores, const TimeGrid& grid, Eigen::Index num_metrics) {
  if (cores < 1) throw Error(ErrorKind::Config, "cores must be >= 1");
  SimulationResult out;
  out.completion_ms.assign(jobs.size(), 0.0);
  out.interval_mass = Eigen::MatrixXd::Zero(num_metrics, static_cast<Eigen::Index>(grid.num_intervals()));
  out.overflow_mass = Eigen::VectorXd::Zero(num_metrics);

  // Deposits `mass` spread uniformly over [t0, t1).
  auto deposit = [&](const Eigen::VectorXd& mass, double t0, double t1) {
    double inside = 0.0;
    grid.for_each_overlap(t0, t1, [&](std::size_t k, double ov) {
      out.interval_mass.col(static_cast<Eigen::Index>(k)) += mass * (ov / (t1 - t0));
      inside += ov;
    });
    const double frac = 1.0 - inside / (t1 - t0);
    if (frac > 1e-15) out.overflow_mass += mass * frac;
  };
  auto deposit_point = [&](const Eigen::VectorXd& mass, double t) {
    const auto lo = static_cast<double>(grid.origin_ts);
    const auto hi = static_cast<double>(grid.end_ts());
    if (t >= lo && t < hi && grid.num_intervals() > 0) {
      auto k = std::min(static_cast<std::size_t>((t - lo) / static_cast<double>(grid.interval_len_ms)),
                        grid.num_intervals() - 1);
      out.interval_mass.col(static_cast<Eigen::Index>(k)) += mass;
    } else {
      out.overflow_mass += mass;
    }
  };

  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return jobs[a].start_ms < jobs[b].start_ms; });

  std::vector<std::size_t> active;
  std::vector<double> remaining(jobs.size(), 0.0);
  std::size_t next = 0;
  double now = jobs.empty() ? 0.0 : jobs[order[0]].start_ms;
  const double cap = static_cast<double>(cores);
  Eigen::VectorXd density(num_metrics);

  while (next < order.size() || !active.empty()) {
    // Admit arrivals at `now`.
    while (next < order.size() && jobs[order[next]].start_ms <= now) {
      const std::size_t j = order[next++];
      if (jobs[j].work_ms <= 0.0) {
        out.completion_ms[j] = jobs[j].start_ms;
        deposit_point(jobs[j].mass, jobs[j].start_ms);
        continue;
      }
      remaining[j] = jobs[j].work_ms;
      active.push_back(j);
    }
    if (active.empty()) {
      if (next < order.size()) now = jobs[order[next]].start_ms;
      continue;
    }
    const double P = static_cast<double>(active.size());
    const double rate = std::min(1.0, cap / P);
    double min_rem = std::numeric_limits<double>::infinity();
    for (auto j : active) min_rem = std::min(min_rem, remaining[j]);
    double t_next = now + min_rem / rate;
    double progress = min_rem;
    if (next < order.size() && jobs[order[next]].start_ms < t_next) {
      t_next = jobs[order[next]].start_ms;
      progress = rate * (t_next - now);
    }
    const double dt = progress / rate;

    if (dt > 0.0) {
      density.setZero();
      for (auto j : active) density += jobs[j].mass * (rate / jobs[j].work_ms);
      if (t_next > now)
        deposit(density * dt, now, t_next);
      else
        deposit_point(density * dt, now);
      out.busy_capacity_ms += std::min(P, cap) * dt;
    }
    std::size_t keep = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t j = active[i];
      remaining[j] -= progress;
      if (remaining[j] <= 1e-9 * std::max(1.0, jobs[j].work_ms)) {
        out.completion_ms[j] = t_next;
      } else {
        active[keep++] = j;
      }
    }
    active.resize(keep);
    now = t_next;
  }
  return out;
}

void validate_schedule(const Schedule& schedule, const Catalog& catalog, const TimeGrid& grid) {
  for (const auto& e : schedule.entries) {
    if (!catalog.contains(e.component_id))
      throw Error(ErrorKind::Lookup, fmt::format("schedule references unknown component \"{}\"", e.component_id));
    if (e.window_index >= grid.num_windows)
      throw Error(ErrorKind::Validation, fmt::format("schedule window {} outside the grid", e.window_index));
    const auto ws = grid.window_start(e.window_index);
    if (e.start_ts < ws || e.start_ts >= ws + grid.window_len_ms)
      throw Error(ErrorKind::Validation,
                  fmt::format("instance {}#{} starts at {} outside window {}", e.component_id, e.instance_index,
                              e.start_ts, e.window_index));
  }
}

std::vector<Job> jobs_for(const Schedule& schedule, const Catalog& catalog) {
  std::vector<Job> jobs;
  jobs.reserve(schedule.entries.size());
  for (const auto& e : schedule.entries) {
    auto idx = catalog.index_of(e.component_id);
    if (!idx) throw Error(ErrorKind::Lookup, fmt::format("schedule references unknown component \"{}\"", e.component_id));
    const auto& c = catalog[*idx];
    jobs.push_back({static_cast<double>(e.start_ts), c.duration_ms, c.feature.metrics});
  }
  return jobs;
}

std::vector<IntervalTarget> estimate_interval_features(const Schedule& schedule, const Catalog& catalog,
                                                       const TimeGrid& grid, int cores) {
  const auto nm = static_cast<Eigen::Index>(catalog.schema().num_metrics());
  auto sim = simulate(jobs_for(schedule, catalog), cores, grid, nm);
  std::vector<IntervalTarget> out;
  const std::size_t ipw = grid.intervals_per_window();
  for (std::size_t k = 0; k < grid.num_intervals(); ++k) {
    IntervalTarget it;
    it.window_index = k / ipw;
    it.interval_index = k % ipw;
    it.interval_start_ts = grid.interval_start(k);
    it.metrics = sim.interval_mass.col(static_cast<Eigen::Index>(k));
    out.push_back(std::move(it));
  }
  return out;
}

ReplayedTrace replay(const Schedule& schedule, const Catalog& catalog, int cores, OperatorMode mode) {
  ReplayedTrace out;
  out.trace.schema = catalog.schema();
  out.trace.mode = mode;
  const auto jobs = jobs_for(schedule, catalog);
  TimeGrid empty_grid;
  empty_grid.num_windows = 0;
  auto sim = simulate(jobs, cores, empty_grid, static_cast<Eigen::Index>(catalog.schema().num_metrics()));
  out.completion_ms = sim.completion_ms;

  std::vector<std::size_t> order(schedule.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return schedule.entries[a].start_ts < schedule.entries[b].start_ts;
  });
  for (auto i : order) {
    const auto& e = schedule.entries[i];
    const auto& c = catalog.at(e.component_id);
    QueryRecord r;
    r.query_id = fmt::format("w{}-{}-{}", e.window_index, e.component_id, e.instance_index);
    r.arrival_ts = e.start_ts;
    r.duration_ms = std::llround(sim.completion_ms[i] - static_cast<double>(e.start_ts));
    r.metrics = c.feature.metrics;
    r.operators = c.feature.operators;
    out.trace.records.push_back(std::move(r));
  }
  std::vector<double> completions;
  for (auto i : order) completions.push_back(sim.completion_ms[i]);
  out.completion_ms = std::move(completions);
  return out;
}

std::string export_schedule_csv(const Schedule& schedule) {
  std::ostringstream out;
  csv::write_row(out, {"window_index", "component_id", "instance_index", "start_ts"});
  for (const auto& e : schedule.entries)
    csv::write_row(out, {std::to_string(e.window_index), e.component_id, std::to_string(e.instance_index),
                         std::to_string(e.start_ts)});
  return out.str();
}

void write_schedule(const std::filesystem::path& path, const Schedule& schedule) {
  csv::write_text(path, export_schedule_csv(schedule));
}

Schedule read_schedule(const std::filesystem::path& path) {
  csv::Table t = csv::read_file(path);
  const auto wc = t.require_column("window_index");
  const auto cc = t.require_column("component_id");
  const auto ic = t.require_column("instance_index");
  const auto sc = t.require_column("start_ts");
  Schedule s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ScheduleEntry e;
    e.window_index = static_cast<std::size_t>(csv::parse_int(row[wc], r + 1, "window_index"));
    e.component_id = row[cc];
    e.instance_index = csv::parse_int(row[ic], r + 1, "instance_index");
    e.start_ts = csv::parse_int(row[sc], r + 1, "start_ts");
    s.entries.push_back(std::move(e));
  }
  return s;
}

}  // namespace wlsynth
