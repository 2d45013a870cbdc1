#include "wlsynth/scheduler.hpp"

#include "wlsynth/error.hpp"
#include "wlsynth/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace wlsynth {

double interval_energy(const Eigen::MatrixXd& achieved, const Eigen::MatrixXd& target, double denom_floor) {
  if (achieved.rows() != target.rows() || achieved.cols() != target.cols())
    throw Error(ErrorKind::Schema, "interval feature dimensions do not match the targets");
  return ((achieved - target).array().abs() / target.array().max(denom_floor)).sum();
}

namespace {

Eigen::MatrixXd target_matrix(const std::vector<IntervalTarget>& targets, std::size_t first, std::size_t count,
                              Eigen::Index nm) {
  Eigen::MatrixXd out(nm, static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto& m = targets[first + k].metrics;
    if (m.size() != nm) throw Error(ErrorKind::Schema, "interval target dimension does not match the catalog");
    out.col(static_cast<Eigen::Index>(k)) = m;
  }
  return out;
}

}  // namespace

double energy(const Schedule& schedule, const std::vector<IntervalTarget>& interval_targets, const Catalog& catalog,
              const TimeGrid& grid, int cores, double denom_floor) {
  const auto nm = static_cast<Eigen::Index>(catalog.schema().num_metrics());
  if (interval_targets.size() != grid.num_intervals())
    throw Error(ErrorKind::Schema, "interval targets do not cover the grid");
  const Eigen::MatrixXd tgt = target_matrix(interval_targets, 0, interval_targets.size(), nm);
  auto sim = simulate(jobs_for(schedule, catalog), cores, grid, nm);
  return interval_energy(sim.interval_mass, tgt, denom_floor);
}

Schedule expand_plans(const std::vector<SelectionPlan>& plans, const TimeGrid& grid) {
  Schedule s;
  for (const auto& plan : plans)
    for (const auto& [id, n] : plan.counts)
      for (std::int64_t k = 0; k < n; ++k) s.entries.push_back({plan.window_index, id, k, grid.window_start(plan.window_index)});
  return s;
}

Schedule random_timestamps(const std::vector<SelectionPlan>& plans, const TimeGrid& grid,
                           std::int64_t granularity_ms, std::uint64_t seed) {
  Schedule s = expand_plans(plans, grid);
  const std::int64_t slots = std::max<std::int64_t>(1, grid.window_len_ms / granularity_ms);
  std::mt19937_64 gen(derive_seed(seed, "random_timestamps"));
  std::uniform_int_distribution<std::int64_t> slot(0, slots - 1);
  for (auto& e : s.entries) e.start_ts = grid.window_start(e.window_index) + slot(gen) * granularity_ms;
  return s;
}

namespace {

struct WindowAnnealer {
  const std::vector<Job>& base;
  TimeGrid grid;  // one window
  Eigen::MatrixXd target;
  int cores;
  const AnnealConfig& cfg;
  Eigen::Index nm;

  double eval(const std::vector<std::int64_t>& slots, std::vector<Job>& jobs) const {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      jobs[i].start_ms = static_cast<double>(grid.origin_ts + slots[i] * cfg.granularity_ms);
    auto sim = simulate(jobs, cores, grid, nm);
    return interval_energy(sim.interval_mass, target, cfg.denom_floor);
  }

  std::vector<std::int64_t> run(std::mt19937_64& gen, AnnealReport& report) const {
    const std::size_t n = base.size();
    const std::int64_t slots_per_window = std::max<std::int64_t>(1, grid.window_len_ms / cfg.granularity_ms);
    std::uniform_int_distribution<std::int64_t> slot(0, slots_per_window - 1);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Job> jobs = base;
    std::vector<std::int64_t> cur(n);
    for (auto& s : cur) s = slot(gen);
    double e_cur = eval(cur, jobs);
    report.initial_energy = e_cur;

    double v_max = cfg.v_max, v_min = cfg.v_min;
    if (cfg.auto_temperature) {
      std::vector<double> uphill;
      std::vector<std::int64_t> trial = cur;
      for (int s = 0; s < cfg.tuning_samples; ++s) {
        const std::size_t i = pick(gen);
        const std::int64_t old = trial[i];
        trial[i] = slot(gen);
        const double d = eval(trial, jobs) - e_cur;
        if (d > 0.0) uphill.push_back(d);
        trial[i] = old;
      }
      double m = 0.0;
      if (!uphill.empty()) {
        std::nth_element(uphill.begin(), uphill.begin() + static_cast<long>(uphill.size() / 2), uphill.end());
        m = uphill[uphill.size() / 2];
      }
      if (!(m > 0.0)) m = std::max(1e-12, 1e-3 * e_cur);
      v_max = -m / std::log(cfg.accept_hot);
      v_min = -m / std::log(cfg.accept_cold);
    }
    const double alpha =
        v_max > 0.0 && v_min > 0.0 && cfg.cooling_steps > 0
            ? std::pow(v_min / v_max, 1.0 / static_cast<double>(cfg.cooling_steps))
            : 1.0;
    report.v_max = v_max;
    report.v_min = v_min;
    report.alpha = alpha;

    std::vector<std::int64_t> best = cur;
    double e_best = e_cur;
    double v = v_max;
    std::int64_t stale = 0;
    std::int64_t step = 0;
    for (; step < cfg.step_cap; ++step) {
      const std::size_t i = pick(gen);
      const std::int64_t old = cur[i];
      cur[i] = slot(gen);
      const double e_new = eval(cur, jobs);
      const double delta = e_new - e_cur;
      bool accept = delta <= 0.0;
      if (!accept && v > 0.0) accept = unit(gen) < std::exp(-delta / v);
      if (accept) {
        stale = delta < 0.0 ? 0 : stale + 1;
        e_cur = e_new;
        report.accepted_energy.push_back(e_cur);
        if (e_cur < e_best) {
          e_best = e_cur;
          best = cur;
        }
      } else {
        cur[i] = old;
        ++stale;
      }
      report.best_energy.push_back(e_best);
      v *= alpha;
      if (stale >= cfg.no_improve_steps) {
        ++step;
        break;
      }
    }
    report.steps = step;
    report.final_energy = e_best;
    return best;
  }
};

}  // namespace

Schedule assign_timestamps(const std::vector<SelectionPlan>& plans, const Targets& targets, const Catalog& catalog,
                           int cores, const AnnealConfig& config, std::uint64_t seed,
                           std::vector<AnnealReport>* reports, unsigned jobs) {
  if (cores < 1) throw Error(ErrorKind::Config, "cores must be >= 1");
  if (config.granularity_ms <= 0) throw Error(ErrorKind::Config, "move granularity must be positive");
  const TimeGrid& grid = targets.grid;
  const auto nm = static_cast<Eigen::Index>(catalog.schema().num_metrics());
  const std::size_t ipw = grid.intervals_per_window();
  if (targets.intervals.size() != grid.num_intervals())
    throw Error(ErrorKind::Schema, "interval targets do not cover the grid");

  Schedule schedule = expand_plans(plans, grid);
  // Group entries by window.
  std::vector<std::vector<std::size_t>> by_window(grid.num_windows);
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const auto w = schedule.entries[i].window_index;
    if (w >= grid.num_windows) throw Error(ErrorKind::Validation, fmt::format("plan window {} outside the grid", w));
    by_window[w].push_back(i);
  }
  std::vector<AnnealReport> local(grid.num_windows);
  std::vector<std::exception_ptr> errors(grid.num_windows);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t w = next++; w < grid.num_windows; w = next++) {
      try {
        local[w].window_index = w;
        if (by_window[w].empty()) continue;
        Schedule sub;
        for (auto i : by_window[w]) sub.entries.push_back(schedule.entries[i]);
        const std::vector<Job> base = jobs_for(sub, catalog);
        TimeGrid wg{grid.window_start(w), grid.window_len_ms, grid.interval_len_ms, 1};
        WindowAnnealer annealer{base, wg, target_matrix(targets.intervals, w * ipw, ipw, nm), cores, config, nm};
        std::mt19937_64 gen(derive_seed(seed, "schedule", w));
        const auto best = annealer.run(gen, local[w]);
        for (std::size_t k = 0; k < best.size(); ++k)
          schedule.entries[by_window[w][k]].start_ts = wg.origin_ts + best[k] * config.granularity_ms;
      } catch (...) {
        errors[w] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(grid.num_windows)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (reports) *reports = std::move(local);
  return schedule;
}

}  // namespace wlsynth
