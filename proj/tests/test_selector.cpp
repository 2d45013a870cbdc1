#include "test_util.hpp"

#include "wlsynth/error.hpp"
#include "wlsynth/selector.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace wlsynth;
using namespace wlsynth::testing;

namespace {

/// Objective recomputed from scratch on an explicit count vector.
double reference_objective(const Catalog& cat, const PerformanceFeature& target, const std::vector<int>& x,
                           double eps) {
  const Eigen::VectorXd t = target.stacked();
  double total = 0.0;
  for (Eigen::Index d = 0; d < t.size(); ++d) {
    double achieved = 0.0;
    for (std::size_t j = 0; j < cat.size(); ++j) achieved += x[j] * cat[j].feature.stacked()(d);
    total += std::abs(achieved - t(d)) / std::max(t(d), eps);
  }
  return total;
}

/// Exhaustive optimum over x in [0, y]^v with sum x <= z and sum x T <= l.
double enumerate_optimum(const Catalog& cat, const PerformanceFeature& target, int y, int z, double l, double eps) {
  const std::size_t v = cat.size();
  std::vector<int> x(v, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int, double)> rec = [&](std::size_t j, int used, double dur) {
    if (j == v) {
      best = std::min(best, reference_objective(cat, target, x, eps));
      return;
    }
    for (int k = 0; k <= y && used + k <= z; ++k) {
      const double d = dur + k * cat[j].duration_ms;
      if (d > l + 1e-9) break;
      x[j] = k;
      rec(j + 1, used + k, d);
    }
    x[j] = 0;
  };
  rec(0, 0, 0.0);
  return best;
}

SelectionProblem problem_for(const Catalog& cat, const PerformanceFeature& target, int y, int z, double l,
                             double eps = 1.0) {
  SelectionProblem p;
  p.target = target;
  p.catalog = &cat;
  p.max_repetitions = y;
  p.max_total = z;
  p.duration_budget_ms = l;
  p.denom_floor = Eigen::VectorXd::Constant(target.size(), eps);
  return p;
}

void check_constraints(const SelectionPlan& plan, const SelectionProblem& p) {
  std::int64_t total = 0;
  double dur = 0.0;
  Eigen::VectorXd achieved = Eigen::VectorXd::Zero(p.target.size());
  for (const auto& [id, n] : plan.counts) {
    CHECK(n >= 1);
    CHECK(n <= p.max_repetitions);
    total += n;
    dur += static_cast<double>(n) * p.catalog->at(id).duration_ms;
    achieved += static_cast<double>(n) * p.catalog->at(id).feature.stacked();
  }
  CHECK(total <= p.max_total);
  CHECK(dur <= p.duration_budget_ms + 1e-9 * std::max(1.0, p.duration_budget_ms));
  CHECK((achieved - plan.achieved.stacked()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + achieved.cwiseAbs().maxCoeff()));
}

PerformanceFeature random_target(std::mt19937_64& gen, int max_value) {
  std::uniform_int_distribution<int> val(0, max_value);
  Eigen::VectorXd m(2), o(2);
  m << val(gen), val(gen);
  o << val(gen), val(gen);
  return {m, o};
}

}  // namespace

TEST_CASE("worked example: targets (20, 20, 34, 2)") {
  FeatureSchema schema{{"cpu_time", "scanned_bytes"}, {"filter_num", "aggregate_num"}};
  Catalog cat = load_catalog(WLSYNTH_DATA_DIR "/fixtures/worked_example_catalog.csv", schema);
  Eigen::VectorXd m(2), o(2);
  m << 20, 20;
  o << 34, 2;
  auto p = problem_for(cat, {m, o}, 10, 40, 300'000.0 * 4);
  auto plan = solve_window(p);
  CHECK_FALSE(plan.approximate);
  // 4 x C1 + 2 x C2 gives (19.8, 20, 34, 2), objective 0.2 / 20.
  CHECK(plan.objective <= 0.01 + 1e-12);
  CHECK(plan.objective == doctest::Approx(enumerate_optimum(cat, {m, o}, 10, 40, 1.2e6, 1.0)).epsilon(1e-12));
  check_constraints(plan, p);
}

TEST_CASE("exact match component is selected once") {
  std::mt19937_64 gen(7);
  Catalog cat = random_integer_catalog(gen, 5);
  Eigen::VectorXd m(2), o(2);
  m << 11.5, 3.25;
  o << 2, 1;
  cat.add(make_component("exact", 5000, m, o));
  auto plan = solve_window(problem_for(cat, {m, o}, 3, 5, 1e6));
  CHECK(plan.objective == 0.0);
  REQUIRE(plan.counts.size() == 1);
  CHECK(plan.counts[0].first == "exact");
  CHECK(plan.counts[0].second == 1);
}

TEST_CASE("all-zero target yields the empty plan") {
  std::mt19937_64 gen(3);
  Catalog cat = random_integer_catalog(gen, 4, 9);
  auto plan = solve_window(problem_for(cat, PerformanceFeature::zero(cat.schema()), 3, 8, 1e6));
  CHECK(plan.objective == 0.0);
  for (const auto& c : plan.counts) CHECK(c.second == 0);
}

TEST_CASE("5 components, y=3, z=8: objective equals exhaustive enumeration") {
  std::mt19937_64 gen(20240501);
  for (int trial = 0; trial < 40; ++trial) {
    Catalog cat = random_integer_catalog(gen, 5);
    auto target = random_target(gen, 40);
    const double l = 120'000.0;
    auto p = problem_for(cat, target, 3, 8, l);
    auto plan = solve_window(p);
    CAPTURE(trial);
    CHECK_FALSE(plan.approximate);
    CHECK(std::abs(plan.objective - enumerate_optimum(cat, target, 3, 8, l, 1.0)) <= 1e-9);
    check_constraints(plan, p);
  }
}

TEST_CASE("relaxing y or z never increases the optimum") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    Catalog cat = random_integer_catalog(gen, 5);
    auto target = random_target(gen, 30);
    const double tight = solve_window(problem_for(cat, target, 1, 3, 1e6)).objective;
    const double more_y = solve_window(problem_for(cat, target, 3, 3, 1e6)).objective;
    const double more_z = solve_window(problem_for(cat, target, 1, 6, 1e6)).objective;
    CHECK(more_y <= tight + 1e-9);
    CHECK(more_z <= tight + 1e-9);
  }
}

TEST_CASE("scaling targets and features leaves the optimal counts optimal") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 15; ++trial) {
    Catalog cat = random_integer_catalog(gen, 5);
    auto target = random_target(gen, 30);
    target.metrics.array() += 1.0;  // keep every denominator above the floor
    target.operators.array() += 1.0;
    auto base = solve_window(problem_for(cat, target, 3, 8, 1e6));

    Catalog scaled(cat.schema());
    for (const auto& c : cat.components()) {
      auto s = c;
      s.feature.metrics *= 7.5;
      s.feature.operators *= 7.5;
      scaled.add(s);
    }
    PerformanceFeature st{target.metrics * 7.5, target.operators * 7.5};
    auto sp = solve_window(problem_for(scaled, st, 3, 8, 1e6));
    CHECK(sp.objective == doctest::Approx(base.objective).epsilon(1e-9));
    std::vector<int> x(cat.size(), 0);
    for (const auto& [id, n] : sp.counts) x[*cat.index_of(id)] = static_cast<int>(n);
    CHECK(reference_objective(cat, target, x, 1.0) == doctest::Approx(base.objective).epsilon(1e-9));
  }
}

TEST_CASE("duration budget binds") {
  Catalog cat(small_schema());
  Eigen::VectorXd m(2), o(2);
  m << 10, 10;
  o << 1, 1;
  cat.add(make_component("long", 100'000, m, o));
  PerformanceFeature target{m * 5, o * 5};
  auto plan = solve_window(problem_for(cat, target, 10, 10, 250'000));
  CHECK(plan.count_of("long") == 2);
}

TEST_CASE("invalid problems are rejected") {
  std::mt19937_64 gen(1);
  Catalog cat = random_integer_catalog(gen, 3);
  auto target = random_target(gen, 10);
  auto p = problem_for(cat, target, 0, 5, 1e6);
  CHECK_THROWS_AS(solve_window(p), Error);
  p = problem_for(cat, target, 2, 0, 1e6);
  CHECK_THROWS_AS(solve_window(p), Error);
  p = problem_for(cat, target, 2, 2, 1e6, 0.0);
  CHECK_THROWS_AS(solve_window(p), Error);
}

TEST_CASE("node budget exhaustion returns a flagged incumbent") {
  std::mt19937_64 gen(11);
  Catalog cat = random_integer_catalog(gen, 12, 50);
  auto target = random_target(gen, 400);
  auto p = problem_for(cat, target, 10, 60, 1e9);
  p.budget.node_limit = 3;
  auto plan = solve_window(p);
  CHECK(plan.approximate);
  check_constraints(plan, p);
}

TEST_CASE("time-share operators use duration-weighted shares") {
  FeatureSchema schema{{"cpu_time_ms"}, {"scan_share", "join_share"}};
  Catalog cat(schema);
  Eigen::VectorXd m(1), a(2), b(2);
  m << 10;
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  cat.add(make_component("scan", 10'000, m, a));
  cat.add(make_component("join", 30'000, m, b));
  SelectionProblem p;
  Eigen::VectorXd tm(1), to(2);
  tm << 40;
  to << 0.5, 0.5;  // equal time in both operators
  p.target = {tm, to};
  p.catalog = &cat;
  p.max_repetitions = 10;
  p.max_total = 10;
  p.duration_budget_ms = 1e9;
  p.denom_floor = Eigen::VectorXd::Constant(3, 1e-3);
  p.mode = OperatorMode::TimeShares;
  p.target_busy_ms = 120'000;
  auto plan = solve_window(p);
  // 3 x scan (30 s) + 1 x join (30 s): cpu 40, shares 0.5 / 0.5.
  CHECK(plan.count_of("scan") == 3);
  CHECK(plan.count_of("join") == 1);
  CHECK(plan.objective == doctest::Approx(0.0));
  CHECK(plan.achieved.operators(0) == doctest::Approx(0.5));
}

TEST_CASE("solve_all_windows: identical windows give identical plans") {
  std::mt19937_64 gen(17);
  Catalog cat = random_integer_catalog(gen, 5);
  Targets t;
  t.schema = cat.schema();
  t.grid.num_windows = 2;
  auto target = random_target(gen, 30);
  for (std::size_t w = 0; w < 2; ++w) {
    WindowTarget wt;
    wt.window_index = w;
    wt.window_len_ms = 300'000;
    wt.feature = target;
    wt.query_count = 4;
    t.windows.push_back(wt);
  }
  SelectionConstraints c;
  c.max_repetitions = 3;
  auto plans = solve_all_windows(t, cat, c);
  REQUIRE(plans.size() == 2);
  CHECK(plans[0].counts == plans[1].counts);
  CHECK(plans[0].objective == plans[1].objective);
}

TEST_CASE("solve_all_windows recovers planted plans on 12 windows") {
  std::mt19937_64 gen(4242);
  Catalog cat(small_schema());
  std::uniform_real_distribution<double> metric(1.0, 100.0);
  std::uniform_int_distribution<int> op(0, 6);
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd m(2), o(2);
    m << metric(gen), metric(gen);
    o << op(gen), op(gen);
    cat.add(make_component("p" + std::to_string(j), 10'000 + 1000 * j, m, o));
  }
  std::uniform_int_distribution<int> cnt(0, 3);
  Targets t;
  t.schema = cat.schema();
  t.grid.num_windows = 12;
  std::vector<Eigen::VectorXd> planted;
  for (std::size_t w = 0; w < 12; ++w) {
    Eigen::VectorXd x(5);
    for (int j = 0; j < 5; ++j) x(j) = cnt(gen);
    planted.push_back(x);
    WindowTarget wt;
    wt.window_index = w;
    wt.window_len_ms = 300'000;
    wt.feature = achieved_feature(cat, x, OperatorMode::Counts);
    wt.query_count = static_cast<std::int64_t>(x.sum());
    t.windows.push_back(wt);
  }
  SelectionConstraints c;
  c.max_repetitions = 3;
  c.jobs = 3;
  auto plans = solve_all_windows(t, cat, c);
  for (std::size_t w = 0; w < 12; ++w) {
    CAPTURE(w);
    CHECK(plans[w].objective <= 1e-9);
    CHECK((plans[w].achieved.stacked() - t.windows[w].feature.stacked()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("match_query") {
  std::mt19937_64 gen(8);
  Catalog cat = random_integer_catalog(gen, 8);
  SelectionConstraints c;
  c.max_repetitions = 10;

  SUBCASE("exact duplicate found one-to-one at distance 0") {
    const auto& dup = cat[5];
    auto m = match_query(dup.feature, dup.duration_ms, cat, QueryLevelMode::OneToOne, 1, c);
    CHECK(m.distance == 0.0);
    REQUIRE(m.plan.counts.size() == 1);
    CHECK(cat.at(m.plan.counts[0].first).feature == dup.feature);
  }
  SUBCASE("one-to-many never worse than one-to-one") {
    std::uniform_real_distribution<double> val(0.0, 25.0);
    for (int q = 0; q < 100; ++q) {
      Eigen::VectorXd m(2), o(2);
      m << val(gen), val(gen);
      o << std::round(val(gen) / 4), std::round(val(gen) / 4);
      PerformanceFeature f{m, o};
      auto one = match_query(f, 1000, cat, QueryLevelMode::OneToOne, 3, c);
      auto many = match_query(f, 1000, cat, QueryLevelMode::OneToMany, 3, c);
      CHECK(many.plan.objective <= one.plan.objective + 1e-12);
    }
  }
  SUBCASE("empty catalog is an error") {
    Catalog empty(small_schema());
    CHECK_THROWS_AS(match_query(cat[0].feature, 1.0, empty, QueryLevelMode::OneToOne, 1, c), Error);
  }
}
