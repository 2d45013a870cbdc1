#include "test_util.hpp"

#include "wlsynth/augmenter.hpp"
#include "wlsynth/error.hpp"
#include "wlsynth/kmeans.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace wlsynth;
using namespace wlsynth::testing;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

QueryRecord query(std::string id, std::int64_t arrival, std::int64_t dur, Eigen::VectorXd m, Eigen::VectorXd o) {
  return {std::move(id), arrival, dur, std::move(m), std::move(o)};
}

GenerationTarget target_of(Eigen::VectorXd m, Eigen::VectorXd o, double duration = 10'000) {
  GenerationTarget t;
  t.target_id = "t0";
  t.feature = PerformanceFeature(std::move(m), std::move(o));
  t.duration_ms = duration;
  t.weight = 1;
  return t;
}

Catalog two_sided_catalog() {
  Catalog cat(small_schema());
  cat.add(make_component("A", 20'000, vec2(10, 100), vec2(1, 0)));
  cat.add(make_component("B", 20'000, vec2(100, 10), vec2(0, 1)));
  return cat;
}

class FailingProvider : public Provider {
 public:
  std::string complete(const std::string&) override { throw Error(ErrorKind::Provider, "connection refused"); }
};

// First answer cannot be profiled; later answers hit the target.
class FlakyProvider : public Provider {
 public:
  explicit FlakyProvider(FeatureSchema s) : inner_(std::move(s), {}) {}
  std::string complete(const std::string& prompt) override {
    return calls_++ == 0 ? std::string("SELECT broken") : inner_.complete(prompt);
  }

 private:
  MockProvider inner_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("k-means: single cluster is the mean") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 9;
  auto r = kmeans(x, 1, 1);
  REQUIRE(r.centroids.rows() == 1);
  CHECK(r.centroids(0, 0) == doctest::Approx(4.0));
  CHECK(r.centroids(0, 1) == doctest::Approx(5.25));
}

TEST_CASE("k-means: separated blobs") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd x(60, 3);
  Eigen::RowVectorXd m0 = Eigen::RowVectorXd::Zero(3), m1 = Eigen::RowVectorXd::Zero(3);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const double base = i < 30 ? 0.0 : 1000.0;
    for (Eigen::Index c = 0; c < 3; ++c) x(i, c) = base + noise(gen);
    (i < 30 ? m0 : m1) += x.row(i) / 30.0;
  }
  auto r = kmeans(x, 2, 9);
  REQUIRE(r.centroids.rows() == 2);
  const Eigen::Index lo = r.centroids(0, 0) < r.centroids(1, 0) ? 0 : 1;
  CHECK((r.centroids.row(lo) - m0).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((r.centroids.row(1 - lo) - m1).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("generation targets from identical queries") {
  std::vector<QueryRecord> qs;
  for (int i = 0; i < 5; ++i) qs.push_back(query("q", i, 1000, vec2(3, 4), vec2(1, 1)));
  auto t = find_generation_targets(qs, small_schema(), {0, 0, 1, 1, 1}, 3, 1);
  REQUIRE(t.size() == 1);
  CHECK(t[0].weight == 5);
  CHECK(t[0].feature.metrics == vec2(3, 4));
  CHECK(t[0].duration_ms == 1000.0);
  CHECK(t[0].source_windows == std::vector<std::size_t>{0, 1});
}

TEST_CASE("example retrieval") {
  SUBCASE("two components") {
    auto cat = two_sided_catalog();
    auto ex = retrieve_examples(PerformanceFeature(vec2(12, 90), vec2(1, 0)), cat, 1);
    REQUIRE(ex.positives.size() == 1);
    REQUIRE(ex.negatives.size() == 1);
    CHECK(ex.positives[0].component_id == "A");
    CHECK(ex.negatives[0].component_id == "B");
  }
  SUBCASE("duplicate is the top positive") {
    auto cat = two_sided_catalog();
    auto ex = retrieve_examples(cat[1].feature, cat, 3);
    CHECK(ex.positives[0].component_id == "B");
    CHECK(ex.positives[0].distance == 0.0);
    CHECK(ex.positives.size() == 2);
    CHECK(ex.negatives.empty());
  }
  SUBCASE("matches a sorted-distance oracle") {
    std::mt19937_64 gen(12);
    auto cat = random_integer_catalog(gen, 50);
    const Eigen::MatrixXd f = cat.feature_matrix();
    const Eigen::VectorXd mean = f.rowwise().mean();
    for (int trial = 0; trial < 10; ++trial) {
      PerformanceFeature t(vec2(gen() % 10, gen() % 10), vec2(gen() % 10, gen() % 10));
      std::vector<std::pair<double, std::string>> oracle;
      for (std::size_t j = 0; j < cat.size(); ++j) {
        double s = 0.0;
        for (Eigen::Index d = 0; d < 4; ++d) {
          double sd = std::sqrt((f.row(d).array() - mean(d)).square().mean());
          if (sd == 0.0) sd = 1.0;
          s += std::pow((f(d, static_cast<Eigen::Index>(j)) - t.stacked()(d)) / sd, 2);
        }
        oracle.emplace_back(std::sqrt(s), cat[j].component_id);
      }
      std::sort(oracle.begin(), oracle.end());
      auto ex = retrieve_examples(t, cat, 3);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ex.positives[i].component_id == oracle[i].second);
        CHECK(ex.negatives[i].component_id == oracle[oracle.size() - 1 - i].second);
      }
    }
  }
  CHECK_THROWS_AS(retrieve_examples(PerformanceFeature(vec2(0, 0), vec2(0, 0)), Catalog(small_schema()), 1), Error);
}

TEST_CASE("prompt construction") {
  auto cat = two_sided_catalog();
  auto t = target_of(vec2(50, 50), vec2(1, 1));
  auto ex = retrieve_examples(t.feature, cat, 1);
  auto db = choose_database(ex, cat);
  CHECK(db.benchmark_name == "tpch");
  auto plain = build_prompt(t, ex, cat, db, {});
  CHECK(plain.find("HINTS") == std::string::npos);
  CHECK(plain.find("lineitem") != std::string::npos);
  CHECK(plain.find("learn the query patterns") != std::string::npos);
  CHECK(plain.find("avoid the query patterns") != std::string::npos);
  auto hinted = build_prompt(t, ex, cat, db, hint_scenario(Scenario::LowCpuLowSb).hint_texts);
  CHECK(hinted.find("HINTS") != std::string::npos);
  CHECK(hinted.find("performs computation on a larger table") != std::string::npos);
  CHECK(hinted == build_prompt(t, ex, cat, db, hint_scenario(Scenario::LowCpuLowSb).hint_texts));
}

TEST_CASE("gap classification") {
  const auto schema = small_schema();
  auto f = [](double cpu, double sb) { return PerformanceFeature(vec2(cpu, sb), vec2(0, 0)); };
  const auto target = f(100, 100);
  CHECK(classify_gap(schema, target, f(100, 100)).accepted());
  CHECK(classify_gap(schema, target, f(110, 88)).accepted());
  CHECK(classify_gap(schema, target, f(50, 50)).scenario == Scenario::BothLowOrHigh);
  CHECK(classify_gap(schema, target, f(150, 150)).scenario == Scenario::BothLowOrHigh);
  CHECK(classify_gap(schema, target, f(70, 70)).scenario == Scenario::LowCpuLowSb);
  CHECK(classify_gap(schema, target, f(150, 50)).scenario == Scenario::HighCpuLowSb);
  CHECK(classify_gap(schema, target, f(50, 150)).scenario == Scenario::LowCpuHighSb);
  CHECK(classify_gap(schema, target, f(60, 100)).scenario == Scenario::RatioOff);
  // Every pair maps to exactly one verdict.
  for (int i = -25; i <= 50; ++i)
    for (int k = -25; k <= 50; ++k) {
      const double dc = 0.04 * i, ds = 0.04 * k;
      auto g = classify_gap(schema, target, f(100 * (1 + dc), 100 * (1 + ds)));
      CHECK(g.accepted() == (std::abs(dc) <= 0.15 && std::abs(ds) <= 0.15));
    }
  FeatureSchema other{{"latency", "memory"}, {"a", "b"}};
  CHECK_THROWS_AS(classify_gap(other, target, target), Error);
}

TEST_CASE("generation: exact catalog query accepted on the first attempt") {
  auto cat = two_sided_catalog();
  SimulatedExecutor exec(cat.schema(), {});
  exec.load(cat);
  MockProvider provider(cat.schema(), {MockProvider::Policy::CopyTopPositive, 1.0, 1.0});
  auto r = generate_component(target_of(cat[0].feature.metrics, cat[0].feature.operators), cat, provider, exec, {});
  REQUIRE(r.component);
  CHECK(r.attempts.size() == 1);
  CHECK(r.component->query_ref == "A");
  CHECK(r.component->origin == ComponentOrigin::Augmented);
}

TEST_CASE("generation: geometric convergence from a 4x gap") {
  auto cat = two_sided_catalog();
  SimulatedExecutor exec(cat.schema(), {});
  MockProvider provider(cat.schema(), {MockProvider::Policy::Converge, 4.0, 0.6});
  auto t = target_of(vec2(50, 50), vec2(1, 1));
  auto r = generate_component(t, cat, provider, exec, {});
  REQUIRE(r.component);
  CHECK(r.attempts.size() <= 5);
  CHECK(r.database_switches == 0);
  CHECK(r.attempts.front().gap.scenario == Scenario::BothLowOrHigh);
  CHECK(r.attempts.back().verdict == Verdict::Accepted);
  CHECK(std::abs(r.component->feature.metrics(0) / 50.0 - 1.0) <= 0.15);
  CHECK(r.attempts[1].prompt.find("Scale Factor") != std::string::npos);
}

TEST_CASE("generation: clamped database forces exactly one switch") {
  auto cat = two_sided_catalog();
  SimulatedExecutor::Options opts;
  opts.metric_cap_per_sf = {20.0, 20.0};
  SimulatedExecutor exec(cat.schema(), opts);
  MockProvider provider(cat.schema(), {MockProvider::Policy::Converge, 1.0, 1.0});
  auto r = generate_component(target_of(vec2(50, 50), vec2(1, 1)), cat, provider, exec, {});
  REQUIRE(r.component);
  CHECK(r.database_switches == 1);
  CHECK(r.attempts.size() == 6);
  CHECK(r.attempts[4].verdict == Verdict::DatabaseSwitch);
  CHECK(r.component->database.scale_factor == 10.0);
}

TEST_CASE("generation: exhaustion returns a failure report") {
  auto cat = two_sided_catalog();
  SimulatedExecutor::Options opts;
  opts.metric_cap_per_sf = {1e-3, 1e-3};
  SimulatedExecutor exec(cat.schema(), opts);
  MockProvider provider(cat.schema(), {MockProvider::Policy::Converge, 1.0, 1.0});
  AugmentConfig cfg;
  cfg.max_attempts = 2;
  cfg.max_db_switches = 1;
  auto r = generate_component(target_of(vec2(50, 50), vec2(1, 1)), cat, provider, exec, cfg);
  CHECK(!r.component);
  CHECK(r.attempts.size() == 4);
  CHECK(r.database_switches == 1);
  CHECK(!r.failure.empty());
}

TEST_CASE("generation: provider and executor failures") {
  auto cat = two_sided_catalog();
  SimulatedExecutor exec(cat.schema(), {});
  FailingProvider failing;
  try {
    generate_component(target_of(vec2(50, 50), vec2(1, 1)), cat, failing, exec, {});
    FAIL("expected a provider error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Provider);
    CHECK(std::string(e.what()).find("attempt 0") != std::string::npos);
  }
  FlakyProvider flaky(cat.schema());
  auto r = generate_component(target_of(vec2(50, 50), vec2(1, 1)), cat, flaky, exec, {});
  REQUIRE(r.component);
  REQUIRE(r.attempts.size() == 2);
  CHECK(r.attempts[0].verdict == Verdict::Failed);
  CHECK(!r.attempts[0].error.empty());
}

TEST_CASE("augmentation closes a planted gap") {
  auto cat = two_sided_catalog();
  Trace tr;
  tr.schema = cat.schema();
  for (int i = 0; i < 4; ++i) tr.records.push_back(query("q" + std::to_string(i), i * 60'000, 20'000, vec2(50, 50), vec2(1, 1)));
  // A second window the catalog fits exactly.
  tr.records.push_back(query("q4", 300'000, 20'000, vec2(10, 100), vec2(1, 0)));
  auto targets = build_targets(tr, 300'000, 30'000);
  SelectionConstraints sc;
  auto before = solve_all_windows(targets, cat, sc);
  REQUIRE(before[0].objective > 0.2);
  CHECK(before[1].objective <= 1e-9);

  SimulatedExecutor exec(cat.schema(), {});
  MockProvider provider(cat.schema(), {});
  auto res = augment_catalog(tr, targets, before, cat, provider, exec, {}, 7);
  CHECK(res.bad_windows == std::vector<std::size_t>{0});
  REQUIRE(res.added.size() == 1);
  CHECK(res.catalog.at(res.added[0]).origin == ComponentOrigin::Augmented);
  auto after = solve_all_windows(targets, res.catalog, sc, &before);
  CHECK(after[0].objective <= 0.1 * before[0].objective);
  CHECK(after[1].objective <= before[1].objective + 1e-12);

  auto jsonl = export_attempts_jsonl(res.results, cat.schema());
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 1);
  CHECK(jsonl.find("\"verdict\":\"accepted\"") != std::string::npos);
  CHECK(jsonl.find("\"prompt_hash\"") != std::string::npos);

  // Nothing to do when every window fits.
  auto none = augment_catalog(tr, targets, after, res.catalog, provider, exec, {}, 7);
  CHECK(none.added.empty());
  CHECK(none.catalog.size() == res.catalog.size());
}

TEST_CASE("re-solving with extra components never worsens a window") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> val(0, 30);
  for (int trial = 0; trial < 10; ++trial) {
    auto cat = random_integer_catalog(gen, 4);
    Targets t;
    t.schema = cat.schema();
    t.grid = {0, 300'000, 30'000, 3};
    for (std::size_t w = 0; w < 3; ++w) {
      WindowTarget wt;
      wt.window_index = w;
      wt.window_start_ts = t.grid.window_start(w);
      wt.window_len_ms = t.grid.window_len_ms;
      wt.feature = PerformanceFeature(vec2(val(gen), val(gen)), vec2(val(gen), val(gen)));
      wt.query_count = 3;
      t.windows.push_back(wt);
    }
    SelectionConstraints sc;
    sc.max_repetitions = 3;
    auto before = solve_all_windows(t, cat, sc);
    Catalog bigger = cat;
    auto extra = random_integer_catalog(gen, 3);
    for (std::size_t j = 0; j < extra.size(); ++j) {
      auto c = extra[j];
      c.component_id = "x" + c.component_id;
      bigger.add(c);
    }
    auto after = solve_all_windows(t, bigger, sc, &before);
    for (std::size_t w = 0; w < 3; ++w) CHECK(after[w].objective <= before[w].objective + 1e-9);
  }
}
