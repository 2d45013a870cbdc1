#include "test_util.hpp"

#include "wlsynth/catalog.hpp"
#include "wlsynth/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace wlsynth;
using namespace wlsynth::testing;

namespace {

const FeatureSchema kWorked{{"cpu_time", "scanned_bytes"}, {"filter_num", "aggregate_num"}};

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Replays a fixed list of cpu values, one per run.
class SequenceExecutor : public Executor {
 public:
  explicit SequenceExecutor(std::vector<double> cpu, int fail_on = -1) : cpu_(std::move(cpu)), fail_on_(fail_on) {}
  ExecutionResult run(const std::string&, const DatabaseDescriptor&, int run_index) override {
    if (run_index == fail_on_) throw Error(ErrorKind::Io, "connection lost");
    ExecutionResult r;
    r.duration_ms = 100.0 * (run_index + 1);
    r.feature = PerformanceFeature(vec2(cpu_[static_cast<std::size_t>(run_index)], 1.0), vec2(1, 0));
    return r;
  }

 private:
  std::vector<double> cpu_;
  int fail_on_;
};

}  // namespace

TEST_CASE("load the fixture catalog") {
  auto cat = load_catalog(std::filesystem::path(WLSYNTH_DATA_DIR) / "fixtures" / "worked_example_catalog.csv", kWorked);
  CHECK(cat.size() == 5);
  CHECK(cat.at("C4").database.scale_factor == 10.0);
  CHECK(cat.at("C5").database.skewness == 2);
  CHECK(cat.at("C3").database.benchmark_name == "tpcds");
  CHECK(cat.at("C1").query_ref == "C1");
  CHECK(!cat.at("C1").database.schema_summary.empty());
  CHECK(cat.feature_matrix().cols() == 5);
  CHECK(cat.feature_matrix().rows() == 4);
  CHECK(cat.databases().size() == 4);
  CHECK_THROWS_AS(cat.at("C9"), Error);
}

TEST_CASE("four-component catalog") {
  const std::string text =
      "component_id,benchmark,scale_factor,skewness,duration_ms,cpu_time,scanned_bytes,filter_num,aggregate_num\n"
      "a,tpch,1,0,10,1,2,3,4\nb,tpch,1,0,10,1,2,3,4\nc,tpcds,1,0,10,1,2,3,4\nd,tpch,100,1,10,1,2,3,4\n";
  auto cat = parse_catalog(text, kWorked);
  CHECK(cat.size() == 4);
  auto lineitem = [](const DatabaseDescriptor& db) {
    for (const auto& t : db.schema_summary)
      if (t.name == "lineitem") return t.row_count;
    return std::int64_t{-1};
  };
  CHECK(lineitem(cat.at("d").database) == 100 * lineitem(cat.at("a").database));
}

TEST_CASE("catalog validation") {
  const std::string dup =
      "component_id,benchmark,scale_factor,skewness,duration_ms,cpu_time,scanned_bytes,filter_num,aggregate_num\n"
      "a,tpch,1,0,10,1,2,3,4\nzz,tpch,1,0,10,1,2,3,4\nzz,tpch,1,0,10,1,2,3,4\n";
  try {
    parse_catalog(dup, kWorked);
    FAIL("expected a duplicate-id error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  Catalog cat(small_schema());
  Eigen::VectorXd three(3);
  three << 1, 2, 3;
  CHECK_THROWS_AS(cat.add(make_component("x", 10, three, vec2(0, 0))), Error);
  CHECK_THROWS_AS(cat.add(make_component("y", 0, vec2(1, 1), vec2(0, 0))), Error);
  CHECK_THROWS_AS(describe_database("tpch", -1.0, 0), Error);
}

TEST_CASE("catalog export round trip") {
  std::mt19937_64 gen(8);
  auto cat = random_integer_catalog(gen, 25, 1000);
  auto& c = cat.mutable_component(3);
  c.origin = ComponentOrigin::Augmented;
  c.query_ref = "SELECT a, \"b\"\nFROM t, u";
  c.feature.metrics(0) = 0.1 + 0.2;
  auto path = std::filesystem::temp_directory_path() / "wlsynth_test_catalog" / "c.csv";
  write_catalog(path, cat, {true, true});
  auto back = load_catalog(path, cat.schema());
  REQUIRE(back.size() == cat.size());
  for (std::size_t j = 0; j < cat.size(); ++j) {
    CHECK(back[j].feature == cat[j].feature);
    CHECK(back[j].duration_ms == cat[j].duration_ms);
    CHECK(back[j].origin == cat[j].origin);
    CHECK(back[j].query_ref == cat[j].query_ref);
  }
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("profiling averages runs") {
  WorkloadComponent c = make_component("p", 1, vec2(0, 0), vec2(0, 0));
  c.query_ref = "p";
  SequenceExecutor constant({10, 10, 10});
  profile_component(c, constant);
  CHECK(c.feature.metrics(0) == 10.0);

  SequenceExecutor varying({8, 10, 12});
  auto r = profile_component(c, varying);
  CHECK(r.feature.metrics(0) == doctest::Approx(10.0));
  CHECK(c.duration_ms == doctest::Approx(200.0));
  CHECK(*c.duration_min_ms == 100.0);
  CHECK(*c.duration_max_ms == 300.0);

  const auto before = c.feature;
  SequenceExecutor failing({1, 1, 1}, 1);
  try {
    profile_component(c, failing);
    FAIL("expected a profiling error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Profiling);
    CHECK(std::string(e.what()).find("run 1") != std::string::npos);
  }
  CHECK(c.feature == before);
}

TEST_CASE("noisy simulated profiling stays near the truth") {
  std::mt19937_64 gen(31);
  auto truth = random_integer_catalog(gen, 20, 100);
  for (std::size_t j = 0; j < truth.size(); ++j) truth.mutable_component(j).feature.metrics.array() += 50.0;
  const double sigma = 0.05;
  SimulatedExecutor exec(truth.schema(), {sigma, 99, {}});
  exec.load(truth);
  int within = 0, total = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    WorkloadComponent c = truth[j];
    profile_component(c, exec);
    for (Eigen::Index h = 0; h < 2; ++h) {
      const double t = truth[j].feature.metrics(h);
      ++total;
      if (std::abs(c.feature.metrics(h) - t) <= 3.0 * sigma * t / std::sqrt(3.0)) ++within;
    }
  }
  CHECK(within >= 0.95 * total);
}

TEST_CASE("profile annotations") {
  ExecutionResult r;
  r.duration_ms = 1500;
  r.feature = PerformanceFeature(vec2(12.5, 3), vec2(2, 0));
  const auto text = "SELECT 1 " + format_profile_annotation(r, small_schema());
  auto back = parse_profile_annotation(text, small_schema());
  REQUIRE(back);
  CHECK(back->duration_ms == 1500.0);
  CHECK(back->feature == r.feature);
  CHECK(!parse_profile_annotation("SELECT 1", small_schema()));

  SimulatedExecutor capped(small_schema(), {0.0, 0, {10.0, 0.0}});
  auto run = capped.run(text, describe_database("tpch", 1.0, 0), 0);
  CHECK(run.feature.metrics(0) == 10.0);
  CHECK(run.feature.metrics(1) == 3.0);
  run = capped.run(text, describe_database("tpch", 10.0, 0), 0);
  CHECK(run.feature.metrics(0) == 12.5);
  CHECK_THROWS_AS(capped.run("SELECT unknown", describe_database("tpch", 1.0, 0), 0), Error);
}
