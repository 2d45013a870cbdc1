#include "wlsynth/catalog.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/error.hpp"
#include "wlsynth/rng.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace wlsynth {

namespace {

struct BuiltinTable {
  const char* name;
  std::int64_t rows_sf1;
  bool scales;
  std::vector<std::string> columns;
};

const std::vector<BuiltinTable>& tpch_tables() {
  static const std::vector<BuiltinTable> tables{
      {"region", 5, false, {"r_regionkey", "r_name", "r_comment"}},
      {"nation", 25, false, {"n_nationkey", "n_name", "n_regionkey", "n_comment"}},
      {"supplier", 10'000, true, {"s_suppkey", "s_name", "s_address", "s_nationkey", "s_acctbal"}},
      {"customer", 150'000, true, {"c_custkey", "c_name", "c_nationkey", "c_acctbal", "c_mktsegment"}},
      {"part", 200'000, true, {"p_partkey", "p_name", "p_brand", "p_type", "p_size", "p_retailprice"}},
      {"partsupp", 800'000, true, {"ps_partkey", "ps_suppkey", "ps_availqty", "ps_supplycost"}},
      {"orders", 1'500'000, true,
       {"o_orderkey", "o_custkey", "o_orderstatus", "o_totalprice", "o_orderdate", "o_orderpriority"}},
      {"lineitem", 6'001'215, true,
       {"l_orderkey", "l_partkey", "l_suppkey", "l_quantity", "l_extendedprice", "l_discount", "l_tax",
        "l_returnflag", "l_shipdate"}},
  };
  return tables;
}

const std::vector<BuiltinTable>& tpcds_tables() {
  static const std::vector<BuiltinTable> tables{
      {"date_dim", 73'049, false, {"d_date_sk", "d_date", "d_year", "d_moy", "d_dow"}},
      {"store", 12, false, {"s_store_sk", "s_store_name", "s_state"}},
      {"promotion", 300, false, {"p_promo_sk", "p_channel_tv", "p_cost"}},
      {"item", 18'000, false, {"i_item_sk", "i_brand", "i_category", "i_current_price"}},
      {"customer_demographics", 1'920'800, false, {"cd_demo_sk", "cd_gender", "cd_marital_status"}},
      {"customer_address", 50'000, true, {"ca_address_sk", "ca_state", "ca_country"}},
      {"customer", 100'000, true, {"c_customer_sk", "c_current_addr_sk", "c_birth_year"}},
      {"inventory", 11'745'000, true, {"inv_date_sk", "inv_item_sk", "inv_quantity_on_hand"}},
      {"web_returns", 71'763, true, {"wr_item_sk", "wr_return_amt"}},
      {"web_sales", 719'384, true, {"ws_sold_date_sk", "ws_item_sk", "ws_quantity", "ws_net_paid"}},
      {"catalog_returns", 144'067, true, {"cr_item_sk", "cr_return_amount"}},
      {"catalog_sales", 1'441'548, true, {"cs_sold_date_sk", "cs_item_sk", "cs_quantity", "cs_net_paid"}},
      {"store_returns", 287'514, true, {"sr_item_sk", "sr_return_amt"}},
      {"store_sales", 2'880'404, true,
       {"ss_sold_date_sk", "ss_item_sk", "ss_customer_sk", "ss_store_sk", "ss_quantity", "ss_net_paid"}},
  };
  return tables;
}

}  // namespace

std::string DatabaseDescriptor::key() const {
  return fmt::format("{}/sf={}/skew={}", benchmark_name, scale_factor, skewness);
}

void DatabaseDescriptor::validate() const {
  if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
    throw Error(ErrorKind::Validation, fmt::format("database {}: scale_factor must be positive", key()));
  if (skewness < 0 || skewness > 4)
    throw Error(ErrorKind::Validation, fmt::format("database {}: skewness must be in 0..4", key()));
}

DatabaseDescriptor describe_database(std::string benchmark, double scale_factor, int skewness) {
  DatabaseDescriptor db;
  db.benchmark_name = std::move(benchmark);
  db.scale_factor = scale_factor;
  db.skewness = skewness;
  db.validate();
  const std::vector<BuiltinTable>* tables = nullptr;
  if (db.benchmark_name == "tpch") tables = &tpch_tables();
  if (db.benchmark_name == "tpcds") tables = &tpcds_tables();
  if (tables) {
    for (const auto& t : *tables) {
      auto rows = t.scales ? static_cast<std::int64_t>(std::llround(static_cast<double>(t.rows_sf1) * scale_factor))
                           : t.rows_sf1;
      db.schema_summary.push_back({t.name, rows, t.columns});
    }
  }
  return db;
}

std::string_view to_string(ComponentOrigin origin) {
  return origin == ComponentOrigin::Benchmark ? "benchmark" : "augmented";
}

void Catalog::add(WorkloadComponent component) {
  if (component.component_id.empty()) throw Error(ErrorKind::Validation, "component id must not be empty");
  if (index_.count(component.component_id))
    throw Error(ErrorKind::Validation, fmt::format("duplicate component id \"{}\"", component.component_id));
  if (!component.feature.matches(schema_))
    throw Error(ErrorKind::Schema,
                fmt::format("component \"{}\": feature has {}+{} dimensions, catalog expects {}+{}",
                            component.component_id, component.feature.metrics.size(),
                            component.feature.operators.size(), schema_.num_metrics(), schema_.num_operators()));
  if (!(component.duration_ms > 0.0) || !std::isfinite(component.duration_ms))
    throw Error(ErrorKind::Validation,
                fmt::format("component \"{}\": duration_ms must be positive", component.component_id));
  if (!component.feature.all_finite_nonnegative())
    throw Error(ErrorKind::Validation,
                fmt::format("component \"{}\": feature entries must be finite and nonnegative", component.component_id));
  component.database.validate();
  if (component.query_ref.empty()) component.query_ref = component.component_id;
  index_.emplace(component.component_id, components_.size());
  components_.push_back(std::move(component));
}

const WorkloadComponent& Catalog::at(std::string_view id) const {
  if (auto i = index_of(id)) return components_[*i];
  throw Error(ErrorKind::Lookup, fmt::format("unknown component id \"{}\"", id));
}

std::optional<std::size_t> Catalog::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::MatrixXd Catalog::feature_matrix() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(schema_.size()), static_cast<Eigen::Index>(components_.size()));
  for (std::size_t j = 0; j < components_.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = components_[j].feature.stacked();
  return out;
}

Eigen::VectorXd Catalog::durations() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t j = 0; j < components_.size(); ++j) out[static_cast<Eigen::Index>(j)] = components_[j].duration_ms;
  return out;
}

std::vector<DatabaseDescriptor> Catalog::databases() const {
  std::vector<DatabaseDescriptor> out;
  for (const auto& c : components_) {
    bool seen = false;
    for (const auto& d : out) seen = seen || d == c.database;
    if (!seen) out.push_back(c.database);
  }
  return out;
}

Catalog parse_catalog(std::string_view csv_text, const FeatureSchema& schema) {
  csv::Table table = csv::parse(csv_text);
  const auto id_col = table.require_column("component_id");
  const auto bench_col = table.require_column("benchmark");
  const auto sf_col = table.require_column("scale_factor");
  const auto skew_col = table.require_column("skewness");
  const auto dur_col = table.require_column("duration_ms");
  const auto origin_col = table.column("origin");
  const auto ref_col = table.column("query_ref");
  std::vector<std::size_t> mcols, ocols;
  for (const auto& m : schema.metrics) mcols.push_back(table.require_column(m));
  for (const auto& o : schema.operators) ocols.push_back(table.require_column(o));

  Catalog catalog(schema);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = r + 1;
    if (row.size() != table.header.size())
      throw Error(ErrorKind::Parse,
                  fmt::format("row {}: expected {} fields, found {}", line, table.header.size(), row.size()));
    WorkloadComponent c;
    c.component_id = row[id_col];
    c.database = describe_database(row[bench_col], csv::parse_double(row[sf_col], line, "scale_factor"),
                                   static_cast<int>(csv::parse_int(row[skew_col], line, "skewness")));
    c.duration_ms = csv::parse_double(row[dur_col], line, "duration_ms");
    c.feature = PerformanceFeature::zero(schema);
    for (std::size_t k = 0; k < mcols.size(); ++k)
      c.feature.metrics[static_cast<Eigen::Index>(k)] = csv::parse_double(row[mcols[k]], line, schema.metrics[k]);
    for (std::size_t k = 0; k < ocols.size(); ++k)
      c.feature.operators[static_cast<Eigen::Index>(k)] = csv::parse_double(row[ocols[k]], line, schema.operators[k]);
    if (origin_col) {
      const auto& o = row[*origin_col];
      if (o == "augmented") c.origin = ComponentOrigin::Augmented;
      else if (o == "benchmark" || o.empty()) c.origin = ComponentOrigin::Benchmark;
      else throw Error(ErrorKind::Validation, fmt::format("row {}: unknown origin \"{}\"", line, o));
    }
    if (ref_col) c.query_ref = row[*ref_col];
    try {
      catalog.add(std::move(c));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("row {}: {}", line, e.what()));
    }
  }
  return catalog;
}

Catalog load_catalog(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open catalog {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str(), schema);
}

std::string export_catalog_csv(const Catalog& catalog, CatalogCsvOptions options) {
  const auto& schema = catalog.schema();
  std::ostringstream out;
  std::vector<std::string> header{"component_id", "benchmark", "scale_factor", "skewness", "duration_ms"};
  header.insert(header.end(), schema.metrics.begin(), schema.metrics.end());
  header.insert(header.end(), schema.operators.begin(), schema.operators.end());
  if (options.origin_column) header.push_back("origin");
  if (options.query_ref_column) header.push_back("query_ref");
  csv::write_row(out, header);
  for (const auto& c : catalog.components()) {
    std::vector<std::string> f{c.component_id, c.database.benchmark_name, csv::format_double(c.database.scale_factor),
                               std::to_string(c.database.skewness), csv::format_double(c.duration_ms)};
    for (Eigen::Index k = 0; k < c.feature.metrics.size(); ++k) f.push_back(csv::format_double(c.feature.metrics[k]));
    for (Eigen::Index k = 0; k < c.feature.operators.size(); ++k)
      f.push_back(csv::format_double(c.feature.operators[k]));
    if (options.origin_column) f.emplace_back(to_string(c.origin));
    if (options.query_ref_column) f.push_back(c.query_ref);
    csv::write_row(out, f);
  }
  return out.str();
}

void write_catalog(const std::filesystem::path& path, const Catalog& catalog, CatalogCsvOptions options) {
  csv::write_text(path, export_catalog_csv(catalog, options));
}

ProfileResult profile_component(WorkloadComponent& component, Executor& executor, int repetitions) {
  if (repetitions < 1) throw Error(ErrorKind::Config, "profiling needs at least one repetition");
  ProfileResult out;
  out.feature.metrics = Eigen::VectorXd::Zero(component.feature.metrics.size());
  out.feature.operators = Eigen::VectorXd::Zero(component.feature.operators.size());
  out.duration_min_ms = std::numeric_limits<double>::infinity();
  out.duration_max_ms = -std::numeric_limits<double>::infinity();
  for (int run = 0; run < repetitions; ++run) {
    ExecutionResult r;
    try {
      r = executor.run(component.query_ref, component.database, run);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Profiling,
                  fmt::format("component \"{}\": run {} failed: {}", component.component_id, run, e.what()));
    }
    if (r.feature.metrics.size() != out.feature.metrics.size() ||
        r.feature.operators.size() != out.feature.operators.size())
      throw Error(ErrorKind::Profiling,
                  fmt::format("component \"{}\": run {} returned a feature of the wrong dimension",
                              component.component_id, run));
    out.feature.metrics += r.feature.metrics;
    out.feature.operators += r.feature.operators;
    out.duration_ms += r.duration_ms;
    out.duration_min_ms = std::min(out.duration_min_ms, r.duration_ms);
    out.duration_max_ms = std::max(out.duration_max_ms, r.duration_ms);
  }
  const double n = static_cast<double>(repetitions);
  out.feature.metrics /= n;
  out.feature.operators /= n;
  out.duration_ms /= n;

  component.feature = out.feature;
  component.duration_ms = out.duration_ms;
  component.duration_min_ms = out.duration_min_ms;
  component.duration_max_ms = out.duration_max_ms;
  return out;
}

SimulatedExecutor::SimulatedExecutor(FeatureSchema schema, Options options)
    : schema_(std::move(schema)), options_(std::move(options)) {}

void SimulatedExecutor::set(const std::string& query_ref, ExecutionResult result) {
  table_[query_ref] = std::move(result);
}

void SimulatedExecutor::load(const Catalog& catalog) {
  for (const auto& c : catalog.components()) set(c.query_ref, {c.duration_ms, c.feature});
}

std::optional<ExecutionResult> SimulatedExecutor::ground_truth(const std::string& query_ref) const {
  if (auto it = table_.find(query_ref); it != table_.end()) return it->second;
  return parse_profile_annotation(query_ref, schema_);
}

ExecutionResult SimulatedExecutor::run(const std::string& query_ref, const DatabaseDescriptor& database,
                                       int run_index) {
  auto truth = ground_truth(query_ref);
  if (!truth)
    throw Error(ErrorKind::Profiling, fmt::format("simulated executor has no profile for query \"{}\"",
                                                  query_ref.substr(0, 64)));
  ExecutionResult r = *truth;
  const auto& caps = options_.metric_cap_per_sf;
  for (Eigen::Index h = 0; h < r.feature.metrics.size() && h < static_cast<Eigen::Index>(caps.size()); ++h) {
    const double cap = caps[static_cast<std::size_t>(h)];
    if (cap > 0.0) r.feature.metrics[h] = std::min(r.feature.metrics[h], cap * database.scale_factor);
  }
  if (options_.noise_sigma > 0.0) {
    std::mt19937_64 gen(derive_seed(options_.seed, query_ref + "@" + database.key(),
                                    static_cast<std::uint64_t>(run_index)));
    std::normal_distribution<double> noise(0.0, options_.noise_sigma);
    for (Eigen::Index h = 0; h < r.feature.metrics.size(); ++h)
      r.feature.metrics[h] = std::max(0.0, r.feature.metrics[h] * (1.0 + noise(gen)));
    r.duration_ms = std::max(1e-3, r.duration_ms * (1.0 + noise(gen)));
  }
  return r;
}

namespace {
constexpr std::string_view kAnnotationTag = "wlsynth-profile";
}

std::optional<ExecutionResult> parse_profile_annotation(std::string_view sql, const FeatureSchema& schema) {
  auto tag = sql.find(kAnnotationTag);
  if (tag == std::string_view::npos) return std::nullopt;
  auto body_start = tag + kAnnotationTag.size();
  auto body_end = sql.find("*/", body_start);
  std::string_view body = sql.substr(body_start, body_end == std::string_view::npos ? sql.npos : body_end - body_start);

  ExecutionResult r;
  r.feature = PerformanceFeature::zero(schema);
  bool have_duration = false;
  while (!body.empty()) {
    auto semi = body.find(';');
    std::string_view item = body.substr(0, semi);
    body = semi == std::string_view::npos ? std::string_view{} : body.substr(semi + 1);
    auto eq = item.find('=');
    if (eq == std::string_view::npos) continue;
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    auto key = trim(item.substr(0, eq));
    auto value = csv::parse_double(trim(item.substr(eq + 1)), 0, key);
    if (key == "duration_ms") {
      r.duration_ms = value;
      have_duration = true;
      continue;
    }
    long idx = schema.index_of(std::string(key));
    if (idx < 0) continue;
    const auto nm = static_cast<long>(schema.num_metrics());
    if (idx < nm) r.feature.metrics[idx] = value;
    else r.feature.operators[idx - nm] = value;
  }
  if (!have_duration) return std::nullopt;
  return r;
}

std::string format_profile_annotation(const ExecutionResult& result, const FeatureSchema& schema) {
  std::string out = fmt::format("/* {} duration_ms={}", kAnnotationTag, csv::format_double(result.duration_ms));
  for (std::size_t h = 0; h < schema.metrics.size(); ++h)
    out += fmt::format("; {}={}", schema.metrics[h],
                       csv::format_double(result.feature.metrics[static_cast<Eigen::Index>(h)]));
  for (std::size_t u = 0; u < schema.operators.size(); ++u)
    out += fmt::format("; {}={}", schema.operators[u],
                       csv::format_double(result.feature.operators[static_cast<Eigen::Index>(u)]));
  out += " */";
  return out;
}

}  // namespace wlsynth
