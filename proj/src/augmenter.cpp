#include "wlsynth/augmenter.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/error.hpp"
#include "wlsynth/kmeans.hpp"
#include "wlsynth/log.hpp"
#include "wlsynth/rng.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace wlsynth {

std::vector<GenerationTarget> find_generation_targets(const std::vector<QueryRecord>& queries,
                                                      const FeatureSchema& schema,
                                                      const std::vector<std::size_t>& windows, std::size_t k,
                                                      std::uint64_t seed) {
  if (queries.empty()) return {};
  if (!windows.empty() && windows.size() != queries.size())
    throw Error(ErrorKind::Validation, "window list must match the query list");
  const auto n = static_cast<Eigen::Index>(queries.size());
  const auto d = static_cast<Eigen::Index>(schema.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& q = queries[static_cast<std::size_t>(i)];
    x.row(i).head(q.metrics.size()) = q.metrics.transpose();
    x.row(i).tail(q.operators.size()) = q.operators.transpose();
  }
  const auto km = kmeans(x, std::min<std::size_t>(k, queries.size()), seed);

  std::vector<GenerationTarget> out(km.sizes.size());
  const auto nm = static_cast<Eigen::Index>(schema.num_metrics());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j].target_id = fmt::format("g{}", j);
    Eigen::VectorXd c = km.centroids.row(static_cast<Eigen::Index>(j)).transpose();
    out[j].feature = PerformanceFeature::from_stacked(c, nm);
    out[j].weight = km.sizes[j];
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& t = out[km.labels[i]];
    t.duration_ms += static_cast<double>(queries[i].duration_ms);
    if (!windows.empty()) t.source_windows.push_back(windows[i]);
  }
  for (auto& t : out) {
    t.duration_ms /= static_cast<double>(t.weight);
    std::sort(t.source_windows.begin(), t.source_windows.end());
    t.source_windows.erase(std::unique(t.source_windows.begin(), t.source_windows.end()), t.source_windows.end());
  }
  return out;
}

ExampleSet retrieve_examples(const PerformanceFeature& target, const Catalog& catalog, std::size_t n) {
  if (catalog.empty()) throw Error(ErrorKind::Validation, "cannot retrieve examples from an empty catalog");
  const Eigen::MatrixXd f = catalog.feature_matrix();
  const Eigen::VectorXd mean = f.rowwise().mean();
  Eigen::VectorXd sd = ((f.colwise() - mean).array().square().rowwise().mean()).sqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i)
    if (!(sd(i) > 0.0)) sd(i) = 1.0;
  const Eigen::VectorXd zt = (target.stacked() - mean).cwiseQuotient(sd);

  std::vector<Example> all;
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    const Eigen::VectorXd zj = (f.col(static_cast<Eigen::Index>(j)) - mean).cwiseQuotient(sd);
    all.push_back({j, catalog[j].component_id, (zj - zt).norm()});
  }
  std::sort(all.begin(), all.end(), [](const Example& a, const Example& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.component_id < b.component_id;
  });
  ExampleSet out;
  const std::size_t np = std::min(n, all.size());
  out.positives.assign(all.begin(), all.begin() + static_cast<long>(np));
  const std::size_t nn = std::min(n, all.size() - np);
  for (std::size_t i = 0; i < nn; ++i) out.negatives.push_back(all[all.size() - 1 - i]);
  return out;
}

DatabaseDescriptor choose_database(const ExampleSet& examples, const Catalog& catalog) {
  if (examples.positives.empty()) throw Error(ErrorKind::Validation, "no positive examples to choose a database from");
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // key -> (count, catalog index)
  for (const auto& e : examples.positives) {
    auto& v = votes[catalog[e.index].database.key()];
    if (v.first++ == 0) v.second = e.index;
  }
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it)
    if (it->second.first > best->second.first) best = it;
  return catalog[best->second.second].database;
}

const HintScenario& hint_scenario(Scenario id) {
  static const HintScenario table[] = {
      {Scenario::LowCpuLowSb,
       "lowCPU_lowSB",
       {"Try to generate a query that performs computation on a larger table.",
        "Try to delete some predicates to scan more data."},
       HintAction::RewriteQuery},
      {Scenario::HighCpuLowSb,
       "highCPU_lowSB",
       {"Scan more data while deleting some operators.",
        "Use more Inner Join operators to reduce the intermediate result size."},
       HintAction::RewriteQuery},
      {Scenario::LowCpuHighSb,
       "lowCPU_highSB",
       {"Use more Self Join operators to increase the size of intermediate results.",
        "Perform arithmetic operations on some columns.", "Scan a smaller table while adding more operators."},
       HintAction::RewriteQuery},
      {Scenario::BothLowOrHigh,
       "both_low_or_high",
       {"Use or generate a benchmark database with a higher or lower Scale Factor."},
       HintAction::ChangeDatabase},
      {Scenario::RatioOff,
       "ratio_off",
       {"Use a benchmark database of higher or lower skewness, or select a database with a more complex schema."},
       HintAction::ChangeDatabase},
  };
  return table[static_cast<int>(id)];
}

std::string_view to_string(Scenario id) { return hint_scenario(id).name; }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::Retry: return "retry";
    case Verdict::DatabaseSwitch: return "database_switch";
    case Verdict::Failed: return "failed";
  }
  return "unknown";
}

namespace {

std::string feature_line(const FeatureSchema& schema, const PerformanceFeature& f) {
  std::string out;
  for (std::size_t h = 0; h < schema.num_metrics(); ++h)
    out += fmt::format("{}{}={}", out.empty() ? "" : "; ", schema.metrics[h],
                       csv::format_double(f.metrics[static_cast<Eigen::Index>(h)]));
  for (std::size_t u = 0; u < schema.num_operators(); ++u)
    out += fmt::format("; {}={}", schema.operators[u], csv::format_double(f.operators[static_cast<Eigen::Index>(u)]));
  return out;
}

void write_example(std::ostringstream& out, char tag, std::size_t rank, const Example& e, const Catalog& catalog) {
  const auto& c = catalog[e.index];
  out << fmt::format("[{}{}] component={} database={} distance={:.6f}\n", tag, rank + 1, c.component_id,
                     c.database.key(), e.distance);
  out << "feature: duration_ms=" << csv::format_double(c.duration_ms) << "; " << feature_line(catalog.schema(), c.feature)
      << "\n";
  out << "query:\n" << (c.query_ref.empty() ? c.component_id : c.query_ref) << "\nEND QUERY\n";
}

}  // namespace

std::string build_prompt(const GenerationTarget& target, const ExampleSet& examples, const Catalog& catalog,
                         const DatabaseDescriptor& database, const std::vector<std::string_view>& hints,
                         const std::optional<PromptFeedback>& feedback) {
  const auto& schema = catalog.schema();
  std::ostringstream out;
  out << "Write one SQL query for the database below whose execution profile matches the target.\n\n";
  out << "DATABASE: " << database.key() << "\n";
  out << "SCHEMA:\n";
  for (const auto& t : database.schema_summary) {
    out << fmt::format("  {} rows={}", t.name, t.row_count);
    if (!t.columns.empty()) out << " columns=" << fmt::format("{}", fmt::join(t.columns, ","));
    out << "\n";
  }
  out << "\nTARGET: duration_ms=" << csv::format_double(target.duration_ms) << "; "
      << feature_line(schema, target.feature) << "\n\n";
  out << "POSITIVE EXAMPLES (learn the query patterns):\n";
  for (std::size_t i = 0; i < examples.positives.size(); ++i) write_example(out, 'P', i, examples.positives[i], catalog);
  out << "\nNEGATIVE EXAMPLES (avoid the query patterns):\n";
  for (std::size_t i = 0; i < examples.negatives.size(); ++i) write_example(out, 'N', i, examples.negatives[i], catalog);
  if (feedback) {
    out << "\nPREVIOUS ATTEMPT (" << to_string(feedback->scenario) << "): " << feature_line(schema, feedback->profiled)
        << "\n";
  }
  if (!hints.empty()) {
    out << "\nHINTS:\n";
    for (auto h : hints) out << "- " << h << "\n";
  }
  out << "\nReturn only the SQL text.\n";
  return out.str();
}

std::pair<Eigen::Index, Eigen::Index> gap_dimensions(const FeatureSchema& schema, const GapConfig& config) {
  auto find = [&](const std::string& name) -> Eigen::Index {
    for (std::size_t h = 0; h < schema.num_metrics(); ++h)
      if (schema.metrics[h] == name) return static_cast<Eigen::Index>(h);
    for (std::size_t h = 0; h < schema.num_metrics(); ++h)
      if (schema.metrics[h].rfind(name, 0) == 0) return static_cast<Eigen::Index>(h);
    throw Error(ErrorKind::Schema, fmt::format("feature schema has no \"{}\" metric", name));
  };
  return {find(config.cpu_metric), find(config.sb_metric)};
}

GapAssessment classify_gap(const FeatureSchema& schema, const PerformanceFeature& target,
                           const PerformanceFeature& profiled, const GapConfig& config) {
  if (!target.matches(schema) || !profiled.matches(schema))
    throw Error(ErrorKind::Schema, "features do not match the schema");
  const auto [ci, si] = gap_dimensions(schema, config);
  const double tau = config.tolerance;

  GapAssessment g;
  g.metric_deltas.resize(target.metrics.size());
  for (Eigen::Index h = 0; h < target.metrics.size(); ++h) {
    const double t = target.metrics[h], p = profiled.metrics[h];
    const double den = std::max(std::abs(t), 1e-9);
    g.metric_deltas[h] = (t == 0.0 && p == 0.0) ? 0.0 : (p - t) / den;
  }
  const double dc = g.delta_cpu = g.metric_deltas[ci];
  const double ds = g.delta_sb = g.metric_deltas[si];
  if (1.0 + ds > 0.0) g.delta_ratio = (1.0 + dc) / (1.0 + ds) - 1.0;
  else g.delta_ratio = 1.0 + dc > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;

  const bool cpu_in = std::abs(dc) <= tau, sb_in = std::abs(ds) <= tau;
  if (cpu_in && sb_in) return g;
  if (dc < -tau && ds < -tau) {
    g.scenario = std::max(dc, ds) <= -0.5 ? Scenario::BothLowOrHigh : Scenario::LowCpuLowSb;
  } else if (dc > tau && ds > tau) {
    g.scenario = Scenario::BothLowOrHigh;
  } else if (dc > tau && ds < -tau) {
    g.scenario = Scenario::HighCpuLowSb;
  } else if (dc < -tau && ds > tau) {
    g.scenario = Scenario::LowCpuHighSb;
  } else if (std::abs(g.delta_ratio) > tau) {
    g.scenario = Scenario::RatioOff;
  } else {
    const double out = cpu_in ? ds : dc;
    g.scenario = out < 0.0 ? Scenario::LowCpuLowSb : Scenario::BothLowOrHigh;
  }
  return g;
}

DatabaseDescriptor switch_database(const DatabaseDescriptor& current, const GapAssessment& gap,
                                   const Catalog& catalog) {
  if (gap.scenario == Scenario::RatioOff) {
    if (gap.delta_ratio < 0.0) {
      if (current.skewness < 4) return describe_database(current.benchmark_name, current.scale_factor, current.skewness + 1);
      if (current.benchmark_name == "tpch") return describe_database("tpcds", current.scale_factor, current.skewness);
      return current;
    }
    if (current.skewness > 0) return describe_database(current.benchmark_name, current.scale_factor, current.skewness - 1);
    if (current.benchmark_name == "tpcds") return describe_database("tpch", current.scale_factor, current.skewness);
    return current;
  }
  // Scale factor: the nearest known database in the needed direction, else a new one 10x away.
  const bool up = gap.delta_cpu + gap.delta_sb < 0.0;
  std::optional<DatabaseDescriptor> best;
  for (const auto& db : catalog.databases()) {
    if (db.benchmark_name != current.benchmark_name || db.skewness != current.skewness) continue;
    const bool ok = up ? db.scale_factor > current.scale_factor : db.scale_factor < current.scale_factor;
    if (!ok) continue;
    if (!best || (up ? db.scale_factor < best->scale_factor : db.scale_factor > best->scale_factor)) best = db;
  }
  if (best) return *best;
  return describe_database(current.benchmark_name, up ? current.scale_factor * 10.0 : current.scale_factor / 10.0,
                           current.skewness);
}

GenerationResult generate_component(const GenerationTarget& target, const Catalog& catalog, Provider& provider,
                                    Executor& executor, const AugmentConfig& config) {
  if (config.max_attempts == 0) throw Error(ErrorKind::Config, "max_attempts must be >= 1");
  const auto& schema = catalog.schema();
  gap_dimensions(schema, config.gap);

  GenerationResult result;
  const ExampleSet examples = retrieve_examples(target.feature, catalog, config.examples);
  DatabaseDescriptor db = choose_database(examples, catalog);
  std::vector<std::string_view> hints;
  std::optional<PromptFeedback> feedback;
  std::optional<Scenario> last_scenario;
  std::size_t attempt = 0;
  std::size_t sequence = 0;

  for (;;) {
    GenerationAttempt a;
    a.attempt_index = attempt;
    a.sequence = sequence++;
    a.target_id = target.target_id;
    a.database = db.key();
    a.prompt = build_prompt(target, examples, catalog, db, hints, feedback);
    try {
      a.response = provider.complete(a.prompt);
    } catch (const Error& e) {
      throw Error(ErrorKind::Provider,
                  fmt::format("target {} attempt {}: {}", target.target_id, a.attempt_index, e.what()));
    }

    WorkloadComponent c;
    c.component_id = "aug-" + target.target_id;
    c.query_ref = a.response;
    c.database = db;
    c.feature = PerformanceFeature::zero(schema);
    c.origin = ComponentOrigin::Augmented;
    bool profiled = false;
    try {
      profile_component(c, executor, config.profile_repetitions);
      profiled = true;
    } catch (const Error& e) {
      a.verdict = Verdict::Failed;
      a.error = e.what();
    }
    if (profiled) {
      a.profiled = c.feature;
      a.gap = classify_gap(schema, target.feature, c.feature, config.gap);
      if (a.gap.accepted() && c.duration_ms > 0.0) {
        a.verdict = Verdict::Accepted;
        result.attempts.push_back(std::move(a));
        result.component = std::move(c);
        return result;
      }
      if (a.gap.accepted()) {
        a.verdict = Verdict::Failed;
        a.error = "profiled duration is zero";
      } else {
        a.verdict = Verdict::Retry;
        last_scenario = a.gap.scenario;
        hints = hint_scenario(*a.gap.scenario).hint_texts;
        feedback = PromptFeedback{c.feature, *a.gap.scenario};
      }
    }

    ++attempt;
    if (attempt >= config.max_attempts) {
      const bool db_action =
          last_scenario && hint_scenario(*last_scenario).action == HintAction::ChangeDatabase && a.profiled;
      if (db_action && result.database_switches < config.max_db_switches) {
        DatabaseDescriptor next = switch_database(db, a.gap, catalog);
        if (!(next == db)) {
          a.verdict = Verdict::DatabaseSwitch;
          db = std::move(next);
          ++result.database_switches;
          attempt = 0;
          result.attempts.push_back(std::move(a));
          continue;
        }
      }
      result.attempts.push_back(std::move(a));
      result.failure = fmt::format("target {}: no acceptable query after {} attempts and {} database switches",
                                   target.target_id, result.attempts.size(), result.database_switches);
      return result;
    }
    result.attempts.push_back(std::move(a));
  }
}

AugmentResult augment_catalog(const Trace& trace, const Targets& targets, const std::vector<SelectionPlan>& plans,
                              const Catalog& catalog, Provider& provider, Executor& executor,
                              const AugmentConfig& config, std::uint64_t seed) {
  AugmentResult out;
  out.catalog = catalog;
  for (const auto& p : plans)
    if (p.objective > config.bad_window_threshold) out.bad_windows.push_back(p.window_index);
  std::sort(out.bad_windows.begin(), out.bad_windows.end());
  if (out.bad_windows.empty()) return out;

  const TimeGrid& grid = targets.grid;
  std::vector<QueryRecord> queries;
  std::vector<std::size_t> windows;
  for (const auto& r : trace.records) {
    for (auto w : out.bad_windows) {
      const auto ws = grid.window_start(w), we = ws + grid.window_len_ms;
      const auto end = r.arrival_ts + r.duration_ms;
      const bool hit = r.duration_ms > 0 ? (r.arrival_ts < we && end > ws) : (r.arrival_ts >= ws && r.arrival_ts < we);
      if (hit) {
        queries.push_back(r);
        windows.push_back(w);
        break;
      }
    }
  }
  if (queries.empty()) return out;
  out.targets = find_generation_targets(queries, trace.schema, windows, config.clusters, derive_seed(seed, "augment"));

  for (const auto& t : out.targets) {
    GenerationResult r = generate_component(t, out.catalog, provider, executor, config);
    if (r.component) {
      std::string id = r.component->component_id;
      for (int n = 2; out.catalog.contains(id); ++n) id = fmt::format("{}-{}", r.component->component_id, n);
      r.component->component_id = id;
      out.catalog.add(*r.component);
      out.added.push_back(id);
    } else {
      log_warning(r.failure);
    }
    out.results.push_back(std::move(r));
  }
  return out;
}

std::string export_attempts_jsonl(const std::vector<GenerationResult>& results, const FeatureSchema& schema) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& a : r.attempts) {
      nlohmann::ordered_json j;
      j["target"] = a.target_id;
      j["sequence"] = a.sequence;
      j["attempt"] = a.attempt_index;
      j["database"] = a.database;
      j["prompt_hash"] = fmt::format("{:016x}", fnv1a64(a.prompt));
      j["scenario"] = a.gap.scenario ? std::string(to_string(*a.gap.scenario)) : std::string();
      nlohmann::ordered_json deltas = nlohmann::ordered_json::object();
      if (a.profiled)
        for (std::size_t h = 0; h < schema.num_metrics(); ++h)
          deltas[schema.metrics[h]] = a.gap.metric_deltas[static_cast<Eigen::Index>(h)];
      j["deltas"] = deltas;
      j["verdict"] = std::string(to_string(a.verdict));
      if (!a.error.empty()) j["error"] = a.error;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace wlsynth
