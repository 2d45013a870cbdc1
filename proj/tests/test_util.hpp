#pragma once

#include "wlsynth/catalog.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace wlsynth::testing {

inline FeatureSchema small_schema() { return {{"cpu_time_ms", "scanned_bytes"}, {"join_num", "aggregate_num"}}; }

inline WorkloadComponent make_component(const std::string& id, double duration_ms, Eigen::VectorXd metrics,
                                        Eigen::VectorXd operators) {
  WorkloadComponent c;
  c.component_id = id;
  c.database = describe_database("tpch", 1.0, 0);
  c.duration_ms = duration_ms;
  c.feature = PerformanceFeature(std::move(metrics), std::move(operators));
  return c;
}

/// Catalog of `n` components with integer features drawn from [0, max_value].
inline Catalog random_integer_catalog(std::mt19937_64& gen, std::size_t n, int max_value = 9,
                                      double min_duration = 1000.0, double max_duration = 60000.0) {
  Catalog cat(small_schema());
  std::uniform_int_distribution<int> val(0, max_value);
  std::uniform_real_distribution<double> dur(min_duration, max_duration);
  for (std::size_t j = 0; j < n; ++j) {
    Eigen::VectorXd m(2), o(2);
    m << val(gen), val(gen);
    o << val(gen), val(gen);
    char id[16];
    std::snprintf(id, sizeof id, "c%02zu", j);
    cat.add(make_component(id, std::floor(dur(gen)), m, o));
  }
  return cat;
}

}  // namespace wlsynth::testing
