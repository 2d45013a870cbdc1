#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace wlsynth {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Names of the metric and operator dimensions of one trace. Every feature,
/// target and component handled together must share the same schema.
struct FeatureSchema {
  std::vector<std::string> metrics;
  std::vector<std::string> operators;

  std::size_t num_metrics() const { return metrics.size(); }
  std::size_t num_operators() const { return operators.size(); }
  std::size_t size() const { return metrics.size() + operators.size(); }

  /// Stacked index of a metric or operator name, or -1.
  long index_of(const std::string& name) const {
    for (std::size_t i = 0; i < metrics.size(); ++i)
      if (metrics[i] == name) return static_cast<long>(i);
    for (std::size_t i = 0; i < operators.size(); ++i)
      if (operators[i] == name) return static_cast<long>(metrics.size() + i);
    return -1;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Performance feature: metric vector M and operator vector O.
template <typename Scalar>
struct BasicFeature {
  VectorX<Scalar> metrics;
  VectorX<Scalar> operators;

  BasicFeature() = default;
  BasicFeature(VectorX<Scalar> m, VectorX<Scalar> o)
      : metrics(std::move(m)), operators(std::move(o)) {}

  static BasicFeature zero(const FeatureSchema& schema) {
    return {VectorX<Scalar>::Zero(static_cast<Eigen::Index>(schema.num_metrics())),
            VectorX<Scalar>::Zero(static_cast<Eigen::Index>(schema.num_operators()))};
  }

  Eigen::Index size() const { return metrics.size() + operators.size(); }

  /// [M; O] as one column.
  VectorX<Scalar> stacked() const {
    VectorX<Scalar> out(size());
    out << metrics, operators;
    return out;
  }

  static BasicFeature from_stacked(const VectorX<Scalar>& v, Eigen::Index num_metrics) {
    return {v.head(num_metrics), v.tail(v.size() - num_metrics)};
  }

  bool matches(const FeatureSchema& schema) const {
    return metrics.size() == static_cast<Eigen::Index>(schema.num_metrics()) &&
           operators.size() == static_cast<Eigen::Index>(schema.num_operators());
  }

  bool all_finite_nonnegative() const {
    return metrics.allFinite() && operators.allFinite() &&
           (metrics.array() >= Scalar(0)).all() && (operators.array() >= Scalar(0)).all();
  }

  friend bool operator==(const BasicFeature& a, const BasicFeature& b) {
    return a.metrics.size() == b.metrics.size() && a.operators.size() == b.operators.size() &&
           a.metrics == b.metrics && a.operators == b.operators;
  }
};

using PerformanceFeature = BasicFeature<double>;

}  // namespace wlsynth
