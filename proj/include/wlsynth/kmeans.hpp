#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace wlsynth {

struct KMeansOptions {
  int max_iterations = 100;
  /// Stop once no centroid moves farther than this.
  double tolerance = 1e-6;
};

struct KMeansResult {
  /// One row per cluster, in the units of the input.
  Eigen::MatrixXd centroids;
  /// Cluster of each input row.
  std::vector<std::size_t> labels;
  std::vector<std::size_t> sizes;
  int iterations = 0;
  /// k was reduced to the number of distinct points.
  bool reduced_k = false;
};

/// k-means++ seeding followed by Lloyd iterations, on rows of `points`.
/// Columns are z-normalized internally (constant columns are left
/// centered) and centroids are mapped back afterwards. Empty clusters are
/// dropped from the result.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace wlsynth
