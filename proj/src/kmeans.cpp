#include "wlsynth/kmeans.hpp"

#include "wlsynth/error.hpp"
#include "wlsynth/log.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <random>

namespace wlsynth {

namespace {

std::size_t count_distinct(const Eigen::MatrixXd& x) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < x.cols(); ++c) rows[static_cast<std::size_t>(i)].push_back(x(i, c));
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw Error(ErrorKind::Validation, "k-means needs at least one point");
  if (k == 0) throw Error(ErrorKind::Config, "k must be >= 1");
  if (!points.allFinite()) throw Error(ErrorKind::Validation, "k-means input must be finite");

  KMeansResult out;
  const std::size_t distinct = count_distinct(points);
  if (distinct < k) {
    log_warning(fmt::format("k-means: only {} distinct points, reducing k from {} to {}", distinct, k, distinct));
    k = distinct;
    out.reduced_k = true;
  }

  const Eigen::RowVectorXd mean = points.colwise().mean();
  Eigen::RowVectorXd scale = ((points.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index c = 0; c < scale.size(); ++c)
    if (!(scale(c) > 0.0)) scale(c) = 1.0;
  const Eigen::MatrixXd z = (points.rowwise() - mean).array().rowwise() / scale.array();

  std::mt19937_64 gen(seed);
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd c(kk, z.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  c.row(0) = z.row(first(gen));
  Eigen::VectorXd d2 = (z.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (Eigen::Index j = 1; j < kk; ++j) {
    std::discrete_distribution<Eigen::Index> pick(d2.data(), d2.data() + n);
    c.row(j) = z.row(pick(gen));
    d2 = d2.cwiseMin((z.rowwise() - c.row(j)).rowwise().squaredNorm());
  }

  std::vector<std::size_t> labels(static_cast<std::size_t>(n), 0);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (c.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&best);
      labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(kk, z.cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(kk);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto l = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
      next.row(l) += z.row(i);
      count(l) += 1.0;
    }
    double moved = 0.0;
    for (Eigen::Index j = 0; j < kk; ++j) {
      if (count(j) > 0.0) next.row(j) /= count(j);
      else next.row(j) = c.row(j);
      moved = std::max(moved, (next.row(j) - c.row(j)).norm());
    }
    c = next;
    if (moved <= options.tolerance) {
      ++it;
      break;
    }
  }
  // Final assignment against the converged centroids.
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    (c.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  out.iterations = it;

  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];
  std::vector<std::size_t> remap(k, 0);
  std::size_t kept = 0;
  for (std::size_t j = 0; j < k; ++j)
    if (sizes[j] > 0) remap[j] = kept++;
  out.centroids.resize(static_cast<Eigen::Index>(kept), points.cols());
  out.sizes.assign(kept, 0);
  // Centroids are recomputed as member means in native units.
  out.centroids.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = remap[labels[static_cast<std::size_t>(i)]];
    out.centroids.row(static_cast<Eigen::Index>(j)) += points.row(i);
    ++out.sizes[j];
  }
  for (std::size_t j = 0; j < kept; ++j) out.centroids.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(out.sizes[j]);
  out.labels.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < labels.size(); ++i) out.labels[i] = remap[labels[i]];
  return out;
}

}  // namespace wlsynth
