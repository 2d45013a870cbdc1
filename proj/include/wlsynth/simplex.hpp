#pragma once

#include "wlsynth/feature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace wlsynth::lp {

/// min c'x  s.t.  A x = b,  x >= 0.
///
/// `basis_hint[i]` names a column that is a unit vector in row i and can
/// start the basis (slack-like); -1 asks for an artificial variable. Rows
/// with negative b are negated internally, which invalidates a hint for that
/// row, so callers should pass b >= 0 where they give hints.
template <typename Scalar>
struct StandardForm {
  MatrixX<Scalar> A;
  VectorX<Scalar> b;
  VectorX<Scalar> c;
  std::vector<Eigen::Index> basis_hint;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

template <typename Scalar>
struct Solution {
  Status status = Status::IterationLimit;
  Scalar objective = Scalar(0);
  VectorX<Scalar> x;
  int iterations = 0;
};

struct Options {
  double tolerance = 1e-9;
  int max_iterations = 50'000;
  /// Switch from Dantzig pricing to Bland's rule after this many degenerate pivots in a row.
  int degenerate_switch = 50;
};

namespace detail {

/// Tableau simplex over an (m+1) x (n+1) matrix; the last row holds reduced
/// costs and the last column the right-hand side.
template <typename Scalar>
class Tableau {
 public:
  Tableau(MatrixX<Scalar> t, std::vector<Eigen::Index> basis, Options opt)
      : t_(std::move(t)), basis_(std::move(basis)), opt_(opt) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    VectorX<Scalar> col = t_.col(c);
    col(r) = Scalar(0);
    t_.noalias() -= col * t_.row(r);
    basis_[static_cast<std::size_t>(r)] = c;
  }

  /// Minimizes the objective row over columns `< allowed_cols`.
  Status optimize(Eigen::Index allowed_cols, int& iterations) {
    const Scalar tol(opt_.tolerance);
    int degenerate = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) return Status::IterationLimit;
      const bool bland = degenerate >= opt_.degenerate_switch;
      Eigen::Index enter = -1;
      Scalar best = -tol;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        const Scalar rc = t_(rows(), j);
        if (rc < best) {
          enter = j;
          if (bland) break;
          best = rc;
        }
      }
      if (enter < 0) return Status::Optimal;

      Eigen::Index leave = -1;
      Scalar ratio = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        const Scalar a = t_(i, enter);
        if (a <= tol) continue;
        const Scalar q = t_(i, cols()) / a;
        if (leave < 0 || q < ratio - tol) {
          ratio = q;
          leave = i;
        } else if (q <= ratio + tol &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          ratio = std::min(ratio, q);
          leave = i;
        }
      }
      if (leave < 0) return Status::Unbounded;
      degenerate = ratio <= tol ? degenerate + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

  MatrixX<Scalar>& matrix() { return t_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }

 private:
  MatrixX<Scalar> t_;
  std::vector<Eigen::Index> basis_;
  Options opt_;
};

}  // namespace detail

/// Two-phase dense tableau simplex.
template <typename Scalar>
Solution<Scalar> solve(const StandardForm<Scalar>& lp, const Options& opt = {}) {
  const Eigen::Index m = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  const Scalar tol(opt.tolerance);

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m), -1);
  Eigen::Index artificials = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto h = i < static_cast<Eigen::Index>(lp.basis_hint.size()) ? lp.basis_hint[static_cast<std::size_t>(i)] : -1;
    if (h >= 0 && lp.b(i) >= Scalar(0)) basis[static_cast<std::size_t>(i)] = h;
    else ++artificials;
  }

  MatrixX<Scalar> t = MatrixX<Scalar>::Zero(m + 1, n + artificials + 1);
  t.topLeftCorner(m, n) = lp.A;
  t.col(n + artificials).head(m) = lp.b;
  Eigen::Index next_art = n;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (lp.b(i) < Scalar(0)) {
      t.row(i).head(n) *= Scalar(-1);
      t(i, n + artificials) *= Scalar(-1);
    }
    if (basis[static_cast<std::size_t>(i)] < 0) {
      t(i, next_art) = Scalar(1);
      basis[static_cast<std::size_t>(i)] = next_art++;
    }
  }

  Solution<Scalar> out;
  detail::Tableau<Scalar> tab(std::move(t), basis, opt);
  auto& T = tab.matrix();

  if (artificials > 0) {
    // Phase 1: minimize the sum of artificials.
    T.row(m).setZero();
    for (Eigen::Index j = n; j < n + artificials; ++j) T(m, j) = Scalar(1);
    for (Eigen::Index i = 0; i < m; ++i)
      if (tab.basis()[static_cast<std::size_t>(i)] >= n) T.row(m) -= T.row(i);
    out.status = tab.optimize(n + artificials, out.iterations);
    if (out.status != Status::Optimal) return out;
    if (-T(m, n + artificials) > tol * Scalar(10) * (Scalar(1) + lp.b.cwiseAbs().maxCoeff())) {
      out.status = Status::Infeasible;
      return out;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < n) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > tol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    T.middleCols(n, artificials).setZero();
  }

  // Phase 2 objective row: c - c_B B^{-1} A.
  T.row(m).setZero();
  T.row(m).head(n) = lp.c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto bi = tab.basis()[static_cast<std::size_t>(i)];
    if (bi < n && lp.c(bi) != Scalar(0)) T.row(m) -= lp.c(bi) * T.row(i);
  }
  out.status = tab.optimize(n, out.iterations);
  if (out.status != Status::Optimal) return out;

  out.x = VectorX<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto bi = tab.basis()[static_cast<std::size_t>(i)];
    if (bi < n) out.x(bi) = T(i, n + artificials);
  }
  out.objective = lp.c.dot(out.x);
  return out;
}

}  // namespace wlsynth::lp
