#include "wlsynth/selector.hpp"

#include "wlsynth/csv.hpp"
#include "wlsynth/error.hpp"
#include "wlsynth/simplex.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace wlsynth {

void SelectionProblem::validate() const {
  if (!catalog) throw Error(ErrorKind::Config, "selection problem has no catalog");
  if (!target.matches(catalog->schema()))
    throw Error(ErrorKind::Schema, fmt::format("window {}: target dimensions do not match the catalog", window_index));
  if (max_repetitions < 1) throw Error(ErrorKind::Config, "max repetitions y must be >= 1");
  if (max_total < 1) throw Error(ErrorKind::Config, "max total count z must be >= 1");
  if (!(duration_budget_ms > 0.0)) throw Error(ErrorKind::Config, "duration budget l must be positive");
  if (denom_floor.size() != target.size())
    throw Error(ErrorKind::Config, "denominator floor needs one entry per feature dimension");
  if (!(denom_floor.array() > 0.0).all()) throw Error(ErrorKind::Config, "denominator floors must be positive");
  if (weights.size() != 0 && weights.size() != target.size())
    throw Error(ErrorKind::Config, "weights need one entry per feature dimension");
}

std::int64_t SelectionPlan::count_of(std::string_view id) const {
  for (const auto& [cid, n] : counts)
    if (cid == id) return n;
  return 0;
}

std::int64_t SelectionPlan::total_count() const {
  std::int64_t t = 0;
  for (const auto& c : counts) t += c.second;
  return t;
}

ErrorModel ErrorModel::build(const SelectionProblem& p) {
  const Catalog& cat = *p.catalog;
  const auto D = p.target.size();
  const auto nm = p.target.metrics.size();
  const Eigen::VectorXd t = p.target.stacked();

  ErrorModel m;
  m.G = cat.feature_matrix();
  m.g = t;
  m.den = t.cwiseMax(p.denom_floor);
  m.w = p.weights.size() ? p.weights : Eigen::VectorXd::Ones(D);
  if (p.mode == OperatorMode::TimeShares) {
    const Eigen::VectorXd T = cat.durations();
    const double ref = std::max(p.target_busy_ms, 1.0);
    for (Eigen::Index u = nm; u < D; ++u) {
      m.G.row(u) = ((m.G.row(u).array() - t(u)) * T.transpose().array()).matrix();
      m.g(u) = 0.0;
      m.den(u) = std::max(t(u), p.denom_floor(u)) * ref;
    }
  }
  return m;
}

Eigen::VectorXd ErrorModel::errors(const Eigen::VectorXd& x) const {
  return ((G * x - g).array().abs() / den.array()).matrix();
}

double ErrorModel::objective(const Eigen::VectorXd& x) const { return w.dot(errors(x)); }

PerformanceFeature achieved_feature(const Catalog& catalog, const Eigen::VectorXd& counts, OperatorMode mode) {
  const auto& schema = catalog.schema();
  const Eigen::VectorXd sum = catalog.feature_matrix() * counts;
  const auto nm = static_cast<Eigen::Index>(schema.num_metrics());
  PerformanceFeature out = PerformanceFeature::from_stacked(sum, nm);
  if (mode == OperatorMode::TimeShares) {
    const Eigen::VectorXd T = catalog.durations();
    const double busy = T.dot(counts);
    out.operators.setZero();
    if (busy > 0.0) {
      for (std::size_t j = 0; j < catalog.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (counts(jj) != 0.0) out.operators += catalog[j].feature.operators * (counts(jj) * T(jj));
      }
      out.operators /= busy;
    }
  }
  return out;
}

namespace {

constexpr double kFracTol = 1e-7;
constexpr double kObjTol = 1e-9;

class BranchAndBound {
 public:
  explicit BranchAndBound(const SelectionProblem& p)
      : p_(p), model_(ErrorModel::build(p)), v_(static_cast<Eigen::Index>(p.catalog->size())),
        D_(model_.G.rows()), T_(p.catalog->durations()) {
    // Component-id order for tie-breaking.
    order_.resize(static_cast<std::size_t>(v_));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    std::sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) {
      return (*p.catalog)[static_cast<std::size_t>(a)].component_id <
             (*p.catalog)[static_cast<std::size_t>(b)].component_id;
    });
    l_ = p.duration_budget_ms;
    l_slack_ = std::isfinite(l_) ? 1e-9 * std::max(1.0, l_) : 0.0;
    root_hi_ = Eigen::VectorXd(v_);
    for (Eigen::Index j = 0; j < v_; ++j) {
      double cap = static_cast<double>(std::min(p.max_repetitions, p.max_total));
      if (std::isfinite(l_)) cap = std::min(cap, std::floor((l_ + l_slack_) / T_(j)));
      root_hi_(j) = std::max(0.0, cap);
    }
  }

  SelectionPlan run() {
    start_ = std::chrono::steady_clock::now();
    best_x_ = Eigen::VectorXd::Zero(v_);
    best_obj_ = model_.objective(best_x_);
    improve_locally(best_x_, best_obj_);
    for (const auto& h : p_.hints) {
      if (static_cast<Eigen::Index>(h.size()) != v_) continue;
      Eigen::VectorXd x(v_);
      for (Eigen::Index j = 0; j < v_; ++j) x(j) = static_cast<double>(h[static_cast<std::size_t>(j)]);
      if (!feasible(x)) continue;
      offer(x);
    }

    struct Node {
      Eigen::VectorXd lo, hi;
    };
    std::vector<Node> stack;
    stack.push_back({Eigen::VectorXd::Zero(v_), root_hi_});
    bool exhausted = false;
    while (!stack.empty()) {
      if (nodes_ >= p_.budget.node_limit || ((nodes_ & 63) == 0 && elapsed() > p_.budget.time_limit_s)) {
        exhausted = true;
        break;
      }
      Node node = std::move(stack.back());
      stack.pop_back();
      ++nodes_;

      Eigen::VectorXd x;
      double bound = 0.0;
      if (!relax(node.lo, node.hi, x, bound)) continue;
      if (bound >= best_obj_ - kObjTol) continue;

      Eigen::Index branch = -1;
      double most = kFracTol;
      for (Eigen::Index j = 0; j < v_; ++j) {
        const double f = std::abs(x(j) - std::round(x(j)));
        if (f > most) {
          most = f;
          branch = j;
        }
      }
      if (branch < 0) {
        Eigen::VectorXd xi = x.array().round().matrix();
        if (feasible(xi)) offer(xi);
        continue;
      }
      round_heuristic(x, node.lo, node.hi);

      const double fl = std::floor(x(branch));
      Node down{node.lo, node.hi};
      down.hi(branch) = fl;
      Node up{std::move(node.lo), std::move(node.hi)};
      up.lo(branch) = fl + 1.0;
      const bool prefer_up = x(branch) - fl >= 0.5;
      if (prefer_up) {
        stack.push_back(std::move(down));
        stack.push_back(std::move(up));
      } else {
        stack.push_back(std::move(up));
        stack.push_back(std::move(down));
      }
    }

    SelectionPlan plan;
    plan.window_index = p_.window_index;
    plan.approximate = exhausted;
    plan.nodes = nodes_;
    plan.objective = best_obj_;
    plan.achieved = achieved_feature(*p_.catalog, best_x_, p_.mode);
    for (Eigen::Index j = 0; j < v_; ++j)
      if (best_x_(j) > 0.0)
        plan.counts.emplace_back((*p_.catalog)[static_cast<std::size_t>(j)].component_id,
                                 static_cast<std::int64_t>(best_x_(j)));
    return plan;
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool feasible(const Eigen::VectorXd& x) const {
    if ((x.array() < 0.0).any()) return false;
    if ((x.array() > static_cast<double>(p_.max_repetitions)).any()) return false;
    if (x.sum() > static_cast<double>(p_.max_total)) return false;
    if (std::isfinite(l_) && T_.dot(x) > l_ + l_slack_) return false;
    return true;
  }

  bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    for (auto j : order_) {
      if (a(j) < b(j)) return true;
      if (a(j) > b(j)) return false;
    }
    return false;
  }

  /// Accepts `x` as incumbent if it improves the objective, or ties and is
  /// lexicographically smaller. Improvements are polished by local search.
  void offer(Eigen::VectorXd x) {
    double obj = model_.objective(x);
    if (obj < best_obj_ - 1e-12 || (obj <= best_obj_ + 1e-12 && lex_less(x, best_x_))) {
      improve_locally(x, obj);
      best_x_ = std::move(x);
      best_obj_ = obj;
    }
  }

  /// Steepest descent over +-1 and pairwise transfer moves.
  void improve_locally(Eigen::VectorXd& x, double& obj) const {
    Eigen::VectorXd r = model_.G * x - model_.g;
    const Eigen::ArrayXd inv_den = model_.den.array().inverse() * model_.w.array();
    double total = x.sum();
    double dur = T_.dot(x);
    const double y = static_cast<double>(p_.max_repetitions);
    const double z = static_cast<double>(p_.max_total);
    auto score = [&](const Eigen::VectorXd& rr) { return (rr.array().abs() * inv_den).sum(); };
    for (int iter = 0; iter < 10'000; ++iter) {
      double best = obj - 1e-12;
      Eigen::Index bi = -1, bk = -1;  // +1 on bi, -1 on bk (-1 index = none)
      for (Eigen::Index i = -1; i < v_; ++i) {
        for (Eigen::Index k = -1; k < v_; ++k) {
          if (i == k) continue;
          if (i >= 0 && x(i) + 1.0 > y) continue;
          if (k >= 0 && x(k) < 1.0) continue;
          const double nt = total + (i >= 0 ? 1.0 : 0.0) - (k >= 0 ? 1.0 : 0.0);
          if (nt > z) continue;
          const double nd = dur + (i >= 0 ? T_(i) : 0.0) - (k >= 0 ? T_(k) : 0.0);
          if (std::isfinite(l_) && nd > l_ + l_slack_) continue;
          Eigen::VectorXd rr = r;
          if (i >= 0) rr += model_.G.col(i);
          if (k >= 0) rr -= model_.G.col(k);
          const double s = score(rr);
          if (s < best) {
            best = s;
            bi = i;
            bk = k;
          }
        }
      }
      if (bi < 0 && bk < 0) break;
      if (bi >= 0) {
        x(bi) += 1.0;
        r += model_.G.col(bi);
        total += 1.0;
        dur += T_(bi);
      }
      if (bk >= 0) {
        x(bk) -= 1.0;
        r -= model_.G.col(bk);
        total -= 1.0;
        dur -= T_(bk);
      }
      obj = model_.objective(x);
    }
  }

  void round_heuristic(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd r = x.array().round().matrix().cwiseMax(lo).cwiseMin(hi);
    if (feasible(r)) {
      offer(std::move(r));
      return;
    }
    r = x.array().floor().matrix().cwiseMax(lo);
    if (feasible(r)) offer(std::move(r));
  }

  /// LP relaxation over lo <= x <= hi. Columns: u (x - lo), n (under), p
  /// (over), z slack, l slack, upper-bound slacks.
  bool relax(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::VectorXd& x, double& bound) {
    const Eigen::Index v = v_, D = D_;
    const bool has_l = std::isfinite(l_);
    const Eigen::Index rows = D + 1 + (has_l ? 1 : 0) + v;
    const Eigen::Index cols = v + 2 * D + 1 + (has_l ? 1 : 0) + v;

    const double z_rhs = static_cast<double>(p_.max_total) - lo.sum();
    const double l_rhs = has_l ? l_ + l_slack_ - T_.dot(lo) : 0.0;
    if (z_rhs < -kFracTol || (has_l && l_rhs < -l_slack_)) return false;
    if (((hi - lo).array() < 0.0).any()) return false;

    lp::StandardForm<double> f;
    f.A = Eigen::MatrixXd::Zero(rows, cols);
    f.b = Eigen::VectorXd::Zero(rows);
    f.c = Eigen::VectorXd::Zero(cols);
    f.basis_hint.assign(static_cast<std::size_t>(rows), -1);

    const Eigen::VectorXd resid = (model_.g - model_.G * lo).cwiseQuotient(model_.den);
    for (Eigen::Index d = 0; d < D; ++d) {
      f.A.row(d).head(v) = model_.G.row(d) / model_.den(d);
      f.A(d, v + d) = 1.0;       // under
      f.A(d, v + D + d) = -1.0;  // over
      f.b(d) = resid(d);
      if (resid(d) < 0.0) {
        f.A.row(d) *= -1.0;
        f.b(d) = -resid(d);
        f.basis_hint[static_cast<std::size_t>(d)] = v + D + d;
      } else {
        f.basis_hint[static_cast<std::size_t>(d)] = v + d;
      }
      f.c(v + d) = model_.w(d);
      f.c(v + D + d) = model_.w(d);
    }
    Eigen::Index row = D;
    Eigen::Index col = v + 2 * D;
    f.A.row(row).head(v).setOnes();
    f.A(row, col) = 1.0;
    f.b(row) = std::max(0.0, z_rhs);
    f.basis_hint[static_cast<std::size_t>(row)] = col;
    ++row;
    ++col;
    if (has_l) {
      f.A.row(row).head(v) = T_.transpose();
      f.A(row, col) = 1.0;
      f.b(row) = std::max(0.0, l_rhs);
      f.basis_hint[static_cast<std::size_t>(row)] = col;
      ++row;
      ++col;
    }
    for (Eigen::Index j = 0; j < v; ++j, ++row, ++col) {
      f.A(row, j) = 1.0;
      f.A(row, col) = 1.0;
      f.b(row) = hi(j) - lo(j);
      f.basis_hint[static_cast<std::size_t>(row)] = col;
    }

    auto sol = lp::solve(f);
    if (sol.status == lp::Status::Infeasible) return false;
    if (sol.status != lp::Status::Optimal)
      throw Error(ErrorKind::Solver, fmt::format("window {}: LP relaxation failed", p_.window_index));
    x = lo + sol.x.head(v);
    bound = sol.objective;
    return true;
  }

  const SelectionProblem& p_;
  ErrorModel model_;
  Eigen::Index v_, D_;
  Eigen::VectorXd T_;
  double l_ = 0.0, l_slack_ = 0.0;
  Eigen::VectorXd root_hi_;
  std::vector<Eigen::Index> order_;
  Eigen::VectorXd best_x_;
  double best_obj_ = 0.0;
  std::int64_t nodes_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

SelectionPlan solve_window(const SelectionProblem& problem) {
  problem.validate();
  if (problem.catalog->empty()) {
    SelectionPlan plan;
    plan.window_index = problem.window_index;
    plan.achieved = PerformanceFeature::zero(problem.catalog->schema());
    plan.objective = ErrorModel::build(problem).objective(Eigen::VectorXd::Zero(0));
    return plan;
  }
  BranchAndBound bb(problem);
  return bb.run();
}

SelectionProblem make_problem(const WindowTarget& target, const Catalog& catalog,
                              const SelectionConstraints& c, OperatorMode mode) {
  SelectionProblem p;
  p.window_index = target.window_index;
  p.target = target.feature;
  p.catalog = &catalog;
  p.max_repetitions = c.max_repetitions;
  p.max_total = c.max_total ? *c.max_total
                            : std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(
                                                            c.total_count_factor * static_cast<double>(target.query_count))));
  p.duration_budget_ms = static_cast<double>(target.window_len_ms) * static_cast<double>(c.max_concurrency);
  p.denom_floor = Eigen::VectorXd::Constant(target.feature.size(), c.denom_floor);
  p.weights = c.weights;
  p.mode = mode;
  p.target_busy_ms = target.busy_ms;
  p.budget = c.budget;
  return p;
}

std::vector<SelectionPlan> solve_all_windows(const Targets& targets, const Catalog& catalog,
                                             const SelectionConstraints& constraints,
                                             const std::vector<SelectionPlan>* warm_start) {
  std::vector<SelectionProblem> problems;
  problems.reserve(targets.windows.size());
  for (const auto& w : targets.windows) problems.push_back(make_problem(w, catalog, constraints, targets.mode));
  if (warm_start) {
    for (const auto& plan : *warm_start) {
      if (plan.window_index >= problems.size()) continue;
      std::vector<std::int64_t> x(catalog.size(), 0);
      bool known = true;
      for (const auto& [id, n] : plan.counts) {
        auto idx = catalog.index_of(id);
        if (!idx) {
          known = false;
          break;
        }
        x[*idx] = n;
      }
      if (known) problems[plan.window_index].hints.push_back(std::move(x));
    }
  }

  std::vector<SelectionPlan> plans(problems.size());
  std::vector<std::exception_ptr> errors(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < problems.size(); i = next++) {
      try {
        plans[i] = solve_window(problems[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(constraints.jobs, static_cast<unsigned>(problems.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("window {}: {}", i, e.what()));
    }
  }
  return plans;
}

QueryLevelMode parse_query_level_mode(std::string_view text) {
  if (text == "one_to_one") return QueryLevelMode::OneToOne;
  if (text == "one_to_many") return QueryLevelMode::OneToMany;
  throw Error(ErrorKind::Config, fmt::format("unknown query-level mode \"{}\" (one_to_one | one_to_many)", text));
}

QueryMatch match_query(const PerformanceFeature& query_feature, double query_duration_ms, const Catalog& catalog,
                       QueryLevelMode mode, std::int64_t max_total, const SelectionConstraints& constraints,
                       OperatorMode op_mode) {
  if (catalog.empty()) throw Error(ErrorKind::Lookup, "cannot match a query against an empty catalog");
  if (!query_feature.matches(catalog.schema()))
    throw Error(ErrorKind::Schema, "query feature dimensions do not match the catalog");

  SelectionProblem p;
  p.target = query_feature;
  p.catalog = &catalog;
  p.max_repetitions = constraints.max_repetitions;
  p.max_total = std::max<std::int64_t>(1, max_total);
  p.duration_budget_ms = std::numeric_limits<double>::infinity();
  p.denom_floor = Eigen::VectorXd::Constant(query_feature.size(), constraints.denom_floor);
  p.weights = constraints.weights;
  p.mode = op_mode;
  p.target_busy_ms = query_duration_ms;
  p.budget = constraints.budget;

  const Eigen::MatrixXd F = catalog.feature_matrix();
  const Eigen::VectorXd mean = F.rowwise().mean();
  Eigen::VectorXd sd = ((F.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(F.cols()))
                           .sqrt()
                           .matrix();
  for (Eigen::Index d = 0; d < sd.size(); ++d)
    if (!(sd(d) > 0.0)) sd(d) = 1.0;
  const Eigen::VectorXd q = (query_feature.stacked() - mean).cwiseQuotient(sd);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    const double dist = ((F.col(static_cast<Eigen::Index>(j)) - mean).cwiseQuotient(sd) - q).norm();
    if (dist < best_dist || (dist == best_dist && catalog[j].component_id < catalog[best].component_id)) {
      best = j;
      best_dist = dist;
    }
  }

  QueryMatch out;
  if (mode == QueryLevelMode::OneToOne) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(catalog.size()));
    x(static_cast<Eigen::Index>(best)) = 1.0;
    out.distance = best_dist;
    out.plan.counts.emplace_back(catalog[best].component_id, 1);
    out.plan.achieved = achieved_feature(catalog, x, op_mode);
    out.plan.objective = ErrorModel::build(p).objective(x);
    return out;
  }
  // The nearest single component is always feasible here.
  std::vector<std::int64_t> nearest(catalog.size(), 0);
  nearest[best] = 1;
  if (p.max_repetitions >= 1) p.hints.push_back(std::move(nearest));
  out.plan = solve_window(p);
  return out;
}

std::string export_plan_csv(const std::vector<SelectionPlan>& plans) {
  std::ostringstream out;
  csv::write_row(out, {"window_index", "component_id", "count"});
  for (const auto& p : plans)
    for (const auto& [id, n] : p.counts) csv::write_row(out, {std::to_string(p.window_index), id, std::to_string(n)});
  return out.str();
}

std::string export_summary_csv(const std::vector<SelectionPlan>& plans, const Targets& targets,
                               const std::vector<SelectionProblem>& problems) {
  std::ostringstream out;
  csv::write_row(out, {"window_index", "dimension", "target", "achieved", "error", "objective", "approximate"});
  std::vector<std::string> names = targets.schema.metrics;
  names.insert(names.end(), targets.schema.operators.begin(), targets.schema.operators.end());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i];
    const auto& prob = problems[i];
    const ErrorModel model = ErrorModel::build(prob);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.catalog->size()));
    for (const auto& [id, n] : plan.counts) x(static_cast<Eigen::Index>(*prob.catalog->index_of(id))) = static_cast<double>(n);
    const Eigen::VectorXd err = model.errors(x);
    const Eigen::VectorXd tgt = prob.target.stacked();
    const Eigen::VectorXd ach = plan.achieved.stacked();
    for (std::size_t d = 0; d < names.size(); ++d) {
      const auto dd = static_cast<Eigen::Index>(d);
      csv::write_row(out, {std::to_string(plan.window_index), names[d], csv::format_double(tgt(dd)),
                           csv::format_double(ach(dd)), csv::format_double(err(dd)),
                           csv::format_double(plan.objective), plan.approximate ? "1" : "0"});
    }
  }
  return out.str();
}

void write_plans(const std::filesystem::path& dir, const std::vector<SelectionPlan>& plans, const Targets& targets,
                 const Catalog& catalog, const SelectionConstraints& constraints) {
  std::vector<SelectionProblem> problems;
  for (const auto& w : targets.windows) problems.push_back(make_problem(w, catalog, constraints, targets.mode));
  csv::write_text(dir / "plan.csv", export_plan_csv(plans));
  csv::write_text(dir / "summary.csv", export_summary_csv(plans, targets, problems));
}

std::vector<SelectionPlan> read_plans(const std::filesystem::path& path, const Targets& targets,
                                      const Catalog& catalog, const SelectionConstraints& constraints) {
  csv::Table table = csv::read_file(path);
  const auto wc = table.require_column("window_index");
  const auto cc = table.require_column("component_id");
  const auto nc = table.require_column("count");
  const auto v = static_cast<Eigen::Index>(catalog.size());
  std::vector<Eigen::VectorXd> x(targets.windows.size(), Eigen::VectorXd::Zero(v));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto w = static_cast<std::size_t>(csv::parse_int(row[wc], r + 1, "window_index"));
    if (w >= x.size())
      throw Error(ErrorKind::Validation, fmt::format("plan row {}: window {} outside the target grid", r + 1, w));
    const auto j = catalog.index_of(row[cc]);
    if (!j) throw Error(ErrorKind::Lookup, fmt::format("plan row {}: unknown component id \"{}\"", r + 1, row[cc]));
    const auto n = csv::parse_int(row[nc], r + 1, "count");
    if (n < 0) throw Error(ErrorKind::Validation, fmt::format("plan row {}: negative count", r + 1));
    x[w](static_cast<Eigen::Index>(*j)) += static_cast<double>(n);
  }
  std::vector<SelectionPlan> plans;
  for (std::size_t w = 0; w < targets.windows.size(); ++w) {
    const SelectionProblem p = make_problem(targets.windows[w], catalog, constraints, targets.mode);
    SelectionPlan plan;
    plan.window_index = w;
    for (Eigen::Index j = 0; j < v; ++j)
      if (x[w](j) > 0.0)
        plan.counts.emplace_back(catalog[static_cast<std::size_t>(j)].component_id, static_cast<std::int64_t>(x[w](j)));
    plan.achieved = achieved_feature(catalog, x[w], targets.mode);
    plan.objective = ErrorModel::build(p).objective(x[w]);
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace wlsynth
