#include "oracle.hpp"

#include "errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <limits>

namespace resalloc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
  double p = 0.0;
  double e = 0.0;
  VectorXd P;
};

std::vector<std::vector<Atom>> tree_atoms(const ProblemSpec& problem) {
  std::vector<std::vector<Atom>> out;
  const int n = problem.n();
  for (int t = 0; t < problem.horizon; ++t) {
    const Period& period = problem.period(t);
    if (!period.has_atoms()) fail(ErrorCode::MissingAtoms, fmt::format("period {} has no atoms", t + 1));
    std::vector<Atom> atoms;
    for (const auto& a : period.atoms) {
      atoms.push_back({a.prob, a.returns[0], a.returns.tail(n).array() - a.returns[0]});
    }
    out.push_back(std::move(atoms));
  }
  return out;
}

// maximize 0.5 u'Hu + g'u + c0 subject to rows[i]'u <= rhs[i]
struct SmallQp {
  MatrixXd H;
  VectorXd g;
  double c0 = 0.0;
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
};

// The optimum of a concave QP is the stationary point of its active face,
// so the best feasible face-stationary point is optimal.
bool best_face_point(const SmallQp& q, VectorXd& arg, double& best) {
  const Eigen::Index n = q.H.rows();
  const size_t m = q.rows.size();
  bool found = false;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<size_t> face;
    for (size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) face.push_back(i);
    }
    if (static_cast<Eigen::Index>(face.size()) > n) continue;
    const Eigen::Index k = static_cast<Eigen::Index>(face.size());
    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = -q.H;
    rhs.head(n) = q.g;
    for (Eigen::Index r = 0; r < k; ++r) {
      K.block(0, n + r, n, 1) = q.rows[face[static_cast<size_t>(r)]];
      K.block(n + r, 0, 1, n) = q.rows[face[static_cast<size_t>(r)]].transpose();
      rhs[n + r] = q.rhs[face[static_cast<size_t>(r)]];
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd u = lu.solve(rhs).head(n);
    bool ok = true;
    for (size_t i = 0; i < m && ok; ++i) ok = q.rows[i].dot(u) <= q.rhs[i] + 1e-9 * (1.0 + std::abs(q.rhs[i]));
    if (!ok) continue;
    const double v = 0.5 * u.dot(q.H * u) + q.g.dot(u) + q.c0;
    if (!found || v > best) {
      found = true;
      best = v;
      arg = u;
    }
  }
  return found;
}

struct LineMax {
  double arg;
  double value;
};

template <class F>
LineMax line_max(const F& f, double lo, double hi, double scale) {
  if (lo > hi) return {lo, -kInf};
  if (lo == hi) return {lo, f(lo)};
  const double s = std::isfinite(hi) ? hi : (std::isfinite(lo) ? lo : 0.0);
  auto expand = [&](double dir) {
    double p = s;
    double fp = f(p);
    for (double step = scale;; step *= 2.0) {
      const double q = p + dir * step;
      const double fq = f(q);
      if (fq <= fp) return q;
      p = q;
      fp = fq;
      if (step > 1e15 * scale) fail(ErrorCode::UnboundedAbove, "oracle line search is unbounded");
    }
  };
  const double L = std::isfinite(lo) ? lo : expand(-1.0);
  const double R = std::isfinite(hi) ? hi : expand(+1.0);
  std::uintmax_t iters = 500;
  const auto r = boost::math::tools::brent_find_minima([&](double v) { return -f(v); }, L, R, 26, iters);
  LineMax best{r.first, -r.second};
  for (double end : {lo, hi}) {
    if (!std::isfinite(end)) continue;
    const double v = f(end);
    if (v > best.value) best = {end, v};
  }
  return best;
}

class Tree {
 public:
  Tree(const ProblemSpec& problem, const OracleOptions& options)
      : problem_(problem), options_(options), atoms_(tree_atoms(problem)), n_(problem.n()),
        budget_(!problem.borrow_cost) {}

  double value(int t, double x, const std::vector<int>* history, TreePolicy* record) const {
    double best = -kInf;
    VectorXd arg;
    if (options_.search == OracleSearch::Line && t == problem_.horizon - 1) {
      arg = leaf_exact(t, x, best);
    } else if (options_.search == OracleSearch::Line) {
      arg = search_line(t, x, best);
    } else {
      arg = search_grid(t, x, best);
    }
    if (record) {
      record->nodes.push_back({*history, x, arg});
      stage(t, x, arg, history, record);
    }
    return best;
  }

 private:
  double cost(int t) const { return problem_.borrow_cost ? (*problem_.borrow_cost)[static_cast<size_t>(t)] : 0.0; }

  bool feasible(double x, const VectorXd& u) const {
    if (budget_ && u.sum() > x) return false;
    if (options_.nonneg && (u.array() < 0.0).any()) return false;
    return true;
  }

  double stage(int t, double x, const VectorXd& u, const std::vector<int>* history, TreePolicy* record) const {
    const size_t ts = static_cast<size_t>(t);
    const double a = problem_.objective.a[ts];
    const double b = problem_.objective.b[ts];
    const bool last = t + 1 == problem_.horizon;
    double total = 0.0;
    for (size_t j = 0; j < atoms_[ts].size(); ++j) {
      const Atom& at = atoms_[ts][j];
      const double xn = at.e * x + at.P.dot(u);
      double v = a * xn - b * xn * xn;
      if (!last) {
        if (record) {
          std::vector<int> h = *history;
          h.push_back(static_cast<int>(j));
          v += value(t + 1, xn, &h, record);
        } else {
          v += value(t + 1, xn, nullptr, nullptr);
        }
      }
      total += at.p * v;
    }
    return total - cost(t) * std::max(0.0, u.sum() - x);
  }

  double grid_point(double lo, double hi, int i) const {
    return lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(options_.grid - 1));
  }

  VectorXd search_grid(int t, double x, double& best) const {
    const double lo = options_.nonneg ? 0.0 : -std::abs(x);
    const double hi = options_.nonneg ? std::max(x, 0.0) : std::abs(x);
    const int N = options_.grid;
    VectorXd u(n_);
    VectorXd arg = VectorXd::Zero(n_);
    for (int i = 0; i < N; ++i) {
      u[0] = grid_point(lo, hi, i);
      for (int j = 0; j < (n_ == 2 ? N : 1); ++j) {
        if (n_ == 2) u[1] = grid_point(lo, hi, j);
        if (!feasible(x, u)) continue;
        const double v = stage(t, x, u, nullptr, nullptr);
        if (v > best) {
          best = v;
          arg = u;
        }
      }
    }
    if (!std::isfinite(best)) fail(ErrorCode::InvalidArgument, fmt::format("no feasible grid allocation at x = {}", x));
    return arg;
  }

  VectorXd search_line(int t, double x, double& best) const {
    const double scale = 1.0 + std::abs(x);
    const double lo = options_.nonneg ? 0.0 : -kInf;
    if (n_ == 1) {
      const double hi = budget_ ? x : kInf;
      const LineMax r = line_max([&](double y) { return stage(t, x, VectorXd::Constant(1, y), nullptr, nullptr); },
                                 lo, hi, scale);
      best = r.value;
      return VectorXd::Constant(1, r.arg);
    }
    auto inner = [&](double u1) {
      const double hi2 = budget_ ? x - u1 : kInf;
      return line_max(
          [&](double u2) {
            VectorXd u(2);
            u << u1, u2;
            return stage(t, x, u, nullptr, nullptr);
          },
          lo, hi2, scale);
    };
    const double hi1 = budget_ && options_.nonneg ? x : kInf;
    const LineMax outer = line_max([&](double u1) { return inner(u1).value; }, lo, hi1, scale);
    const LineMax in = inner(outer.arg);
    best = in.value;
    VectorXd u(2);
    u << outer.arg, in.arg;
    return u;
  }

  // Last period: E[a x_T - b x_T^2] - c [1'u - x]^+ is a concave QP on each
  // side of the kink.
  VectorXd leaf_exact(int t, double x, double& best) const {
    const size_t ts = static_cast<size_t>(t);
    const double a = problem_.objective.a[ts];
    const double b = problem_.objective.b[ts];
    SmallQp q;
    q.H = MatrixXd::Zero(n_, n_);
    q.g = VectorXd::Zero(n_);
    for (const Atom& at : atoms_[ts]) {
      q.H += -2.0 * b * at.p * at.P * at.P.transpose();
      q.g += at.p * (a - 2.0 * b * at.e * x) * at.P;
      q.c0 += at.p * (a * at.e * x - b * at.e * at.e * x * x);
    }
    if (options_.nonneg) {
      for (int i = 0; i < n_; ++i) {
        q.rows.push_back(-VectorXd::Unit(n_, i));
        q.rhs.push_back(0.0);
      }
    }
    const VectorXd ones = VectorXd::Ones(n_);
    SmallQp under = q;
    under.rows.push_back(ones);
    under.rhs.push_back(x);
    VectorXd arg;
    bool found = best_face_point(under, arg, best);
    if (!budget_) {
      SmallQp over = q;
      over.g -= cost(t) * ones;
      over.c0 += cost(t) * x;
      over.rows.push_back(-ones);
      over.rhs.push_back(-x);
      VectorXd arg2;
      double best2 = -kInf;
      if (best_face_point(over, arg2, best2) && (!found || best2 > best)) {
        best = best2;
        arg = arg2;
        found = true;
      }
    }
    if (!found) fail(ErrorCode::InvalidArgument, fmt::format("no feasible allocation at x = {}", x));
    return arg;
  }

  const ProblemSpec& problem_;
  OracleOptions options_;
  std::vector<std::vector<Atom>> atoms_;
  int n_;
  bool budget_;
};

using HistoryPolicy = std::function<VectorXd(int t, const std::vector<int>& history, double x)>;

Evaluation evaluate_tree(const ProblemSpec& problem, const HistoryPolicy& policy) {
  const auto atoms = tree_atoms(problem);
  double leaves = 1.0;
  for (const auto& a : atoms) leaves *= static_cast<double>(a.size());
  if (leaves > 1e6) fail(ErrorCode::InstanceTooLarge, fmt::format("tree has {:.0f} leaves (limit 1e6)", leaves));

  const size_t T = static_cast<size_t>(problem.horizon);
  std::vector<long double> m1(T, 0.0L), m2(T, 0.0L), od(T, 0.0L);
  std::vector<int> history;
  std::function<void(size_t, double, long double)> walk = [&](size_t t, double x, long double prob) {
    if (t == T) return;
    const VectorXd u = policy(static_cast<int>(t), history, x);
    od[t] += prob * std::max(0.0, u.sum() - x);
    for (size_t j = 0; j < atoms[t].size(); ++j) {
      const Atom& at = atoms[t][j];
      const double xn = at.e * x + at.P.dot(u);
      const long double pj = prob * at.p;
      m1[t] += pj * xn;
      m2[t] += pj * static_cast<long double>(xn) * xn;
      history.push_back(static_cast<int>(j));
      walk(t + 1, xn, pj);
      history.pop_back();
    }
  };
  walk(0, problem.x0, 1.0L);

  Evaluation ev;
  for (size_t t = 0; t < T; ++t) {
    ev.means.push_back(static_cast<double>(m1[t]));
    ev.seconds.push_back(static_cast<double>(m2[t]));
    ev.variances.push_back(static_cast<double>(std::max(0.0L, m2[t] - m1[t] * m1[t])));
    ev.overdraft.push_back(static_cast<double>(od[t]));
  }
  ev.objective = objective_value(problem, ev.means, ev.seconds, ev.overdraft);
  return ev;
}

}  // namespace

const TreeNode* TreePolicy::find(const std::vector<int>& history) const {
  for (const auto& node : nodes) {
    if (node.history == history) return &node;
  }
  return nullptr;
}

OracleResult oracle_solve(const ProblemSpec& problem, const OracleOptions& options) {
  check_problem(problem);
  if (problem.objective.form != ObjectiveForm::Separable) {
    fail(ErrorCode::InvalidArgument, "the tree oracle needs a Separable objective");
  }
  const int T = problem.horizon;
  const int n = problem.n();
  size_t max_atoms = 0;
  for (const auto& p : problem.model.periods) max_atoms = std::max(max_atoms, p.atoms.size());
  if (T > 3 || n > 2 || max_atoms > 3 || options.grid > 2001) {
    fail(ErrorCode::InstanceTooLarge,
         fmt::format("oracle limits are T <= 3, n <= 2, 3 atoms, grid <= 2001 (got T={}, n={}, atoms={}, grid={})", T,
                     n, max_atoms, options.grid));
  }
  if (options.grid < 2) fail(ErrorCode::InvalidArgument, "oracle grid needs at least 2 points");
  if (problem.objective.b.back() <= 0.0) fail(ErrorCode::LinearStage, "last-period b must be positive");

  // Rough count of stage evaluations.
  double work = 1.0;
  if (options.search == OracleSearch::Grid) {
    for (const auto& p : problem.model.periods) work *= std::pow(options.grid, n) * static_cast<double>(p.atoms.size());
  } else {
    for (int t = 0; t + 1 < T; ++t) work *= std::pow(60.0, n) * static_cast<double>(problem.period(t).atoms.size());
  }
  if (work > 3e8) fail(ErrorCode::InstanceTooLarge, fmt::format("oracle work estimate {:.3g} exceeds 3e8", work));

  const Tree tree(problem, options);
  OracleResult out;
  const std::vector<int> root;
  out.objective = tree.value(0, problem.x0, &root, &out.policy);
  out.evaluation = evaluate_tree(problem, [&](int, const std::vector<int>& history, double) {
    const TreeNode* node = out.policy.find(history);
    if (!node) fail(ErrorCode::SolverFailure, "tree policy is missing a node");
    return node->u;
  });
  return out;
}

PolicyFn policy_fn(const Policy& policy) {
  return [policy](int t, double x) { return policy.at(static_cast<size_t>(t))(x); };
}

Evaluation oracle_evaluate(const ProblemSpec& problem, const PolicyFn& policy) {
  check_problem(problem);
  return evaluate_tree(problem, [&](int t, const std::vector<int>&, double x) { return policy(t, x); });
}

}  // namespace resalloc
