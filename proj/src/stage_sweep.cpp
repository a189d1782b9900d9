#include "stage_sweep.hpp"

#include "errors.hpp"
#include "qp.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace resalloc {

StageQuadratic StageQuadratic::zero(int n) {
  return {MatrixXd::Zero(n, n), VectorXd::Zero(n), VectorXd::Zero(n), 0.0, 0.0, 0.0};
}

double StageQuadratic::operator()(double x, const VectorXd& u) const {
  return 0.5 * u.dot(Quu * u) + x * qux.dot(u) + qu.dot(u) + (qxx * x + qx) * x + q0;
}

double StageProblem::objective(double x, const VectorXd& u) const {
  double v = base(x, u);
  for (const auto& t : terms) v += t.weight * t.f(t.arg(x, u));
  return v;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxModes = 100000;

enum class RowKind { Budget, Nonneg, Upper, Lower };

struct RowKey {
  RowKind kind;
  int index;
  bool operator==(const RowKey&) const = default;
};

// a'u <= b0 + b1 x
struct Row {
  RowKey key;
  VectorXd a;
  double b0;
  double b1;
};

using Pieces = std::vector<size_t>;

// An active set together with the term pieces it lives on. Inside [lo, hi]
// the maximizer is u0 + u1 x.
struct Mode {
  Pieces pieces;
  std::vector<RowKey> active;
  VectorXd u0;
  VectorXd u1;
  double lo = -kInf;
  double hi = kInf;
  bool consistent = true;

  bool contains(double x) const {
    const double eps = 1e-12 * (1.0 + std::abs(x));
    return consistent && lo <= x + eps && hi >= x - eps;
  }
};

class Engine {
 public:
  explicit Engine(const StageProblem& p) : p_(p) {
    const int n = p.n;
    if (n < 1) fail(ErrorCode::InvalidArgument, "stage problem needs n >= 1");
    if (p.base.Quu.rows() != n || p.base.Quu.cols() != n || p.base.qux.size() != n || p.base.qu.size() != n) {
      fail(ErrorCode::InvalidArgument, "stage base quadratic has wrong dimension");
    }
    for (const auto& t : p.terms) {
      if (t.arg.w.size() != n) fail(ErrorCode::InvalidArgument, "stage term has wrong dimension");
      if (t.weight < 0.0) fail(ErrorCode::InvalidArgument, "stage term weight must be nonnegative");
    }
  }

  bool half_line() const { return p_.budget && p_.nonneg; }

  std::vector<Row> rows(const Pieces& pieces) const {
    std::vector<Row> out;
    const int n = p_.n;
    if (p_.budget) out.push_back({{RowKind::Budget, 0}, VectorXd::Ones(n), 0.0, 1.0});
    if (p_.nonneg) {
      for (int i = 0; i < n; ++i) out.push_back({{RowKind::Nonneg, i}, -VectorXd::Unit(n, i), 0.0, 0.0});
    }
    for (size_t j = 0; j < p_.terms.size(); ++j) {
      const auto& t = p_.terms[j];
      const auto& br = t.f.breakpoints();
      const size_t k = pieces[j];
      const int idx = static_cast<int>(j);
      if (k < br.size()) out.push_back({{RowKind::Upper, idx}, t.arg.w, br[k], -t.arg.x_coef});
      if (k > 0) out.push_back({{RowKind::Lower, idx}, -t.arg.w, -br[k - 1], t.arg.x_coef});
    }
    return out;
  }

  MatrixXd hessian(const Pieces& pieces) const {
    MatrixXd H = p_.base.Quu;
    for (size_t j = 0; j < p_.terms.size(); ++j) {
      const auto& t = p_.terms[j];
      const Quadratic& q = t.f.pieces()[pieces[j]];
      H += (2.0 * t.weight * q.q2) * t.arg.w * t.arg.w.transpose();
    }
    return H;
  }

  // Linear coefficient of u at resource x is g0 + g1 x.
  void gradient(const Pieces& pieces, VectorXd& g0, VectorXd& g1) const {
    g0 = p_.base.qu;
    g1 = p_.base.qux;
    for (size_t j = 0; j < p_.terms.size(); ++j) {
      const auto& t = p_.terms[j];
      const Quadratic& q = t.f.pieces()[pieces[j]];
      g0 += (t.weight * q.q1) * t.arg.w;
      g1 += (2.0 * t.weight * q.q2 * t.arg.x_coef) * t.arg.w;
    }
  }

  // Drop in the term's slope when its argument crosses the row's breakpoint.
  double jump(const RowKey& key, const Pieces& pieces) const {
    const auto& t = p_.terms[static_cast<size_t>(key.index)];
    const size_t k = pieces[static_cast<size_t>(key.index)];
    const auto& fp = t.f.pieces();
    const auto& br = t.f.breakpoints();
    if (key.kind == RowKind::Upper) {
      return t.weight * (fp[k].derivative(br[k]) - fp[k + 1].derivative(br[k]));
    }
    return t.weight * (fp[k - 1].derivative(br[k - 1]) - fp[k].derivative(br[k - 1]));
  }

  VectorXd feasible_start(double x) const {
    const int n = p_.n;
    if (!p_.budget) return VectorXd::Zero(n);
    if (p_.nonneg) {
      if (x < 0.0) fail(ErrorCode::InvalidArgument, fmt::format("resource {} is infeasible with nonneg", x));
      return VectorXd::Zero(n);
    }
    return x >= 0.0 ? VectorXd::Zero(n) : VectorXd::Constant(n, x / n);
  }

  struct Fixed {
    VectorXd u;
    Pieces pieces;
    std::vector<RowKey> active;
  };

  // Walk cells of the piecewise terms until no boundary multiplier exceeds
  // the slope drop across it.
  Fixed solve_fixed(double x) const {
    VectorXd u = feasible_start(x);
    Pieces pieces(p_.terms.size());
    for (size_t j = 0; j < p_.terms.size(); ++j) pieces[j] = p_.terms[j].f.piece_index(p_.terms[j].arg(x, u));

    const int n = p_.n;
    for (int it = 0; it < 10000; ++it) {
      const auto rs = rows(pieces);
      QpProblem qp;
      qp.H = hessian(pieces);
      VectorXd g0, g1;
      gradient(pieces, g0, g1);
      qp.g = g0 + g1 * x;
      qp.A.resize(static_cast<Eigen::Index>(rs.size()), n);
      qp.b.resize(static_cast<Eigen::Index>(rs.size()));
      for (size_t i = 0; i < rs.size(); ++i) {
        qp.A.row(static_cast<Eigen::Index>(i)) = rs[i].a.transpose();
        qp.b[static_cast<Eigen::Index>(i)] = rs[i].b0 + rs[i].b1 * x;
      }
      const QpResult r = solve_qp(qp, u);
      u = r.u;

      int best = -1;
      double best_excess = 0.0;
      for (size_t i = 0; i < r.active.size(); ++i) {
        const Row& row = rs[static_cast<size_t>(r.active[i])];
        if (row.key.kind != RowKind::Upper && row.key.kind != RowKind::Lower) continue;
        const double lam = r.multipliers[static_cast<Eigen::Index>(i)];
        const double jmp = jump(row.key, pieces);
        const double excess = lam - jmp;
        if (excess > 1e-10 * (1.0 + std::abs(lam) + std::abs(jmp)) && excess > best_excess) {
          best = static_cast<int>(i);
          best_excess = excess;
        }
      }
      if (best < 0) {
        Fixed out{u, pieces, {}};
        for (int a : r.active) out.active.push_back(rs[static_cast<size_t>(a)].key);
        return out;
      }
      const RowKey key = rs[static_cast<size_t>(r.active[static_cast<size_t>(best)])].key;
      size_t& k = pieces[static_cast<size_t>(key.index)];
      k = key.kind == RowKind::Upper ? k + 1 : k - 1;
    }
    fail(ErrorCode::SolverFailure, "stage cell walk did not terminate");
  }

  Mode law(const Pieces& pieces, const std::vector<RowKey>& active, double x_ref) const {
    const int n = p_.n;
    const auto rs = rows(pieces);
    std::vector<int> pos(rs.size(), -1);
    MatrixXd A(static_cast<Eigen::Index>(active.size()), n);
    VectorXd b0(A.rows());
    VectorXd b1(A.rows());
    for (size_t k = 0; k < active.size(); ++k) {
      const auto it = std::find_if(rs.begin(), rs.end(), [&](const Row& r) { return r.key == active[k]; });
      if (it == rs.end()) fail(ErrorCode::SolverFailure, "active row missing from cell");
      const size_t i = static_cast<size_t>(it - rs.begin());
      pos[i] = static_cast<int>(k);
      A.row(static_cast<Eigen::Index>(k)) = it->a.transpose();
      b0[static_cast<Eigen::Index>(k)] = it->b0;
      b1[static_cast<Eigen::Index>(k)] = it->b1;
    }
    const MatrixXd H = hessian(pieces);
    VectorXd g0, g1;
    gradient(pieces, g0, g1);

    // Two solves of the same KKT system give the affine law exactly.
    const double xa = x_ref;
    const double xb = x_ref + 1.0 + std::abs(x_ref);
    const auto sa = solve_equality_qp(H, g0 + g1 * xa, A, b0 + b1 * xa);
    const auto sb = solve_equality_qp(H, g0 + g1 * xb, A, b0 + b1 * xb);
    Mode m;
    m.pieces = pieces;
    m.active = active;
    m.u1 = (sb.u - sa.u) / (xb - xa);
    m.u0 = sa.u - m.u1 * xa;
    const VectorXd lam1 = (sb.multipliers - sa.multipliers) / (xb - xa);
    const VectorXd lam0 = sa.multipliers - lam1 * xa;

    // Validity conditions c0 + c1 x >= 0.
    auto restrict = [&](double c0, double c1) {
      const double at_ref = c0 + c1 * x_ref;
      if (std::abs(c1) * (1.0 + std::abs(x_ref)) <= 1e-12 * (1.0 + std::abs(at_ref))) {
        if (at_ref < -1e-9 * (1.0 + std::abs(c0))) m.consistent = false;
        return;
      }
      const double root = -c0 / c1;
      if (c1 > 0.0) {
        m.lo = std::max(m.lo, root);
      } else {
        m.hi = std::min(m.hi, root);
      }
    };
    for (size_t i = 0; i < rs.size(); ++i) {
      const Row& row = rs[i];
      if (pos[i] >= 0) {
        const double l0 = lam0[pos[i]];
        const double l1 = lam1[pos[i]];
        restrict(l0, l1);
        if (row.key.kind == RowKind::Upper || row.key.kind == RowKind::Lower) {
          restrict(jump(row.key, pieces) - l0, -l1);
        }
      } else {
        restrict(row.b0 - row.a.dot(m.u0), row.b1 - row.a.dot(m.u1));
      }
    }
    return m;
  }

  Mode mode_at(double x) const {
    const Fixed f = solve_fixed(x);
    return law(f.pieces, f.active, x);
  }

  Quadratic value_quadratic(const Mode& m) const {
    const auto& b = p_.base;
    const VectorXd Qu1 = b.Quu * m.u1;
    Quadratic q{0.5 * m.u1.dot(Qu1) + b.qux.dot(m.u1) + b.qxx,
                m.u0.dot(Qu1) + b.qux.dot(m.u0) + b.qu.dot(m.u1) + b.qx,
                0.5 * m.u0.dot(b.Quu * m.u0) + b.qu.dot(m.u0) + b.q0};
    for (size_t j = 0; j < p_.terms.size(); ++j) {
      const auto& t = p_.terms[j];
      const double c = t.arg.w.dot(m.u0);
      const double d = t.arg.x_coef + t.arg.w.dot(m.u1);
      q = q + t.f.pieces()[m.pieces[j]].compose_affine(c, d) * t.weight;
    }
    return q;
  }

  // First mode past X in direction dir (+1 right, -1 left), with any
  // narrow intermediate mode found by bisection.
  Mode next_mode(double X, int dir) const {
    Mode m;
    bool found = false;
    for (double rel : {1e-9, 1e-7, 1e-5, 1e-3}) {
      double xp = X + dir * rel * (1.0 + std::abs(X));
      if (half_line() && xp < 0.0) xp = 0.5 * X;
      m = mode_at(xp);
      if (m.contains(xp)) {
        found = true;
        break;
      }
    }
    if (!found) fail(ErrorCode::SolverFailure, fmt::format("no consistent stage mode next to x = {}", X));

    const double eps = 1e-10 * (1.0 + std::abs(X));
    for (int guard = 0; guard < 200; ++guard) {
      const double back = dir > 0 ? m.lo : m.hi;
      if (dir * (back - X) <= eps) return m;
      const double mid = 0.5 * (X + back);
      Mode g = mode_at(mid);
      if (!g.contains(mid)) fail(ErrorCode::SolverFailure, fmt::format("inconsistent stage mode at x = {}", mid));
      m = std::move(g);
    }
    fail(ErrorCode::SolverFailure, "stage mode bisection did not terminate");
  }

  StageSolution sweep() const {
    const double start = 1.0;
    Mode first = mode_at(start);
    if (!first.contains(start)) fail(ErrorCode::SolverFailure, "inconsistent stage mode at the sweep start");

    std::vector<Mode> right;
    std::vector<double> right_breaks;
    for (double X = first.hi; std::isfinite(X);) {
      Mode m = next_mode(X, +1);
      right_breaks.push_back(X);
      X = m.hi;
      right.push_back(std::move(m));
      if (right.size() > kMaxModes) fail(ErrorCode::SolverFailure, "too many stage modes");
    }

    std::vector<Mode> left;
    std::vector<double> left_breaks;
    const double left_stop = half_line() ? 1e-8 : -kInf;
    for (double X = first.lo; std::isfinite(X) && X > left_stop;) {
      Mode m = next_mode(X, -1);
      left_breaks.push_back(X);
      X = m.lo;
      left.push_back(std::move(m));
      if (left.size() > kMaxModes) fail(ErrorCode::SolverFailure, "too many stage modes");
    }

    std::vector<const Mode*> modes;
    std::vector<double> breaks;
    for (size_t i = left.size(); i-- > 0;) {
      modes.push_back(&left[i]);
      breaks.push_back(left_breaks[i]);
    }
    modes.push_back(&first);
    for (size_t i = 0; i < right.size(); ++i) {
      breaks.push_back(right_breaks[i]);
      modes.push_back(&right[i]);
    }
    // A mode can be left inside the half-line cutoff; it is absorbed into
    // the extrapolated first piece.
    while (half_line() && !breaks.empty() && breaks.front() <= left_stop) {
      breaks.erase(breaks.begin());
      modes.erase(modes.begin());
    }

    std::vector<Quadratic> values;
    std::vector<AffineLaw> laws;
    for (const Mode* m : modes) {
      values.push_back(value_quadratic(*m));
      laws.push_back({m->u0, m->u1});
    }
    StageSolution out{PiecewiseQuadratic::make(breaks, values), StageRule::make(breaks, laws)};
    verify(out);
    return out;
  }

  // Re-solve at one point of every piece and compare values.
  void verify(const StageSolution& s) const {
    for (size_t k = 0; k < s.value.piece_count(); ++k) {
      const auto [lo, hi] = s.value.interval(k);
      double x;
      if (std::isfinite(lo) && std::isfinite(hi)) {
        x = 0.5 * (lo + hi);
      } else if (std::isfinite(lo)) {
        x = lo + 1.0 + std::abs(lo);
      } else if (std::isfinite(hi)) {
        x = hi - 1.0 - std::abs(hi);
      } else {
        x = 1.0;
      }
      if (half_line() && x < 0.0) {
        if (hi <= 0.0) continue;
        x = 0.5 * hi;
        if (!std::isfinite(x)) x = 1.0;
      }
      const Fixed f = solve_fixed(x);
      const double direct = p_.objective(x, f.u);
      const double swept = s.value(x);
      if (std::abs(direct - swept) > 1e-7 * (1.0 + std::abs(direct))) {
        fail(ErrorCode::SolverFailure,
             fmt::format("stage value mismatch at x = {}: sweep {} vs direct {}", x, swept, direct));
      }
    }
  }

  StagePoint point(double x) const {
    const Fixed f = solve_fixed(x);
    return {f.u, p_.objective(x, f.u)};
  }

 private:
  const StageProblem& p_;
};

}  // namespace

StagePoint solve_stage_at(const StageProblem& problem, double x) { return Engine(problem).point(x); }

StageSolution sweep_stage(const StageProblem& problem) { return Engine(problem).sweep(); }

StageProblem scenario_stage(std::span<const ScenarioAtom> atoms, int n, double a, double b,
                            const PiecewiseQuadratic& next, bool nonneg) {
  StageProblem p;
  p.n = n;
  p.base = StageQuadratic::zero(n);
  p.nonneg = nonneg;
  const PiecewiseQuadratic h = next.plus(Quadratic{-b, a, 0.0});
  for (const auto& atom : merge_atoms(atoms)) {
    const double e = atom.returns[0];
    p.terms.push_back({atom.prob, {e, atom.returns.tail(n).array() - e}, h});
  }
  return p;
}

PiecewiseTerm overdraft_term(int n, double cost) {
  const auto f = PiecewiseQuadratic::make({0.0}, {Quadratic{}, Quadratic{0.0, -cost, 0.0}});
  return {1.0, {-1.0, VectorXd::Ones(n)}, f};
}

}  // namespace resalloc
