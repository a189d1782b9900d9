#include "pwq.hpp"

#include "errors.hpp"
#include "numfmt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace resalloc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double magnitude(const Quadratic& q, double x) {
  return std::abs(q.q2 * x * x) + std::abs(q.q1 * x) + std::abs(q.q0);
}

}  // namespace

Quadratic Quadratic::compose_affine(double c, double d) const {
  return {q2 * d * d, 2.0 * q2 * c * d + q1 * d, (q2 * c + q1) * c + q0};
}

bool Quadratic::approx_equal(const Quadratic& o, double tol) const {
  const double scale = 1.0 + std::max({std::abs(q2), std::abs(q1), std::abs(q0), std::abs(o.q2),
                                       std::abs(o.q1), std::abs(o.q0)});
  return std::abs(q2 - o.q2) <= tol * scale && std::abs(q1 - o.q1) <= tol * scale &&
         std::abs(q0 - o.q0) <= tol * scale;
}

PiecewiseQuadratic PiecewiseQuadratic::make(std::vector<double> breakpoints, std::vector<Quadratic> pieces) {
  if (pieces.empty() || pieces.size() != breakpoints.size() + 1) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("piecewise quadratic needs k pieces and k-1 breakpoints (got {} and {})", pieces.size(),
                     breakpoints.size()));
  }
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    if (!std::isfinite(breakpoints[i])) fail(ErrorCode::InvalidArgument, "breakpoints must be finite");
    if (i > 0 && !(breakpoints[i] > breakpoints[i - 1])) {
      fail(ErrorCode::InvalidArgument, "breakpoints must be strictly increasing");
    }
  }
  for (const auto& q : pieces) {
    if (!std::isfinite(q.q2) || !std::isfinite(q.q1) || !std::isfinite(q.q0)) {
      fail(ErrorCode::InvalidArgument, "piece coefficients must be finite");
    }
  }

  PiecewiseQuadratic out;
  out.pieces_.clear();
  out.pieces_.push_back(pieces[0]);
  for (size_t i = 0; i < breakpoints.size(); ++i) {
    const Quadratic& left = pieces[i];
    const Quadratic& right = pieces[i + 1];
    const double b = breakpoints[i];
    const double scale = std::max({1.0, magnitude(left, b), magnitude(right, b)});
    if (std::abs(left(b) - right(b)) > 1e-9 * scale) {
      fail(ErrorCode::InvalidArgument,
           fmt::format("discontinuity {:.3e} at breakpoint {:.17g}", left(b) - right(b), b));
    }
    if (out.pieces_.back().approx_equal(right, 1e-10)) continue;
    out.breakpoints_.push_back(b);
    out.pieces_.push_back(right);
  }
  return out;
}

size_t PiecewiseQuadratic::piece_index(double x) const {
  return static_cast<size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) - breakpoints_.begin());
}

double PiecewiseQuadratic::left_derivative(double x) const {
  const auto k = static_cast<size_t>(std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                                     breakpoints_.begin());
  return pieces_[k].derivative(x);
}

double PiecewiseQuadratic::right_derivative(double x) const { return pieces_[piece_index(x)].derivative(x); }

bool PiecewiseQuadratic::is_concave(double tol) const {
  for (const auto& q : pieces_) {
    if (q.q2 > tol * (1.0 + std::abs(q.q1))) return false;
  }
  for (size_t i = 0; i < breakpoints_.size(); ++i) {
    const double b = breakpoints_[i];
    const double dl = pieces_[i].derivative(b);
    const double dr = pieces_[i + 1].derivative(b);
    if (dr > dl + tol * (1.0 + std::abs(dl) + std::abs(dr))) return false;
  }
  return true;
}

double PiecewiseQuadratic::continuity_defect() const {
  double worst = 0.0;
  for (size_t i = 0; i < breakpoints_.size(); ++i) {
    const double b = breakpoints_[i];
    const double scale = std::max({1.0, magnitude(pieces_[i], b), magnitude(pieces_[i + 1], b)});
    worst = std::max(worst, std::abs(pieces_[i](b) - pieces_[i + 1](b)) / scale);
  }
  return worst;
}

std::pair<double, double> PiecewiseQuadratic::interval(size_t k) const {
  const double lo = k == 0 ? -kInf : breakpoints_[k - 1];
  const double hi = k == breakpoints_.size() ? kInf : breakpoints_[k];
  return {lo, hi};
}

PiecewiseQuadratic PiecewiseQuadratic::plus(const Quadratic& q) const {
  PiecewiseQuadratic out = *this;
  for (auto& p : out.pieces_) p = p + q;
  return out;
}

PiecewiseQuadratic PiecewiseQuadratic::scaled(double s) const {
  PiecewiseQuadratic out = *this;
  for (auto& p : out.pieces_) p = p * s;
  return out;
}

nlohmann::json PiecewiseQuadratic::to_json() const {
  nlohmann::json breaks = nlohmann::json::array();
  for (double b : breakpoints_) breaks.push_back(json_number(b));
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& q : pieces_) pieces.push_back({json_number(q.q2), json_number(q.q1), json_number(q.q0)});
  return {{"breakpoints", breaks}, {"pieces", pieces}};
}

PiecewiseQuadratic PiecewiseQuadratic::from_json(const nlohmann::json& j) {
  std::vector<double> breaks;
  for (const auto& b : j.at("breakpoints")) breaks.push_back(parse_number(b));
  std::vector<Quadratic> pieces;
  for (const auto& p : j.at("pieces")) {
    if (!p.is_array() || p.size() != 3) fail(ErrorCode::SchemaError, "piece must be [q2, q1, q0]");
    pieces.push_back({parse_number(p[0]), parse_number(p[1]), parse_number(p[2])});
  }
  return make(std::move(breaks), std::move(pieces));
}

PiecewiseQuadratic pwq_expect_affine(const PiecewiseQuadratic& f, std::span<const ScalarAtom> atoms, double x,
                                     double r0) {
  const double c = r0 * x;
  std::vector<double> ybreaks;
  for (const auto& atom : atoms) {
    const double d = atom.value - r0;
    if (d == 0.0) continue;
    for (double b : f.breakpoints()) ybreaks.push_back((b - c) / d);
  }
  std::sort(ybreaks.begin(), ybreaks.end());
  std::vector<double> unique;
  for (double y : ybreaks) {
    if (unique.empty() || y - unique.back() > 1e-9 * (1.0 + std::abs(y))) unique.push_back(y);
  }

  std::vector<Quadratic> pieces;
  pieces.reserve(unique.size() + 1);
  for (size_t k = 0; k <= unique.size(); ++k) {
    double sample = 0.0;
    if (unique.empty()) {
      sample = 0.0;
    } else if (k == 0) {
      sample = unique.front() - std::max(1.0, std::abs(unique.front()));
    } else if (k == unique.size()) {
      sample = unique.back() + std::max(1.0, std::abs(unique.back()));
    } else {
      sample = 0.5 * (unique[k - 1] + unique[k]);
    }
    Quadratic acc;
    for (const auto& atom : atoms) {
      const double d = atom.value - r0;
      const Quadratic& piece = f.pieces()[f.piece_index(c + d * sample)];
      acc = acc + piece.compose_affine(c, d) * atom.prob;
    }
    pieces.push_back(acc);
  }
  return PiecewiseQuadratic::make(std::move(unique), std::move(pieces));
}

MaximizeResult pwq_maximize_up_to(const PiecewiseQuadratic& g, double cap, bool nonneg) {
  if (!std::isfinite(cap)) fail(ErrorCode::InvalidArgument, "cap must be finite");
  const double lo_domain = nonneg ? 0.0 : -kInf;
  if (nonneg && cap < 0.0) fail(ErrorCode::InvalidArgument, "empty domain [0, cap] with negative cap");

  MaximizeResult best{0.0, -kInf};
  auto consider = [&](double y, double v) {
    if (v > best.value) best = {y, v};
  };
  for (size_t k = 0; k < g.piece_count(); ++k) {
    auto [lo, hi] = g.interval(k);
    lo = std::max(lo, lo_domain);
    hi = std::min(hi, cap);
    if (lo > hi) continue;
    const Quadratic& q = g.pieces()[k];
    if (std::isfinite(lo)) consider(lo, q(lo));
    consider(hi, q(hi));
    if (q.q2 < 0.0) {
      const double s = -q.q1 / (2.0 * q.q2);
      if (s > lo && s < hi) consider(s, q(s));
    } else if (!std::isfinite(lo) && (q.q2 > 0.0 || q.q1 < 0.0)) {
      fail(ErrorCode::UnboundedAbove, "objective increases without bound as allocation decreases");
    }
  }
  return best;
}

}  // namespace resalloc
