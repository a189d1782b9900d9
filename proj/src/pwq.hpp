#pragma once

#include <nlohmann/json.hpp>

#include <span>
#include <utility>
#include <vector>

namespace resalloc {

// q2 x^2 + q1 x + q0
struct Quadratic {
  double q2 = 0.0;
  double q1 = 0.0;
  double q0 = 0.0;

  double operator()(double x) const { return (q2 * x + q1) * x + q0; }
  double derivative(double x) const { return 2.0 * q2 * x + q1; }

  Quadratic operator+(const Quadratic& o) const { return {q2 + o.q2, q1 + o.q1, q0 + o.q0}; }
  Quadratic operator*(double s) const { return {q2 * s, q1 * s, q0 * s}; }

  // g(y) = this(c + d y)
  Quadratic compose_affine(double c, double d) const;

  bool approx_equal(const Quadratic& o, double tol) const;
};

// Continuous piecewise-quadratic scalar function on the real line. Piece k
// covers [breakpoints[k-1], breakpoints[k]] with implicit -inf/+inf ends.
class PiecewiseQuadratic {
 public:
  PiecewiseQuadratic() : pieces_{Quadratic{}} {}
  explicit PiecewiseQuadratic(Quadratic single) : pieces_{single} {}

  // Validates ordering and continuity (1e-9 relative), merges adjacent
  // identical pieces. Throws InvalidArgument.
  static PiecewiseQuadratic make(std::vector<double> breakpoints, std::vector<Quadratic> pieces);

  double operator()(double x) const { return pieces_[piece_index(x)](x); }
  size_t piece_index(double x) const;

  double left_derivative(double x) const;
  double right_derivative(double x) const;

  // q2 <= tol on every piece and one-sided derivatives non-increasing across
  // each breakpoint.
  bool is_concave(double tol = 1e-9) const;
  // Largest continuity defect across breakpoints, relative to magnitude.
  double continuity_defect() const;

  size_t piece_count() const { return pieces_.size(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Quadratic>& pieces() const { return pieces_; }

  // Interval [lo, hi] of piece k (infinite at the ends).
  std::pair<double, double> interval(size_t k) const;

  PiecewiseQuadratic plus(const Quadratic& q) const;
  PiecewiseQuadratic scaled(double s) const;

  nlohmann::json to_json() const;
  static PiecewiseQuadratic from_json(const nlohmann::json& j);

 private:
  std::vector<double> breakpoints_;
  std::vector<Quadratic> pieces_;
};

inline double pwq_eval(const PiecewiseQuadratic& f, double x) { return f(x); }

// One atom of a scalar return: value s_j with probability p_j.
struct ScalarAtom {
  double value = 0.0;
  double prob = 0.0;
};

// y -> sum_j p_j f(r0 (x - y) + s_j y), as a piecewise quadratic in y.
PiecewiseQuadratic pwq_expect_affine(const PiecewiseQuadratic& f, std::span<const ScalarAtom> atoms,
                                     double x, double r0);

struct MaximizeResult {
  double argmax = 0.0;
  double value = 0.0;
};

// Maximum of a concave g over (-inf, cap], or [0, cap] when nonneg is set.
MaximizeResult pwq_maximize_up_to(const PiecewiseQuadratic& g, double cap, bool nonneg = false);

}  // namespace resalloc
