#include "errors.hpp"
#include "pwq.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace resalloc;

namespace {

// min(x, 1) - 0.1 x^2: concave, kink at 1
PiecewiseQuadratic capped() {
  return PiecewiseQuadratic::make({1.0}, {Quadratic{-0.1, 1.0, 0.0}, Quadratic{-0.1, 0.0, 1.0}});
}

}  // namespace

TEST(Quadratic, ComposeAffine) {
  const Quadratic q{2.0, -3.0, 1.0};
  const Quadratic g = q.compose_affine(0.5, 2.0);
  for (double y : {-2.0, 0.0, 0.3, 4.0}) EXPECT_NEAR(g(y), q(0.5 + 2.0 * y), 1e-12);
}

TEST(Pwq, EvaluatesAndDifferentiates) {
  const auto f = capped();
  EXPECT_EQ(f.piece_count(), 2u);
  EXPECT_NEAR(f(0.5), 0.5 - 0.025, 1e-15);
  EXPECT_NEAR(f(3.0), 1.0 - 0.9, 1e-15);
  EXPECT_NEAR(f.left_derivative(1.0), 0.8, 1e-15);
  EXPECT_NEAR(f.right_derivative(1.0), -0.2, 1e-15);
  EXPECT_TRUE(f.is_concave());
  EXPECT_LT(f.continuity_defect(), 1e-15);
}

TEST(Pwq, MergesIdenticalNeighbours) {
  const Quadratic q{-1.0, 2.0, 0.5};
  const auto f = PiecewiseQuadratic::make({-1.0, 2.0}, {q, q, q});
  EXPECT_EQ(f.piece_count(), 1u);
  EXPECT_TRUE(f.breakpoints().empty());
}

TEST(Pwq, RejectsBadInput) {
  EXPECT_THROW(PiecewiseQuadratic::make({1.0}, {Quadratic{0, 1, 0}, Quadratic{0, 0, 5}}), Error);
  EXPECT_THROW(PiecewiseQuadratic::make({2.0, 1.0}, {Quadratic{}, Quadratic{}, Quadratic{}}), Error);
  EXPECT_THROW(PiecewiseQuadratic::make({1.0}, {Quadratic{}}), Error);
}

TEST(Pwq, ConvexKinkIsNotConcave) {
  const auto f = PiecewiseQuadratic::make({0.0}, {Quadratic{0, -1, 0}, Quadratic{0, 1, 0}});
  EXPECT_FALSE(f.is_concave());
  EXPECT_FALSE(PiecewiseQuadratic(Quadratic{1.0, 0, 0}).is_concave());
}

TEST(Pwq, JsonRoundTrip) {
  const auto f = capped();
  const auto g = PiecewiseQuadratic::from_json(f.to_json());
  ASSERT_EQ(g.piece_count(), f.piece_count());
  for (double x : {-3.0, 0.2, 1.0, 7.5}) EXPECT_DOUBLE_EQ(g(x), f(x));
}

TEST(Pwq, PlusAndScale) {
  const auto f = capped().plus(Quadratic{0.0, 0.0, 2.0}).scaled(3.0);
  for (double x : {-1.0, 0.5, 2.0}) EXPECT_NEAR(f(x), 3.0 * (capped()(x) + 2.0), 1e-12);
}

TEST(PwqExpect, MatchesPointwiseExpectation) {
  const auto f = capped();
  const std::vector<ScalarAtom> atoms{{1.6, 0.5}, {0.8, 0.3}, {1.1, 0.2}};
  const double x = 2.0, r0 = 1.05;
  const auto g = pwq_expect_affine(f, atoms, x, r0);
  EXPECT_TRUE(g.is_concave());
  for (double y = -5.0; y <= 5.0; y += 0.37) {
    double direct = 0.0;
    for (const auto& a : atoms) direct += a.prob * f(r0 * (x - y) + a.value * y);
    EXPECT_NEAR(g(y), direct, 1e-12) << y;
  }
}

TEST(PwqMaximize, InteriorCapAndFloor) {
  const PiecewiseQuadratic g(Quadratic{-1.0, 4.0, 0.0});  // peak at 2
  auto r = pwq_maximize_up_to(g, 10.0);
  EXPECT_NEAR(r.argmax, 2.0, 1e-14);
  EXPECT_NEAR(r.value, 4.0, 1e-14);
  r = pwq_maximize_up_to(g, 1.0);
  EXPECT_DOUBLE_EQ(r.argmax, 1.0);
  const PiecewiseQuadratic h(Quadratic{-1.0, -4.0, 0.0});  // peak at -2
  EXPECT_NEAR(pwq_maximize_up_to(h, 5.0).argmax, -2.0, 1e-14);
  EXPECT_DOUBLE_EQ(pwq_maximize_up_to(h, 5.0, true).argmax, 0.0);
  EXPECT_THROW(pwq_maximize_up_to(h, -1.0, true), Error);
}

TEST(PwqMaximize, KinkMaximizer) {
  // |y| penalty: maximum exactly at the kink
  const auto g = PiecewiseQuadratic::make({0.0}, {Quadratic{-0.1, 1.0, 0.0}, Quadratic{-0.1, -1.0, 0.0}});
  EXPECT_DOUBLE_EQ(pwq_maximize_up_to(g, 3.0).argmax, 0.0);
}

TEST(PwqMaximize, UnboundedBelowCapIsReported) {
  const PiecewiseQuadratic g(Quadratic{0.0, -1.0, 0.0});
  try {
    pwq_maximize_up_to(g, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundedAbove);
  }
}

TEST(PwqMaximize, AgreesWithDenseGridOnRandomConcaveFunctions) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    // fixed concave three-piece function, random atoms and cap
    const PiecewiseQuadratic f = PiecewiseQuadratic::make(
        {-1.0, 2.0}, {Quadratic{-0.2, 2.0, 0.0}, Quadratic{-0.2, 1.0, -1.0}, Quadratic{-0.5, 1.2, -0.2}});
    ASSERT_TRUE(f.is_concave());
    const std::vector<ScalarAtom> atoms{{1.0 + 0.5 * u(rng), 0.5}, {1.0 + 0.5 * u(rng), 0.5}};
    const double x = 3.0 * u(rng), cap = 4.0 * u(rng);
    const auto g = pwq_expect_affine(f, atoms, x, 1.02);
    MaximizeResult r;
    try {
      r = pwq_maximize_up_to(g, cap);
    } catch (const Error&) {
      continue;
    }
    double best = -INFINITY;
    for (int i = 0; i <= 200000; ++i) {
      const double y = cap - 40.0 + 40.0 * i / 200000.0;
      best = std::max(best, g(y));
    }
    EXPECT_GE(r.value, best - 1e-12);
    // first-order grid error at a kink: step times the one-sided slopes
    const double h = 40.0 / 200000.0;
    EXPECT_LE(r.value - best, h * (std::abs(g.left_derivative(r.argmax)) + std::abs(g.right_derivative(r.argmax))) +
                                  h * h);
    EXPECT_NEAR(g(r.argmax), r.value, 1e-12);
    EXPECT_LE(r.argmax, cap);
  }
}
