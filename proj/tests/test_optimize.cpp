#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cosserat/analysis.hpp"
#include "cosserat/optimize.hpp"
#include "test_support.hpp"

namespace cosserat {
namespace {

Grid cube(int n) {
  GridSpec s;
  s.n = n;
  return Grid(s);
}

/// phi = x + amp * bump(x) with a bump vanishing on the cube faces.
GridState perturbed(const Grid& g, double amp) {
  GridState s = GridState::identity(g);
  for (std::size_t id : g.active_nodes()) {
    if (s.dirichlet[id]) continue;
    const Vec3& x = g.x(id);
    const double bump = std::cos(0.5 * M_PI * x[0]) * std::cos(0.5 * M_PI * x[1]) * std::cos(0.5 * M_PI * x[2]);
    s.phi[id] = x + amp * bump * Vec3(1.0, -0.5, 0.25);
  }
  return s;
}

Direction zero_direction(const Grid& g) {
  return {std::vector<Vec3>(g.size(), Vec3::Zero()), std::vector<Vec4>(g.size(), Vec4::Zero())};
}

Direction from_gradient(const Grid& g, const EnergyGradient& grad, double sign) {
  Direction d = zero_direction(g);
  for (std::size_t id : g.active_nodes()) {
    d.phi[id] = sign * grad.phi[id];
    d.rot[id] = sign * grad.rot[id];
  }
  return d;
}

TEST(OptimizerParams, Validation) {
  OptimizerParams op;
  EXPECT_NO_THROW(op.validate());
  op.armijo_c = 1.0;
  EXPECT_THROW(op.validate(), ConfigError);
  op = {};
  op.backtrack = 0.0;
  EXPECT_THROW(op.validate(), ConfigError);
  op = {};
  op.grad_tol = -1.0;
  EXPECT_THROW(op.validate(), ConfigError);
}

TEST(Minimize, StressFreeConvergesImmediately) {
  const Grid g = cube(7);
  const auto res = minimize(g, GridState::identity(g), MaterialParams{}, {}, OptimizerParams{});
  EXPECT_EQ(res.status, MinimizeStatus::converged);
  EXPECT_EQ(res.iterations, 0);
  ASSERT_EQ(res.trace.size(), 1u);
  EXPECT_LT(res.trace[0].energy, 1e-24);
  EXPECT_EQ(res.trace[0].step, 0.0);
}

TEST(Minimize, PerturbationRelaxesToStressFree) {
  const Grid g = cube(9);
  const GridState s0 = perturbed(g, 0.05);
  const MaterialParams c{};
  const double e0 = total_energy(g, s0, c).total;
  OptimizerParams op;
  op.grad_tol = 1e-9;
  op.max_iters = 20000;
  const auto res = minimize(g, s0, c, {}, op);
  EXPECT_EQ(res.status, MinimizeStatus::converged) << to_string(res.status);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LT(res.trace[i].energy, res.trace[i - 1].energy);
  EXPECT_LT(res.trace.back().energy, 1e-10 * e0);
  for (std::size_t id : g.active_nodes()) {
    EXPECT_NEAR(res.state.rot[id].coeffs().norm(), 1.0, 1e-12);
    if (s0.dirichlet[id]) {
      EXPECT_EQ(res.state.phi[id], s0.phi[id]);
      EXPECT_EQ(res.state.rot[id], s0.rot[id]);
    }
  }
}

TEST(Minimize, RandomInteriorRotationsDecrease) {
  const Grid g = cube(7);
  std::mt19937_64 rng(3);
  const GridState s0 = testing::random_state(g, rng, 0.2, false);
  const MaterialParams c{1.0, 1.0, 1.0, 2.5};
  OptimizerParams op;
  op.max_iters = 200;
  const auto res = minimize(g, s0, c, {}, op);
  EXPECT_GT(res.trace.size(), 10u);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    EXPECT_LT(res.trace[i].energy, res.trace[i - 1].energy);
    EXPECT_GT(res.trace[i].step, 0.0);
  }
  for (std::size_t id : g.active_nodes()) {
    EXPECT_NEAR(res.state.rot[id].coeffs().norm(), 1.0, 1e-12);
    if (s0.dirichlet[id]) EXPECT_EQ(res.state.rot[id], s0.rot[id]);
  }
}

TEST(Minimize, SingularBoundaryDataCanOnlyImprove) {
  GridSpec spec;
  spec.n = 13;
  spec.shape = DomainShape::ball;
  spec.puncture_radius = 3.0 * spec.spacing();
  const Grid g(spec);
  const GridState pair = sample_singular_pair(g);
  const MaterialParams c{};
  OptimizerParams op;
  op.max_iters = 300;
  const auto res = minimize(g, pair, c, {}, op);
  EXPECT_LE(res.trace.back().energy, total_energy(g, pair, c).total);
}

TEST(Minimize, RejectsInvalidState) {
  const Grid g = cube(5);
  GridState s = GridState::identity(g);
  std::fill(s.dirichlet.begin(), s.dirichlet.end(), 0);
  EXPECT_THROW(minimize(g, s, MaterialParams{}, {}, OptimizerParams{}), Error);
  EXPECT_THROW(minimize(g, GridState::identity(g), MaterialParams{1.0, 1.0, 1.0, 1.5}, {}, OptimizerParams{}),
               ConfigError);
}

TEST(LineSearch, ZeroDirectionIsAcceptedAtFirstTrial) {
  const Grid g = cube(7);
  std::mt19937_64 rng(4);
  const GridState s = testing::random_state(g, rng, 0.1, false);
  const MaterialParams c{};
  const double e = total_energy(g, s, c).total;
  const auto ls = line_search(g, s, zero_direction(g), e, 0.0, c, {}, OptimizerParams{});
  EXPECT_TRUE(ls.accepted);
  EXPECT_EQ(ls.backtracks, 0);
  EXPECT_EQ(ls.energy, e);
}

TEST(LineSearch, SteepestDescentAccepted) {
  const Grid g = cube(7);
  std::mt19937_64 rng(5);
  const MaterialParams c{1.0, 0.5, 2.0, 2.3};
  for (int i = 0; i < 10; ++i) {
    const GridState s = testing::random_state(g, rng, 0.2, false);
    const auto grad = gradient(g, s, c);
    const double e = total_energy(g, s, c).total;
    const auto ls = line_search(g, s, from_gradient(g, grad, -1.0), e, -grad.norm_sq(), c, {}, OptimizerParams{});
    EXPECT_TRUE(ls.accepted);
    EXPECT_LT(ls.energy, e);
  }
}

TEST(LineSearch, AscentDirectionFails) {
  const Grid g = cube(7);
  std::mt19937_64 rng(6);
  const MaterialParams c{};
  const GridState s = testing::random_state(g, rng, 0.2, false);
  const auto grad = gradient(g, s, c);
  const double e = total_energy(g, s, c).total;
  const auto ls = line_search(g, s, from_gradient(g, grad, 1.0), e, grad.norm_sq(), c, {}, OptimizerParams{});
  EXPECT_FALSE(ls.accepted);
}

TEST(InitialGuess, CopiesNearestBoundaryRotation) {
  GridSpec spec;
  spec.n = 11;
  spec.shape = DomainShape::ball;
  spec.puncture_radius = 0.35;
  const Grid g(spec);
  GridState boundary = sample_singular_pair(g);
  const GridState s = initial_guess(g, boundary);
  for (std::size_t id : g.active_nodes()) {
    if (boundary.dirichlet[id]) {
      EXPECT_EQ(s.phi[id], boundary.phi[id]);
      EXPECT_EQ(s.rot[id], boundary.rot[id]);
      continue;
    }
    EXPECT_EQ(s.phi[id], g.x(id));
    bool from_shell = false;
    for (std::size_t other : g.active_nodes()) from_shell = from_shell || (boundary.dirichlet[other] && s.rot[id] == boundary.rot[other]);
    EXPECT_TRUE(from_shell);
  }
  EXPECT_NO_THROW(s.validate(g));
}

}  // namespace
}  // namespace cosserat
