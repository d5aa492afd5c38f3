#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "sdgame/isaacs.hpp"

using namespace sdtest;

namespace {

// u'' + max(u', -u') = 0 (player one picks the drift) or
// u'' + min(u', -u') = 0 (player two picks it), u(0) = 0, u(1) = 1.
GameProblem drift_game(bool player_one_drives) {
  auto set = [](double b) {
    CoefficientSet s;
    s.sigma = {ScalarField::constant(std::sqrt(2.0))};
    s.drift = {ScalarField::constant(b)};
    return s;
  };
  ActionSets a;
  ScalarField g;
  g.add_affine(0.0, pt(1.0));
  if (player_one_drives) {
    a.player_one = {"up", "down"};
    a.player_two = {"b"};
  } else {
    a.player_one = {"a"};
    a.player_two = {"up", "down"};
  }
  return GameProblem(a, DomainSpec::box(pt(0), pt(1)), 1, {2, 0.5, 0.5, 1}, {set(1.0), set(-1.0)}, g);
}

GameProblem plane(const Mat& a, const Vec& b) {
  const Eigen::LLT<Eigen::MatrixXd> llt(2.0 * Eigen::MatrixXd(a));
  const Eigen::MatrixXd s = llt.matrixL();
  CoefficientSet set;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) set.sigma.push_back(ScalarField::constant(s(i, j)));
  set.drift = {ScalarField::constant(b[0]), ScalarField::constant(b[1])};
  ActionSets acts;
  acts.player_one = {"a"};
  acts.player_two = {"b"};
  return GameProblem(acts, DomainSpec::box(vec({0, 0}), vec({1, 1})), 2, {4, 0.1, 0.5, 1}, {set}, ScalarField());
}

Mat mat2(double a11, double a12, double a22) {
  Mat m(2, 2);
  m << a11, a12, a12, a22;
  return m;
}

double sup_interpolation_error(const ValueField& u, const std::function<double(double)>& exact) {
  double e = 0.0;
  for (int k = 1; k < 4000; ++k) {
    const double x = k / 4000.0;
    e = std::max(e, std::abs(u.at(pt(x)) - exact(x)));
  }
  return e;
}

}  // namespace

TEST(Stencil, SecondDifferenceInOneDimension) {
  const GameProblem p = interval(std::sqrt(2.0), 0, 0, 1, 0);
  const auto g = grid(p, 0.125);
  const int node = g->interior_nodes()[3];
  const Stencil s = build_stencil(p, *g, 0, 0, node);
  EXPECT_EQ(s.count, 2);
  EXPECT_NEAR(s.weight_sum(), 2.0 / (0.125 * 0.125), 1e-10);
  std::vector<double> u(g->node_count());
  for (int n = 0; n < g->node_count(); ++n) u[n] = std::pow(g->coordinates(n)[0], 2);
  EXPECT_NEAR(s.apply(u, node), 2.0 + 1.0, 1e-10);  // u'' + f
}

TEST(Stencil, CrossDerivativeSplittingIsExactOnQuadratics) {
  for (double a12 : {0.3, -0.3}) {
    SCOPED_TRACE(a12);
    const Mat a = mat2(1.0, a12, 0.8);
    const Vec b = vec({0.4, -0.7});
    const GameProblem p = plane(a, b);
    const auto g = grid(p, 0.1);
    std::vector<double> u(g->node_count());
    for (int n = 0; n < g->node_count(); ++n) {
      const Vec x = g->coordinates(n);
      u[n] = x[0] * x[0] + 3 * x[0] * x[1] - 0.5 * x[1] * x[1] + x[0];
    }
    for (int node : g->interior_nodes()) {
      const Stencil s = build_stencil(p, *g, 0, 0, node);
      for (int k = 0; k < s.count; ++k) EXPECT_GE(s.weight[k], 0.0);
      const Vec x = g->coordinates(node);
      // Oracle: a:D2u + b.Du for the quadratic.
      const double exact = 2 * a(0, 0) + 2 * 3 * a(0, 1) - a(1, 1) + b[0] * (2 * x[0] + 3 * x[1] + 1) +
                           b[1] * (3 * x[0] - x[1]);
      EXPECT_NEAR(s.apply(u, node), exact, 1e-9);
    }
  }
}

TEST(Stencil, NonMonotoneRejected) {
  const GameProblem p = plane(mat2(1.0, 1.2, 2.0), vec({0, 0}));
  const auto g = grid(p, 0.1);
  EXPECT_THROW(build_stencil(p, *g, 0, 0, g->interior_nodes()[0]), NonMonotoneStencil);
}

TEST(Stencil, CentralDriftNeedsFineGrid) {
  const GameProblem p = interval(1.0, 10.0, 0, 0, 0, {20, 0.4, 0.5, 1});
  // a/h^2 >= |b|/(2h) requires h <= 2a/|b| = 0.1.
  EXPECT_NEAR(monotone_spacing(p, *grid(p, 0.05)), 0.1, 1e-12);
  EXPECT_THROW(build_stencil(p, *grid(p, 0.125), 0, 0, 1), NonMonotoneStencil);
  EXPECT_NO_THROW(build_stencil(p, *grid(p, 0.125), 0, 0, 1, DriftScheme::upwind));
}

TEST(Operator, DiscreteLRejectsRing) {
  const GameProblem p = interval(1.0, 0, 0, 1, 0);
  const auto g = grid(p, 0.25);
  const ValueField u(g, 0.0);
  EXPECT_THROW(discrete_L(p, 0, 0, u, g->boundary_nodes()[0]), std::invalid_argument);
}

TEST(Operator, HamiltonianTakesMaxMin) {
  // L^{ab} u = a u'' with a in {1, 2} (player one) and cost f in {0, 1} (player two).
  std::vector<CoefficientSet> sets;
  for (double s : {std::sqrt(2.0), 2.0})
    for (double f : {0.0, 1.0}) {
      CoefficientSet c;
      c.sigma = {ScalarField::constant(s)};
      c.drift = {ScalarField::constant(0.0)};
      c.cost = ScalarField::constant(f);
      sets.push_back(c);
    }
  ActionSets a;
  a.player_one = {"a1", "a2"};
  a.player_two = {"f0", "f1"};
  const GameProblem p(a, DomainSpec::box(pt(0), pt(1)), 1, {2, 0.4, 0.5, 1}, sets, ScalarField());
  const auto g = grid(p, 0.125);
  for (double sign : {1.0, -1.0}) {
    ValueField u(g);
    for (int n = 0; n < u.size(); ++n) u[n] = sign * std::pow(g->coordinates(n)[0], 2);
    const ValueField H = evaluate_H(p, u);
    // u'' = 2 sign: max over a of (2 sign a) + min f = 4 or -2.
    for (int node : g->interior_nodes()) EXPECT_NEAR(H[node], sign > 0 ? 4.0 : -2.0, 1e-9);
    for (int node : g->boundary_nodes()) EXPECT_EQ(H[node], 0.0);
  }
}

TEST(Solver, AnalyticQuadratic) {
  const GameProblem p = load("analytic.cfg");
  const SolveResult r = solve_isaacs(p, grid(p, 1.0 / 128), {});
  EXPECT_NEAR(r.value.at(pt(0.5)), 0.125, 1e-9);
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_NEAR(r.value.at(pt(0.25)), 0.25 * 0.75 / 2, 1e-9);
}

TEST(Solver, SecondOrderOnSineSolution) {
  // u = sin(pi x) solves u'' + pi^2 sin(pi x) = 0 with zero boundary data.
  CoefficientSet s;
  s.sigma = {ScalarField::constant(std::sqrt(2.0))};
  s.drift = {ScalarField::constant(0.0)};
  s.cost.add_sine(M_PI * M_PI, pt(M_PI), 0.0);
  ActionSets a;
  a.player_one = {"a"};
  a.player_two = {"b"};
  const GameProblem p(a, DomainSpec::box(pt(0), pt(1)), 1, {10, 0.5, 0.5, 1}, {s}, ScalarField());
  double previous = 0.0;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const SolveResult r = solve_isaacs(p, grid(p, h), {});
    double e = 0.0;
    for (int n : r.value.grid().interior_nodes())
      e = std::max(e, std::abs(r.value[n] - std::sin(M_PI * r.value.grid().coordinates(n)[0])));
    if (previous > 0.0) EXPECT_NEAR(previous / e, 4.0, 0.3);
    previous = e;
  }
}

TEST(Solver, InterpolantErrorIsSecondOrder) {
  const GameProblem p = load("analytic.cfg");
  auto exact = [](double x) { return x * (1 - x) / 2; };
  const double e1 = sup_interpolation_error(solve_isaacs(p, grid(p, 1.0 / 32), {}).value, exact);
  const double e2 = sup_interpolation_error(solve_isaacs(p, grid(p, 1.0 / 64), {}).value, exact);
  // Piecewise-linear interpolation of a parabola: h^2 |v''| / 8 exactly.
  EXPECT_NEAR(e1, 1.0 / (32.0 * 32 * 8), 1e-8);
  EXPECT_GE(e1 / e2, 3.0);
}

TEST(Solver, PlayerOneDriftGame) {
  const GameProblem p = drift_game(true);
  const SolveResult r = solve_isaacs(p, grid(p, 1.0 / 256), {});
  auto exact = [](double x) { return (1 - std::exp(-x)) / (1 - std::exp(-1.0)); };
  for (double x : {0.25, 0.5, 0.75}) EXPECT_NEAR(r.value.at(pt(x)), exact(x), 2e-5);
  // u is increasing, so the maximizer pushes up everywhere.
  for (int n : r.value.grid().interior_nodes()) EXPECT_EQ(r.alpha_policy[n], 0);
  for (int n : r.value.grid().boundary_nodes()) EXPECT_EQ(r.alpha_policy[n], -1);
}

TEST(Solver, PlayerTwoDriftGame) {
  const GameProblem p = drift_game(false);
  const SolveResult r = solve_isaacs(p, grid(p, 1.0 / 256), {});
  auto exact = [](double x) { return (std::exp(x) - 1) / (std::exp(1.0) - 1); };
  for (double x : {0.25, 0.5, 0.75}) EXPECT_NEAR(r.value.at(pt(x)), exact(x), 2e-5);
  const int n = r.value.grid().node_count();
  for (int node : r.value.grid().interior_nodes()) EXPECT_EQ(r.beta_table[node], 1);  // push down
  EXPECT_EQ(static_cast<int>(r.beta_table.size()), n);
}

TEST(Solver, FinalPoliciesAttainTheHamiltonian) {
  const GameProblem p = load("game2x2.cfg");
  const SolveResult r = solve_isaacs(p, grid(p, 1.0 / 64), {});
  const int n = r.value.size();
  for (int node : r.value.grid().interior_nodes()) {
    const int a = r.alpha_policy[node];
    const int b = r.beta_table[a * n + node];
    EXPECT_NEAR(discrete_L(p, a, b, r.value, node) + p.running_cost(a, b, r.value.grid().coordinates(node)), 0.0,
                1e-7);
  }
}

TEST(Solver, ReportsNonConvergence) {
  const GameProblem p = load("analytic.cfg");
  SolveConfig cfg;
  cfg.max_sweeps = 3;
  EXPECT_THROW(solve_isaacs(p, grid(p, 1.0 / 64), cfg), SolverError);
}

TEST(Pucci, OneDimensionalFamily) {
  PucciParams pp;
  pp.delta_hat = 0.25;
  const auto fam = make_pucci(pp, 1);
  ASSERT_EQ(fam.size(), 2u);
  const auto g = std::make_shared<const DomainGrid>(DomainSpec::box(pt(0), pt(1)), 0.125);
  for (double sign : {1.0, -1.0}) {
    ValueField u(g);
    for (int k = 0; k < u.size(); ++k) u[k] = sign * std::pow(g->coordinates(k)[0], 2);
    const ValueField P = evaluate_P(fam, u);
    for (int node : g->interior_nodes()) EXPECT_NEAR(P[node], sign > 0 ? 2 / 0.25 : -2 * 0.25, 1e-9);
  }
}

TEST(Pucci, PlaneFamilyEigenvaluesAndDominance) {
  PucciParams pp;
  pp.delta_hat = 0.6;
  pp.gradient_bound = 0.5;
  pp.zero_order = 0.2;
  const auto fam = make_pucci(pp, 2);
  ASSERT_GT(fam.size(), 4u);
  bool has_isotropic_extremes = false;
  for (const auto& op : fam) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(op.a));
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.6 - 1e-12);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1 / 0.6 + 1e-12);
    EXPECT_GE(op.a(0, 0) - std::abs(op.a(0, 1)), -1e-12);
    EXPECT_GE(op.a(1, 1) - std::abs(op.a(0, 1)), -1e-12);
    EXPECT_LE(op.b.norm(), 0.5 + 1e-12);
    EXPECT_TRUE(op.c == 0.0 || op.c == 0.2);
    has_isotropic_extremes = has_isotropic_extremes || std::abs(op.a(0, 0) - 1 / 0.6) < 1e-12 && op.a(0, 1) == 0.0;
  }
  EXPECT_TRUE(has_isotropic_extremes);
}

TEST(Penalty, EmptyFamilyReproducesTheGame) {
  const GameProblem p = load("game2x2.cfg");
  const auto g = grid(p, 1.0 / 64);
  const SolveResult a = solve_isaacs(p, g, {});
  const SolveResult b = solve_penalized(p, {}, 5.0, g, {});
  EXPECT_EQ(a.value.values(), b.value.values());
}

TEST(Penalty, ExtendedProblemShape) {
  const GameProblem p = load("game2x2.cfg");
  const auto fam = make_pucci({}, 1);
  const GameProblem e = extend_with_penalty(p, fam, 7.0);
  EXPECT_EQ(e.num_alpha(), 2 + static_cast<int>(fam.size()));
  EXPECT_EQ(e.actions().num_base_alpha(), 2);
  EXPECT_TRUE(e.is_penalty(2));
  EXPECT_EQ(e.project(3), 0);
  EXPECT_DOUBLE_EQ(e.running_cost(2, 1, pt(0.3)), -7.0);
  EXPECT_NEAR(diffusion_matrix(e, 2, 0, pt(0.1))(0, 0), fam[0].a(0, 0), 1e-14);
  EXPECT_TRUE(validate_problem(e, DomainGrid(e.domain(), 1.0 / 16)).passed());
}

TEST(Penalty, SmoothFamilyInactiveForLargeK) {
  const GameProblem p = load("penalty_smooth.cfg");
  const auto g = grid(p, 1.0 / 64);
  const auto fam = make_pucci({}, 1);
  const SolveResult v = solve_isaacs(p, g, {});
  // P[v] = 2 * 4 / 1 / delta_hat... v'' = 4 so P[v] = 4 / 0.5 = 8.
  const SolveResult u16 = solve_penalized(p, fam, 16.0, g, {});
  EXPECT_LE(u16.value.sup_distance(v.value), 1e-7);
  const SolveResult u1 = solve_penalized(p, fam, 1.0, g, {});
  EXPECT_GT(u1.value.sup_distance(v.value), 1e-3);
  // u_K is a supersolution of the game and satisfies max(H, P - K) = 0.
  const ValueField H = evaluate_H(p, u1.value);
  const ValueField P = evaluate_P(fam, u1.value);
  for (int n : g->interior_nodes()) {
    EXPECT_LE(H[n], 1e-7);
    EXPECT_NEAR(std::max(H[n], P[n] - 1.0), 0.0, 1e-7);
    EXPECT_GE(u1.value[n], v.value[n] - 1e-9);
  }
}

TEST(Penalty, ConvergenceStudyOnHoelderFamily) {
  const GameProblem p = load("penalty_holder.cfg");
  PucciParams pp;
  pp.delta_hat = 0.25;
  const auto fam = make_pucci(pp, 1);
  const RateReport r = convergence_study(p, fam, {1, 2, 4, 8, 16, 32, 64}, grid(p, 1.0 / 64), {});
  ASSERT_EQ(r.sup_error.size(), 7u);
  for (std::size_t k = 1; k < r.u_K.size(); ++k)
    for (int n = 0; n < r.u_K[k].size(); ++n) EXPECT_LE(r.u_K[k][n], r.u_K[k - 1][n] + 1e-9);
  EXPECT_GT(r.chi, 0.0);
  EXPECT_GE(r.fitted_points, 3);
  std::ostringstream s;
  write_csv(s, r);
  EXPECT_EQ(s.str().substr(0, 12), "K,sup_error\n");
  EXPECT_NE(s.str().find("# fit,"), std::string::npos);
}

TEST(Penalty, StudyRejectsBadKList) {
  const GameProblem p = load("penalty_smooth.cfg");
  EXPECT_THROW(convergence_study(p, make_pucci({}, 1), {2, 1}, grid(p, 0.125), {}), std::invalid_argument);
  EXPECT_THROW(convergence_study(p, make_pucci({}, 1), {0.5}, grid(p, 0.125), {}), std::invalid_argument);
}
