#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "sdgame/strategies.hpp"

using namespace sdtest;

namespace {

// One player-one action, player two chooses the running cost f = +1 or f_b1.
GameProblem cost_choice(double f_b1) {
  std::vector<CoefficientSet> sets;
  for (double f : {1.0, f_b1}) {
    CoefficientSet s;
    s.sigma = {ScalarField::constant(std::sqrt(2.0))};
    s.drift = {ScalarField::constant(0.0)};
    s.cost = ScalarField::constant(f);
    sets.push_back(s);
  }
  ActionSets a;
  a.player_one = {"a"};
  a.player_two = {"b0", "b1"};
  return GameProblem(a, DomainSpec::box(pt(0), pt(1)), 1, {2, 0.5, 0.5, 1}, sets, ScalarField());
}

ValueField solved(const GameProblem& p, double h) { return solve_isaacs(p, grid(p, h), {}).value; }

struct Trace : StepObserver {
  void step(const PathState& s, double, int a, int b) override {
    t.push_back(s.t);
    x.push_back(s.x[0]);
    alpha.push_back(a);
    beta.push_back(b);
  }
  std::vector<double> t, x;
  std::vector<int> alpha, beta;
};

SimConfig cfg(std::size_t paths, double dt = 1e-3) {
  SimConfig c;
  c.dt = dt;
  c.n_paths = paths;
  c.seed = 21;
  c.threads = 2;
  return c;
}

}  // namespace

TEST(Selector, OnlyTheCheaperCostIsFeasible) {
  // u'' - 1 = 0: L u + 1 = 2 and L u - 1 = 0 at the discrete solution.
  const GameProblem p = cost_choice(-1.0);
  const ValueField u = solved(p, 1.0 / 32);
  const MarkovSelector s = build_beta_selector(p, u, 0.01);
  for (int node : u.grid().interior_nodes()) {
    EXPECT_EQ(s.beta_at_node(0, node), 1);
    EXPECT_NEAR(s.margin()[node], -0.01, 1e-8);
  }
  EXPECT_EQ(s.beta_at(0, pt(0.37)), 1);
  EXPECT_EQ(s.beta_at(0, pt(1.5)), 0);  // outside G: default action
  EXPECT_THROW(s.alpha_at(pt(0.5)), std::logic_error);
}

TEST(Selector, TiesGoToTheLeastIndex) {
  const GameProblem p = cost_choice(1.0);
  const ValueField u = solved(p, 1.0 / 32);
  const MarkovSelector s = build_beta_selector(p, u, 0.01);
  for (int node : u.grid().interior_nodes()) EXPECT_EQ(s.beta_at_node(0, node), 0);
}

TEST(Selector, InfeasibleFieldNamesTheNode) {
  const GameProblem p = cost_choice(0.5);
  const auto g = grid(p, 0.25);
  const ValueField zero(g, 0.0);
  try {
    build_beta_selector(p, zero, 0.1);
    FAIL() << "expected InfeasibleSelector";
  } catch (const InfeasibleSelector& e) {
    EXPECT_EQ(e.node(), g->interior_nodes()[0]);
    EXPECT_NEAR(e.margin(), 0.5 - 0.1, 1e-12);
    EXPECT_NE(std::string(e.what()).find("against action a"), std::string::npos);
  }
  EXPECT_THROW(build_beta_selector(p, zero, 0.0), std::invalid_argument);
}

TEST(Selector, SingleActionIsConstant) {
  const GameProblem p = load("analytic.cfg");
  const ValueField u = solved(p, 1.0 / 16);
  const MarkovSelector b = build_beta_selector(p, u, 1e-3);
  const MarkovSelector a = build_alpha_selector(p, u, 1e-3);
  for (int node : u.grid().interior_nodes()) {
    EXPECT_EQ(b.beta_at_node(0, node), 0);
    EXPECT_EQ(a.alpha_at_node(node), 0);
  }
}

TEST(Selector, LargerSlackNeverRaisesTheIndex) {
  const GameProblem p = load("game2x2.cfg");
  const ValueField u = solved(p, 1.0 / 64);
  const MarkovSelector tight = build_beta_selector(p, u, 1e-6);
  const MarkovSelector loose = build_beta_selector(p, u, 10.0);
  const MarkovSelector wide = build_beta_selector(p, u, 1e3);
  bool differs = false;
  for (std::size_t k = 0; k < tight.table().size(); ++k) {
    EXPECT_LE(loose.table()[k], tight.table()[k]);
    differs = differs || loose.table()[k] != tight.table()[k];
  }
  EXPECT_TRUE(differs);
  for (int v : wide.table()) EXPECT_EQ(v, 0);
}

TEST(Selector, PlayerOnePicksTheAttainingAction) {
  const GameProblem p = load("game2x2.cfg");
  const SolveResult r = solve_isaacs(p, grid(p, 1.0 / 64), {});
  const MarkovSelector a = build_alpha_selector(p, r.value, 1e-6);
  const int n = r.value.size();
  for (int node : r.value.grid().interior_nodes()) {
    const int chosen = a.alpha_at_node(node);
    double m = 1e300;
    for (int b = 0; b < 2; ++b) m = std::min(m, discrete_L(p, chosen, b, r.value, node) +
                                                    p.running_cost(chosen, b, r.value.grid().coordinates(node)));
    EXPECT_GE(m, -1e-6);
    // Action 0 is skipped only where it falls short.
    if (chosen == 1) EXPECT_NE(r.alpha_policy[node], 0);
  }
  EXPECT_EQ(static_cast<int>(a.table().size()), n);
}

TEST(Selector, CsvLayout) {
  const GameProblem p = load("game2x2.cfg");
  const ValueField u = solved(p, 0.25);
  std::ostringstream s;
  write_csv(s, build_beta_selector(p, u, 0.05), p);
  const std::string text = s.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x1,beta_a0,margin_a0,beta_a1,margin_a1");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  std::ostringstream t;
  write_csv(t, build_alpha_selector(p, u, 0.05), p);
  EXPECT_EQ(t.str().substr(0, t.str().find('\n')), "x1,alpha,margin");
}

TEST(Policies, OpenLoopSchedules) {
  const Vec x = pt(0.5);
  const BangBang bb(0, 1, 0.1);
  EXPECT_EQ(bb.act(0.0, x), 0);
  EXPECT_EQ(bb.act(0.1, x), 1);
  EXPECT_EQ(bb.act(0.25, x), 0);
  const PeriodicMix mix(2, 0, 0.1, 0.2);
  EXPECT_EQ(mix.act(0.0, x), 2);
  EXPECT_EQ(mix.act(0.119, x), 2);
  EXPECT_EQ(mix.act(0.12, x), 0);
  EXPECT_EQ(mix.act(0.19, x), 0);
  EXPECT_EQ(PeriodicMix(2, 0, 0.1, 0.0).act(0.0, x), 0);
  const ScriptedAlpha s({0.0, 0.3, 0.7}, {1, 0, 1});
  EXPECT_EQ(s.act(0.29, x), 1);
  EXPECT_EQ(s.act(0.3, x), 0);
  EXPECT_EQ(s.act(5.0, x), 1);
  EXPECT_THROW(ScriptedAlpha({0.1}, {0}), std::invalid_argument);
  EXPECT_THROW(PeriodicMix(0, 1, 0.1, 1.5), std::invalid_argument);
}

TEST(Policies, StandardCandidateSet) {
  const GameProblem p = load("game2x2.cfg");
  const CandidateControlSet plain = CandidateControlSet::standard(p, 0.05);
  ASSERT_EQ(plain.size(), 3u);
  EXPECT_EQ(plain.name(0), "const_a0");
  EXPECT_EQ(plain.name(2), "bangbang_a0_a1");
  const CandidateControlSet with = CandidateControlSet::standard(p, 0.05, std::make_shared<ConstantAlpha>(1));
  EXPECT_EQ(with.name(3), "feedback");
}

TEST(Feedback, RejectsBadLag) {
  const GameProblem p = load("game2x2.cfg");
  auto sel = std::make_shared<const MarkovSelector>(build_beta_selector(p, solved(p, 0.125), 0.1));
  EXPECT_THROW(make_feedback_policy(sel, 0, 1e-3), std::invalid_argument);
  EXPECT_THROW(make_feedback_policy(sel, 2000, 1e-3), std::invalid_argument);
  EXPECT_NO_THROW(make_feedback_policy(sel, 1000, 1e-3));
}

TEST(Feedback, ReadsFrozenStateAndCurrentOpponent) {
  const GameProblem p = load("game2x2.cfg");
  const ValueField u = solved(p, 1.0 / 64);
  auto sel = std::make_shared<const MarkovSelector>(build_beta_selector(p, u, 0.05));
  const int n = 8;
  const auto beta = make_feedback_policy(sel, n, 1e-3);
  // Player one switches off the lag grid, at t = 0.03 and t = 0.07.
  const ScriptedAlpha alpha({0.0, 0.03, 0.07}, {0, 1, 0});
  for (std::uint64_t path = 0; path < 20; ++path) {
    Trace tr;
    simulate_to_exit(p, ControlAdaptedSpec::baseline(p), pt(0.5), alpha, *beta, cfg(1), path, &tr);
    double frozen = tr.x[0];
    long epoch = 0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      const long e = static_cast<long>(std::floor(n * tr.t[i] + 1e-9));
      if (e != epoch) epoch = e, frozen = tr.x[i];
      EXPECT_EQ(tr.beta[i], sel->beta_at(tr.alpha[i], pt(frozen))) << "path " << path << " step " << i;
    }
  }
}

TEST(Feedback, NonAnticipative) {
  // Two scripts agree up to t = 0.2; player two's actions must agree there too.
  const GameProblem p = load("game2x2.cfg");
  auto sel = std::make_shared<const MarkovSelector>(build_beta_selector(p, solved(p, 1.0 / 64), 0.05));
  const auto beta = make_feedback_policy(sel, 16, 1e-3);
  const ScriptedAlpha first({0.0, 0.1, 0.2}, {1, 0, 1});
  const ScriptedAlpha second({0.0, 0.1, 0.2}, {1, 0, 0});
  int compared = 0;
  for (std::uint64_t path = 0; path < 30; ++path) {
    Trace a, b;
    simulate_to_exit(p, ControlAdaptedSpec::baseline(p), pt(0.5), first, *beta, cfg(1), path, &a);
    simulate_to_exit(p, ControlAdaptedSpec::baseline(p), pt(0.5), second, *beta, cfg(1), path, &b);
    for (std::size_t i = 0; i < std::min(a.t.size(), b.t.size()) && a.t[i] < 0.2 - 1e-9; ++i, ++compared) {
      EXPECT_EQ(a.beta[i], b.beta[i]);
      EXPECT_EQ(a.x[i], b.x[i]);
    }
  }
  EXPECT_GT(compared, 1000);
}

TEST(Martingale, ConstantFieldIsExact) {
  const GameProblem p = interval(1.0, 0.0, 0.0, 0.0, 0.7);
  const ValueField u(grid(p, 0.125), 0.7);
  const MartingaleTestReport r = supermartingale_test(p, ControlAdaptedSpec::make(Variant::time_change, p), pt(0.4),
                                                      u, ConstantAlpha(0), ConstantBeta(0), cfg(200),
                                                      {0, 0.05, 0.1, 0.5}, 1e-3);
  EXPECT_TRUE(r.passed);
  for (double m : r.m) EXPECT_NEAR(m, 0.7, 1e-15);
  for (double inc : r.increment) EXPECT_NEAR(inc, 0.0, 1e-15);
  ASSERT_EQ(r.allowance.size(), 3u);
  EXPECT_NEAR(r.allowance[0], 1e-3 * 0.05 * 0.25, 1e-15);  // the one pair runs at rate 1/2
}

TEST(Martingale, SolvedValueOnBothSides) {
  const GameProblem p = load("analytic.cfg");
  const ValueField u = solved(p, 1.0 / 128);
  const std::vector<double> ts{0, 0.02, 0.05, 0.1, 0.3};
  const auto spec = ControlAdaptedSpec::baseline(p);
  const auto sup = supermartingale_test(p, spec, pt(0.5), u, ConstantAlpha(0), ConstantBeta(0), cfg(4000), ts, 1e-3);
  const auto sub = submartingale_test(p, spec, pt(0.5), u, ConstantAlpha(0), ConstantBeta(0), cfg(4000), ts, 1e-3);
  EXPECT_TRUE(sup.passed);
  EXPECT_TRUE(sub.passed);
  EXPECT_NEAR(sup.m[0], 0.125, 1e-9);
  EXPECT_THROW(supermartingale_test(p, spec, pt(0.5), u, ConstantAlpha(0), ConstantBeta(0), cfg(10), {0, 0.0001}, 1e-3),
               std::invalid_argument);
}

TEST(Martingale, DetectsAWrongField) {
  // Twice the value: the running cost no longer balances the drift of u.
  const GameProblem p = load("analytic.cfg");
  ValueField u = solved(p, 1.0 / 128);
  for (int k = 0; k < u.size(); ++k) u[k] *= 2.0;
  const auto r = supermartingale_test(p, ControlAdaptedSpec::baseline(p), pt(0.5), u, ConstantAlpha(0),
                                      ConstantBeta(0), cfg(2000), {0, 0.05, 0.1}, 1e-3);
  EXPECT_TRUE(r.passed);  // 2u'' + f = -1 < 0: still a supermartingale
  const auto s = submartingale_test(p, ControlAdaptedSpec::baseline(p), pt(0.5), u, ConstantAlpha(0),
                                    ConstantBeta(0), cfg(2000), {0, 0.05, 0.1}, 1e-3);
  EXPECT_FALSE(s.passed);
  EXPECT_NEAR(s.increment[0], -0.05, 0.01);
}
