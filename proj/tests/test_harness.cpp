#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "sdgame/harness.hpp"

using namespace sdtest;

namespace {

ExperimentConfig quick(const std::string& name) {
  const GameProblem p = load(name);
  ExperimentConfig e = load_experiment(config(name), p.dim());
  e.grid_h = 1.0 / 32;
  e.sim.n_paths = 2000;
  e.sim.dt = 1e-3;
  e.sim.threads = 2;
  return e;
}

}  // namespace

TEST(Experiment, LoadsShippedSettings) {
  const ExperimentConfig e = load_experiment(config("game2x2.cfg"), 1);
  EXPECT_EQ(e.sim.seed, 7u);
  ASSERT_EQ(e.points.size(), 3u);
  EXPECT_DOUBLE_EQ(e.points[1][0], 0.5);
  ASSERT_EQ(e.variants.size(), 5u);
  EXPECT_EQ(e.variants.back(), Variant::combined);
  EXPECT_DOUBLE_EQ(e.budget(), e.budget_h * e.grid_h * e.grid_h + e.budget_dt * std::sqrt(e.sim.dt));
  EXPECT_DOUBLE_EQ(e.epsilon(), e.epsilon_factor * e.solve.residual_tolerance);
}

TEST(Experiment, DefaultLagIsOneStep) {
  ExperimentConfig e;
  e.sim.dt = 1e-3;
  EXPECT_EQ(e.lag(), 1000);
  e.sim.lag_n = 16;
  EXPECT_EQ(e.lag(), 16);
}

TEST(Experiment, PointListsAndErrors) {
  Config c = Config::parse("[experiment]\npoints = 0.1 0.2; 0.3 0.4\nvariants = baseline girsanov\n");
  const ExperimentConfig e = load_experiment(c, 2);
  ASSERT_EQ(e.points.size(), 2u);
  EXPECT_DOUBLE_EQ(e.points[1][1], 0.4);
  EXPECT_EQ(e.variants[1], Variant::girsanov);
  EXPECT_THROW(load_experiment(Config::parse("[experiment]\npoints = 0.1; 0.3 0.4\n"), 2), ConfigError);
  EXPECT_THROW(load_experiment(Config::parse("[solver]\ndrift = sideways\n"), 1), ConfigError);
  EXPECT_THROW(load_experiment(Config::parse("[experiment]\nepsilon_factor = 0.5\n"), 1), ConfigError);
  EXPECT_THROW(load_experiment(Config::parse("[simulation]\nseed = -3\n"), 1), ConfigError);
  EXPECT_THROW(load_experiment(Config::parse("[experiment]\nvariants = baseline warp\n"), 1), ConfigError);
}

TEST(Estimate, SingletonEqualsPlainMonteCarlo) {
  const GameProblem p = load("game2x2.cfg");
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.n_paths = 500;
  cfg.threads = 2;
  CandidateControlSet set;
  set.add("only", std::make_shared<ConstantAlpha>(1));
  const ControlAdaptedSpec spec = ControlAdaptedSpec::make(Variant::girsanov, p);
  const ValueEstimate e = estimate_value(p, spec, pt(0.4), ConstantBeta(0), set, cfg);
  const PayoffSummary s = simulate_batch(p, spec, pt(0.4), ConstantAlpha(1), ConstantBeta(0), cfg);
  EXPECT_EQ(e.value, s.mean);
  EXPECT_EQ(e.standard_error, s.standard_error);
  EXPECT_EQ(e.best_candidate, "only");
  EXPECT_EQ(e.candidate_count, 1u);
}

TEST(Estimate, DominatedCandidateChangesNothing) {
  // With f = 1 and g = 0 the payoff is the exit time; a candidate with more
  // noise exits sooner and cannot raise the maximum.
  std::vector<CoefficientSet> sets;
  for (double s : {1.0, 3.0}) {
    CoefficientSet c;
    c.sigma = {ScalarField::constant(s)};
    c.drift = {ScalarField::constant(0.0)};
    c.cost = ScalarField::constant(1.0);
    sets.push_back(c);
  }
  ActionSets a;
  a.player_one = {"slow", "fast"};
  a.player_two = {"b"};
  const GameProblem p(a, DomainSpec::box(pt(0), pt(1)), 1, {4, 0.2, 0.5, 1}, sets, ScalarField());
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.n_paths = 1000;
  CandidateControlSet one, two;
  one.add("slow", std::make_shared<ConstantAlpha>(0));
  two.add("slow", std::make_shared<ConstantAlpha>(0));
  two.add("fast", std::make_shared<ConstantAlpha>(1));
  const auto spec = ControlAdaptedSpec::baseline(p);
  const ValueEstimate e1 = estimate_value(p, spec, pt(0.5), ConstantBeta(0), one, cfg);
  const ValueEstimate e2 = estimate_value(p, spec, pt(0.5), ConstantBeta(0), two, cfg);
  EXPECT_EQ(e1.value, e2.value);
  EXPECT_EQ(e2.best_candidate, "slow");
  ASSERT_EQ(e2.candidate_values.size(), 2u);
  EXPECT_LT(e2.candidate_values[1], e2.candidate_values[0]);
}

TEST(Invariance, DuplicatedBaselineHasZeroScore) {
  const GameProblem p = load("analytic.cfg");
  ExperimentConfig e = quick("analytic.cfg");
  e.points = {pt(0.5)};
  e.variants = {Variant::baseline, Variant::baseline, Variant::time_change};
  e.budget_h = 0.0;
  e.budget_dt = 0.1;
  const InvarianceReport r = run_invariance_suite(p, e);
  ASSERT_EQ(r.estimates.size(), 3u);
  ASSERT_EQ(r.z.size(), 1u);
  EXPECT_EQ(r.z[0][0 * 3 + 1], 0.0);
  EXPECT_EQ(r.z[0][0 * 3 + 0], 0.0);
  EXPECT_EQ(r.z[0][0 * 3 + 2], -r.z[0][2 * 3 + 0]);
  EXPECT_NEAR(r.pde[0], 0.125, 1e-3);
  EXPECT_DOUBLE_EQ(r.budget, 0.1 * std::sqrt(1e-3));
  EXPECT_TRUE(r.passed);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(r.estimate(0, v).n_paths, 2000u);
    EXPECT_EQ(r.estimate(0, v).best_candidate, "const_a0");
  }

  std::ostringstream est, z, summary;
  write_estimates_csv(est, r);
  write_z_csv(z, r);
  write_summary(summary, r);
  const std::string est_text = est.str(), z_text = z.str();
  EXPECT_EQ(std::count(est_text.begin(), est_text.end(), '\n'), 4);
  EXPECT_EQ(z_text.substr(0, z_text.find('\n')), "x0,variant_a,variant_b,z");
  EXPECT_EQ(std::count(z_text.begin(), z_text.end(), '\n'), 4);
  EXPECT_NE(summary.str().find("result: PASS"), std::string::npos);
}

TEST(Invariance, StageErrorsNameTheStep) {
  const GameProblem p = load("analytic.cfg");
  ExperimentConfig e = quick("analytic.cfg");
  e.variants = {Variant::girsanov};
  EXPECT_THROW(run_invariance_suite(p, e), StageError);
  e.variants = {Variant::baseline};
  e.points = {pt(1.5)};
  try {
    run_invariance_suite(p, e);
    FAIL();
  } catch (const StageError& err) {
    EXPECT_EQ(std::string(err.what()).rfind("config:", 0), 0u);
  }
  e.points = {pt(0.5)};
  e.solve.max_sweeps = 2;
  try {
    run_invariance_suite(p, e);
    FAIL();
  } catch (const StageError& err) {
    EXPECT_EQ(std::string(err.what()).rfind("solve:", 0), 0u);
  }
}

TEST(Synthesis, FeedbackJoinsTheCandidates) {
  const GameProblem p = load("game2x2.cfg");
  ExperimentConfig e = quick("game2x2.cfg");
  const SolvedGame g = solve_and_synthesize(p, e);
  EXPECT_EQ(g.play.candidates.size(), 4u);
  EXPECT_EQ(g.play.candidates.name(3), "feedback");
  EXPECT_EQ(g.play.beta_policy->lag(), e.lag());
  EXPECT_DOUBLE_EQ(g.play.beta_selector->epsilon(), e.epsilon());
  e.feedback_candidate = false;
  EXPECT_EQ(solve_and_synthesize(p, e).play.candidates.size(), 3u);
}

TEST(Penalized, SmoothProblemIsMonotone) {
  const GameProblem p = load("penalty_smooth.cfg");
  ExperimentConfig e = quick("penalty_smooth.cfg");
  e.vk_points.clear();
  e.K_list = {1, 2, 4, 8};
  const VkReport r = run_vk_convergence(p, e);
  EXPECT_TRUE(r.monotone);
  EXPECT_LE(r.monotone_violation, 0.0 + 1e-12);
  EXPECT_EQ(r.rate.u_K.size(), 4u);
  EXPECT_TRUE(r.v_mc.empty());
  std::ostringstream s;
  write_summary(s, r);
  EXPECT_NE(s.str().find("monotone"), std::string::npos);
}

TEST(Penalized, MonteCarloAtSmallAndLargeK) {
  const GameProblem p = load("penalty_smooth.cfg");
  ExperimentConfig e = quick("penalty_smooth.cfg");
  e.vk_points = {pt(0.5)};
  e.K_list = {1, 16};
  const VkReport r = run_vk_convergence(p, e);
  ASSERT_EQ(r.vk_small.size(), 1u);
  ASSERT_EQ(r.vk_large.size(), 1u);
  // u_K decreases to v; the estimates follow within noise.
  EXPECT_GE(r.uk_small[0], r.uk_large[0]);
  const double se = std::hypot(r.vk_large[0].standard_error, r.v_mc[0].standard_error);
  EXPECT_GE(r.vk_large[0].value, r.v_mc[0].value - 3 * se - 1e-3);
  // Penalty actions enter only through the feedback candidate.
  EXPECT_EQ(r.vk_small[0].candidate_count, r.v_mc[0].candidate_count);
}
