#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sdgame/config.hpp"
#include "sdgame/isaacs.hpp"
#include "sdgame/sde.hpp"
#include "sdgame/strategies.hpp"

namespace sdgame {

struct ValueEstimate {
  Vec x0;
  std::string variant;
  double value = 0.0;  // best candidate's mean payoff
  double standard_error = 0.0;
  std::size_t n_paths = 0;
  double censored_fraction = 0.0;
  std::size_t candidate_count = 0;
  std::string best_candidate;
  std::vector<double> candidate_values;  // in candidate order
};

/// Mean payoff of every candidate against `beta` on common random numbers
/// (one seed for all), returning the largest.
ValueEstimate estimate_value(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                             const BetaPolicy& beta, const CandidateControlSet& candidates, const SimConfig& cfg);

struct ExperimentConfig {
  std::vector<Vec> points;
  std::vector<Variant> variants{Variant::baseline};
  VariantParams variant_params;
  SimConfig sim;
  SolveConfig solve;
  double grid_h = 1.0 / 128.0;
  /// Selector slack as a multiple of the solver residual tolerance.
  double epsilon_factor = 10.0;
  double bangbang_period = 0.05;
  bool feedback_candidate = true;
  /// Discretization budget C h^2 + C' sqrt(dt).
  double budget_h = 0.0;
  double budget_dt = 0.0;
  double z_threshold = 3.0;
  PucciParams pucci;
  std::vector<double> K_list{1, 2, 4, 8, 16, 32, 64};
  /// Points for the penalized-game Monte Carlo check; empty skips it.
  std::vector<Vec> vk_points;

  double budget() const;
  double epsilon() const { return epsilon_factor * solve.residual_tolerance; }
  /// Feedback lag: sim.lag_n, or one step (n = 1/dt) when that is 0.
  int lag() const;
};

/// Reads [solver], [simulation], [experiment], [pucci] and [variants].
ExperimentConfig load_experiment(const Config& config, int d);

/// Feedback synthesized from a value field: the player-two policy the
/// estimates play against and the player-one candidate set.
struct Synthesis {
  std::shared_ptr<const MarkovSelector> beta_selector;
  std::shared_ptr<const MarkovSelector> alpha_selector;
  std::shared_ptr<FeedbackPolicy> beta_policy;
  std::shared_ptr<FeedbackPolicy> alpha_policy;
  CandidateControlSet candidates;
};

Synthesis synthesize(const GameProblem& problem, const ValueField& value, const ExperimentConfig& cfg);

struct SolvedGame {
  SolveResult solution;
  Synthesis play;
};

SolvedGame solve_and_synthesize(const GameProblem& problem, const ExperimentConfig& cfg);

struct InvarianceReport {
  std::vector<Vec> points;
  std::vector<std::string> variants;
  std::vector<ValueEstimate> estimates;  // point-major
  std::vector<double> pde;               // per point
  /// z[p][i * V + j] for variants i, j at point p; symmetric in sign.
  std::vector<std::vector<double>> z;
  double budget = 0.0;
  double z_threshold = 3.0;
  double max_abs_z = 0.0;
  double worst_pde_excess = 0.0;  // max |MC - PDE| - budget - 3 SE
  double solver_residual = 0.0;
  bool passed = false;

  const ValueEstimate& estimate(std::size_t point, std::size_t variant) const {
    return estimates[point * variants.size() + variant];
  }
};

/// Stage errors name the failing step: "solve: ...", "simulate: ...".
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

InvarianceReport run_invariance_suite(const GameProblem& problem, const ExperimentConfig& cfg);

/// Columns x0,variant,value,standard_error,n_paths,censored_fraction,
/// candidates,best_candidate,pde,abs_error,allowance.
void write_estimates_csv(std::ostream& out, const InvarianceReport& report);
/// Columns x0,variant_a,variant_b,z.
void write_z_csv(std::ostream& out, const InvarianceReport& report);
void write_summary(std::ostream& out, const InvarianceReport& report);

struct VkReport {
  RateReport rate;
  bool monotone = false;  // u_K nodewise nonincreasing in K
  double monotone_violation = 0.0;
  /// Penalized-game Monte Carlo at the smallest and largest K, per point.
  std::vector<Vec> points;
  std::vector<ValueEstimate> v_mc;
  std::vector<ValueEstimate> vk_small;
  std::vector<ValueEstimate> vk_large;
  std::vector<double> uk_small;  // u_K at the points
  std::vector<double> uk_large;
};

VkReport run_vk_convergence(const GameProblem& problem, const ExperimentConfig& cfg);

void write_summary(std::ostream& out, const VkReport& report);

/// "0.25" or "0.2 0.3"
std::string format_point(const Vec& x);

}  // namespace sdgame
