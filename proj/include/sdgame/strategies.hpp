#pragma once

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdgame/grid.hpp"
#include "sdgame/isaacs.hpp"
#include "sdgame/sde.hpp"

namespace sdgame {

class InfeasibleSelector : public std::runtime_error {
 public:
  InfeasibleSelector(const std::string& what, int node, double margin)
      : std::runtime_error(what), node_(node), margin_(margin) {}
  int node() const { return node_; }
  double margin() const { return margin_; }

 private:
  int node_;
  double margin_;
};

/// Tabulated feedback map on the nodes of a solved grid.
///
/// Player-two tables hold, for each (alpha, node), the least beta with
/// L u + f - eps <= 0, with margin L u + f - eps. Player-one tables hold the
/// least alpha with min_beta [L u + f] >= -eps, with margin
/// min_beta [L u + f] + eps. Ring nodes and points away from the interior
/// get the fixed default action 0.
class MarkovSelector {
 public:
  enum class Role { player_one, player_two };

  MarkovSelector(Role role, ValueField value, double epsilon, int num_alpha, std::vector<int> table,
                 std::vector<double> margin);

  Role role() const { return role_; }
  double epsilon() const { return epsilon_; }
  int num_alpha() const { return num_alpha_; }
  const ValueField& value() const { return value_; }
  const DomainGrid& grid() const { return value_.grid(); }
  int default_action() const { return 0; }

  /// Entries indexed alpha * node_count + node (player two) or node.
  const std::vector<int>& table() const { return table_; }
  const std::vector<double>& margin() const { return margin_; }

  int beta_at(int alpha, const Vec& x) const;
  int alpha_at(const Vec& x) const;
  int beta_at_node(int alpha, int node) const;
  int alpha_at_node(int node) const;

 private:
  int lookup(const Vec& x) const;

  Role role_;
  ValueField value_;
  double epsilon_;
  int num_alpha_;
  std::vector<int> table_;
  std::vector<double> margin_;
};

/// Requires max_alpha min_beta [L u + f] < eps on every interior node;
/// throws InfeasibleSelector naming the first node where it fails.
MarkovSelector build_beta_selector(const GameProblem& problem, const ValueField& u_hat, double epsilon,
                                   DriftScheme drift = DriftScheme::central);
/// Requires max_alpha min_beta [L u + f] > -eps on every interior node.
MarkovSelector build_alpha_selector(const GameProblem& problem, const ValueField& u_check, double epsilon,
                                    DriftScheme drift = DriftScheme::central);

/// Columns x1..xd then, per alpha, beta_<a>,margin_<a> (player two) or
/// alpha,margin (player one); interior nodes only.
void write_csv(std::ostream& out, const MarkovSelector& selector, const GameProblem& problem);

/// Selector read at the state frozen on the grid floor(n t)/n. As a
/// player-two policy the action tracks the opponent's current action.
class FeedbackPolicy : public AlphaPolicy, public BetaPolicy {
 public:
  FeedbackPolicy(std::shared_ptr<const MarkovSelector> selector, int n);

  int lag() const override { return n_; }
  int act(double t, const Vec& x_lag) const override;
  int act(int alpha, double t, const Vec& x_lag) const override;
  const MarkovSelector& selector() const { return *selector_; }

 private:
  std::shared_ptr<const MarkovSelector> selector_;
  int n_;
};

/// Rejects n < 1 and a lag grid finer than the time step (n dt > 1).
std::shared_ptr<FeedbackPolicy> make_feedback_policy(std::shared_ptr<const MarkovSelector> selector, int n,
                                                     double dt);

class ConstantAlpha : public AlphaPolicy {
 public:
  explicit ConstantAlpha(int alpha) : alpha_(alpha) {}
  int act(double, const Vec&) const override { return alpha_; }

 private:
  int alpha_;
};

class ConstantBeta : public BetaPolicy {
 public:
  explicit ConstantBeta(int beta) : beta_(beta) {}
  int act(int, double, const Vec&) const override { return beta_; }

 private:
  int beta_;
};

/// Alternates between two actions, switching every `period` time units.
class BangBang : public AlphaPolicy {
 public:
  BangBang(int first, int second, double period);
  int act(double t, const Vec&) const override;

 private:
  int first_, second_;
  double period_;
};

/// `first` during the leading `fraction` of every period, `second` after.
class PeriodicMix : public AlphaPolicy {
 public:
  PeriodicMix(int first, int second, double period, double fraction);
  int act(double t, const Vec&) const override;

 private:
  int first_, second_;
  double period_, fraction_;
};

/// Piecewise-constant open-loop action: actions[k] on [times[k], times[k+1]).
class ScriptedAlpha : public AlphaPolicy {
 public:
  ScriptedAlpha(std::vector<double> times, std::vector<int> actions);
  int act(double t, const Vec&) const override;

 private:
  std::vector<double> times_;
  std::vector<int> actions_;
};

/// Finite stand-in for the player-one control class.
class CandidateControlSet {
 public:
  void add(std::string name, std::shared_ptr<const AlphaPolicy> policy);
  std::size_t size() const { return policies_.size(); }
  const AlphaPolicy& policy(std::size_t i) const { return *policies_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  /// Every base action held constant, bang-bang between consecutive base
  /// actions with the given period, and the feedback policy if supplied.
  static CandidateControlSet standard(const GameProblem& problem, double period,
                                      std::shared_ptr<const AlphaPolicy> feedback = nullptr);

 private:
  std::vector<std::string> names_;
  std::vector<std::shared_ptr<const AlphaPolicy>> policies_;
};

//----------------------------------------------------------------------------
// Super/submartingale checks

enum class MartingaleSide { super, sub };

struct MartingaleTestReport {
  MartingaleSide side = MartingaleSide::super;
  std::vector<double> times;
  std::vector<double> m;   // E[u(x_{t^tau}) e^{-phi-psi} + running payoff]
  std::vector<double> m_se;
  std::vector<double> increment;  // m(t_{k+1}) - m(t_k), paired per path
  std::vector<double> increment_se;
  std::vector<double> allowance;  // eps dt_k max r^2 + 3 se
  bool passed = false;
};

/// Evaluates m(t) along simulated paths. A path that has exited contributes
/// its realized payoff. For the super side every increment must stay below
/// its allowance; for the sub side every decrease.
MartingaleTestReport martingale_test(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                     const ValueField& u, const AlphaPolicy& alpha, const BetaPolicy& beta,
                                     const SimConfig& cfg, const std::vector<double>& checkpoints, double epsilon,
                                     MartingaleSide side);

inline MartingaleTestReport supermartingale_test(const GameProblem& problem, const ControlAdaptedSpec& spec,
                                                 const Vec& x0, const ValueField& u_hat, const AlphaPolicy& alpha,
                                                 const BetaPolicy& beta, const SimConfig& cfg,
                                                 const std::vector<double>& checkpoints, double epsilon) {
  return martingale_test(problem, spec, x0, u_hat, alpha, beta, cfg, checkpoints, epsilon, MartingaleSide::super);
}

inline MartingaleTestReport submartingale_test(const GameProblem& problem, const ControlAdaptedSpec& spec,
                                               const Vec& x0, const ValueField& u_check, const AlphaPolicy& alpha,
                                               const BetaPolicy& beta, const SimConfig& cfg,
                                               const std::vector<double>& checkpoints, double epsilon) {
  return martingale_test(problem, spec, x0, u_check, alpha, beta, cfg, checkpoints, epsilon, MartingaleSide::sub);
}

}  // namespace sdgame
