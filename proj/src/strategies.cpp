#include "sdgame/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sdgame/rng.hpp"

namespace sdgame {

MarkovSelector::MarkovSelector(Role role, ValueField value, double epsilon, int num_alpha, std::vector<int> table,
                               std::vector<double> margin)
    : role_(role),
      value_(std::move(value)),
      epsilon_(epsilon),
      num_alpha_(num_alpha),
      table_(std::move(table)),
      margin_(std::move(margin)) {
  const std::size_t n = static_cast<std::size_t>(value_.size());
  const std::size_t expected = role_ == Role::player_two ? n * static_cast<std::size_t>(num_alpha_) : n;
  if (table_.size() != expected || margin_.size() != expected)
    throw std::invalid_argument("selector table does not match the grid");
}

int MarkovSelector::lookup(const Vec& x) const {
  if (!grid().domain().contains(x)) return -1;
  return grid().nearest_interior_node(x);
}

int MarkovSelector::beta_at_node(int alpha, int node) const {
  if (role_ != Role::player_two) throw std::logic_error("not a player-two selector");
  if (alpha < 0 || alpha >= num_alpha_) throw std::out_of_range("alpha index out of range");
  if (node < 0 || !grid().is_interior(node)) return default_action();
  return table_[static_cast<std::size_t>(alpha) * value_.size() + node];
}

int MarkovSelector::alpha_at_node(int node) const {
  if (role_ != Role::player_one) throw std::logic_error("not a player-one selector");
  if (node < 0 || !grid().is_interior(node)) return default_action();
  return table_[node];
}

int MarkovSelector::beta_at(int alpha, const Vec& x) const { return beta_at_node(alpha, lookup(x)); }
int MarkovSelector::alpha_at(const Vec& x) const { return alpha_at_node(lookup(x)); }

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("selector slack must be positive");
}

std::string describe(const DomainGrid& grid, int node) {
  const Vec x = grid.coordinates(node);
  std::string s = "node " + std::to_string(node) + " (";
  for (int i = 0; i < x.size(); ++i) s += (i ? ", " : "") + format_double(x[i]);
  return s + ")";
}

}  // namespace

MarkovSelector build_beta_selector(const GameProblem& problem, const ValueField& u_hat, double epsilon,
                                   DriftScheme drift) {
  check_epsilon(epsilon);
  const DomainGrid& grid = u_hat.grid();
  const int na = problem.num_alpha();
  const std::size_t n = static_cast<std::size_t>(u_hat.size());
  std::vector<int> table(n * na, 0);
  std::vector<double> margin(n * na, 0.0);
  for (int a = 0; a < na; ++a) {
    for (int node : grid.interior_nodes()) {
      double best = std::numeric_limits<double>::infinity();
      int chosen = -1;
      for (int b = 0; b < problem.num_beta() && chosen < 0; ++b) {
        const double q = build_stencil(problem, grid, a, b, node, drift).apply(u_hat.values(), node) - epsilon;
        best = std::min(best, q);
        if (q <= 0.0) chosen = b;
      }
      if (chosen < 0)
        throw InfeasibleSelector("no player-two action satisfies L u + f <= eps at " + describe(grid, node) +
                                     " against action " + problem.actions().alpha_name(a) +
                                     "; smallest margin " + format_double(best),
                                 node, best);
      table[a * n + node] = chosen;
      margin[a * n + node] = best;
    }
  }
  return MarkovSelector(MarkovSelector::Role::player_two, u_hat, epsilon, na, std::move(table), std::move(margin));
}

MarkovSelector build_alpha_selector(const GameProblem& problem, const ValueField& u_check, double epsilon,
                                    DriftScheme drift) {
  check_epsilon(epsilon);
  const DomainGrid& grid = u_check.grid();
  const std::size_t n = static_cast<std::size_t>(u_check.size());
  std::vector<int> table(n, 0);
  std::vector<double> margin(n, 0.0);
  for (int node : grid.interior_nodes()) {
    double best = -std::numeric_limits<double>::infinity();
    int chosen = -1;
    for (int a = 0; a < problem.num_alpha() && chosen < 0; ++a) {
      double m = std::numeric_limits<double>::infinity();
      for (int b = 0; b < problem.num_beta(); ++b)
        m = std::min(m, build_stencil(problem, grid, a, b, node, drift).apply(u_check.values(), node));
      m += epsilon;
      best = std::max(best, m);
      if (m >= 0.0) chosen = a;
    }
    if (chosen < 0)
      throw InfeasibleSelector("no player-one action satisfies min_beta [L u + f] >= -eps at " +
                                   describe(grid, node) + "; largest margin " + format_double(best),
                               node, best);
    table[node] = chosen;
    margin[node] = best;
  }
  return MarkovSelector(MarkovSelector::Role::player_one, u_check, epsilon, problem.num_alpha(), std::move(table),
                        std::move(margin));
}

void write_csv(std::ostream& out, const MarkovSelector& selector, const GameProblem& problem) {
  const DomainGrid& grid = selector.grid();
  const std::size_t n = static_cast<std::size_t>(grid.node_count());
  for (int i = 0; i < grid.dim(); ++i) out << (i ? "," : "") << "x" << (i + 1);
  if (selector.role() == MarkovSelector::Role::player_two) {
    for (int a = 0; a < selector.num_alpha(); ++a)
      out << ",beta_" << problem.actions().alpha_name(a) << ",margin_" << problem.actions().alpha_name(a);
  } else {
    out << ",alpha,margin";
  }
  out << '\n';
  for (int node : grid.interior_nodes()) {
    const Vec x = grid.coordinates(node);
    for (int i = 0; i < x.size(); ++i) out << (i ? "," : "") << format_double(x[i]);
    if (selector.role() == MarkovSelector::Role::player_two) {
      for (int a = 0; a < selector.num_alpha(); ++a) {
        const std::size_t k = a * n + node;
        out << ',' << problem.actions().player_two[selector.table()[k]] << ',' << format_double(selector.margin()[k]);
      }
    } else {
      out << ',' << problem.actions().alpha_name(selector.table()[node]) << ','
          << format_double(selector.margin()[node]);
    }
    out << '\n';
  }
}

//----------------------------------------------------------------------------
// Policies

FeedbackPolicy::FeedbackPolicy(std::shared_ptr<const MarkovSelector> selector, int n)
    : selector_(std::move(selector)), n_(n) {
  if (!selector_) throw std::invalid_argument("feedback policy needs a selector");
  if (n_ < 1) throw std::invalid_argument("lag n must be at least 1");
}

int FeedbackPolicy::act(double, const Vec& x_lag) const { return selector_->alpha_at(x_lag); }

int FeedbackPolicy::act(int alpha, double, const Vec& x_lag) const { return selector_->beta_at(alpha, x_lag); }

std::shared_ptr<FeedbackPolicy> make_feedback_policy(std::shared_ptr<const MarkovSelector> selector, int n,
                                                     double dt) {
  if (n < 1) throw std::invalid_argument("lag n must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (n * dt > 1.0 + 1e-12) throw std::invalid_argument("lag grid 1/n is finer than the time step");
  return std::make_shared<FeedbackPolicy>(std::move(selector), n);
}

BangBang::BangBang(int first, int second, double period) : first_(first), second_(second), period_(period) {
  if (!(period > 0.0)) throw std::invalid_argument("switching period must be positive");
}

int BangBang::act(double t, const Vec&) const {
  const long k = static_cast<long>(std::floor(t / period_ + 1e-9));
  return k % 2 == 0 ? first_ : second_;
}

PeriodicMix::PeriodicMix(int first, int second, double period, double fraction)
    : first_(first), second_(second), period_(period), fraction_(fraction) {
  if (!(period > 0.0)) throw std::invalid_argument("mixing period must be positive");
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("mixing fraction must lie in [0, 1]");
}

int PeriodicMix::act(double t, const Vec&) const {
  const double phase = t / period_ - std::floor(t / period_ + 1e-9);
  return phase < fraction_ - 1e-9 ? first_ : second_;
}

ScriptedAlpha::ScriptedAlpha(std::vector<double> times, std::vector<int> actions)
    : times_(std::move(times)), actions_(std::move(actions)) {
  if (times_.empty() || times_.size() != actions_.size()) throw std::invalid_argument("script needs matching times and actions");
  if (times_[0] != 0.0) throw std::invalid_argument("script must start at t = 0");
  if (!std::is_sorted(times_.begin(), times_.end())) throw std::invalid_argument("script times must increase");
}

int ScriptedAlpha::act(double t, const Vec&) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t + 1e-12);
  return actions_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

void CandidateControlSet::add(std::string name, std::shared_ptr<const AlphaPolicy> policy) {
  if (!policy) throw std::invalid_argument("candidate policy is null");
  names_.push_back(std::move(name));
  policies_.push_back(std::move(policy));
}

CandidateControlSet CandidateControlSet::standard(const GameProblem& problem, double period,
                                                  std::shared_ptr<const AlphaPolicy> feedback) {
  CandidateControlSet set;
  const ActionSets& actions = problem.actions();
  const int base = actions.num_base_alpha();
  for (int a = 0; a < base; ++a) set.add("const_" + actions.alpha_name(a), std::make_shared<ConstantAlpha>(a));
  for (int a = 0; a + 1 < base; ++a)
    set.add("bangbang_" + actions.alpha_name(a) + "_" + actions.alpha_name(a + 1),
            std::make_shared<BangBang>(a, a + 1, period));
  if (feedback) set.add("feedback", std::move(feedback));
  return set;
}

//----------------------------------------------------------------------------
// Martingale checks

namespace {

class CheckpointRecorder : public StepObserver {
 public:
  CheckpointRecorder(const ValueField& u, const std::vector<long>& steps, double dt, std::vector<double>& out)
      : u_(u), steps_(steps), dt_(dt), out_(out) {}

  void step(const PathState& s, double running, int, int) override {
    if (next_ >= steps_.size()) return;
    if (std::lround(s.t / dt_) != steps_[next_]) return;
    out_[next_++] = u_.at(s.x) * std::exp(-s.phi - s.psi) + running;
  }
  std::size_t filled() const { return next_; }

 private:
  const ValueField& u_;
  const std::vector<long>& steps_;
  double dt_;
  std::vector<double>& out_;
  std::size_t next_ = 0;
};

}  // namespace

MartingaleTestReport martingale_test(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                     const ValueField& u, const AlphaPolicy& alpha, const BetaPolicy& beta,
                                     const SimConfig& cfg, const std::vector<double>& checkpoints, double epsilon,
                                     MartingaleSide side) {
  cfg.validate();
  if (checkpoints.size() < 2) throw std::invalid_argument("need at least two checkpoints");
  std::vector<long> steps;
  for (double t : checkpoints) {
    if (t < 0.0 || t > cfg.t_max) throw std::invalid_argument("checkpoints must lie in [0, t_max]");
    steps.push_back(std::lround(t / cfg.dt));
    if (steps.size() > 1 && steps.back() <= steps[steps.size() - 2])
      throw std::invalid_argument("checkpoints must increase by at least one step");
  }
  const std::size_t K = steps.size();
  std::vector<double> values(cfg.n_paths * K, 0.0);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    std::vector<double> row(K, 0.0);
    CheckpointRecorder recorder(u, steps, cfg.dt, row);
    const TrajectoryRecord rec = simulate_to_exit(problem, spec, x0, alpha, beta, cfg, p, &recorder);
    // After exit the process is frozen at the realized payoff; a censored
    // path keeps the value field at its final state instead.
    const double frozen = rec.censored
                              ? u.at(rec.exit_state) * std::exp(-rec.phi - rec.psi) + rec.running_payoff
                              : rec.payoff();
    for (std::size_t k = recorder.filled(); k < K; ++k) row[k] = frozen;
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(p * K));
  });

  double r2max = 0.0;
  for (int a = 0; a < problem.num_alpha(); ++a)
    for (int b = 0; b < problem.num_beta(); ++b) r2max = std::max(r2max, spec.rate(a, b) * spec.rate(a, b));

  MartingaleTestReport rep;
  rep.side = side;
  rep.times = checkpoints;
  rep.passed = true;
  for (std::size_t k = 0; k < K; ++k) {
    RunningStats m;
    for (std::size_t p = 0; p < cfg.n_paths; ++p) m.add(values[p * K + k]);
    rep.m.push_back(m.mean());
    rep.m_se.push_back(m.standard_error());
    if (k == 0) continue;
    RunningStats inc;
    for (std::size_t p = 0; p < cfg.n_paths; ++p) inc.add(values[p * K + k] - values[p * K + k - 1]);
    const double dt_k = (steps[k] - steps[k - 1]) * cfg.dt;
    const double allowance = epsilon * dt_k * r2max + 3.0 * inc.standard_error();
    rep.increment.push_back(inc.mean());
    rep.increment_se.push_back(inc.standard_error());
    rep.allowance.push_back(allowance);
    const bool ok = side == MartingaleSide::super ? inc.mean() <= allowance : inc.mean() >= -allowance;
    rep.passed = rep.passed && ok;
  }
  return rep;
}

}  // namespace sdgame
