#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdgame/game_model.hpp"
#include "sdgame/linalg.hpp"

namespace sdgame {

//----------------------------------------------------------------------------
// Probability-space variants

enum class Variant { baseline, time_change, girsanov, rotated_noise, combined };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Knobs of the built-in variant family.
struct VariantParams {
  /// Rates assigned to the action pairs in turn (pair index modulo size).
  std::vector<double> rates{0.5, 2.0};
  double girsanov_norm = 0.3;
  /// Givens angle step: pair k gets the rotation by (k + 1) * angle in the
  /// first two noise coordinates; with one noise coordinate the sign flips
  /// on even pairs.
  double rotation_angle = 1.0471975511965976;  // pi / 3
};

/// Time-change rate r, Girsanov drift pi and orthogonal noise transform Q as
/// functions of the current (projected) action pair. Lookups take the
/// player-one index through the projection onto A, so the same spec drives
/// a problem and its penalized extension.
class ControlAdaptedSpec {
 public:
  ControlAdaptedSpec(Variant variant, int num_alpha, int num_beta, int noise_dim, double delta1, double K1,
                     std::vector<double> rates, std::vector<NoiseVec> drifts, std::vector<NoiseMat> rotations);

  static ControlAdaptedSpec baseline(const GameProblem& problem);
  static ControlAdaptedSpec make(Variant variant, const GameProblem& problem, const VariantParams& params = {});

  Variant variant() const { return variant_; }
  int noise_dim() const { return noise_dim_; }
  double rate(int alpha, int beta) const { return rates_[index(alpha, beta)]; }
  const NoiseVec& drift(int alpha, int beta) const { return drifts_[index(alpha, beta)]; }
  const NoiseMat& rotation(int alpha, int beta) const { return rotations_[index(alpha, beta)]; }
  bool has_girsanov() const { return girsanov_; }
  bool has_rotation() const { return rotated_; }

 private:
  std::size_t index(int alpha, int beta) const {
    if (alpha >= num_alpha_) alpha = 0;  // penalty actions share the default action's entry
    return static_cast<std::size_t>(alpha * num_beta_ + beta);
  }

  Variant variant_;
  int num_alpha_;
  int num_beta_;
  int noise_dim_;
  std::vector<double> rates_;
  std::vector<NoiseVec> drifts_;
  std::vector<NoiseMat> rotations_;
  bool girsanov_ = false;
  bool rotated_ = false;
};

//----------------------------------------------------------------------------
// Simulation

enum class ExitCorrection { none, bridge };

struct SimConfig {
  double dt = 1e-4;
  double t_max = 10.0;
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  /// Grid lag n for feedback policies built by the harness.
  int lag_n = 0;
  ExitCorrection exit_correction = ExitCorrection::bridge;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct PathState {
  double t = 0.0;
  Vec x;
  double phi = 0.0;
  double psi = 0.0;
};

struct TrajectoryRecord {
  double exit_time = 0.0;
  bool censored = false;
  Vec exit_state;
  double phi = 0.0;
  double psi = 0.0;
  double running_payoff = 0.0;
  double terminal_payoff = 0.0;
  double girsanov_weight = 1.0;  // e^{-psi} at exit
  double psi_integral = 0.0;     // integral of e^{-psi} up to exit
  double penalty_time = 0.0;     // time spent on penalty actions
  long steps = 0;

  double payoff() const { return running_payoff + terminal_payoff; }
};

/// Player-one policy. It sees the state frozen at the last lag grid time
/// floor(n t)/n, with n = lag(); lag 0 means the current pre-step state.
class AlphaPolicy {
 public:
  virtual ~AlphaPolicy() = default;
  virtual int lag() const { return 0; }
  virtual int act(double t, const Vec& x_lag) const = 0;
};

/// Player-two policy: reacts to the opponent's current action and the state
/// frozen at its own lag grid time.
class BetaPolicy {
 public:
  virtual ~BetaPolicy() = default;
  virtual int lag() const { return 0; }
  virtual int act(int alpha, double t, const Vec& x_lag) const = 0;
};

/// Per-path callback at every pre-step state (including t = 0). `running`
/// is the running payoff accumulated so far.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void step(const PathState& state, double running, int alpha, int beta) = 0;
};

/// One explicit Euler step of the controlled dynamics with coefficients at
/// the pre-step state. psi grows by r^2 |pi|^2 dt / 2 + r pi.dw, which makes
/// e^{-psi} the density process of the drift removal.
PathState em_step(const GameProblem& problem, const ControlAdaptedSpec& spec, const PathState& state, int alpha,
                  int beta, const NoiseVec& dW, double dt);

/// Simulates one path from x0 until exit from G or t_max. The Gaussian
/// stream is keyed by (cfg.seed, path, 0).
TrajectoryRecord simulate_to_exit(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                  const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                  std::uint64_t path, StepObserver* observer = nullptr);

struct PayoffSummary {
  double mean = 0.0;
  double standard_error = 0.0;
  double censored_fraction = 0.0;
  double mean_exit_time = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> payoffs;  // per path, in path order
};

PayoffSummary simulate_batch(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                             const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg);

/// Rows path_id,t,x1..xd,phi,psi for the first `n_paths` paths.
void write_paths_csv(std::ostream& out, const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                     const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg, std::size_t n_paths);

struct MartingaleReport {
  double mean_weight = 0.0;  // E e^{-psi_tau} 1{tau < t_max}
  double standard_error = 0.0;
  double censored_mass = 0.0;  // E e^{-psi_tmax} 1{censored}
  double stopped_weight = 0.0;  // E e^{-psi_{tau ^ tmax}}, exactly 1 for a martingale
  double stopped_se = 0.0;
  double censored_fraction = 0.0;
  double psi_integral = 0.0;  // E int_0^tau e^{-psi} ds
  double psi_integral_se = 0.0;
};

MartingaleReport girsanov_martingale_check(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                           const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg);

struct BoundReport {
  std::vector<int> n;
  std::vector<double> M;   // E int_0^tau e^{-phi-psi} |x_t - x_{kappa_n(t)}|^2 dt
  std::vector<double> se;
  std::vector<double> scaled;  // M(n) n
  double ratio = 0.0;          // max / min of scaled
};

BoundReport increment_bound_study(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                  const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                  const std::vector<int>& n_list);

struct ComparisonReport {
  double divergence = 0.0;  // E sup_{t <= T ^ gamma} |x_t - y_t|
  double divergence_se = 0.0;
  double occupation = 0.0;  // E int_0^{T ^ gamma} 1{alpha_t in A2} dt
  double ratio = 0.0;       // divergence / sqrt(occupation)
  double max_gap = 0.0;     // largest single-path sup gap
};

/// Couples the path x driven by `alpha` with the path y driven by its
/// projection onto A: same Gaussian stream, same player-two action, both
/// stopped at T or when either leaves G. Requires pi = 0.
ComparisonReport pathwise_comparison(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                     const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                     double horizon);

}  // namespace sdgame
