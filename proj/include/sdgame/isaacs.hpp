#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdgame/game_model.hpp"
#include "sdgame/grid.hpp"

namespace sdgame {

/// Finite-difference treatment of the first-order term. Central differences
/// keep second order but need a finer grid to stay of positive type.
enum class DriftScheme { central, upwind };

inline constexpr int kMaxStencil = 18;

/// L u at a node written as sum_k weight_k (u[neighbor_k] - u[node]) - c u[node].
struct Stencil {
  int count = 0;
  std::array<int, kMaxStencil> neighbor{};
  std::array<double, kMaxStencil> weight{};
  double zero_order = 0.0;
  double source = 0.0;  // f at the node

  double weight_sum() const;
  /// L u + f.
  double apply(const std::vector<double>& u, int node) const;
};

class NonMonotoneStencil : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stencil of L^{alpha beta} at an interior node. Off-diagonal second
/// derivatives use the positive-type splitting by sign of a_ij; throws
/// NonMonotoneStencil when a weight is negative.
Stencil build_stencil(const GameProblem& problem, const DomainGrid& grid, int alpha, int beta, int node,
                      DriftScheme drift = DriftScheme::central);

/// Stencil of a constant-coefficient operator a_ij D_ij + b_i D_i - c.
Stencil build_stencil(const Mat& a, const Vec& b, double c, const DomainGrid& grid, int node,
                      DriftScheme drift = DriftScheme::central);

/// Largest spacing factor at which every stencil of `problem` on `grid`
/// stays of positive type, from the per-node diagonal-dominance margin:
/// a_kk/h^2 - sum_j |a_kj|/h^2 - |b_k|/(2h) >= 0. Infinite for upwind
/// drift when the diffusion part is diagonally dominant.
double monotone_spacing(const GameProblem& problem, const DomainGrid& grid, DriftScheme drift = DriftScheme::central);

/// L^{alpha beta} u at an interior node (no running cost).
double discrete_L(const GameProblem& problem, int alpha, int beta, const ValueField& u, int node,
                  DriftScheme drift = DriftScheme::central);

/// max_alpha min_beta [L u + f] on interior nodes, 0 on the boundary ring.
/// Player one ranges over the whole action index space of `problem`.
ValueField evaluate_H(const GameProblem& problem, const ValueField& u, DriftScheme drift = DriftScheme::central);

//----------------------------------------------------------------------------
// Pucci-type operator P

struct PucciParams {
  double delta_hat = 0.5;
  double gradient_bound = 0.0;
  double zero_order = 0.0;
  int rays = 16;  // rotations sampled per 2-D eigenframe family
  std::uint64_t ray_seed = 1;  // 3-D random frames
};

/// One constant-coefficient operator of the finite family whose maximum is P.
struct PucciOperator {
  Mat a;
  Vec b;
  double c = 0.0;
};

/// The finite operator family for dimension d. In 1-D the diffusion part is
/// exactly {delta_hat, 1/delta_hat}. In 2-D the eigenpair (delta_hat,
/// 1/delta_hat) is rotated through `rays` angles in [0, pi) and the two
/// isotropic extremes are added; in 3-D the coordinate frames are combined
/// with seeded random frames. Frames whose matrix is not diagonally dominant
/// are dropped since the splitting could not be of positive type.
std::vector<PucciOperator> make_pucci(const PucciParams& params, int d);

/// P[u] = max over the operator family, on interior nodes; 0 on the ring.
ValueField evaluate_P(const std::vector<PucciOperator>& family, const ValueField& u,
                      DriftScheme drift = DriftScheme::central);
ValueField evaluate_P(const PucciParams& params, const ValueField& u, DriftScheme drift = DriftScheme::central);

/// Problem over the extended action set: the base actions followed by one
/// penalty action per operator of `family`, with running cost -K and
/// coefficients independent of x and beta. Constants are widened so the
/// extended problem still satisfies its own bounds.
GameProblem extend_with_penalty(const GameProblem& problem, const std::vector<PucciOperator>& family, double K);

//----------------------------------------------------------------------------
// Solvers

struct SolveConfig {
  int max_policy_iterations = 200;
  double inner_tolerance = 1e-10;
  double residual_tolerance = 1e-8;
  /// SOR factor; 0 picks 2 / (1 + sin(pi h / L)).
  double relaxation = 0.0;
  int max_sweeps = 200000;
  DriftScheme drift = DriftScheme::central;
};

struct SolveResult {
  ValueField value;
  std::vector<int> alpha_policy;  // per node; -1 on the boundary ring
  /// Argmin beta for each (alpha, node) at the returned value, alpha-major.
  std::vector<int> beta_table;
  int outer_iterations = 0;
  long sweeps = 0;
  double residual = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Nested policy iteration for H[v] = 0 with v = g on the boundary ring:
/// the outer loop improves player one's feedback, the inner loop solves the
/// resulting minimization by Howard iteration with SOR linear solves.
SolveResult solve_isaacs(const GameProblem& problem, std::shared_ptr<const DomainGrid> grid, const SolveConfig& cfg);

/// max(H[u], P[u] - K) = 0 with u = g on the ring, solved as an Isaacs
/// problem over the extended action set.
SolveResult solve_penalized(const GameProblem& problem, const std::vector<PucciOperator>& family, double K,
                            std::shared_ptr<const DomainGrid> grid, const SolveConfig& cfg);

struct RateReport {
  std::vector<double> K;
  std::vector<double> sup_error;
  std::vector<ValueField> u_K;
  /// Fit of log e = log N_chi - chi log K over the entries above `floor`.
  double chi = 0.0;
  double N_chi = 0.0;
  /// max_K e(K) K: the constant of the model e <= N / K.
  double N = 0.0;
  double floor = 0.0;
  int fitted_points = 0;
};

RateReport convergence_study(const GameProblem& problem, const std::vector<PucciOperator>& family,
                             const std::vector<double>& K_list, std::shared_ptr<const DomainGrid> grid,
                             const SolveConfig& cfg);

/// Header K,sup_error; the fit goes in a trailing "# fit" row.
void write_csv(std::ostream& out, const RateReport& report);

}  // namespace sdgame
