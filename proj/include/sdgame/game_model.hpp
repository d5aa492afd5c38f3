#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sdgame/linalg.hpp"

namespace sdgame {

class DomainGrid;

/// Raised for malformed game data (dimensions, action sets, bounds).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//----------------------------------------------------------------------------
// Coefficient families
//----------------------------------------------------------------------------

/// Scalar function of x built from a fixed menu of terms:
///   constant + slope.x + sum_k amp_k sin(wave_k.x + phase_k)
///                      + sum_k amp_k |x - center_k|^exponent_k
/// The last family is Hoelder continuous with the given exponent.
class ScalarField {
 public:
  ScalarField() = default;
  static ScalarField constant(double value);

  ScalarField& add_constant(double value);
  ScalarField& add_affine(double offset, const Vec& slope);
  ScalarField& add_sine(double amplitude, const Vec& wave, double phase);
  ScalarField& add_holder(double amplitude, double exponent, const Vec& center);

  double operator()(const Vec& x) const;

  bool is_constant() const { return slope_.size() == 0 && sines_.empty() && holders_.empty(); }
  double constant_part() const { return constant_; }

 private:
  struct Sine {
    double amplitude;
    Vec wave;
    double phase;
  };
  struct Holder {
    double amplitude;
    double exponent;
    Vec center;
  };

  double constant_ = 0.0;
  Vec slope_;
  std::vector<Sine> sines_;
  std::vector<Holder> holders_;
};

/// Coefficients of one action pair. sigma is d x d1, stored row-major.
struct CoefficientSet {
  std::vector<ScalarField> sigma;
  std::vector<ScalarField> drift;
  ScalarField discount;
  ScalarField cost;
};

/// All coefficients of one action pair evaluated at a point.
struct PointCoefficients {
  SigmaMat sigma;
  Vec drift;
  double discount = 0.0;
  double cost = 0.0;
};

//----------------------------------------------------------------------------
// Actions and domain
//----------------------------------------------------------------------------

/// Finite ordered action sets. Player one's combined index space lists A
/// first and then the penalization actions A2.
struct ActionSets {
  std::vector<std::string> player_one;  // A
  std::vector<std::string> player_two;  // B
  std::vector<std::string> penalty;     // A2, disjoint from A

  int num_alpha() const { return static_cast<int>(player_one.size() + penalty.size()); }
  int num_beta() const { return static_cast<int>(player_two.size()); }
  int num_base_alpha() const { return static_cast<int>(player_one.size()); }
  const std::string& alpha_name(int alpha) const;
  int alpha_index(const std::string& name) const;
  int beta_index(const std::string& name) const;
};

class DomainSpec {
 public:
  enum class Shape { ball, box };

  static DomainSpec ball(Vec center, double radius);
  static DomainSpec box(Vec lower, Vec upper);

  Shape shape() const { return shape_; }
  int dim() const { return static_cast<int>(a_.size()); }

  /// Membership in the open domain G.
  bool contains(const Vec& x) const { return boundary_distance(x) > 0.0; }
  /// Positive inside, zero on the boundary, negative outside. For boxes
  /// this is the smallest face distance, which is exact inside.
  double boundary_distance(const Vec& x) const;
  /// Fraction in [0, 1] of the segment from -> to at which it first meets
  /// the boundary; `from` must lie in the closure and `to` outside.
  double crossing_fraction(const Vec& from, const Vec& to) const;
  Vec nearest_boundary_point(const Vec& x) const;

  struct BridgeCrossing {
    double probability = 0.0;
    Vec exit_point;
  };
  /// Probability that a Brownian bridge with the given step covariance,
  /// pinned at two interior points, touches the boundary (half-space
  /// approximation per face for boxes, tangent plane for balls).
  BridgeCrossing bridge_crossing(const Vec& from, const Vec& to, const Mat& covariance) const;

  Vec lower_corner() const;
  Vec upper_corner() const;
  /// Center and radius of the smallest ball containing G.
  Vec enclosing_center() const;
  double enclosing_radius() const;

  // Ball: center and radius. Box: lower and upper corner.
  const Vec& first() const { return a_; }
  const Vec& second() const { return b_; }
  double radius() const { return radius_; }

 private:
  Shape shape_ = Shape::box;
  Vec a_;
  Vec b_;
  double radius_ = 0.0;
};

//----------------------------------------------------------------------------
// GameProblem
//----------------------------------------------------------------------------

struct ProblemConstants {
  double K0 = 1.0;
  double delta = 0.5;   // ellipticity of a = sigma sigma^T / 2
  double delta1 = 0.5;  // bounds on the time-change rate r
  double K1 = 1.0;      // bound on |pi|
};

class GameProblem {
 public:
  /// `coefficients` is alpha-major with num_alpha() * num_beta() entries.
  GameProblem(ActionSets actions, DomainSpec domain, int noise_dim, ProblemConstants constants,
              std::vector<CoefficientSet> coefficients, ScalarField terminal);

  int dim() const { return domain_.dim(); }
  int noise_dim() const { return noise_dim_; }
  const ActionSets& actions() const { return actions_; }
  const DomainSpec& domain() const { return domain_; }
  const ProblemConstants& constants() const { return constants_; }
  int num_alpha() const { return actions_.num_alpha(); }
  int num_beta() const { return actions_.num_beta(); }

  bool is_penalty(int alpha) const { return alpha >= actions_.num_base_alpha(); }
  /// Projection of the extended action set onto A: penalty actions map to
  /// the fixed default action (index 0).
  int project(int alpha) const { return is_penalty(alpha) ? 0 : alpha; }

  PointCoefficients evaluate(int alpha, int beta, const Vec& x) const;
  /// Same values without a copy for constant-coefficient pairs: returns the
  /// cached entry or fills `scratch` and returns it.
  const PointCoefficients& evaluate(int alpha, int beta, const Vec& x, PointCoefficients& scratch) const;
  SigmaMat sigma(int alpha, int beta, const Vec& x) const;
  Vec drift(int alpha, int beta, const Vec& x) const;
  double discount(int alpha, int beta, const Vec& x) const;
  double running_cost(int alpha, int beta, const Vec& x) const;
  double terminal(const Vec& x) const { return terminal_(x); }

  const CoefficientSet& coefficients(int alpha, int beta) const;
  const ScalarField& terminal_field() const { return terminal_; }

 private:
  struct Cached {
    bool constant = false;
    PointCoefficients value;
  };

  void check_index(int alpha, int beta) const;

  ActionSets actions_;
  DomainSpec domain_;
  int noise_dim_;
  ProblemConstants constants_;
  std::vector<CoefficientSet> coefficients_;
  std::vector<Cached> cache_;
  ScalarField terminal_;
};

//----------------------------------------------------------------------------
// Operations
//----------------------------------------------------------------------------

struct AssumptionMargin {
  std::string name;
  double worst = 0.0;   // extreme observed value
  double margin = 0.0;  // >= 0 when satisfied
  bool passed() const { return margin >= 0.0; }
};

struct ValidationReport {
  std::vector<AssumptionMargin> items;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double max_lipschitz = 0.0;

  bool passed() const;
  const AssumptionMargin& item(const std::string& name) const;
};

/// Worst-case margins of the standing assumptions over every action pair
/// and every active node of `sample_grid`. Violations are reported, not
/// thrown.
ValidationReport validate_problem(const GameProblem& problem, const DomainGrid& sample_grid);

/// a = sigma sigma^T / 2.
Mat diffusion_matrix(const GameProblem& problem, int alpha, int beta, const Vec& x);
Mat diffusion_matrix(const SigmaMat& sigma);

/// ds-integrand of the controlled dynamics: r^2 (b + sigma pi).
Vec effective_drift(const GameProblem& problem, int alpha, int beta, const Vec& x, double rate,
                    const NoiseVec& girsanov_drift);

/// Psi(x) = kappa (exp(lambda R^2) - exp(lambda |x - x0|^2)) on the ball
/// (x0, R) enclosing G.
struct BarrierFunction {
  double lambda = 1.0;
  double kappa = 1.0;
  Vec center;
  double radius = 0.0;
  int attempts = 0;
  /// max over grid nodes and action pairs of L Psi + c Psi; <= -1 on success.
  double max_generator = 0.0;
  /// max |Psi| over boundary nodes projected onto the boundary.
  double boundary_defect = 0.0;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
};

/// Raised when no (lambda, kappa) within the retry budget satisfies the
/// barrier inequality on the grid.
class BarrierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

BarrierFunction build_barrier(const GameProblem& problem, const DomainGrid& grid, int max_attempts = 16);

/// L Psi + c Psi for one action pair at x, from the closed-form derivatives.
double barrier_generator(const GameProblem& problem, const BarrierFunction& barrier, int alpha, int beta,
                         const Vec& x);

}  // namespace sdgame
