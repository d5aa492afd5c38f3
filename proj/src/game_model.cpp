#include "sdgame/game_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sdgame/grid.hpp"

namespace sdgame {

//----------------------------------------------------------------------------
// ScalarField

ScalarField ScalarField::constant(double value) {
  ScalarField field;
  field.constant_ = value;
  return field;
}

ScalarField& ScalarField::add_constant(double value) {
  constant_ += value;
  return *this;
}

ScalarField& ScalarField::add_affine(double offset, const Vec& slope) {
  constant_ += offset;
  if (slope_.size() == 0) {
    slope_ = slope;
  } else {
    if (slope_.size() != slope.size()) throw ModelError("affine term dimension mismatch");
    slope_ += slope;
  }
  return *this;
}

ScalarField& ScalarField::add_sine(double amplitude, const Vec& wave, double phase) {
  sines_.push_back({amplitude, wave, phase});
  return *this;
}

ScalarField& ScalarField::add_holder(double amplitude, double exponent, const Vec& center) {
  if (exponent <= 0.0) throw ModelError("Hoelder exponent must be positive");
  holders_.push_back({amplitude, exponent, center});
  return *this;
}

double ScalarField::operator()(const Vec& x) const {
  double value = constant_;
  if (slope_.size() != 0) value += slope_.dot(x);
  for (const auto& s : sines_) value += s.amplitude * std::sin(s.wave.dot(x) + s.phase);
  for (const auto& h : holders_) value += h.amplitude * std::pow((x - h.center).norm(), h.exponent);
  return value;
}

//----------------------------------------------------------------------------
// ActionSets

const std::string& ActionSets::alpha_name(int alpha) const {
  const int base = num_base_alpha();
  if (alpha < 0 || alpha >= num_alpha()) throw ModelError("alpha index out of range");
  return alpha < base ? player_one[alpha] : penalty[alpha - base];
}

int ActionSets::alpha_index(const std::string& name) const {
  for (int i = 0; i < num_alpha(); ++i)
    if (alpha_name(i) == name) return i;
  throw ModelError("unknown player-one action '" + name + "'");
}

int ActionSets::beta_index(const std::string& name) const {
  for (int i = 0; i < num_beta(); ++i)
    if (player_two[i] == name) return i;
  throw ModelError("unknown player-two action '" + name + "'");
}

//----------------------------------------------------------------------------
// DomainSpec

DomainSpec DomainSpec::ball(Vec center, double radius) {
  if (center.size() < 1 || center.size() > kMaxDim) throw ModelError("domain dimension must be 1..3");
  if (!(radius > 0.0)) throw ModelError("ball radius must be positive");
  DomainSpec d;
  d.shape_ = Shape::ball;
  d.a_ = std::move(center);
  d.b_ = d.a_;
  d.radius_ = radius;
  return d;
}

DomainSpec DomainSpec::box(Vec lower, Vec upper) {
  if (lower.size() < 1 || lower.size() > kMaxDim) throw ModelError("domain dimension must be 1..3");
  if (lower.size() != upper.size()) throw ModelError("box corners differ in dimension");
  for (int i = 0; i < lower.size(); ++i)
    if (!(upper[i] > lower[i])) throw ModelError("box must have nonempty interior");
  DomainSpec d;
  d.shape_ = Shape::box;
  d.a_ = std::move(lower);
  d.b_ = std::move(upper);
  return d;
}

double DomainSpec::boundary_distance(const Vec& x) const {
  if (shape_ == Shape::ball) return radius_ - (x - a_).norm();
  double dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) dist = std::min({dist, x[i] - a_[i], b_[i] - x[i]});
  return dist;
}

double DomainSpec::crossing_fraction(const Vec& from, const Vec& to) const {
  if (shape_ == Shape::ball) {
    const Vec p = from - a_;
    const Vec q = to - from;
    const double qq = q.squaredNorm();
    if (qq == 0.0) return 0.0;
    const double pq = p.dot(q);
    const double disc = std::max(0.0, pq * pq - qq * (p.squaredNorm() - radius_ * radius_));
    return std::clamp((-pq + std::sqrt(disc)) / qq, 0.0, 1.0);
  }
  double theta = 1.0;
  for (int i = 0; i < dim(); ++i) {
    if (to[i] <= a_[i] && from[i] > to[i]) theta = std::min(theta, (from[i] - a_[i]) / (from[i] - to[i]));
    if (to[i] >= b_[i] && to[i] > from[i]) theta = std::min(theta, (b_[i] - from[i]) / (to[i] - from[i]));
  }
  return std::clamp(theta, 0.0, 1.0);
}

Vec DomainSpec::nearest_boundary_point(const Vec& x) const {
  if (shape_ == Shape::ball) {
    Vec dir = x - a_;
    const double norm = dir.norm();
    if (norm == 0.0) {
      dir.setZero();
      dir[0] = 1.0;
    } else {
      dir /= norm;
    }
    return a_ + radius_ * dir;
  }
  Vec y = x;
  if (!contains(x)) {
    for (int i = 0; i < dim(); ++i) y[i] = std::clamp(x[i], a_[i], b_[i]);
    return y;
  }
  int axis = 0;
  bool upper = false;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) {
    if (x[i] - a_[i] < best) best = x[i] - a_[i], axis = i, upper = false;
    if (b_[i] - x[i] < best) best = b_[i] - x[i], axis = i, upper = true;
  }
  y[axis] = upper ? b_[axis] : a_[axis];
  return y;
}

DomainSpec::BridgeCrossing DomainSpec::bridge_crossing(const Vec& from, const Vec& to,
                                                       const Mat& covariance) const {
  BridgeCrossing out;
  out.exit_point = from;
  if (shape_ == Shape::ball) {
    Vec normal = from - a_;
    const double norm = normal.norm();
    if (norm == 0.0) return out;
    normal /= norm;
    const double d0 = radius_ - norm;
    const double d1 = radius_ - (to - a_).norm();
    const double var = normal.dot(covariance * normal);
    if (d0 <= 0.0 || d1 <= 0.0 || var <= 0.0) return out;
    out.probability = std::exp(-2.0 * d0 * d1 / var);
    out.exit_point = a_ + radius_ * normal;
    return out;
  }
  double survive = 1.0;
  double best = 0.0;
  for (int i = 0; i < dim(); ++i) {
    const double var = covariance(i, i);
    if (var <= 0.0) continue;
    const double faces[2][2] = {{from[i] - a_[i], to[i] - a_[i]}, {b_[i] - from[i], b_[i] - to[i]}};
    for (int side = 0; side < 2; ++side) {
      const double d0 = faces[side][0];
      const double d1 = faces[side][1];
      if (d0 <= 0.0 || d1 <= 0.0) continue;
      const double p = std::exp(-2.0 * d0 * d1 / var);
      survive *= 1.0 - p;
      if (p > best) {
        best = p;
        out.exit_point = from;
        out.exit_point[i] = side == 0 ? a_[i] : b_[i];
      }
    }
  }
  out.probability = 1.0 - survive;
  return out;
}

Vec DomainSpec::lower_corner() const {
  if (shape_ == Shape::box) return a_;
  return (a_.array() - radius_).matrix();
}

Vec DomainSpec::upper_corner() const {
  if (shape_ == Shape::box) return b_;
  return (a_.array() + radius_).matrix();
}

Vec DomainSpec::enclosing_center() const {
  if (shape_ == Shape::ball) return a_;
  return (0.5 * (a_ + b_)).eval();
}

double DomainSpec::enclosing_radius() const {
  if (shape_ == Shape::ball) return radius_;
  return 0.5 * (b_ - a_).norm();
}

//----------------------------------------------------------------------------
// GameProblem

GameProblem::GameProblem(ActionSets actions, DomainSpec domain, int noise_dim, ProblemConstants constants,
                         std::vector<CoefficientSet> coefficients, ScalarField terminal)
    : actions_(std::move(actions)),
      domain_(std::move(domain)),
      noise_dim_(noise_dim),
      constants_(constants),
      coefficients_(std::move(coefficients)),
      terminal_(std::move(terminal)) {
  const int d = domain_.dim();
  if (noise_dim_ < d) throw ModelError("noise dimension d1 must be at least the state dimension d");
  if (noise_dim_ > kMaxNoise) throw ModelError("noise dimension exceeds the supported maximum");
  if (actions_.player_one.empty()) throw ModelError("player-one action set A is empty");
  if (actions_.player_two.empty()) throw ModelError("player-two action set B is empty");
  std::set<std::string> alpha_names;
  for (int i = 0; i < actions_.num_alpha(); ++i)
    if (!alpha_names.insert(actions_.alpha_name(i)).second)
      throw ModelError("action '" + actions_.alpha_name(i) + "' appears twice in A and A2");
  std::set<std::string> beta_names(actions_.player_two.begin(), actions_.player_two.end());
  if (beta_names.size() != actions_.player_two.size()) throw ModelError("duplicate player-two action");
  if (!(constants_.delta > 0.0 && constants_.delta < 1.0)) throw ModelError("delta must lie in (0, 1)");
  if (!(constants_.K0 > 0.0)) throw ModelError("K0 must be positive");
  if (!(constants_.delta1 > 0.0 && constants_.delta1 <= 1.0)) throw ModelError("delta1 must lie in (0, 1]");
  if (!(constants_.K1 > 0.0)) throw ModelError("K1 must be positive");

  const auto pairs = static_cast<std::size_t>(num_alpha() * num_beta());
  if (coefficients_.size() != pairs) throw ModelError("coefficient table does not cover every action pair");
  cache_.resize(pairs);
  const Vec origin = Vec::Zero(d);
  for (std::size_t k = 0; k < pairs; ++k) {
    const CoefficientSet& set = coefficients_[k];
    if (set.sigma.size() != static_cast<std::size_t>(d * noise_dim_))
      throw ModelError("sigma must have d * d1 entries");
    if (set.drift.size() != static_cast<std::size_t>(d)) throw ModelError("drift must have d entries");
    bool constant = set.discount.is_constant() && set.cost.is_constant();
    for (const auto& s : set.sigma) constant = constant && s.is_constant();
    for (const auto& b : set.drift) constant = constant && b.is_constant();
    cache_[k].constant = constant;
    if (constant) {
      cache_[k].constant = false;
      cache_[k].value = evaluate(static_cast<int>(k) / num_beta(), static_cast<int>(k) % num_beta(), origin);
      cache_[k].constant = true;
    }
  }
}

void GameProblem::check_index(int alpha, int beta) const {
  if (alpha < 0 || alpha >= num_alpha() || beta < 0 || beta >= num_beta())
    throw ModelError("action index out of range");
}

const CoefficientSet& GameProblem::coefficients(int alpha, int beta) const {
  check_index(alpha, beta);
  return coefficients_[alpha * num_beta() + beta];
}

PointCoefficients GameProblem::evaluate(int alpha, int beta, const Vec& x) const {
  PointCoefficients out;
  return evaluate(alpha, beta, x, out);
}

const PointCoefficients& GameProblem::evaluate(int alpha, int beta, const Vec& x, PointCoefficients& scratch) const {
  check_index(alpha, beta);
  const std::size_t k = static_cast<std::size_t>(alpha * num_beta() + beta);
  if (k < cache_.size() && cache_[k].constant) return cache_[k].value;
  const CoefficientSet& set = coefficients(alpha, beta);
  const int d = dim();
  scratch.sigma.resize(d, noise_dim_);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < noise_dim_; ++j) scratch.sigma(i, j) = set.sigma[i * noise_dim_ + j](x);
  scratch.drift.resize(d);
  for (int i = 0; i < d; ++i) scratch.drift[i] = set.drift[i](x);
  scratch.discount = set.discount(x);
  scratch.cost = set.cost(x);
  return scratch;
}

SigmaMat GameProblem::sigma(int alpha, int beta, const Vec& x) const { return evaluate(alpha, beta, x).sigma; }
Vec GameProblem::drift(int alpha, int beta, const Vec& x) const { return evaluate(alpha, beta, x).drift; }
double GameProblem::discount(int alpha, int beta, const Vec& x) const { return evaluate(alpha, beta, x).discount; }
double GameProblem::running_cost(int alpha, int beta, const Vec& x) const { return evaluate(alpha, beta, x).cost; }

//----------------------------------------------------------------------------
// Validation

bool ValidationReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const AssumptionMargin& m) { return m.passed(); });
}

const AssumptionMargin& ValidationReport::item(const std::string& name) const {
  for (const auto& m : items)
    if (m.name == name) return m;
  throw std::out_of_range("no assumption named " + name);
}

Mat diffusion_matrix(const SigmaMat& sigma) { return (0.5 * sigma * sigma.transpose()).eval(); }

Mat diffusion_matrix(const GameProblem& problem, int alpha, int beta, const Vec& x) {
  return diffusion_matrix(problem.sigma(alpha, beta, x));
}

ValidationReport validate_problem(const GameProblem& problem, const DomainGrid& sample_grid) {
  if (problem.noise_dim() < problem.dim()) throw ModelError("noise dimension d1 must be at least d");
  if (problem.actions().player_one.empty() || problem.actions().player_two.empty())
    throw ModelError("empty action set");
  if (sample_grid.dim() != problem.dim()) throw ModelError("grid dimension differs from problem dimension");

  const auto& k = problem.constants();
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = -std::numeric_limits<double>::infinity();
  double max_sigma = 0.0, max_b = 0.0, max_c = 0.0, max_f = 0.0, min_c = std::numeric_limits<double>::infinity();
  double max_lip = 0.0;

  for (int a = 0; a < problem.num_alpha(); ++a) {
    for (int b = 0; b < problem.num_beta(); ++b) {
      for (int node = 0; node < sample_grid.node_count(); ++node) {
        const Vec x = sample_grid.coordinates(node);
        const PointCoefficients pc = problem.evaluate(a, b, x);
        const Eigen::SelfAdjointEigenSolver<Mat> eig(diffusion_matrix(pc.sigma), Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
        max_eig = std::max(max_eig, eig.eigenvalues().maxCoeff());
        max_sigma = std::max(max_sigma, pc.sigma.norm());
        max_b = std::max(max_b, pc.drift.norm());
        max_c = std::max(max_c, std::abs(pc.discount));
        max_f = std::max(max_f, std::abs(pc.cost));
        min_c = std::min(min_c, pc.discount);

        for (int axis = 0; axis < sample_grid.dim(); ++axis) {
          LatticeIndex step{};
          step[axis] = 1;
          const int next = sample_grid.neighbor(node, step);
          if (next < 0) continue;
          const Vec y = sample_grid.coordinates(next);
          const PointCoefficients qc = problem.evaluate(a, b, y);
          const double q = ((pc.sigma - qc.sigma).norm() + (pc.drift - qc.drift).norm()) / (x - y).norm();
          max_lip = std::max(max_lip, q);
        }
      }
    }
  }

  ValidationReport report;
  report.min_eigenvalue = min_eig;
  report.max_eigenvalue = max_eig;
  report.max_lipschitz = max_lip;
  report.items = {
      {"ellipticity_lower", min_eig, min_eig - k.delta},
      {"ellipticity_upper", max_eig, 1.0 / k.delta - max_eig},
      {"bound_sigma", max_sigma, k.K0 - max_sigma},
      {"bound_drift", max_b, k.K0 - max_b},
      {"bound_discount", max_c, k.K0 - max_c},
      {"bound_cost", max_f, k.K0 - max_f},
      {"lipschitz", max_lip, k.K0 - max_lip},
      {"discount_nonnegative", min_c, min_c},
  };
  return report;
}

Vec effective_drift(const GameProblem& problem, int alpha, int beta, const Vec& x, double rate,
                    const NoiseVec& girsanov_drift) {
  const auto& k = problem.constants();
  constexpr double slack = 1e-12;
  if (rate < k.delta1 - slack || rate > 1.0 / k.delta1 + slack)
    throw ModelError("time-change rate outside [delta1, 1/delta1]");
  if (girsanov_drift.size() != problem.noise_dim()) throw ModelError("Girsanov drift must have d1 entries");
  if (girsanov_drift.norm() > k.K1 + slack) throw ModelError("Girsanov drift exceeds K1");
  const PointCoefficients pc = problem.evaluate(alpha, beta, x);
  return (rate * rate * (pc.drift + pc.sigma * girsanov_drift)).eval();
}

//----------------------------------------------------------------------------
// Barrier

double BarrierFunction::value(const Vec& x) const {
  return kappa * (std::exp(lambda * radius * radius) - std::exp(lambda * (x - center).squaredNorm()));
}

Vec BarrierFunction::gradient(const Vec& x) const {
  const Vec y = x - center;
  return (-kappa * lambda * std::exp(lambda * y.squaredNorm()) * 2.0 * y).eval();
}

Mat BarrierFunction::hessian(const Vec& x) const {
  const Vec y = x - center;
  const int d = static_cast<int>(y.size());
  const Mat inner = 2.0 * Mat::Identity(d, d) + 4.0 * lambda * y * y.transpose();
  return (-kappa * lambda * std::exp(lambda * y.squaredNorm()) * inner).eval();
}

double barrier_generator(const GameProblem& problem, const BarrierFunction& barrier, int alpha, int beta,
                         const Vec& x) {
  const PointCoefficients pc = problem.evaluate(alpha, beta, x);
  const Mat a = diffusion_matrix(pc.sigma);
  // The zero-order term of L cancels against + c Psi.
  return (a.cwiseProduct(barrier.hessian(x))).sum() + pc.drift.dot(barrier.gradient(x));
}

BarrierFunction build_barrier(const GameProblem& problem, const DomainGrid& grid, int max_attempts) {
  BarrierFunction barrier;
  barrier.center = problem.domain().enclosing_center();
  barrier.radius = problem.domain().enclosing_radius();
  barrier.lambda = 1.0;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    barrier.attempts = attempt;
    if (barrier.lambda * barrier.radius * barrier.radius > 600.0) break;
    barrier.kappa = 1.0;
    // With kappa = 1 find the least decay rate q = -(L Psi + c Psi).
    double least = std::numeric_limits<double>::infinity();
    for (int node : grid.interior_nodes()) {
      const Vec x = grid.coordinates(node);
      for (int a = 0; a < problem.num_alpha(); ++a)
        for (int b = 0; b < problem.num_beta(); ++b)
          least = std::min(least, -barrier_generator(problem, barrier, a, b, x));
    }
    if (least > 0.0) {
      barrier.kappa = 1.0 / least;
      barrier.max_generator = -1.0;
      double defect = 0.0;
      for (int node : grid.boundary_nodes())
        defect = std::max(defect, std::abs(barrier.value(problem.domain().nearest_boundary_point(grid.coordinates(node)))));
      barrier.boundary_defect = defect;
      return barrier;
    }
    barrier.lambda *= 2.0;
  }
  throw BarrierError("no barrier with L Psi + c Psi <= -1 found within the retry budget");
}

}  // namespace sdgame
