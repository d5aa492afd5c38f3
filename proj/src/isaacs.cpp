#include "sdgame/isaacs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

namespace sdgame {

namespace {

constexpr double kWeightSlack = 1e-12;

int offset_code(const LatticeIndex& off, int d) {
  int code = 0;
  for (int i = d - 1; i >= 0; --i) code = code * 3 + (off[i] + 1);
  return code;
}

LatticeIndex code_offset(int code, int d) {
  LatticeIndex off{};
  for (int i = 0; i < d; ++i) {
    off[i] = code % 3 - 1;
    code /= 3;
  }
  return off;
}

}  // namespace

double Stencil::weight_sum() const {
  double s = 0.0;
  for (int k = 0; k < count; ++k) s += weight[k];
  return s;
}

double Stencil::apply(const std::vector<double>& u, int node) const {
  const double center = u[node];
  double s = 0.0;
  for (int k = 0; k < count; ++k) s += weight[k] * (u[neighbor[k]] - center);
  return s - zero_order * center + source;
}

Stencil build_stencil(const Mat& a, const Vec& b, double c, const DomainGrid& grid, int node, DriftScheme drift) {
  const int d = grid.dim();
  std::array<double, 27> w{};
  auto axis = [&](int i, int sign) {
    LatticeIndex off{};
    off[i] = sign;
    return offset_code(off, d);
  };
  auto pair = [&](int i, int si, int j, int sj) {
    LatticeIndex off{};
    off[i] = si;
    off[j] = sj;
    return offset_code(off, d);
  };

  for (int i = 0; i < d; ++i) {
    const double hi = grid.spacing(i);
    w[axis(i, 1)] += a(i, i) / (hi * hi);
    w[axis(i, -1)] += a(i, i) / (hi * hi);
    for (int j = i + 1; j < d; ++j) {
      const double aij = 0.5 * (a(i, j) + a(j, i));
      if (aij == 0.0) continue;
      const double s = std::abs(aij) / (hi * grid.spacing(j));
      if (aij > 0.0) {
        w[pair(i, 1, j, 1)] += s;
        w[pair(i, -1, j, -1)] += s;
      } else {
        w[pair(i, 1, j, -1)] += s;
        w[pair(i, -1, j, 1)] += s;
      }
      w[axis(i, 1)] -= s;
      w[axis(i, -1)] -= s;
      w[axis(j, 1)] -= s;
      w[axis(j, -1)] -= s;
    }
    const double bi = b.size() == 0 ? 0.0 : b[i];
    if (drift == DriftScheme::central) {
      w[axis(i, 1)] += bi / (2.0 * hi);
      w[axis(i, -1)] -= bi / (2.0 * hi);
    } else {
      w[axis(i, 1)] += std::max(bi, 0.0) / hi;
      w[axis(i, -1)] += std::max(-bi, 0.0) / hi;
    }
  }

  double scale = 0.0;
  for (double x : w) scale = std::max(scale, std::abs(x));
  Stencil st;
  st.zero_order = c;
  int codes = 1;
  for (int i = 0; i < d; ++i) codes *= 3;
  for (int code = 0; code < codes; ++code) {
    if (w[code] == 0.0) continue;
    if (w[code] < -kWeightSlack * scale)
      throw NonMonotoneStencil("negative stencil weight " + format_double(w[code]) + " at node " +
                               std::to_string(node) + "; refine the grid or use upwind drift");
    if (w[code] <= 0.0) continue;
    const int nb = grid.neighbor(node, code_offset(code, d));
    if (nb < 0) throw NonMonotoneStencil("stencil reaches outside the grid at node " + std::to_string(node));
    st.neighbor[st.count] = nb;
    st.weight[st.count] = w[code];
    ++st.count;
  }
  return st;
}

Stencil build_stencil(const GameProblem& problem, const DomainGrid& grid, int alpha, int beta, int node,
                      DriftScheme drift) {
  const PointCoefficients pc = problem.evaluate(alpha, beta, grid.coordinates(node));
  Stencil st = build_stencil(diffusion_matrix(pc.sigma), pc.drift, pc.discount, grid, node, drift);
  st.source = pc.cost;
  return st;
}

double monotone_spacing(const GameProblem& problem, const DomainGrid& grid, DriftScheme drift) {
  const int d = grid.dim();
  const double hmax = grid.max_spacing();
  double best = std::numeric_limits<double>::infinity();
  for (int node : grid.interior_nodes()) {
    const Vec x = grid.coordinates(node);
    for (int a = 0; a < problem.num_alpha(); ++a) {
      for (int b = 0; b < problem.num_beta(); ++b) {
        const PointCoefficients pc = problem.evaluate(a, b, x);
        const Mat am = diffusion_matrix(pc.sigma);
        for (int k = 0; k < d; ++k) {
          const double hk = grid.spacing(k);
          double margin = am(k, k);
          for (int j = 0; j < d; ++j)
            if (j != k) margin -= std::abs(am(k, j)) * hk / grid.spacing(j);
          if (margin < 0.0) return 0.0;
          if (drift == DriftScheme::upwind || pc.drift[k] == 0.0) continue;
          // Positive type needs h_k <= 2 margin / |b_k|; express it in the
          // units of the largest spacing.
          best = std::min(best, 2.0 * margin / std::abs(pc.drift[k]) * hmax / hk);
        }
      }
    }
  }
  return best;
}

double discrete_L(const GameProblem& problem, int alpha, int beta, const ValueField& u, int node,
                  DriftScheme drift) {
  if (!u.grid().is_interior(node)) throw std::invalid_argument("discrete_L needs an interior node");
  Stencil st = build_stencil(problem, u.grid(), alpha, beta, node, drift);
  st.source = 0.0;
  return st.apply(u.values(), node);
}

namespace {

// Stencils for every action pair at every interior node.
class StencilBank {
 public:
  StencilBank(const GameProblem& problem, const DomainGrid& grid, DriftScheme drift)
      : nb_(problem.num_beta()), n_(static_cast<int>(grid.interior_nodes().size())) {
    stencils_.resize(static_cast<std::size_t>(problem.num_alpha()) * nb_ * n_);
    for (int a = 0; a < problem.num_alpha(); ++a)
      for (int b = 0; b < nb_; ++b)
        for (int k = 0; k < n_; ++k)
          stencils_[index(a, b, k)] = build_stencil(problem, grid, a, b, grid.interior_nodes()[k], drift);
  }

  const Stencil& at(int a, int b, int k) const { return stencils_[index(a, b, k)]; }

 private:
  std::size_t index(int a, int b, int k) const {
    return (static_cast<std::size_t>(a) * nb_ + b) * n_ + k;
  }
  int nb_;
  int n_;
  std::vector<Stencil> stencils_;
};

struct MinMax {
  double value;
  int index;
};

MinMax min_over_beta(const StencilBank& bank, int nb, int a, int k, int node, const std::vector<double>& u) {
  MinMax best{std::numeric_limits<double>::infinity(), 0};
  for (int b = 0; b < nb; ++b) {
    const double q = bank.at(a, b, k).apply(u, node);
    if (q < best.value) best = {q, b};
  }
  return best;
}

MinMax max_min(const StencilBank& bank, int na, int nb, int k, int node, const std::vector<double>& u) {
  MinMax best{-std::numeric_limits<double>::infinity(), 0};
  for (int a = 0; a < na; ++a) {
    const double q = min_over_beta(bank, nb, a, k, node, u).value;
    if (q > best.value) best = {q, a};
  }
  return best;
}

double auto_relaxation(const DomainGrid& grid) {
  const Vec lo = grid.domain().lower_corner();
  const Vec hi = grid.domain().upper_corner();
  const double extent = (hi - lo).maxCoeff();
  return 2.0 / (1.0 + std::sin(std::numbers::pi * grid.max_spacing() / extent));
}

// SOR for the linear system of a fixed policy; returns sweeps used.
long sor_solve(const std::vector<const Stencil*>& policy, const std::vector<int>& nodes, std::vector<double>& u,
               double omega, const SolveConfig& cfg) {
  const int n = static_cast<int>(nodes.size());
  std::vector<double> diag(n);
  for (int k = 0; k < n; ++k) diag[k] = policy[k]->weight_sum() + policy[k]->zero_order;

  auto residual = [&] {
    double r = 0.0;
    for (int k = 0; k < n; ++k) r = std::max(r, std::abs(policy[k]->apply(u, nodes[k])));
    return r;
  };

  const long window = std::max(200, 4 * n);
  double window_start = residual();
  if (window_start <= cfg.inner_tolerance) return 0;
  long sweeps = 0;
  while (sweeps < cfg.max_sweeps) {
    double sweep_max = 0.0;
    for (int k = 0; k < n; ++k) {
      const int node = nodes[k];
      const double r = policy[k]->apply(u, node);
      sweep_max = std::max(sweep_max, std::abs(r));
      if (diag[k] > 0.0) u[node] += omega * r / diag[k];
    }
    ++sweeps;
    if (!std::isfinite(sweep_max)) throw SolverError("linear sweeps diverged", sweep_max);
    if (sweep_max <= cfg.inner_tolerance) {
      const double r = residual();
      if (r <= cfg.inner_tolerance) return sweeps;
    }
    if (sweeps % window == 0) {
      // Over-relaxation is only guaranteed for symmetric systems; fall back
      // to Gauss-Seidel when a window makes too little progress.
      const double r = residual();
      if (omega != 1.0 && r > window_start) omega = 1.0;
      window_start = r;
    }
  }
  throw SolverError("linear sweeps did not reach the inner tolerance", residual());
}

}  // namespace

ValueField evaluate_H(const GameProblem& problem, const ValueField& u, DriftScheme drift) {
  const DomainGrid& grid = u.grid();
  ValueField out(u.grid_ptr(), 0.0);
  for (int node : grid.interior_nodes()) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < problem.num_alpha(); ++a) {
      double worst = std::numeric_limits<double>::infinity();
      for (int b = 0; b < problem.num_beta(); ++b)
        worst = std::min(worst, build_stencil(problem, grid, a, b, node, drift).apply(u.values(), node));
      best = std::max(best, worst);
    }
    out[node] = best;
  }
  return out;
}

SolveResult solve_isaacs(const GameProblem& problem, std::shared_ptr<const DomainGrid> grid, const SolveConfig& cfg) {
  if (!(cfg.residual_tolerance > 0.0) || !(cfg.inner_tolerance > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (grid->dim() != problem.dim()) throw std::invalid_argument("grid and problem dimensions differ");

  const StencilBank bank(problem, *grid, cfg.drift);
  const std::vector<int>& nodes = grid->interior_nodes();
  const int n = static_cast<int>(nodes.size());
  const int na = problem.num_alpha();
  const int nb = problem.num_beta();
  const double omega = cfg.relaxation > 0.0 ? cfg.relaxation : auto_relaxation(*grid);
  // Policies switch only on a strict improvement, which rules out cycling
  // between near-ties; with this threshold a stable pair of policies leaves
  // a residual of at most half the tolerance plus the linear one.
  const double switch_gap = 0.25 * cfg.residual_tolerance;

  SolveResult result{sample(grid, problem.terminal_field()), {}, {}, 0, 0, 0.0};
  std::vector<double>& u = result.value.values();
  std::vector<int> alpha(n, 0);
  std::vector<int> beta(n, 0);
  std::vector<const Stencil*> policy(n);

  double residual = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= cfg.max_policy_iterations; ++outer) {
    result.outer_iterations = outer;
    for (int inner = 0;; ++inner) {
      if (inner >= cfg.max_policy_iterations)
        throw SolverError("player-two policy iteration did not settle", residual);
      for (int k = 0; k < n; ++k) policy[k] = &bank.at(alpha[k], beta[k], k);
      result.sweeps += sor_solve(policy, nodes, u, omega, cfg);
      bool changed = false;
      for (int k = 0; k < n; ++k) {
        const MinMax best = min_over_beta(bank, nb, alpha[k], k, nodes[k], u);
        const double current = policy[k]->apply(u, nodes[k]);
        if (best.value < current - switch_gap) {
          beta[k] = best.index;
          changed = true;
        }
      }
      if (!changed) break;
    }

    residual = 0.0;
    bool changed = false;
    for (int k = 0; k < n; ++k) {
      const MinMax best = max_min(bank, na, nb, k, nodes[k], u);
      residual = std::max(residual, std::abs(best.value));
      const double current = min_over_beta(bank, nb, alpha[k], k, nodes[k], u).value;
      if (best.value > current + switch_gap) {
        alpha[k] = best.index;
        beta[k] = min_over_beta(bank, nb, best.index, k, nodes[k], u).index;
        changed = true;
      }
    }
    result.residual = residual;
    if (residual <= cfg.residual_tolerance) break;
    if (!changed || outer == cfg.max_policy_iterations)
      throw SolverError("policy iteration stalled above the residual tolerance", residual);
  }

  result.alpha_policy.assign(grid->node_count(), -1);
  result.beta_table.assign(static_cast<std::size_t>(na) * grid->node_count(), -1);
  for (int k = 0; k < n; ++k) {
    result.alpha_policy[nodes[k]] = max_min(bank, na, nb, k, nodes[k], u).index;
    for (int a = 0; a < na; ++a)
      result.beta_table[static_cast<std::size_t>(a) * grid->node_count() + nodes[k]] =
          min_over_beta(bank, nb, a, k, nodes[k], u).index;
  }
  return result;
}

//----------------------------------------------------------------------------
// Pucci family

namespace {

bool diagonally_dominant(const Mat& a) {
  for (int i = 0; i < a.rows(); ++i) {
    double off = 0.0;
    for (int j = 0; j < a.cols(); ++j)
      if (j != i) off += std::abs(a(i, j));
    if (a(i, i) < off - 1e-14) return false;
  }
  return true;
}

}  // namespace

std::vector<PucciOperator> make_pucci(const PucciParams& params, int d) {
  if (!(params.delta_hat > 0.0 && params.delta_hat < 1.0)) throw ModelError("delta_hat must lie in (0, 1)");
  if (params.gradient_bound < 0.0 || params.zero_order < 0.0)
    throw ModelError("Pucci gradient bound and zero-order coefficient must be nonnegative");
  if (d < 1 || d > kMaxDim) throw ModelError("Pucci family needs 1 <= d <= 3");
  if (params.rays < 0) throw ModelError("ray count must be nonnegative");
  const double lo = params.delta_hat;
  const double hi = 1.0 / params.delta_hat;

  std::vector<Mat> diffusions;
  if (d == 1) {
    diffusions = {Mat::Constant(1, 1, lo), Mat::Constant(1, 1, hi)};
  } else if (d == 2) {
    for (int k = 0; k < params.rays; ++k) {
      const double t = std::numbers::pi * k / params.rays;
      Mat r(2, 2);
      r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
      Mat e = Mat::Zero(2, 2);
      e(0, 0) = lo;
      e(1, 1) = hi;
      diffusions.push_back(r * e * r.transpose());
    }
    diffusions.push_back(lo * Mat::Identity(2, 2));
    diffusions.push_back(hi * Mat::Identity(2, 2));
  } else {
    for (int mask = 0; mask < 8; ++mask) {
      Mat e = Mat::Zero(3, 3);
      for (int i = 0; i < 3; ++i) e(i, i) = (mask >> i) & 1 ? hi : lo;
      diffusions.push_back(e);
    }
    std::mt19937_64 rng(params.ray_seed);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> pick(1, 6);
    for (int k = 0; k < params.rays; ++k) {
      Mat g(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g(i, j) = normal(rng);
      const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
      const int mask = pick(rng);
      Mat e = Mat::Zero(3, 3);
      for (int i = 0; i < 3; ++i) e(i, i) = (mask >> i) & 1 ? hi : lo;
      diffusions.push_back(q * e * q.transpose());
    }
  }

  std::vector<Vec> drifts;
  if (params.gradient_bound > 0.0) {
    if (d == 2 && params.rays > 0) {
      for (int k = 0; k < params.rays; ++k) {
        const double t = 2.0 * std::numbers::pi * k / params.rays;
        Vec v(2);
        v << std::cos(t), std::sin(t);
        drifts.push_back(params.gradient_bound * v);
      }
    } else {
      for (int i = 0; i < d; ++i)
        for (int s : {1, -1}) {
          Vec v = Vec::Zero(d);
          v[i] = s * params.gradient_bound;
          drifts.push_back(v);
        }
    }
  } else {
    drifts.push_back(Vec::Zero(d));
  }
  std::vector<double> discounts{0.0};
  if (params.zero_order > 0.0) discounts.push_back(params.zero_order);

  std::vector<PucciOperator> family;
  for (const Mat& a : diffusions) {
    if (d > 1 && !diagonally_dominant(a)) continue;
    for (const Vec& b : drifts)
      for (double c : discounts) family.push_back({a, b, c});
  }
  return family;
}

ValueField evaluate_P(const std::vector<PucciOperator>& family, const ValueField& u, DriftScheme drift) {
  const DomainGrid& grid = u.grid();
  ValueField out(u.grid_ptr(), 0.0);
  if (family.empty()) return out;
  for (int node : grid.interior_nodes()) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& op : family) best = std::max(best, build_stencil(op.a, op.b, op.c, grid, node, drift).apply(u.values(), node));
    out[node] = best;
  }
  return out;
}

ValueField evaluate_P(const PucciParams& params, const ValueField& u, DriftScheme drift) {
  return evaluate_P(make_pucci(params, u.grid().dim()), u, drift);
}

GameProblem extend_with_penalty(const GameProblem& problem, const std::vector<PucciOperator>& family, double K) {
  if (!(K >= 0.0)) throw ModelError("penalty K must be nonnegative");
  if (!problem.actions().penalty.empty()) throw ModelError("problem already carries penalty actions");
  const int d = problem.dim();
  const int d1 = problem.noise_dim();
  const int nb = problem.num_beta();

  ActionSets actions = problem.actions();
  std::vector<CoefficientSet> coefficients;
  for (int a = 0; a < problem.num_alpha(); ++a)
    for (int b = 0; b < nb; ++b) coefficients.push_back(problem.coefficients(a, b));

  ProblemConstants constants = problem.constants();
  for (std::size_t k = 0; k < family.size(); ++k) {
    const PucciOperator& op = family[k];
    if (op.a.rows() != d) throw ModelError("Pucci operator dimension differs from the problem");
    actions.penalty.push_back("P" + std::to_string(k));
    const Mat root = Eigen::LLT<Mat>(op.a).matrixL();
    CoefficientSet set;
    set.sigma.resize(static_cast<std::size_t>(d * d1));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d1; ++j) set.sigma[i * d1 + j] = ScalarField::constant(j < d ? std::sqrt(2.0) * root(i, j) : 0.0);
    for (int i = 0; i < d; ++i) set.drift.push_back(ScalarField::constant(op.b.size() == 0 ? 0.0 : op.b[i]));
    set.discount = ScalarField::constant(op.c);
    set.cost = ScalarField::constant(-K);
    for (int b = 0; b < nb; ++b) coefficients.push_back(set);

    const Eigen::SelfAdjointEigenSolver<Mat> eig(op.a, Eigen::EigenvaluesOnly);
    constants.delta = std::min({constants.delta, eig.eigenvalues().minCoeff(), 1.0 / eig.eigenvalues().maxCoeff()});
    constants.K0 = std::max({constants.K0, K, std::sqrt(2.0) * root.norm(), op.b.size() ? op.b.norm() : 0.0, op.c});
  }
  return GameProblem(std::move(actions), problem.domain(), d1, constants, std::move(coefficients),
                     problem.terminal_field());
}

SolveResult solve_penalized(const GameProblem& problem, const std::vector<PucciOperator>& family, double K,
                            std::shared_ptr<const DomainGrid> grid, const SolveConfig& cfg) {
  return solve_isaacs(extend_with_penalty(problem, family, K), std::move(grid), cfg);
}

RateReport convergence_study(const GameProblem& problem, const std::vector<PucciOperator>& family,
                             const std::vector<double>& K_list, std::shared_ptr<const DomainGrid> grid,
                             const SolveConfig& cfg) {
  for (std::size_t i = 0; i < K_list.size(); ++i) {
    if (K_list[i] < 1.0) throw std::invalid_argument("penalty levels must be at least 1");
    if (i > 0 && !(K_list[i] > K_list[i - 1])) throw std::invalid_argument("penalty levels must increase");
  }
  const SolveResult reference = solve_isaacs(problem, grid, cfg);
  RateReport report;
  report.floor = 10.0 * cfg.residual_tolerance;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (double K : K_list) {
    SolveResult r = solve_penalized(problem, family, K, grid, cfg);
    const double e = r.value.sup_distance(reference.value);
    report.K.push_back(K);
    report.sup_error.push_back(e);
    report.u_K.push_back(std::move(r.value));
    report.N = std::max(report.N, e * K);
    if (e > report.floor) {
      const double x = std::log(K), y = std::log(e);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++report.fitted_points;
    }
  }
  const int m = report.fitted_points;
  if (m >= 2) {
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    report.chi = -slope;
    report.N_chi = std::exp((sy - slope * sx) / m);
  }
  return report;
}

void write_csv(std::ostream& out, const RateReport& report) {
  out << "K,sup_error\n";
  for (std::size_t i = 0; i < report.K.size(); ++i)
    out << format_double(report.K[i]) << ',' << format_double(report.sup_error[i]) << '\n';
  out << "# fit,N=" << format_double(report.N) << ",chi=" << format_double(report.chi)
      << ",N_chi=" << format_double(report.N_chi) << ",points=" << report.fitted_points << '\n';
}

}  // namespace sdgame
