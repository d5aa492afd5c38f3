#include "sdgame/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "sdgame/grid.hpp"
#include "sdgame/rng.hpp"

namespace sdgame {

//----------------------------------------------------------------------------
// Variants

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::time_change: return "time_change";
    case Variant::girsanov: return "girsanov";
    case Variant::rotated_noise: return "rotated_noise";
    case Variant::combined: return "combined";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::baseline, Variant::time_change, Variant::girsanov, Variant::rotated_noise,
                    Variant::combined})
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

ControlAdaptedSpec::ControlAdaptedSpec(Variant variant, int num_alpha, int num_beta, int noise_dim, double delta1,
                                       double K1, std::vector<double> rates, std::vector<NoiseVec> drifts,
                                       std::vector<NoiseMat> rotations)
    : variant_(variant),
      num_alpha_(num_alpha),
      num_beta_(num_beta),
      noise_dim_(noise_dim),
      rates_(std::move(rates)),
      drifts_(std::move(drifts)),
      rotations_(std::move(rotations)) {
  const auto pairs = static_cast<std::size_t>(num_alpha * num_beta);
  if (num_alpha < 1 || num_beta < 1) throw ModelError("variant needs nonempty action sets");
  if (rates_.size() != pairs || drifts_.size() != pairs || rotations_.size() != pairs)
    throw ModelError("variant maps must cover every action pair");
  constexpr double slack = 1e-12;
  for (std::size_t k = 0; k < pairs; ++k) {
    if (rates_[k] < delta1 - slack || rates_[k] > 1.0 / delta1 + slack)
      throw ModelError("time-change rate outside [delta1, 1/delta1]");
    if (drifts_[k].size() != noise_dim) throw ModelError("Girsanov drift must have d1 entries");
    if (drifts_[k].norm() > K1 + slack) throw ModelError("Girsanov drift exceeds K1");
    const NoiseMat& q = rotations_[k];
    if (q.rows() != noise_dim || q.cols() != noise_dim) throw ModelError("noise transform must be d1 x d1");
    if (((q * q.transpose()) - NoiseMat::Identity(noise_dim, noise_dim)).cwiseAbs().maxCoeff() > 1e-12)
      throw ModelError("noise transform is not orthogonal");
    girsanov_ = girsanov_ || drifts_[k].norm() > 0.0;
    rotated_ = rotated_ || !q.isIdentity(0.0);
  }
}

ControlAdaptedSpec ControlAdaptedSpec::baseline(const GameProblem& problem) {
  return make(Variant::baseline, problem);
}

ControlAdaptedSpec ControlAdaptedSpec::make(Variant variant, const GameProblem& problem, const VariantParams& params) {
  const int na = problem.actions().num_base_alpha();
  const int nb = problem.num_beta();
  const int d1 = problem.noise_dim();
  const bool time_change = variant == Variant::time_change || variant == Variant::combined;
  const bool girsanov = variant == Variant::girsanov || variant == Variant::combined;
  const bool rotated = variant == Variant::rotated_noise || variant == Variant::combined;
  if (time_change && params.rates.empty()) throw ModelError("time change needs at least one rate");

  std::vector<double> rates;
  std::vector<NoiseVec> drifts;
  std::vector<NoiseMat> rotations;
  for (int k = 0; k < na * nb; ++k) {
    rates.push_back(time_change ? params.rates[k % params.rates.size()] : 1.0);

    NoiseVec pi = NoiseVec::Zero(d1);
    if (girsanov) {
      if (d1 == 1) {
        pi[0] = k % 2 == 0 ? params.girsanov_norm : -params.girsanov_norm;
      } else {
        const double t = k * params.rotation_angle;
        pi[0] = params.girsanov_norm * std::cos(t);
        pi[1] = params.girsanov_norm * std::sin(t);
      }
    }
    drifts.push_back(pi);

    NoiseMat q = NoiseMat::Identity(d1, d1);
    if (rotated) {
      if (d1 == 1) {
        q(0, 0) = k % 2 == 0 ? -1.0 : 1.0;
      } else {
        const double t = (k + 1) * params.rotation_angle;
        q(0, 0) = std::cos(t);
        q(0, 1) = -std::sin(t);
        q(1, 0) = std::sin(t);
        q(1, 1) = std::cos(t);
      }
    }
    rotations.push_back(q);
  }
  const auto& c = problem.constants();
  return ControlAdaptedSpec(variant, na, nb, d1, c.delta1, c.K1, std::move(rates), std::move(drifts),
                            std::move(rotations));
}

//----------------------------------------------------------------------------
// Stepping

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(t_max >= 1.0)) throw std::invalid_argument("t_max must be at least 1");
  if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
  if (lag_n < 0) throw std::invalid_argument("lag n must be nonnegative");
}

namespace {

PathState step_with(const PointCoefficients& pc, double r, const NoiseVec& pi, const NoiseMat& q,
                    const PathState& state, const NoiseVec& dW, double dt) {
  const NoiseVec dw = q * dW;
  PathState next;
  next.t = state.t + dt;
  next.x = state.x + r * (pc.sigma * dw) + (r * r * dt) * (pc.drift + pc.sigma * pi);
  next.phi = state.phi + r * r * pc.discount * dt;
  next.psi = state.psi + 0.5 * r * r * pi.squaredNorm() * dt + r * pi.dot(dw);
  return next;
}

void check_start(const GameProblem& problem, const Vec& x0) {
  if (x0.size() != problem.dim()) throw std::invalid_argument("start point has the wrong dimension");
  if (!problem.domain().contains(x0)) throw std::invalid_argument("start point must lie inside G");
}

void check_lag(int n, double dt) {
  if (n < 0) throw std::invalid_argument("lag must be nonnegative");
  if (n > 0 && n * dt > 1.0 + 1e-12) throw std::invalid_argument("lag grid 1/n is finer than the time step");
}

// State frozen at the last lag grid time floor(n t)/n.
struct LagSnapshot {
  int n = 0;
  long epoch = -1;
  Vec x;

  void refresh(double t, const Vec& current) {
    if (n == 0) {
      x = current;
      return;
    }
    const long e = static_cast<long>(std::floor(n * t + 1e-9));
    if (e != epoch) {
      epoch = e;
      x = current;
    }
  }
};

}  // namespace

PathState em_step(const GameProblem& problem, const ControlAdaptedSpec& spec, const PathState& state, int alpha,
                  int beta, const NoiseVec& dW, double dt) {
  if (dW.size() != problem.noise_dim()) throw std::invalid_argument("dW must have d1 entries");
  const PointCoefficients pc = problem.evaluate(alpha, beta, state.x);
  return step_with(pc, spec.rate(alpha, beta), spec.drift(alpha, beta), spec.rotation(alpha, beta), state, dW, dt);
}

TrajectoryRecord simulate_to_exit(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                  const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                  std::uint64_t path, StepObserver* observer) {
  check_start(problem, x0);
  check_lag(alpha.lag(), cfg.dt);
  check_lag(beta.lag(), cfg.dt);
  if (spec.noise_dim() != problem.noise_dim()) throw std::invalid_argument("variant and problem noise dimensions differ");

  auto gauss = make_stream(cfg.seed, path, 0);
  std::optional<std::mt19937_64> uniforms;  // seeded on first use
  boost::random::normal_distribution<double> normal;
  boost::random::uniform_01<double> uniform;
  const DomainSpec& domain = problem.domain();
  const int d = problem.dim();
  const int d1 = problem.noise_dim();
  const double dt = cfg.dt;
  const double sqdt = std::sqrt(dt);
  const long max_steps = std::lround(cfg.t_max / dt);
  const bool rotated = spec.has_rotation();
  const bool bridge = cfg.exit_correction == ExitCorrection::bridge;

  TrajectoryRecord rec;
  PathState s{0.0, x0, 0.0, 0.0};
  PathState next{0.0, x0, 0.0, 0.0};
  // A lag grid as fine as the time step freezes nothing: read the current state.
  auto effective_lag = [&](int n) { return n * dt >= 1.0 - 1e-9 ? 0 : n; };
  LagSnapshot xa{effective_lag(alpha.lag()), -1, x0};
  LagSnapshot xb{effective_lag(beta.lag()), -1, x0};
  PointCoefficients scratch;
  double dW[kMaxNoise];
  double dw[kMaxNoise];
  double running = 0.0;
  double psi_integral = 0.0;
  double penalty_time = 0.0;
  double distance = domain.boundary_distance(s.x);

  for (long i = 0;; ++i) {
    s.t = i * dt;
    if (i >= max_steps) {
      rec.censored = true;
      rec.exit_time = s.t;
      rec.exit_state = s.x;
      rec.phi = s.phi;
      rec.psi = s.psi;
      rec.terminal_payoff = 0.0;
      break;
    }
    if (xa.n) xa.refresh(s.t, s.x);
    if (xb.n) xb.refresh(s.t, s.x);
    const int a = alpha.act(s.t, xa.n ? xa.x : s.x);
    const int b = beta.act(a, s.t, xb.n ? xb.x : s.x);
    if (observer) observer->step(s, running, a, b);

    // Explicit Euler step written out by hand: with d <= 3 the generic
    // small-matrix kernels cost more than the arithmetic.
    const PointCoefficients& pc = problem.evaluate(a, b, s.x, scratch);
    const double r = spec.rate(a, b);
    const NoiseVec& pi = spec.drift(a, b);
    for (int j = 0; j < d1; ++j) dW[j] = normal(gauss) * sqdt;
    if (rotated) {
      const NoiseMat& q = spec.rotation(a, b);
      for (int j = 0; j < d1; ++j) {
        double v = 0.0;
        for (int k = 0; k < d1; ++k) v += q(j, k) * dW[k];
        dw[j] = v;
      }
    } else {
      for (int j = 0; j < d1; ++j) dw[j] = dW[j];
    }
    double pi_sq = 0.0, pi_dw = 0.0;
    for (int j = 0; j < d1; ++j) pi_sq += pi[j] * pi[j], pi_dw += pi[j] * dw[j];
    const double r2dt = r * r * dt;
    double sigma_sq = 0.0;
    for (int i2 = 0; i2 < d; ++i2) {
      double noise = 0.0, tilt = 0.0;
      for (int j = 0; j < d1; ++j) {
        const double sij = pc.sigma(i2, j);
        noise += sij * dw[j];
        tilt += sij * pi[j];
        sigma_sq += sij * sij;
      }
      next.x[i2] = s.x[i2] + r * noise + r2dt * (pc.drift[i2] + tilt);
    }
    next.t = s.t + dt;
    next.phi = s.phi + r2dt * pc.discount;
    next.psi = s.psi + 0.5 * r2dt * pi_sq + r * pi_dw;

    const double weight = (s.phi == 0.0 && s.psi == 0.0) ? 1.0 : std::exp(-s.phi - s.psi);
    const double flow = pc.cost == 0.0 ? 0.0 : r2dt * pc.cost * weight;
    const double psi_flow = (s.psi == 0.0 ? 1.0 : std::exp(-s.psi)) * dt;
    const double pen = problem.is_penalty(a) ? dt : 0.0;
    const double next_distance = domain.boundary_distance(next.x);

    double theta = -1.0;
    Vec exit_point;
    if (next_distance <= 0.0) {
      theta = domain.crossing_fraction(s.x, next.x);
      exit_point = s.x + theta * (next.x - s.x);
    } else if (bridge && 2.0 * distance * next_distance < 40.0 * r2dt * sigma_sq) {
      // Below this the crossing probability exceeds e^-40 in every direction.
      const Mat cov = r2dt * (pc.sigma * pc.sigma.transpose());
      const auto crossing = domain.bridge_crossing(s.x, next.x, cov);
      if (crossing.probability > 0.0 && !uniforms) uniforms = make_stream(cfg.seed, path, 1);
      if (crossing.probability > 0.0 && uniform(*uniforms) < crossing.probability) {
        theta = 0.5;
        exit_point = crossing.exit_point;
      }
    }
    if (theta >= 0.0) {
      running += theta * flow;
      psi_integral += theta * psi_flow;
      penalty_time += theta * pen;
      rec.exit_time = s.t + theta * dt;
      rec.exit_state = exit_point;
      // End-of-step accumulators keep e^{-psi} an exact discrete martingale.
      rec.phi = next.phi;
      rec.psi = next.psi;
      rec.terminal_payoff = problem.terminal(exit_point) * std::exp(-next.phi - next.psi);
      rec.steps = i + 1;
      break;
    }
    running += flow;
    psi_integral += psi_flow;
    penalty_time += pen;
    std::swap(s, next);
    distance = next_distance;
    rec.steps = i + 1;
  }
  rec.running_payoff = running;
  rec.psi_integral = psi_integral;
  rec.penalty_time = penalty_time;
  rec.girsanov_weight = std::exp(-rec.psi);
  return rec;
}

PayoffSummary simulate_batch(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                             const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg) {
  cfg.validate();
  std::vector<TrajectoryRecord> records(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads,
               [&](std::size_t p) { records[p] = simulate_to_exit(problem, spec, x0, alpha, beta, cfg, p); });
  PayoffSummary out;
  RunningStats payoff;
  KahanSum censored, exit_time;
  out.payoffs.reserve(cfg.n_paths);
  for (const auto& r : records) {
    payoff.add(r.payoff());
    out.payoffs.push_back(r.payoff());
    censored.add(r.censored ? 1.0 : 0.0);
    exit_time.add(r.exit_time);
  }
  out.n_paths = cfg.n_paths;
  out.mean = payoff.mean();
  out.standard_error = payoff.standard_error();
  out.censored_fraction = censored.value() / cfg.n_paths;
  out.mean_exit_time = exit_time.value() / cfg.n_paths;
  return out;
}

void write_paths_csv(std::ostream& out, const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                     const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg, std::size_t n_paths) {
  class Dump : public StepObserver {
   public:
    Dump(std::ostream& o, std::size_t id) : out_(o), id_(id) {}
    void step(const PathState& s, double, int, int) override {
      out_ << id_ << ',' << format_double(s.t);
      for (int i = 0; i < s.x.size(); ++i) out_ << ',' << format_double(s.x[i]);
      out_ << ',' << format_double(s.phi) << ',' << format_double(s.psi) << '\n';
    }

   private:
    std::ostream& out_;
    std::size_t id_;
  };
  out << "path_id,t";
  for (int i = 0; i < problem.dim(); ++i) out << ",x" << (i + 1);
  out << ",phi,psi\n";
  for (std::size_t p = 0; p < n_paths; ++p) {
    Dump dump(out, p);
    const TrajectoryRecord r = simulate_to_exit(problem, spec, x0, alpha, beta, cfg, p, &dump);
    out << p << ',' << format_double(r.exit_time);
    for (int i = 0; i < r.exit_state.size(); ++i) out << ',' << format_double(r.exit_state[i]);
    out << ',' << format_double(r.phi) << ',' << format_double(r.psi) << '\n';
  }
}

MartingaleReport girsanov_martingale_check(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                           const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg) {
  cfg.validate();
  std::vector<TrajectoryRecord> records(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads,
               [&](std::size_t p) { records[p] = simulate_to_exit(problem, spec, x0, alpha, beta, cfg, p); });
  RunningStats weight, stopped, integral;
  KahanSum censored_mass, censored;
  for (const auto& r : records) {
    weight.add(r.censored ? 0.0 : r.girsanov_weight);
    stopped.add(r.girsanov_weight);
    if (r.censored) {
      censored_mass.add(r.girsanov_weight);
      censored.add(1.0);
    }
    integral.add(r.psi_integral);
  }
  MartingaleReport out;
  out.mean_weight = weight.mean();
  out.standard_error = weight.standard_error();
  out.censored_mass = censored_mass.value() / cfg.n_paths;
  out.stopped_weight = stopped.mean();
  out.stopped_se = stopped.standard_error();
  out.censored_fraction = censored.value() / cfg.n_paths;
  out.psi_integral = integral.mean();
  out.psi_integral_se = integral.standard_error();
  return out;
}

BoundReport increment_bound_study(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                  const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                  const std::vector<int>& n_list) {
  cfg.validate();
  if (n_list.empty()) throw std::invalid_argument("n list is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1) throw std::invalid_argument("lag levels must be positive");
    if (i > 0 && n_list[i] <= n_list[i - 1]) throw std::invalid_argument("lag levels must increase");
  }
  // The lag interval must span many steps for the grid times to be resolved.
  if (n_list.back() * cfg.dt > 0.1) throw std::invalid_argument("dt must be far below 1/max(n)");

  class Increments : public StepObserver {
   public:
    Increments(const std::vector<int>& ns, double dt) : dt_(dt), lags_(ns.size()), sums_(ns.size(), 0.0) {
      for (std::size_t k = 0; k < ns.size(); ++k) lags_[k].n = ns[k];
    }
    void step(const PathState& s, double, int, int) override {
      const double w = std::exp(-s.phi - s.psi) * dt_;
      for (std::size_t k = 0; k < lags_.size(); ++k) {
        lags_[k].refresh(s.t, s.x);
        sums_[k] += w * (s.x - lags_[k].x).squaredNorm();
      }
    }
    const std::vector<double>& sums() const { return sums_; }

   private:
    double dt_;
    std::vector<LagSnapshot> lags_;
    std::vector<double> sums_;
  };

  const std::size_t m = n_list.size();
  std::vector<std::vector<double>> per_path(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    Increments obs(n_list, cfg.dt);
    simulate_to_exit(problem, spec, x0, alpha, beta, cfg, p, &obs);
    per_path[p] = obs.sums();
  });
  BoundReport out;
  out.n = n_list;
  for (std::size_t k = 0; k < m; ++k) {
    RunningStats stats;
    for (const auto& v : per_path) stats.add(v[k]);
    out.M.push_back(stats.mean());
    out.se.push_back(stats.standard_error());
    out.scaled.push_back(stats.mean() * n_list[k]);
  }
  const auto [lo, hi] = std::minmax_element(out.scaled.begin(), out.scaled.end());
  out.ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
  return out;
}

ComparisonReport pathwise_comparison(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                                     const AlphaPolicy& alpha, const BetaPolicy& beta, const SimConfig& cfg,
                                     double horizon) {
  cfg.validate();
  check_start(problem, x0);
  if (spec.has_girsanov()) throw std::invalid_argument("pathwise comparison requires pi = 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const DomainSpec& domain = problem.domain();
  const int d1 = problem.noise_dim();
  const double dt = cfg.dt;
  const long steps = std::lround(horizon / dt);

  struct PathResult {
    double gap = 0.0;
    double occupation = 0.0;
  };
  std::vector<PathResult> results(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    auto gauss = make_stream(cfg.seed, p, 0);
    boost::random::normal_distribution<double> normal;
    const double sqdt = std::sqrt(dt);
    Vec x = x0, y = x0;
    LagSnapshot xa{alpha.lag(), -1, x0};
    LagSnapshot xb{beta.lag(), -1, x0};
    NoiseVec dW(d1);
    PathResult res;
    for (long i = 0; i < steps; ++i) {
      const double t = i * dt;
      xa.refresh(t, x);
      xb.refresh(t, x);
      const int a = alpha.act(t, xa.x);
      const int pa = problem.project(a);
      const int b = beta.act(a, t, xb.x);
      const double r = spec.rate(a, b);
      for (int j = 0; j < d1; ++j) dW[j] = normal(gauss) * sqdt;
      const NoiseVec dw = spec.rotation(a, b) * dW;
      const PointCoefficients px = problem.evaluate(a, b, x);
      const PointCoefficients py = problem.evaluate(pa, b, y);
      x += r * (px.sigma * dw) + (r * r * dt) * px.drift;
      y += r * (py.sigma * dw) + (r * r * dt) * py.drift;
      if (problem.is_penalty(a)) res.occupation += dt;
      res.gap = std::max(res.gap, (x - y).norm());
      if (!domain.contains(x) || !domain.contains(y)) break;
    }
    results[p] = res;
  });

  RunningStats gap;
  KahanSum occupation;
  ComparisonReport out;
  for (const auto& r : results) {
    gap.add(r.gap);
    occupation.add(r.occupation);
    out.max_gap = std::max(out.max_gap, r.gap);
  }
  out.divergence = gap.mean();
  out.divergence_se = gap.standard_error();
  out.occupation = occupation.value() / cfg.n_paths;
  out.ratio = out.occupation > 0.0 ? out.divergence / std::sqrt(out.occupation) : 0.0;
  return out;
}

}  // namespace sdgame
