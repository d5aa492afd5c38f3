#include "sdgame/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <boost/algorithm/string.hpp>

namespace sdgame {

std::string format_point(const Vec& x) {
  std::string s;
  for (int i = 0; i < x.size(); ++i) s += (i ? " " : "") + format_double(x[i]);
  return s;
}

ValueEstimate estimate_value(const GameProblem& problem, const ControlAdaptedSpec& spec, const Vec& x0,
                             const BetaPolicy& beta, const CandidateControlSet& candidates, const SimConfig& cfg) {
  if (candidates.size() == 0) throw std::invalid_argument("candidate set is empty");
  ValueEstimate best;
  best.x0 = x0;
  best.variant = to_string(spec.variant());
  best.candidate_count = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const PayoffSummary s = simulate_batch(problem, spec, x0, candidates.policy(i), beta, cfg);
    best.candidate_values.push_back(s.mean);
    if (i == 0 || s.mean > best.value) {
      best.value = s.mean;
      best.standard_error = s.standard_error;
      best.n_paths = s.n_paths;
      best.censored_fraction = s.censored_fraction;
      best.best_candidate = candidates.name(i);
    }
  }
  return best;
}

//----------------------------------------------------------------------------
// Configuration

double ExperimentConfig::budget() const { return budget_h * grid_h * grid_h + budget_dt * std::sqrt(sim.dt); }

int ExperimentConfig::lag() const {
  if (sim.lag_n > 0) return sim.lag_n;
  return static_cast<int>(std::lround(1.0 / sim.dt));
}

namespace {

std::uint64_t parse_u64(const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw ConfigError("not an unsigned integer: '" + text + "'");
  return v;
}

std::vector<Vec> parse_points(const std::string& text, int d) {
  std::vector<std::string> groups;
  boost::split(groups, text, boost::is_any_of(";"));
  std::vector<Vec> out;
  if (groups.size() == 1 && d == 1) {
    // 1-D shorthand: every number is a point.
    std::vector<std::string> words;
    const std::string t = boost::trim_copy(text);
    boost::split(words, t, boost::is_any_of(" \t,"), boost::token_compress_on);
    for (const auto& w : words)
      if (!w.empty()) out.push_back(Vec::Constant(1, parse_decimal(w)));
    return out;
  }
  for (const auto& g : groups) {
    std::vector<std::string> words;
    const std::string t = boost::trim_copy(g);
    if (t.empty()) continue;
    boost::split(words, t, boost::is_any_of(" \t,"), boost::token_compress_on);
    if (static_cast<int>(words.size()) != d) throw ConfigError("point '" + t + "' needs " + std::to_string(d) + " coordinates");
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = parse_decimal(words[static_cast<std::size_t>(i)]);
    out.push_back(x);
  }
  return out;
}

}  // namespace

ExperimentConfig load_experiment(const Config& c, int d) {
  ExperimentConfig e;
  e.grid_h = c.get_double("solver", "h", e.grid_h);
  e.solve.max_policy_iterations = static_cast<int>(c.get_int("solver", "max_policy_iterations", e.solve.max_policy_iterations));
  e.solve.inner_tolerance = c.get_double("solver", "inner_tolerance", e.solve.inner_tolerance);
  e.solve.residual_tolerance = c.get_double("solver", "residual_tolerance", e.solve.residual_tolerance);
  e.solve.relaxation = c.get_double("solver", "relaxation", e.solve.relaxation);
  e.solve.max_sweeps = static_cast<int>(c.get_int("solver", "max_sweeps", e.solve.max_sweeps));
  const std::string drift = c.get_string("solver", "drift", "central");
  if (drift == "central")
    e.solve.drift = DriftScheme::central;
  else if (drift == "upwind")
    e.solve.drift = DriftScheme::upwind;
  else
    throw ConfigError("[solver] drift must be central or upwind");

  e.sim.dt = c.get_double("simulation", "dt", e.sim.dt);
  e.sim.t_max = c.get_double("simulation", "t_max", e.sim.t_max);
  e.sim.n_paths = static_cast<std::size_t>(c.get_int("simulation", "paths", static_cast<long>(e.sim.n_paths)));
  if (c.has("simulation", "seed")) e.sim.seed = parse_u64(c.get_string("simulation", "seed"));
  e.sim.threads = static_cast<int>(c.get_int("simulation", "threads", e.sim.threads));
  e.sim.lag_n = static_cast<int>(c.get_int("simulation", "lag_n", e.sim.lag_n));
  const std::string exit = c.get_string("simulation", "exit_correction", "bridge");
  if (exit == "bridge")
    e.sim.exit_correction = ExitCorrection::bridge;
  else if (exit == "none")
    e.sim.exit_correction = ExitCorrection::none;
  else
    throw ConfigError("[simulation] exit_correction must be bridge or none");

  if (c.has("experiment", "points")) e.points = parse_points(c.get_string("experiment", "points"), d);
  if (c.has("experiment", "vk_points")) e.vk_points = parse_points(c.get_string("experiment", "vk_points"), d);
  if (c.has("experiment", "variants")) {
    e.variants.clear();
    for (const auto& w : c.get_words("experiment", "variants")) {
      try {
        e.variants.push_back(parse_variant(w));
      } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("[experiment] ") + err.what());
      }
    }
  }
  e.epsilon_factor = c.get_double("experiment", "epsilon_factor", e.epsilon_factor);
  e.bangbang_period = c.get_double("experiment", "bangbang_period", e.bangbang_period);
  e.feedback_candidate = c.get_int("experiment", "feedback_candidate", 1) != 0;
  e.budget_h = c.get_double("experiment", "budget_h", e.budget_h);
  e.budget_dt = c.get_double("experiment", "budget_dt", e.budget_dt);
  e.z_threshold = c.get_double("experiment", "z_threshold", e.z_threshold);
  e.K_list = c.get_doubles("experiment", "K_list", e.K_list);

  e.pucci.delta_hat = c.get_double("pucci", "delta_hat", e.pucci.delta_hat);
  e.pucci.gradient_bound = c.get_double("pucci", "gradient_bound", e.pucci.gradient_bound);
  e.pucci.zero_order = c.get_double("pucci", "zero_order", e.pucci.zero_order);
  e.pucci.rays = static_cast<int>(c.get_int("pucci", "rays", e.pucci.rays));
  if (c.has("pucci", "ray_seed")) e.pucci.ray_seed = parse_u64(c.get_string("pucci", "ray_seed"));

  e.variant_params.rates = c.get_doubles("variants", "rates", e.variant_params.rates);
  e.variant_params.girsanov_norm = c.get_double("variants", "girsanov_norm", e.variant_params.girsanov_norm);
  e.variant_params.rotation_angle = c.get_double("variants", "rotation_angle", e.variant_params.rotation_angle);

  if (!(e.grid_h > 0.0)) throw ConfigError("[solver] h must be positive");
  if (!(e.epsilon_factor > 1.0)) throw ConfigError("[experiment] epsilon_factor must exceed 1");
  if (e.budget_h < 0.0 || e.budget_dt < 0.0) throw ConfigError("budget constants must be nonnegative");
  try {
    e.sim.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("[simulation] ") + err.what());
  }
  return e;
}

//----------------------------------------------------------------------------
// Experiments

Synthesis synthesize(const GameProblem& problem, const ValueField& value, const ExperimentConfig& cfg) {
  Synthesis out;
  out.beta_selector = std::make_shared<MarkovSelector>(
      build_beta_selector(problem, value, cfg.epsilon(), cfg.solve.drift));
  out.beta_policy = make_feedback_policy(out.beta_selector, cfg.lag(), cfg.sim.dt);
  std::shared_ptr<const AlphaPolicy> feedback;
  if (cfg.feedback_candidate) {
    out.alpha_selector = std::make_shared<MarkovSelector>(
        build_alpha_selector(problem, value, cfg.epsilon(), cfg.solve.drift));
    out.alpha_policy = make_feedback_policy(out.alpha_selector, cfg.lag(), cfg.sim.dt);
    feedback = out.alpha_policy;
  }
  out.candidates = CandidateControlSet::standard(problem, cfg.bangbang_period, feedback);
  return out;
}

namespace {

void check_points(const GameProblem& problem, const std::vector<Vec>& points) {
  for (const auto& x : points) {
    if (x.size() != problem.dim()) throw StageError("config: evaluation point has the wrong dimension");
    if (!problem.domain().contains(x)) throw StageError("config: evaluation point " + format_point(x) + " is not inside G");
  }
}

}  // namespace

SolvedGame solve_and_synthesize(const GameProblem& problem, const ExperimentConfig& cfg) {
  SolveResult solution = [&] {
    try {
      return solve_isaacs(problem, std::make_shared<DomainGrid>(problem.domain(), cfg.grid_h), cfg.solve);
    } catch (const std::exception& e) {
      throw StageError(std::string("solve: ") + e.what());
    }
  }();
  try {
    Synthesis play = synthesize(problem, solution.value, cfg);
    return SolvedGame{std::move(solution), std::move(play)};
  } catch (const std::exception& e) {
    throw StageError(std::string("synthesize: ") + e.what());
  }
}

InvarianceReport run_invariance_suite(const GameProblem& problem, const ExperimentConfig& cfg) {
  if (cfg.points.empty()) throw StageError("config: no evaluation points");
  if (std::find(cfg.variants.begin(), cfg.variants.end(), Variant::baseline) == cfg.variants.end())
    throw StageError("config: the variant list must include baseline");
  check_points(problem, cfg.points);
  const SolvedGame game = solve_and_synthesize(problem, cfg);

  InvarianceReport rep;
  rep.points = cfg.points;
  rep.budget = cfg.budget();
  rep.z_threshold = cfg.z_threshold;
  rep.solver_residual = game.solution.residual;
  for (Variant v : cfg.variants) rep.variants.push_back(to_string(v));
  const std::size_t V = cfg.variants.size();
  try {
    std::vector<ControlAdaptedSpec> specs;
    for (Variant v : cfg.variants) specs.push_back(ControlAdaptedSpec::make(v, problem, cfg.variant_params));
    for (const auto& x : cfg.points) {
      rep.pde.push_back(game.solution.value.at(x));
      for (std::size_t v = 0; v < V; ++v)
        rep.estimates.push_back(estimate_value(problem, specs[v], x, *game.play.beta_policy, game.play.candidates, cfg.sim));
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string("simulate: ") + e.what());
  }

  rep.passed = true;
  rep.worst_pde_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < cfg.points.size(); ++p) {
    std::vector<double> z(V * V, 0.0);
    for (std::size_t i = 0; i < V; ++i) {
      const ValueEstimate& a = rep.estimate(p, i);
      for (std::size_t j = 0; j < V; ++j) {
        const ValueEstimate& b = rep.estimate(p, j);
        const double diff = a.value - b.value;
        const double se = std::hypot(a.standard_error, b.standard_error);
        z[i * V + j] = diff == 0.0 ? 0.0 : (se > 0.0 ? diff / se : std::copysign(INFINITY, diff));
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z[i * V + j]));
      }
      const double excess = std::abs(a.value - rep.pde[p]) - rep.budget - 3.0 * a.standard_error;
      rep.worst_pde_excess = std::max(rep.worst_pde_excess, excess);
    }
    rep.z.push_back(std::move(z));
  }
  rep.passed = rep.max_abs_z <= rep.z_threshold && rep.worst_pde_excess <= 0.0;
  return rep;
}

void write_estimates_csv(std::ostream& out, const InvarianceReport& rep) {
  out << "x0,variant,value,standard_error,n_paths,censored_fraction,candidates,best_candidate,pde,abs_error,allowance\n";
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    for (std::size_t v = 0; v < rep.variants.size(); ++v) {
      const ValueEstimate& e = rep.estimate(p, v);
      out << format_point(e.x0) << ',' << e.variant << ',' << format_double(e.value) << ','
          << format_double(e.standard_error) << ',' << e.n_paths << ',' << format_double(e.censored_fraction) << ','
          << e.candidate_count << ',' << e.best_candidate << ',' << format_double(rep.pde[p]) << ','
          << format_double(std::abs(e.value - rep.pde[p])) << ','
          << format_double(rep.budget + 3.0 * e.standard_error) << '\n';
    }
  }
}

void write_z_csv(std::ostream& out, const InvarianceReport& rep) {
  out << "x0,variant_a,variant_b,z\n";
  const std::size_t V = rep.variants.size();
  for (std::size_t p = 0; p < rep.points.size(); ++p)
    for (std::size_t i = 0; i < V; ++i)
      for (std::size_t j = i + 1; j < V; ++j)
        out << format_point(rep.points[p]) << ',' << rep.variants[i] << ',' << rep.variants[j] << ','
            << format_double(rep.z[p][i * V + j]) << '\n';
}

void write_summary(std::ostream& out, const InvarianceReport& rep) {
  out << "invariance suite\n";
  out << "  points: " << rep.points.size() << ", variants: " << rep.variants.size();
  if (!rep.estimates.empty()) out << ", candidate policies: " << rep.estimates.front().candidate_count;
  out << "\n  solver residual: " << format_double(rep.solver_residual) << '\n';
  out << "  discretization budget: " << format_double(rep.budget) << '\n';
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    out << "  x0 = " << format_point(rep.points[p]) << "  pde = " << format_double(rep.pde[p]) << '\n';
    for (std::size_t v = 0; v < rep.variants.size(); ++v) {
      const ValueEstimate& e = rep.estimate(p, v);
      out << "    " << e.variant << ": " << format_double(e.value) << " +- " << format_double(e.standard_error)
          << " (best " << e.best_candidate << ", censored " << format_double(e.censored_fraction) << ")\n";
    }
  }
  out << "  max |z|: " << format_double(rep.max_abs_z) << " (threshold " << format_double(rep.z_threshold) << ")\n";
  out << "  worst |MC - PDE| excess over allowance: " << format_double(rep.worst_pde_excess) << '\n';
  out << "  result: " << (rep.passed ? "PASS" : "FAIL") << '\n';
}

VkReport run_vk_convergence(const GameProblem& problem, const ExperimentConfig& cfg) {
  if (cfg.K_list.empty()) throw StageError("config: K_list is empty");
  check_points(problem, cfg.vk_points);
  const auto family = make_pucci(cfg.pucci, problem.dim());
  VkReport rep;
  std::shared_ptr<const DomainGrid> grid;
  try {
    grid = std::make_shared<DomainGrid>(problem.domain(), cfg.grid_h);
    rep.rate = convergence_study(problem, family, cfg.K_list, grid, cfg.solve);
  } catch (const std::exception& e) {
    throw StageError(std::string("solve: ") + e.what());
  }
  rep.monotone_violation = 0.0;
  for (std::size_t k = 1; k < rep.rate.u_K.size(); ++k) {
    const auto& lo = rep.rate.u_K[k - 1].values();
    const auto& hi = rep.rate.u_K[k].values();
    for (std::size_t i = 0; i < lo.size(); ++i) rep.monotone_violation = std::max(rep.monotone_violation, hi[i] - lo[i]);
  }
  rep.monotone = rep.monotone_violation <= rep.rate.floor;
  if (cfg.vk_points.empty()) return rep;

  rep.points = cfg.vk_points;
  try {
    const SolvedGame base = solve_and_synthesize(problem, cfg);
    const ControlAdaptedSpec spec = ControlAdaptedSpec::baseline(problem);
    for (const auto& x : cfg.vk_points)
      rep.v_mc.push_back(estimate_value(problem, spec, x, *base.play.beta_policy, base.play.candidates, cfg.sim));
    for (int which = 0; which < 2; ++which) {
      const std::size_t k = which == 0 ? 0 : rep.rate.K.size() - 1;
      const GameProblem extended = extend_with_penalty(problem, family, rep.rate.K[k]);
      const Synthesis game = synthesize(extended, rep.rate.u_K[k], cfg);
      const ControlAdaptedSpec ext_spec = ControlAdaptedSpec::baseline(extended);
      for (const auto& x : cfg.vk_points) {
        (which == 0 ? rep.vk_small : rep.vk_large)
            .push_back(estimate_value(extended, ext_spec, x, *game.beta_policy, game.candidates, cfg.sim));
        (which == 0 ? rep.uk_small : rep.uk_large).push_back(rep.rate.u_K[k].at(x));
      }
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string("simulate: ") + e.what());
  }
  return rep;
}

void write_summary(std::ostream& out, const VkReport& rep) {
  out << "penalization study\n";
  for (std::size_t i = 0; i < rep.rate.K.size(); ++i)
    out << "  K = " << format_double(rep.rate.K[i]) << "  sup |u_K - v| = " << format_double(rep.rate.sup_error[i])
        << '\n';
  out << "  fit: chi = " << format_double(rep.rate.chi) << ", N_chi = " << format_double(rep.rate.N_chi)
      << ", points = " << rep.rate.fitted_points << ", floor = " << format_double(rep.rate.floor) << '\n';
  out << "  N = max_K K e(K) = " << format_double(rep.rate.N) << '\n';
  out << "  monotone in K: " << (rep.monotone ? "yes" : "no") << " (largest increase "
      << format_double(rep.monotone_violation) << ")\n";
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    out << "  x0 = " << format_point(rep.points[p]) << ": v MC " << format_double(rep.v_mc[p].value) << " +- "
        << format_double(rep.v_mc[p].standard_error) << "; K = " << format_double(rep.rate.K.front()) << " MC "
        << format_double(rep.vk_small[p].value) << " +- " << format_double(rep.vk_small[p].standard_error)
        << " (u_K " << format_double(rep.uk_small[p]) << "); K = " << format_double(rep.rate.K.back()) << " MC "
        << format_double(rep.vk_large[p].value) << " +- " << format_double(rep.vk_large[p].standard_error)
        << " (u_K " << format_double(rep.uk_large[p]) << ")\n";
  }
}

}  // namespace sdgame
