#include "sdgame/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sdgame/config.hpp"
#include "sdgame/harness.hpp"

namespace sdgame {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<long> paths;
  std::optional<double> dt;
  std::optional<double> grid_h;
  std::optional<int> threads;
  std::optional<double> K;
  std::string variant = "baseline";
  std::size_t dump_paths = 0;
};

// Usage or configuration problem: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  Config config;
  GameProblem problem;
  ExperimentConfig experiment;
  fs::path out;
};

Context load_context(const Options& o) {
  if (!fs::exists(o.config)) throw UsageError("config file not found: " + o.config);
  try {
    Config c = Config::load(o.config);
    if (o.seed) c.set("simulation", "seed", std::to_string(*o.seed));
    if (o.paths) c.set("simulation", "paths", std::to_string(*o.paths));
    if (o.dt) c.set("simulation", "dt", format_double(*o.dt));
    if (o.grid_h) c.set("solver", "h", format_double(*o.grid_h));
    if (o.threads) c.set("simulation", "threads", std::to_string(*o.threads));
    GameProblem problem = load_problem(c);
    ExperimentConfig e = load_experiment(c, problem.dim());
    fs::create_directories(o.out);
    return Context{std::move(c), std::move(problem), std::move(e), fs::path(o.out)};
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  body(f);
}

// summary.txt receives exactly what is echoed to the console.
void emit_summary(const Context& ctx, std::ostream& console, const std::string& text) {
  write_file(ctx.out / "summary.txt", [&](std::ostream& f) { f << text; });
  console << text;
}

std::vector<double> checkpoint_list(const Config& c) {
  return c.get_doubles("experiment", "checkpoints", {0.0, 0.05, 0.1, 0.2, 0.4});
}

//----------------------------------------------------------------------------
// Stages

int run_validate(const Context& ctx, std::ostream& console) {
  const DomainGrid grid(ctx.problem.domain(), ctx.experiment.grid_h);
  const ValidationReport rep = validate_problem(ctx.problem, grid);
  std::ostringstream s;
  s << "validation on " << grid.node_count() << " nodes\n";
  for (const auto& item : rep.items)
    s << "  " << item.name << ": worst " << format_double(item.worst) << ", margin " << format_double(item.margin)
      << (item.passed() ? "" : "  VIOLATED") << '\n';
  try {
    const BarrierFunction barrier = build_barrier(ctx.problem, grid);
    s << "  barrier: lambda " << format_double(barrier.lambda) << ", kappa " << format_double(barrier.kappa)
      << ", max generator " << format_double(barrier.max_generator) << ", boundary defect "
      << format_double(barrier.boundary_defect) << '\n';
  } catch (const BarrierError& e) {
    s << "  barrier: not found (" << e.what() << ")\n";
  }
  s << "  result: " << (rep.passed() ? "PASS" : "FAIL") << '\n';
  emit_summary(ctx, console, s.str());
  return rep.passed() ? 0 : 1;
}

int run_solve(const Context& ctx, std::ostream& console) {
  const auto grid = std::make_shared<const DomainGrid>(ctx.problem.domain(), ctx.experiment.grid_h);
  const SolveResult res = solve_isaacs(ctx.problem, grid, ctx.experiment.solve);
  write_file(ctx.out / "value.csv", [&](std::ostream& f) { write_csv(f, res.value); });
  std::ostringstream s;
  s << "isaacs solve on " << grid->node_count() << " nodes, h = " << format_double(ctx.experiment.grid_h) << '\n';
  s << "  policy iterations: " << res.outer_iterations << ", sweeps: " << res.sweeps << ", residual "
    << format_double(res.residual) << '\n';
  for (const auto& x : ctx.experiment.points)
    s << "  v(" << format_point(x) << ") = " << format_double(res.value.at(x)) << '\n';
  emit_summary(ctx, console, s.str());
  return 0;
}

int run_penalize(const Context& ctx, const Options& o, std::ostream& console) {
  const auto grid = std::make_shared<const DomainGrid>(ctx.problem.domain(), ctx.experiment.grid_h);
  const double K = o.K ? *o.K : ctx.experiment.K_list.back();
  const auto family = make_pucci(ctx.experiment.pucci, ctx.problem.dim());
  const SolveResult res = solve_penalized(ctx.problem, family, K, grid, ctx.experiment.solve);
  const ValueField P = evaluate_P(family, res.value, ctx.experiment.solve.drift);
  write_file(ctx.out / "value.csv", [&](std::ostream& f) { write_csv(f, res.value); });
  double max_P = -std::numeric_limits<double>::infinity();
  for (int node : grid->interior_nodes()) max_P = std::max(max_P, P[node]);
  std::ostringstream s;
  s << "penalized solve, K = " << format_double(K) << ", " << family.size() << " operators\n";
  s << "  policy iterations: " << res.outer_iterations << ", sweeps: " << res.sweeps << ", residual "
    << format_double(res.residual) << '\n';
  s << "  max P[u_K] = " << format_double(max_P) << '\n';
  for (const auto& x : ctx.experiment.points)
    s << "  u_K(" << format_point(x) << ") = " << format_double(res.value.at(x)) << '\n';
  emit_summary(ctx, console, s.str());
  return 0;
}

int run_simulate(const Context& ctx, const Options& o, std::ostream& console) {
  const SolvedGame game = solve_and_synthesize(ctx.problem, ctx.experiment);
  const ControlAdaptedSpec spec = ControlAdaptedSpec::make(parse_variant(o.variant), ctx.problem,
                                                           ctx.experiment.variant_params);
  std::ostringstream s;
  s << "simulation, variant " << o.variant << ", " << ctx.experiment.sim.n_paths << " paths, dt "
    << format_double(ctx.experiment.sim.dt) << ", " << game.play.candidates.size() << " candidate policies\n";
  write_file(ctx.out / "estimates.csv", [&](std::ostream& f) {
    f << "x0,value,standard_error,n_paths,censored_fraction,candidates,best_candidate,pde\n";
    for (const auto& x : ctx.experiment.points) {
      const ValueEstimate e = estimate_value(ctx.problem, spec, x, *game.play.beta_policy, game.play.candidates,
                                             ctx.experiment.sim);
      const double pde = game.solution.value.at(x);
      f << format_point(x) << ',' << format_double(e.value) << ',' << format_double(e.standard_error) << ','
        << e.n_paths << ',' << format_double(e.censored_fraction) << ',' << e.candidate_count << ','
        << e.best_candidate << ',' << format_double(pde) << '\n';
      s << "  x0 = " << format_point(x) << ": " << format_double(e.value) << " +- " << format_double(e.standard_error)
        << " (pde " << format_double(pde) << ", best " << e.best_candidate << ")\n";
    }
  });
  write_file(ctx.out / "beta_selector.csv",
             [&](std::ostream& f) { write_csv(f, *game.play.beta_selector, ctx.problem); });
  if (game.play.alpha_selector)
    write_file(ctx.out / "alpha_selector.csv",
               [&](std::ostream& f) { write_csv(f, *game.play.alpha_selector, ctx.problem); });
  if (o.dump_paths > 0 && !ctx.experiment.points.empty()) {
    const AlphaPolicy& alpha = game.play.alpha_policy ? static_cast<const AlphaPolicy&>(*game.play.alpha_policy)
                                                      : game.play.candidates.policy(0);
    write_file(ctx.out / "paths.csv", [&](std::ostream& f) {
      write_paths_csv(f, ctx.problem, spec, ctx.experiment.points.front(), alpha, *game.play.beta_policy,
                      ctx.experiment.sim, o.dump_paths);
    });
  }
  emit_summary(ctx, console, s.str());
  return 0;
}

int run_invariance(const Context& ctx, std::ostream& console) {
  const InvarianceReport rep = run_invariance_suite(ctx.problem, ctx.experiment);
  write_file(ctx.out / "estimates.csv", [&](std::ostream& f) { write_estimates_csv(f, rep); });
  write_file(ctx.out / "zscores.csv", [&](std::ostream& f) { write_z_csv(f, rep); });
  std::ostringstream s;
  write_summary(s, rep);
  emit_summary(ctx, console, s.str());
  return rep.passed ? 0 : 1;
}

int run_converge(const Context& ctx, std::ostream& console) {
  const VkReport rep = run_vk_convergence(ctx.problem, ctx.experiment);
  write_file(ctx.out / "rate.csv", [&](std::ostream& f) { write_csv(f, rep.rate); });
  bool ok = rep.monotone;
  for (std::size_t p = 0; p < rep.points.size(); ++p) {
    const double slack = 3.0 * std::hypot(rep.v_mc[p].standard_error, rep.vk_large[p].standard_error);
    ok = ok && rep.vk_large[p].value >= rep.v_mc[p].value - slack;
  }
  std::ostringstream s;
  write_summary(s, rep);
  s << "  result: " << (ok ? "PASS" : "FAIL") << '\n';
  emit_summary(ctx, console, s.str());
  return ok ? 0 : 1;
}

int run_martingale(const Context& ctx, std::ostream& console) {
  const SolvedGame game = solve_and_synthesize(ctx.problem, ctx.experiment);
  const ExperimentConfig& e = ctx.experiment;
  const std::vector<double> checkpoints = checkpoint_list(ctx.config);
  const ControlAdaptedSpec girsanov = ControlAdaptedSpec::make(Variant::girsanov, ctx.problem, e.variant_params);
  const ControlAdaptedSpec baseline = ControlAdaptedSpec::baseline(ctx.problem);
  const AlphaPolicy& alpha = game.play.alpha_policy ? static_cast<const AlphaPolicy&>(*game.play.alpha_policy)
                                                    : game.play.candidates.policy(0);
  bool ok = true;
  std::ostringstream s;
  s << "martingale checks, " << e.sim.n_paths << " paths, epsilon " << format_double(e.epsilon()) << '\n';
  std::ofstream csv(ctx.out / "martingale.csv", std::ios::binary);
  csv << "x0,test,policy,t,m,m_se,increment,increment_se,allowance\n";
  auto record = [&](const Vec& x, const std::string& test, const std::string& policy, const MartingaleTestReport& r) {
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      csv << format_point(x) << ',' << test << ',' << policy << ',' << format_double(r.times[k]) << ','
          << format_double(r.m[k]) << ',' << format_double(r.m_se[k]);
      if (k == 0)
        csv << ",,,\n";
      else
        csv << ',' << format_double(r.increment[k - 1]) << ',' << format_double(r.increment_se[k - 1]) << ','
            << format_double(r.allowance[k - 1]) << '\n';
    }
    s << "    " << test << " vs " << policy << ": " << (r.passed ? "ok" : "VIOLATED") << '\n';
    ok = ok && r.passed;
  };
  for (const auto& x : e.points) {
    const MartingaleReport g = girsanov_martingale_check(ctx.problem, girsanov, x, alpha, *game.play.beta_policy, e.sim);
    const bool g_ok = std::abs(g.stopped_weight - 1.0) <= 3.0 * g.stopped_se;
    ok = ok && g_ok;
    s << "  x0 = " << format_point(x) << ": E exp(-psi_tau ^ T) = " << format_double(g.stopped_weight) << " +- "
      << format_double(g.stopped_se) << " (censored mass " << format_double(g.censored_mass)
      << ", E int exp(-psi) = " << format_double(g.psi_integral) << ") " << (g_ok ? "ok" : "VIOLATED") << '\n';
    for (std::size_t i = 0; i < game.play.candidates.size(); ++i)
      record(x, "super", game.play.candidates.name(i),
             supermartingale_test(ctx.problem, baseline, x, game.solution.value, game.play.candidates.policy(i),
                                  *game.play.beta_policy, e.sim, checkpoints, e.epsilon()));
    if (game.play.alpha_policy) {
      record(x, "sub", "feedback",
             submartingale_test(ctx.problem, baseline, x, game.solution.value, alpha, *game.play.beta_policy, e.sim,
                                checkpoints, e.epsilon()));
      for (int b = 0; b < ctx.problem.num_beta(); ++b)
        record(x, "sub", "const_" + ctx.problem.actions().player_two[b],
               submartingale_test(ctx.problem, baseline, x, game.solution.value, alpha, ConstantBeta(b), e.sim,
                                  checkpoints, e.epsilon()));
    }
  }
  s << "  result: " << (ok ? "PASS" : "FAIL") << '\n';
  emit_summary(ctx, console, s.str());
  return ok ? 0 : 1;
}

int run_increments(const Context& ctx, std::ostream& console) {
  const SolvedGame game = solve_and_synthesize(ctx.problem, ctx.experiment);
  const auto n_words = ctx.config.get_doubles("experiment", "lag_levels", {4, 8, 16, 32});
  std::vector<int> n_list;
  for (double v : n_words) n_list.push_back(static_cast<int>(std::lround(v)));
  const double max_ratio = ctx.config.get_double("experiment", "increment_ratio_limit", 4.0);
  const ControlAdaptedSpec spec = ControlAdaptedSpec::baseline(ctx.problem);
  const AlphaPolicy& alpha = game.play.alpha_policy ? static_cast<const AlphaPolicy&>(*game.play.alpha_policy)
                                                    : game.play.candidates.policy(0);
  bool ok = true;
  std::ostringstream s;
  s << "increment bound study\n";
  std::ofstream csv(ctx.out / "increments.csv", std::ios::binary);
  csv << "x0,n,M,se,M_times_n\n";
  for (const auto& x : ctx.experiment.points) {
    const BoundReport r =
        increment_bound_study(ctx.problem, spec, x, alpha, *game.play.beta_policy, ctx.experiment.sim, n_list);
    for (std::size_t k = 0; k < r.n.size(); ++k)
      csv << format_point(x) << ',' << r.n[k] << ',' << format_double(r.M[k]) << ',' << format_double(r.se[k]) << ','
          << format_double(r.scaled[k]) << '\n';
    const bool pass = r.ratio <= max_ratio;
    ok = ok && pass;
    s << "  x0 = " << format_point(x) << ": max/min of M(n) n = " << format_double(r.ratio) << (pass ? "" : "  VIOLATED")
      << '\n';
  }
  s << "  result: " << (ok ? "PASS" : "FAIL") << '\n';
  emit_summary(ctx, console, s.str());
  return ok ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic differential game laboratory"};
  app.require_subcommand(1);
  Options o;
  const std::map<std::string, std::string> stages = {
      {"validate", "check the standing assumptions and build the barrier"},
      {"solve", "solve the Isaacs equation"},
      {"penalize", "solve the penalized equation at one K"},
      {"simulate", "Monte Carlo value estimates against the synthesized feedback"},
      {"invariance", "compare value estimates across probability-space variants"},
      {"converge", "u_K convergence study and penalized-game Monte Carlo"},
      {"martingale", "Girsanov identity and super/submartingale checks"},
      {"increments", "lag increment bound study"},
  };
  for (const auto& [name, help] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "problem and experiment file")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--dt", o.dt, "time step")->check(CLI::PositiveNumber);
    sub->add_option("--grid-h", o.grid_h, "grid spacing")->check(CLI::PositiveNumber);
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    if (name == "penalize") sub->add_option("--K", o.K, "penalty level")->check(CLI::PositiveNumber);
    if (name == "simulate") {
      sub->add_option("--variant", o.variant, "probability-space variant")
          ->check(CLI::IsMember({"baseline", "time_change", "girsanov", "rotated_noise", "combined"}));
      sub->add_option("--dump-paths", o.dump_paths, "write the first N paths to paths.csv");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const Context ctx = load_context(o);
    if (stage == "validate") return run_validate(ctx, out);
    if (stage == "solve") return run_solve(ctx, out);
    if (stage == "penalize") return run_penalize(ctx, o, out);
    if (stage == "simulate") return run_simulate(ctx, o, out);
    if (stage == "invariance") return run_invariance(ctx, out);
    if (stage == "converge") return run_converge(ctx, out);
    if (stage == "martingale") return run_martingale(ctx, out);
    return run_increments(ctx, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << stage << " failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sdgame
