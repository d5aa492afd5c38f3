#pragma once

#include <memory>
#include <string>

#include "sdgame/config.hpp"
#include "sdgame/game_model.hpp"
#include "sdgame/grid.hpp"

namespace sdtest {

using namespace sdgame;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Vec pt(double x) { return Vec::Constant(1, x); }

inline GameProblem load(const std::string& name) {
  return load_problem(Config::load(std::string(SDGAME_CONFIG_DIR) + "/" + name));
}

inline Config config(const std::string& name) { return Config::load(std::string(SDGAME_CONFIG_DIR) + "/" + name); }

/// Single-pair problem on (0,1) with constant coefficients.
inline GameProblem interval(double sigma, double b, double c, double f, double g, ProblemConstants k = {2, 0.5, 0.5, 1}) {
  CoefficientSet s;
  s.sigma = {ScalarField::constant(sigma)};
  s.drift = {ScalarField::constant(b)};
  s.discount = ScalarField::constant(c);
  s.cost = ScalarField::constant(f);
  ActionSets a;
  a.player_one = {"a0"};
  a.player_two = {"b0"};
  return GameProblem(a, DomainSpec::box(pt(0), pt(1)), 1, k, {s}, ScalarField::constant(g));
}

inline std::shared_ptr<const DomainGrid> grid(const GameProblem& p, double h) {
  return std::make_shared<const DomainGrid>(p.domain(), h);
}

}  // namespace sdtest
