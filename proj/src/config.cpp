#include "sdgame/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

namespace sdgame {

namespace pt = boost::property_tree;

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

const pt::ptree* Config::find(const std::string& section, const std::string& key) const {
  const auto s = tree_.find(section);
  if (s == tree_.not_found()) return nullptr;
  const auto k = s->second.find(key);
  if (k == s->second.not_found()) return nullptr;
  return &k->second;
}

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto s = tree_.find(section);
  if (s == tree_.not_found()) return out;
  for (const auto& kv : s->second) out.push_back(kv.first);
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  auto s = tree_.find(section);
  pt::ptree* sec = s == tree_.not_found() ? &tree_.push_back({section, pt::ptree()})->second : &s->second;
  auto k = sec->find(key);
  if (k == sec->not_found())
    sec->push_back({key, pt::ptree(value)});
  else
    k->second.put_value(value);
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  const pt::ptree* node = find(section, key);
  if (!node) throw ConfigError("missing key '" + key + "' in [" + section + "]");
  return boost::trim_copy(node->data());
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double parse_decimal(const std::string& text) {
  const std::string t = boost::trim_copy(text);
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(first, t.data() + t.size(), value);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty() || !std::isfinite(value))
    throw ConfigError("not a number: '" + text + "'");
  return value;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  try {
    return parse_decimal(get_string(section, key));
  } catch (const ConfigError& e) {
    throw ConfigError("[" + section + "] " + key + ": " + e.what());
  }
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string t = get_string(section, key);
  long value = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ConfigError("[" + section + "] " + key + ": not an integer: '" + t + "'");
  return value;
}

std::vector<std::string> Config::get_words(const std::string& section, const std::string& key) const {
  std::vector<std::string> words;
  const std::string t = get_string(section, key);
  boost::split(words, t, boost::is_any_of(" \t,"), boost::token_compress_on);
  words.erase(std::remove(words.begin(), words.end(), std::string()), words.end());
  return words;
}

std::vector<std::string> Config::get_words(const std::string& section, const std::string& key,
                                           const std::vector<std::string>& fallback) const {
  return has(section, key) ? get_words(section, key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& w : get_words(section, key)) {
    try {
      out.push_back(parse_decimal(w));
    } catch (const ConfigError& e) {
      throw ConfigError("[" + section + "] " + key + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
  return has(section, key) ? get_doubles(section, key) : fallback;
}

//----------------------------------------------------------------------------
// Fields and problems

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  const std::string t = boost::trim_copy(text);
  boost::split(words, t, boost::is_any_of(" \t"), boost::token_compress_on);
  words.erase(std::remove(words.begin(), words.end(), std::string()), words.end());
  return words;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace

ScalarField parse_field(const std::string& expression, int d) {
  ScalarField field;
  // Split on '+' tokens standing alone so exponents such as 1e+3 survive.
  std::vector<std::vector<std::string>> terms(1);
  for (const auto& w : split_words(expression)) {
    if (w == "+")
      terms.emplace_back();
    else
      terms.back().push_back(w);
  }
  for (const auto& term : terms) {
    if (term.empty()) throw ConfigError("empty term in field '" + expression + "'");
    const std::string& kind = term[0];
    std::vector<double> args;
    const bool named = kind == "const" || kind == "sqrt" || kind == "affine" || kind == "sin" || kind == "holder";
    for (std::size_t i = named ? 1 : 0; i < term.size(); ++i) args.push_back(parse_decimal(term[i]));
    auto need = [&](std::size_t n) {
      if (args.size() != n)
        throw ConfigError("term '" + kind + "' needs " + std::to_string(n) + " numbers in '" + expression + "'");
    };
    if (!named) {
      need(1);
      field.add_constant(args[0]);
    } else if (kind == "const") {
      need(1);
      field.add_constant(args[0]);
    } else if (kind == "sqrt") {
      need(1);
      if (args[0] < 0.0) throw ConfigError("sqrt of a negative number");
      field.add_constant(std::sqrt(args[0]));
    } else if (kind == "affine") {
      need(1 + d);
      field.add_affine(args[0], to_vec({args.begin() + 1, args.end()}));
    } else if (kind == "sin") {
      need(2 + d);
      field.add_sine(args[0], to_vec({args.begin() + 1, args.end() - 1}), args.back());
    } else {
      need(2 + d);
      field.add_holder(args[0], args[1], to_vec({args.begin() + 2, args.end()}));
    }
  }
  return field;
}

GameProblem load_problem(const Config& config) {
  try {
    const std::string shape = config.get_string("domain", "shape");
    DomainSpec domain = DomainSpec::box(Vec::Zero(1), Vec::Ones(1));
    if (shape == "box") {
      domain = DomainSpec::box(to_vec(config.get_doubles("domain", "lower")), to_vec(config.get_doubles("domain", "upper")));
    } else if (shape == "ball") {
      domain = DomainSpec::ball(to_vec(config.get_doubles("domain", "center")), config.get_double("domain", "radius"));
    } else {
      throw ConfigError("domain shape must be box or ball");
    }
    const int d = domain.dim();
    if (config.get_int("constants", "d", d) != d) throw ConfigError("[constants] d disagrees with the domain");
    const int d1 = static_cast<int>(config.get_int("constants", "d1", d));

    ProblemConstants constants;
    constants.K0 = config.get_double("constants", "K0", constants.K0);
    constants.delta = config.get_double("constants", "delta", constants.delta);
    constants.delta1 = config.get_double("constants", "delta1", constants.delta1);
    constants.K1 = config.get_double("constants", "K1", constants.K1);

    ActionSets actions;
    actions.player_one = config.get_words("actions", "A");
    actions.player_two = config.get_words("actions", "B");
    for (const auto& name : actions.player_one)
      if (name == "*") throw ConfigError("'*' is reserved");
    for (const auto& name : actions.player_two)
      if (name == "*") throw ConfigError("'*' is reserved");

    auto lookup = [&](const std::string& kind, const std::string& a, const std::string& b) -> const std::string* {
      static thread_local std::string value;
      for (const auto& key : {kind + "." + a + "." + b, kind + "." + a + ".*", kind + ".*." + b, kind + ".*.*"}) {
        if (config.has("coefficients", key)) {
          value = config.get_string("coefficients", key);
          return &value;
        }
      }
      return nullptr;
    };
    auto entries = [&](const std::string& text, std::size_t n, const std::string& what) {
      std::vector<std::string> parts;
      boost::split(parts, text, boost::is_any_of(","));
      if (parts.size() != n)
        throw ConfigError(what + " needs " + std::to_string(n) + " comma-separated entries");
      std::vector<ScalarField> out;
      for (const auto& p : parts) out.push_back(parse_field(p, d));
      return out;
    };

    std::vector<CoefficientSet> coefficients;
    for (const auto& a : actions.player_one) {
      for (const auto& b : actions.player_two) {
        const std::string pair = "(" + a + ", " + b + ")";
        CoefficientSet set;
        const std::string* sigma = lookup("sigma", a, b);
        if (!sigma) throw ConfigError("no sigma for action pair " + pair);
        set.sigma = entries(*sigma, static_cast<std::size_t>(d * d1), "sigma for " + pair);
        if (const std::string* drift = lookup("b", a, b))
          set.drift = entries(*drift, static_cast<std::size_t>(d), "b for " + pair);
        else
          set.drift.assign(static_cast<std::size_t>(d), ScalarField::constant(0.0));
        if (const std::string* c = lookup("c", a, b)) set.discount = parse_field(*c, d);
        if (const std::string* f = lookup("f", a, b)) set.cost = parse_field(*f, d);
        coefficients.push_back(std::move(set));
      }
    }
    ScalarField g;
    if (config.has("coefficients", "g")) g = parse_field(config.get_string("coefficients", "g"), d);
    return GameProblem(std::move(actions), std::move(domain), d1, constants, std::move(coefficients), std::move(g));
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace sdgame
