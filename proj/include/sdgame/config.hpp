#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "sdgame/game_model.hpp"

namespace sdgame {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI-style file: [section] headers, `key = value` lines, ';' or '#'
/// comments. Keys may contain dots; they are never split into paths.
class Config {
 public:
  static Config load(const std::string& path);
  static Config parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> keys(const std::string& section) const;
  /// Adds or replaces a value (used for command-line overrides).
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::string> get_words(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_words(const std::string& section, const std::string& key,
                                     const std::vector<std::string>& fallback) const;

 private:
  const boost::property_tree::ptree* find(const std::string& section, const std::string& key) const;

  boost::property_tree::ptree tree_;
};

/// Locale-independent decimal parse of the whole string.
double parse_decimal(const std::string& text);

/// Field expression: terms joined by " + ", each one of
///   <number> | const v | sqrt v | affine v s1..sd | sin amp k1..kd phase | holder amp exp c1..cd
ScalarField parse_field(const std::string& expression, int d);

/// Builds the game from [domain], [actions], [constants] and [coefficients].
/// Coefficient keys are sigma.<a>.<b>, b.<a>.<b>, c.<a>.<b>, f.<a>.<b> and g;
/// '*' matches any action, and an exact key beats (a,*), which beats (*,b),
/// which beats (*,*). sigma lists d*d1 comma-separated entries row-major, b
/// lists d; c and f default to 0, b to the zero vector.
GameProblem load_problem(const Config& config);

}  // namespace sdgame
