#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "eemptcp/fluid_sim.hpp"
#include "eemptcp/path_selection.hpp"

namespace eemptcp {

/// Malformed or schema-violating configuration. `where` is a JSON pointer
/// ("/sources/0/beta") or "line L, column C" for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct Config {
  std::vector<PathSpec> paths;
  Scenario scenario;  ///< empty when the document has no links/routes/sources
  SimConfig sim;
  std::vector<double> sweep_alphas;
};

Config parse_config(const std::string& text);
/// Reads and parses a file; unreadable files raise ConfigError too.
Config load_config(const std::string& file);

/// Path-selection instance: the `paths` section with the first source's
/// utility, alpha_s and n_connections (log utility and alpha_s = 0 if absent).
Instance selection_instance(const Config& cfg);

}  // namespace eemptcp
