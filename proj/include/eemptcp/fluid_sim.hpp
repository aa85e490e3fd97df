#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eemptcp/energy_model.hpp"

namespace eemptcp {

/// Raised when the integrator produces a non-finite rate or price.
class NumericalBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for an inconsistent scenario or simulator configuration.
class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Link {
  std::string id;
  Mbps capacity = 1.0;
  /// Price gain gamma_l; zero means "use SimConfig::gamma_factor / capacity".
  double price_gain = 0.0;
};

struct Route {
  std::string id;
  std::vector<std::size_t> links;  ///< indices into Scenario::links
  PathSpec access;                 ///< power profile of the first-hop interface
};

enum class Controller { SinglePath, RegularMptcp, EeRealtime, EeFileTransfer };

const char* to_string(Controller c);

struct AppSpec {
  enum class Kind { Realtime, FileTransfer };
  Kind kind = Kind::Realtime;
  /// Duration in seconds (realtime) or size in Mbit (file transfer);
  /// infinity for a flow that never ends.
  double amount = std::numeric_limits<double>::infinity();

  static AppSpec realtime(Seconds duration = std::numeric_limits<double>::infinity()) {
    return {Kind::Realtime, duration};
  }
  static AppSpec file_transfer(double mbit = std::numeric_limits<double>::infinity()) {
    return {Kind::FileTransfer, mbit};
  }
  bool finite() const { return amount < std::numeric_limits<double>::infinity(); }
};

struct Source {
  std::string id;
  std::vector<std::size_t> routes;  ///< indices into Scenario::routes
  Controller controller = Controller::RegularMptcp;
  UtilityFunction utility = UtilityFunction::new_reno(0.1);
  double alpha_s = 0.0;
  double beta = 0.2;
  AppSpec app;
  int n_connections = 1;  ///< passed to path selection
  /// Route indices to switch on, bypassing path selection.
  std::optional<std::vector<std::size_t>> fixed_selection;
};

struct Scenario {
  std::vector<Link> links;
  std::vector<Route> routes;
  std::vector<Source> sources;

  void validate() const;
};

struct SimConfig {
  Seconds dt = 1e-3;
  Seconds horizon = 1000.0;
  double tol = 1e-4;  ///< convergence threshold on max |dx/dt| and max |dp/dt|
  std::size_t hold_steps = 1000;
  Mbps x_min = 1e-6;
  double gamma_factor = 0.1;  ///< default price gain is gamma_factor / c_l
  /// Multiply b_r by alpha_s in the realtime driver.
  bool phi_alpha_weighting = true;
  Mbps initial_rate = 0.1;
  Seconds trace_interval = 0.0;  ///< 0 disables trace recording

  /// Throws ScenarioError when a parameter is out of range or the step is too
  /// stiff for explicit Euler on this scenario.
  void validate(const Scenario& scenario) const;
};

struct SimState {
  Seconds t = 0.0;
  std::vector<Mbps> x;           ///< per route
  std::vector<double> p;         ///< per link
  std::vector<bool> on;          ///< per route: selected and owner active
  std::vector<bool> active;      ///< per source
  std::vector<double> delivered; ///< per source, Mbit
  std::vector<Seconds> completion;  ///< per source, NaN until it ends
  std::vector<double> source_energy_j;
  double device_energy_j = 0.0;
  double max_rate_change = 0.0;   ///< max |dx/dt| over the last step
  double max_price_change = 0.0;  ///< max |dp/dt| over the last step
};

/// Regulation multiplier beta * max_rate / x_r + 1 - beta.
double regulation(Mbps x_r, Mbps x_max, double beta);
/// Gain 0.5 * x_r * (x_r + max_rate).
double gain(Mbps x_r, Mbps x_max);
/// d/dx_r of (sum_i b_i x_i + theta_i) / sum_i x_i with every path on.
double energy_per_bit_gradient(std::span<const PathSpec> paths, std::span<const Mbps> rates,
                               std::size_t r);

/// Route on/off flags from path selection (or each source's fixed selection).
std::vector<bool> select_routes(const Scenario& scenario);

/// Initial state: selected routes at the initial rate, prices zero.
SimState initial_state(const Scenario& scenario, const SimConfig& config);

/// Rate driver phi_r for route `route` of source `source`.
double phi(const Scenario& scenario, const SimConfig& config, const SimState& state,
           std::size_t source, std::size_t route);

/// One explicit Euler step of length dt. Throws NumericalBlowup.
SimState step(const Scenario& scenario, const SimConfig& config, const SimState& state, Seconds dt);

struct StabilityBound {
  Mbps value = std::numeric_limits<double>::infinity();
  bool outside_regime = false;  ///< more than nine selected paths
};

/// Largest ||x_s||_inf for which the file-transfer controller with a NewReno
/// utility is known to be stable, given the selected paths' marginal powers.
StabilityBound stability_bound(double beta, double alpha_s, Seconds tau,
                               std::span<const double> selected_b);
/// Same bound for a scenario source; throws DomainError unless the source is
/// an EeFileTransfer source with a NewReno utility.
StabilityBound stability_bound(const Scenario& scenario, std::size_t source,
                               const std::vector<bool>& route_on);

struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct SourceMetrics {
  std::string id;
  std::vector<std::string> chosen_routes;
  std::vector<Mbps> final_rates;   ///< per chosen route, at the end of activity
  Mbps final_throughput = 0.0;
  Mbps mean_throughput = 0.0;      ///< delivered / active time
  MilliWatt final_power = 0.0;
  MilliJoulePerMbit energy_per_bit = std::numeric_limits<double>::quiet_NaN();
  double energy_j = 0.0;
  Seconds completion_time = std::numeric_limits<double>::quiet_NaN();
  /// Device energy and every source's delivered Mbit at this source's completion.
  double device_energy_at_completion_j = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> delivered_at_completion;
  StabilityBound stability;
  bool stability_exceeded = false;
};

struct RunResult {
  bool converged = false;
  Seconds t_end = 0.0;
  std::size_t steps = 0;
  SimState final_state;
  std::vector<SourceMetrics> sources;
  double device_energy_j = 0.0;
  Trace trace;
  std::vector<std::string> warnings;
};

/// Integrates until every finite application has ended, or, when only
/// endless flows remain, until max |dx/dt| and max |dp/dt| stay below tol for hold_steps
/// steps. Stops at the horizon otherwise (converged = false).
RunResult run(const Scenario& scenario, const SimConfig& config);

/// Writes the trace as CSV (header row, LF endings).
void write_trace_csv(const Trace& trace, std::ostream& out);

}  // namespace eemptcp
