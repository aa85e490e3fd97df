#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "eemptcp/fluid_sim.hpp"

namespace eemptcp {

/// One source's outcome for one (scenario, variant, alpha) run.
struct MetricsRow {
  std::string scenario;
  std::string variant;
  double alpha_s = 0.0;
  std::string source;
  std::vector<std::string> chosen;
  Mbps throughput = 0.0;       ///< aggregate rate at the end of activity
  Mbps mean_throughput = 0.0;  ///< delivered / active time
  MilliWatt power = 0.0;
  MilliJoulePerMbit energy_per_bit = 0.0;
  double energy_j = 0.0;
  Seconds completion_time = 0.0;  ///< NaN for flows that never end
  bool converged = false;
};

struct ExperimentResult {
  std::string name;
  std::vector<MetricsRow> rows;
  nlohmann::ordered_json summary;

  bool all_converged() const;
};

struct ExperimentOptions {
  std::vector<double> alphas;  ///< empty: the experiment's default grid
  unsigned threads = 0;        ///< 0: hardware concurrency
};

/// WiFi and LTE interface profiles used by every prebuilt scenario.
PathSpec wifi_path();
PathSpec lte_path();

/// Phone with WiFi and LTE behind a shared core link of capacity `core`.
/// One source using both interfaces.
Scenario dual_access_scenario(Mbps core, Controller controller, const UtilityFunction& utility,
                              double alpha_s, double beta, AppSpec app);

/// One EE single-path flow (WiFi power profile) and one regular flow on one link.
Scenario shared_link_scenario(Mbps capacity, Controller ee_controller, Seconds tau, double alpha_s);

/// Runs `base` once per alpha, setting alpha_s on every energy-aware source.
/// Rows are ordered by alpha, then source.
std::vector<MetricsRow> run_alpha_sweep(const std::string& scenario, const std::string& variant,
                                        const Scenario& base, const SimConfig& config,
                                        const std::vector<double>& alphas, unsigned threads = 0);

/// Rows for every source of a finished run.
std::vector<MetricsRow> metrics_rows(const std::string& scenario, const std::string& variant,
                                     double alpha_s, const Scenario& scenario_def, const RunResult& run);

ExperimentResult experiment_bottleneck_energy(const ExperimentOptions& opts = {});
ExperimentResult sweep_tradeoff(AppSpec::Kind kind, const ExperimentOptions& opts = {});
ExperimentResult experiment_friendliness(const ExperimentOptions& opts = {});
ExperimentResult experiment_two_apps(const ExperimentOptions& opts = {});

/// Names accepted by `reproduce`.
const std::vector<std::string>& experiment_names();
/// Throws std::invalid_argument for an unknown name.
ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& opts = {});

void write_rows_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
/// Writes `<dir>/<name>-results.csv` and `<dir>/<name>-summary.json`.
void write_experiment(const ExperimentResult& result, const std::string& dir);

}  // namespace eemptcp
