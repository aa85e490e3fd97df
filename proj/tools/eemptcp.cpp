// eemptcp: path selection, fluid simulation and experiment reproduction.
//
//   eemptcp select    --config FILE [--problem psp1|psp2] [--oracle]
//   eemptcp select    --seed N [--problem ...] [--oracle]
//   eemptcp simulate  --config FILE [--out DIR]
//   eemptcp sweep     --config FILE [--out DIR]
//   eemptcp reproduce NAME [--out DIR]
//
// Exit codes: 0 ok, 2 bad input, 3 no convergence, 4 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "eemptcp/config.hpp"
#include "eemptcp/experiments.hpp"
#include "eemptcp/format.hpp"
#include "eemptcp/path_selection.hpp"

namespace {

using namespace eemptcp;
using json = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kBadInput = 2;
constexpr int kNoConvergence = 3;
constexpr int kNumeric = 4;

struct Options {
  std::string config;
  std::string out = "out";
  std::string problem = "psp1";
  std::string experiment;
  bool oracle = false;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
};

json num(double v) {
  if (std::isfinite(v)) return round6(v);
  return fmt6(v);
}

// Write to a sibling temp file, then rename, so readers never see half a file.
void write_file(const std::filesystem::path& path, const std::string& data) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << data;
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Instance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(2, 8);
  std::uniform_real_distribution<double> b(10.0, 300.0), theta(0.0, 1500.0), c(0.5, 20.0), alpha(0.5, 2.0),
      log_alpha_s(-4.0, 0.0);
  Instance inst;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) inst.paths.push_back({"p" + std::to_string(i), b(rng), theta(rng), c(rng)});
  inst.utility = UtilityFunction::alpha_fair(alpha(rng), 100.0);
  inst.alpha_s = std::pow(10.0, log_alpha_s(rng));
  return inst;
}

json selection_json(const Instance& inst, const SelectionResult& r) {
  json j;
  j["algorithm"] = to_string(r.algorithm);
  j["chosen"] = r.chosen;
  json rates = json::object();
  for (std::size_t i = 0; i < inst.paths.size(); ++i) rates[inst.paths[i].id] = num(r.rates[i]);
  j["rates"] = rates;
  j["objective"] = num(r.objective);
  j["upper_bound"] = num(r.upper_bound);
  j["gap_certificate"] = num(r.gap_certificate);
  return j;
}

int cmd_select(const Options& o) {
  Instance inst;
  if (!o.config.empty()) {
    inst = selection_instance(load_config(o.config));
  } else if (o.seed) {
    inst = random_instance(*o.seed);
  } else {
    throw ConfigError("--config", "select needs --config or --seed");
  }
  inst.validate();
  const Instance solved = scale_for_n_connections(inst);
  const bool psp1 = o.problem == "psp1";

  json out;
  out["problem"] = o.problem;
  out["utility"] = solved.utility.describe();
  out["alpha_s"] = num(solved.alpha_s);
  json paths = json::array();
  for (const auto& p : solved.paths)
    paths.push_back({{"id", p.id}, {"b", num(p.b)}, {"theta", num(p.theta)}, {"c", num(p.c)}});
  out["paths"] = paths;
  const SelectionResult res = psp1 ? solve_psp1(solved) : solve_psp2(solved);
  out["result"] = selection_json(solved, res);
  if (o.oracle) {
    const SelectionResult exact = psp1 ? solve_psp1_bruteforce(solved) : solve_psp2_bruteforce(solved);
    json oj = selection_json(solved, exact);
    oj["gap"] = num(exact.objective - res.objective);
    const double bound = psp1 ? rpsp1_waterfill(solved).upper_bound : rpsp2_upper_bound(solved);
    oj["relaxation_bound"] = num(bound);
    const double slack = 1e-9 * std::max(1.0, std::abs(exact.objective));
    oj["sandwich_holds"] = res.objective <= exact.objective + slack && exact.objective <= bound + slack;
    out["oracle"] = oj;
  }
  const std::string text = out.dump(2) + "\n";
  if (!o.quiet) std::cout << text;
  return kOk;
}

void print_rows(const std::vector<MetricsRow>& rows) {
  for (const auto& r : rows) {
    std::string chosen;
    for (const auto& c : r.chosen) chosen += (chosen.empty() ? "" : "|") + c;
    std::cout << r.scenario << " " << r.variant << " alpha=" << fmt6(r.alpha_s) << " " << r.source
              << " paths=" << chosen << " rate=" << fmt6(r.throughput) << " epb=" << fmt6(r.energy_per_bit)
              << (r.converged ? "" : " (not converged)") << "\n";
  }
}

Config load_scenario(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config", "a config file is required");
  Config cfg = load_config(o.config);
  if (cfg.scenario.sources.empty() || cfg.scenario.routes.empty())
    throw ConfigError(o.config + ":/sources", "simulation needs links, routes and sources");
  return cfg;
}

int cmd_simulate(const Options& o) {
  const Config cfg = load_scenario(o);
  const RunResult res = run(cfg.scenario, cfg.sim);
  const auto rows = metrics_rows("simulate", "config", cfg.scenario.sources.front().alpha_s, cfg.scenario, res);
  const std::filesystem::path dir(o.out);

  std::ostringstream csv;
  write_rows_csv(rows, csv);
  json summary;
  summary["converged"] = res.converged;
  summary["t_end"] = num(res.t_end);
  summary["steps"] = res.steps;
  summary["device_energy_j"] = num(res.device_energy_j);
  summary["warnings"] = res.warnings;
  json sources = json::array();
  for (const auto& m : res.sources) {
    json sj;
    sj["id"] = m.id;
    sj["chosen"] = m.chosen_routes;
    json rates = json::array();
    for (double x : m.final_rates) rates.push_back(num(x));
    sj["final_rates"] = rates;
    sj["throughput"] = num(m.final_throughput);
    sj["energy_per_bit"] = num(m.energy_per_bit);
    sj["completion_time"] = num(m.completion_time);
    if (std::isfinite(m.stability.value) || m.stability.outside_regime)
      sj["stability_bound"] = {{"value", num(m.stability.value)}, {"outside_regime", m.stability.outside_regime},
                               {"exceeded", m.stability_exceeded}};
    sources.push_back(sj);
  }
  summary["sources"] = sources;

  write_file(dir / "simulate-results.csv", csv.str());
  write_file(dir / "simulate-summary.json", summary.dump(2) + "\n");
  if (!res.trace.rows.empty()) {
    std::ostringstream trace;
    write_trace_csv(res.trace, trace);
    write_file(dir / "simulate-trace.csv", trace.str());
  }
  if (!o.quiet) {
    print_rows(rows);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  }
  return res.converged ? kOk : kNoConvergence;
}

int cmd_sweep(const Options& o) {
  const Config cfg = load_scenario(o);
  if (cfg.sweep_alphas.empty()) throw ConfigError(o.config + ":/sweep/alpha", "sweep needs an alpha grid");
  const auto rows = run_alpha_sweep("sweep", "config", cfg.scenario, cfg.sim, cfg.sweep_alphas);
  std::ostringstream csv;
  write_rows_csv(rows, csv);
  write_file(std::filesystem::path(o.out) / "sweep-results.csv", csv.str());
  if (!o.quiet) print_rows(rows);
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const MetricsRow& r) { return r.converged; });
  return ok ? kOk : kNoConvergence;
}

int cmd_reproduce(const Options& o) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), o.experiment) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError(o.experiment, "unknown experiment (expected one of " + list + ")");
  }
  const ExperimentResult res = run_experiment(o.experiment);
  std::ostringstream csv;
  write_rows_csv(res.rows, csv);
  const std::filesystem::path dir(o.out);
  write_file(dir / (res.name + "-results.csv"), csv.str());
  write_file(dir / (res.name + "-summary.json"), res.summary.dump(2) + "\n");
  if (!o.quiet) std::cout << res.summary.dump(2) << "\n";
  return res.all_converged() ? kOk : kNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware multipath TCP: path selection, fluid simulation, experiments"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto* select = app.add_subcommand("select", "Solve a path-selection problem");
  select->add_option("--config", o.config, "JSON config with a paths section");
  select->add_option("--problem", o.problem, "psp1 (power) or psp2 (energy per bit)")
      ->check(CLI::IsMember({"psp1", "psp2"}));
  select->add_flag("--oracle", o.oracle, "Also run the exhaustive solver");
  auto* seed_opt = select->add_option("--seed", seed, "Random instance when no config is given");

  auto* simulate = app.add_subcommand("simulate", "Run the fluid model on a scenario");
  simulate->add_option("--config", o.config, "Scenario config")->required();
  simulate->add_option("--out", o.out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario over the config's alpha grid");
  sweep->add_option("--config", o.config, "Scenario config with a sweep section")->required();
  sweep->add_option("--out", o.out, "Output directory");

  auto* reproduce = app.add_subcommand("reproduce", "Run a prebuilt experiment");
  reproduce->add_option("name", o.experiment, "bottleneck-energy, tradeoff-realtime, tradeoff-filetransfer, "
                                              "friendliness or two-apps")
      ->required();
  reproduce->add_option("--out", o.out, "Output directory");

  for (auto* sub : {select, simulate, sweep, reproduce}) sub->add_flag("--quiet", o.quiet, "Suppress stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }
  if (seed_opt->count()) o.seed = seed;

  try {
    if (select->parsed()) return cmd_select(o);
    if (simulate->parsed()) return cmd_simulate(o);
    if (sweep->parsed()) return cmd_sweep(o);
    return cmd_reproduce(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadInput;
  } catch (const ScenarioError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadInput;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadInput;
  } catch (const NumericalBlowup& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
}
