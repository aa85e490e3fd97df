#include "eemptcp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "eemptcp/format.hpp"
#include "eemptcp/path_selection.hpp"

namespace eemptcp {

namespace {

using json = nlohmann::ordered_json;

constexpr Mbps kUncongestedCore = 1e4;

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

// Runs jobs 0..n-1 on a small pool; output order follows the job index.
template <typename T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& job, unsigned threads) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

bool energy_aware(Controller c) { return c == Controller::EeRealtime || c == Controller::EeFileTransfer; }

json number(double v) {
  if (std::isfinite(v)) return round6(v);
  return fmt6(v);
}

json row_json(const MetricsRow& r) {
  json j;
  j["variant"] = r.variant;
  j["alpha_s"] = number(r.alpha_s);
  j["source"] = r.source;
  j["chosen"] = r.chosen;
  j["throughput_mbps"] = number(r.throughput);
  j["energy_per_bit_mj_per_mb"] = number(r.energy_per_bit);
  return j;
}

Instance access_instance(const UtilityFunction& u, double alpha_s, int n_connections = 1) {
  Instance inst;
  inst.paths = {wifi_path(), lte_path()};
  inst.utility = u;
  inst.alpha_s = alpha_s;
  inst.n_connections = n_connections;
  return inst;
}

// Smallest alpha at which `select(alpha)` differs from `select(lo)`, by bisection.
double selection_threshold(const std::function<std::vector<std::string>(double)>& select, double lo,
                           double hi) {
  const auto base = select(lo);
  if (select(hi) == base) return std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (select(mid) == base ? lo : hi) = mid;
  }
  return hi;
}

std::vector<double> alphas_or(const ExperimentOptions& opts, std::vector<double> fallback) {
  return opts.alphas.empty() ? fallback : opts.alphas;
}

}  // namespace

bool ExperimentResult::all_converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const MetricsRow& r) { return r.converged; });
}

PathSpec wifi_path() { return {"wifi", 238.2, 132.9, 4.12}; }
PathSpec lte_path() { return {"lte", 52.0, 1288.0, 12.74}; }

Scenario dual_access_scenario(Mbps core, Controller controller, const UtilityFunction& utility,
                              double alpha_s, double beta, AppSpec app) {
  Scenario sc;
  sc.links = {{"wifi_access", wifi_path().c, 0.0}, {"lte_access", lte_path().c, 0.0}, {"core", core, 0.0}};
  sc.routes = {{"wifi", {0, 2}, wifi_path()}, {"lte", {1, 2}, lte_path()}};
  Source src;
  src.id = "phone";
  src.routes = {0, 1};
  src.controller = controller;
  src.utility = utility;
  src.alpha_s = alpha_s;
  src.beta = beta;
  src.app = app;
  sc.sources.push_back(src);
  return sc;
}

Scenario shared_link_scenario(Mbps capacity, Controller ee_controller, Seconds tau, double alpha_s) {
  Scenario sc;
  sc.links = {{"shared", capacity, 0.0}};
  PathSpec ee_access = wifi_path();
  ee_access.id = "ee_if";
  ee_access.c = capacity;
  sc.routes = {{"ee", {0}, ee_access}, {"regular", {0}, {"regular_if", 0.0, 0.0, capacity}}};

  Source ee;
  ee.id = "ee";
  ee.routes = {0};
  ee.controller = ee_controller;
  ee.utility = UtilityFunction::new_reno(tau);
  ee.alpha_s = alpha_s;
  ee.app = ee_controller == Controller::EeFileTransfer ? AppSpec::file_transfer() : AppSpec::realtime();
  ee.fixed_selection = std::vector<std::size_t>{0};

  Source reg;
  reg.id = "regular";
  reg.routes = {1};
  reg.controller = Controller::SinglePath;
  reg.utility = UtilityFunction::new_reno(tau);
  sc.sources = {ee, reg};
  return sc;
}

std::vector<MetricsRow> metrics_rows(const std::string& scenario, const std::string& variant,
                                     double alpha_s, const Scenario& def, const RunResult& run) {
  std::vector<MetricsRow> rows;
  for (std::size_t s = 0; s < def.sources.size(); ++s) {
    const SourceMetrics& m = run.sources[s];
    MetricsRow r;
    r.scenario = scenario;
    r.variant = variant;
    r.alpha_s = alpha_s;
    r.source = m.id;
    r.chosen = m.chosen_routes;
    r.throughput = m.final_throughput;
    r.mean_throughput = m.mean_throughput;
    r.power = m.final_power;
    r.energy_per_bit = m.energy_per_bit;
    r.energy_j = m.energy_j;
    r.completion_time = m.completion_time;
    r.converged = run.converged;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> run_alpha_sweep(const std::string& scenario, const std::string& variant,
                                        const Scenario& base, const SimConfig& config,
                                        const std::vector<double>& alphas, unsigned threads) {
  base.validate();
  config.validate(base);
  const auto per_alpha = parallel_map<std::vector<MetricsRow>>(
      alphas.size(),
      [&](std::size_t i) {
        Scenario sc = base;
        for (auto& src : sc.sources)
          if (energy_aware(src.controller)) src.alpha_s = alphas[i];
        return metrics_rows(scenario, variant, alphas[i], sc, run(sc, config));
      },
      threads);
  std::vector<MetricsRow> rows;
  for (const auto& chunk : per_alpha) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

ExperimentResult experiment_bottleneck_energy(const ExperimentOptions& opts) {
  constexpr Mbps kCore = 10.0;
  constexpr Seconds kTau = 0.025;
  const UtilityFunction u = UtilityFunction::new_reno(kTau);
  const std::vector<double> alphas = alphas_or(opts, log_grid(0.05, 20.0, 18));

  SimConfig cfg;
  cfg.dt = 2.5e-4;
  cfg.horizon = 600.0;
  cfg.gamma_factor = 20.0;
  cfg.tol = 1e-4;

  ExperimentResult res;
  res.name = "bottleneck-energy";
  const Scenario regular =
      dual_access_scenario(kCore, Controller::RegularMptcp, u, 0.0, 0.2, AppSpec::file_transfer());
  const Scenario ee = dual_access_scenario(kCore, Controller::EeFileTransfer, u, 0.0, 0.0,
                                           AppSpec::file_transfer());
  const Scenario ee_regulated = dual_access_scenario(kCore, Controller::EeFileTransfer, u, 0.0, 0.2,
                                                     AppSpec::file_transfer());

  res.rows = run_alpha_sweep(res.name, "regular_mptcp", regular, cfg, {0.0}, opts.threads);
  for (auto& chunk : {run_alpha_sweep(res.name, "ee_file_transfer", ee, cfg, alphas, opts.threads),
                      run_alpha_sweep(res.name, "ee_file_transfer_beta0.2", ee_regulated, cfg, alphas,
                                      opts.threads)})
    res.rows.insert(res.rows.end(), chunk.begin(), chunk.end());

  const double regular_epb = res.rows.front().energy_per_bit;
  double low_sum = 0.0, high_sum = 0.0, worst_throughput = 0.0;
  int low_n = 0, high_n = 0;
  double last_both = 0.0, first_single = std::numeric_limits<double>::infinity();
  for (const auto& r : res.rows) {
    worst_throughput = std::max(worst_throughput, std::abs(r.throughput - kCore));
    if (r.variant != "ee_file_transfer") continue;
    if (r.chosen.size() == 2) {
      low_sum += r.energy_per_bit;
      ++low_n;
      last_both = std::max(last_both, r.alpha_s);
    } else {
      high_sum += r.energy_per_bit;
      ++high_n;
      first_single = std::min(first_single, r.alpha_s);
    }
  }
  const double crossover = selection_threshold(
      [&](double a) { return solve_psp2(access_instance(u, a)).chosen; }, 0.0, 1e3);

  json& s = res.summary;
  s["experiment"] = res.name;
  s["core_capacity_mbps"] = kCore;
  s["newreno_tau_s"] = kTau;
  s["regular_energy_per_bit"] = number(regular_epb);
  s["ee_low_alpha_energy_per_bit"] = number(low_n ? low_sum / low_n : NAN);
  s["ee_high_alpha_energy_per_bit"] = number(high_n ? high_sum / high_n : NAN);
  s["crossover_alpha"] = number(crossover);
  s["crossover_bracket"] = {number(last_both), number(first_single)};
  s["savings_high_alpha"] = number(high_n ? 1.0 - (high_sum / high_n) / regular_epb : NAN);
  s["max_throughput_deviation_mbps"] = number(worst_throughput);
  s["all_converged"] = res.all_converged();
  return res;
}

ExperimentResult sweep_tradeoff(AppSpec::Kind kind, const ExperimentOptions& opts) {
  const bool realtime = kind == AppSpec::Kind::Realtime;
  const UtilityFunction u = UtilityFunction::log(1.0);
  const Controller controller = realtime ? Controller::EeRealtime : Controller::EeFileTransfer;

  const auto select = [&](double a) {
    const Instance inst = access_instance(u, a);
    return (realtime ? solve_psp1(inst) : solve_psp2(inst)).chosen;
  };
  // Every switch point, found by bisection from the previous one.
  std::vector<double> thresholds;
  for (double lo = 0.0;;) {
    const double t = selection_threshold(select, lo, 1e3);
    if (!std::isfinite(t)) break;
    thresholds.push_back(t);
    lo = t;
  }
  std::vector<double> fallback{0.0};
  const double top = thresholds.empty() ? 1.0 : 10.0 * thresholds.back();
  for (double a : log_grid(thresholds.empty() ? 1e-3 : thresholds.front() / 10.0,
                           realtime ? std::max(top, 1.0) : top, 21))
    fallback.push_back(a);
  const std::vector<double> alphas = alphas_or(opts, fallback);

  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 2000.0;
  cfg.gamma_factor = 1.0;

  ExperimentResult res;
  res.name = realtime ? "tradeoff-realtime" : "tradeoff-filetransfer";
  const Scenario base = dual_access_scenario(
      kUncongestedCore, controller, u, 0.0, 0.2,
      realtime ? AppSpec::realtime() : AppSpec::file_transfer());
  res.rows = run_alpha_sweep(res.name, to_string(controller), base, cfg, alphas, opts.threads);
  const Scenario regular =
      dual_access_scenario(kUncongestedCore, Controller::RegularMptcp, u, 0.0, 0.2, base.sources[0].app);
  for (auto& r : run_alpha_sweep(res.name, "regular_mptcp", regular, cfg, {0.0}, opts.threads))
    res.rows.push_back(std::move(r));

  json& s = res.summary;
  s["experiment"] = res.name;
  s["utility"] = u.describe();
  s["selection_thresholds"] = json::array();
  for (double t : thresholds) s["selection_thresholds"].push_back(number(t));
  json sequence = json::array();
  std::vector<std::string> prev{"?"};
  for (const auto& r : res.rows) {
    if (r.variant == "regular_mptcp" || r.chosen == prev) continue;
    sequence.push_back(r.chosen);
    prev = r.chosen;
  }
  s["selection_sequence"] = sequence;
  s["final_throughput_mbps"] = number(res.rows[res.rows.size() - 2].throughput);
  s["rows"] = json::array();
  for (const auto& r : res.rows) s["rows"].push_back(row_json(r));
  s["all_converged"] = res.all_converged();
  return res;
}

ExperimentResult experiment_friendliness(const ExperimentOptions& opts) {
  constexpr Mbps kCapacity = 10.0;
  constexpr Seconds kTau = 0.1;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 2000.0;
  cfg.gamma_factor = 1.0;

  ExperimentResult res;
  res.name = "friendliness";
  json& s = res.summary;
  s["experiment"] = res.name;
  s["capacity_mbps"] = kCapacity;
  s["newreno_tau_s"] = kTau;

  for (const Controller c : {Controller::EeRealtime, Controller::EeFileTransfer}) {
    const bool realtime = c == Controller::EeRealtime;
    const std::vector<double> alphas =
        alphas_or(opts, realtime ? linear_grid(0.0, 0.15, 10) : linear_grid(0.0, 5.0, 10));
    const auto rows = run_alpha_sweep(res.name, to_string(c), shared_link_scenario(kCapacity, c, kTau, 0.0),
                                      cfg, alphas, opts.threads);
    json ratios = json::array();
    std::vector<double> values;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
      const double ratio = rows[i].throughput / rows[i + 1].throughput;
      values.push_back(ratio);
      ratios.push_back({{"alpha_s", number(rows[i].alpha_s)}, {"ratio", number(ratio)}});
    }
    bool monotone = true;
    for (std::size_t i = 1; i < values.size(); ++i)
      monotone = monotone && (realtime ? values[i] < values[i - 1] : values[i] > values[i - 1]);
    s[to_string(c)] = {{"ratios", ratios}, {realtime ? "strictly_decreasing" : "strictly_increasing", monotone}};
    res.rows.insert(res.rows.end(), rows.begin(), rows.end());
  }
  s["all_converged"] = res.all_converged();
  return res;
}

ExperimentResult experiment_two_apps(const ExperimentOptions& opts) {
  constexpr Seconds kTau = 0.1;
  constexpr double kAlpha = 5.0;
  constexpr Seconds kCallLength = 300.0;
  constexpr double kFileMbit = 1000.0;
  const UtilityFunction u = UtilityFunction::new_reno(kTau);

  Scenario base;
  base.links = {{"wifi_access", wifi_path().c, 0.0},
                {"lte_access", lte_path().c, 0.0},
                {"core", kUncongestedCore, 0.0}};
  base.routes = {{"video_wifi", {0, 2}, wifi_path()},
                 {"video_lte", {1, 2}, lte_path()},
                 {"file_wifi", {0, 2}, wifi_path()},
                 {"file_lte", {1, 2}, lte_path()}};
  Source video;
  video.id = "video";
  video.routes = {0, 1};
  video.utility = u;
  video.app = AppSpec::realtime(kCallLength);
  video.n_connections = 2;
  Source file = video;
  file.id = "file";
  file.routes = {2, 3};
  file.app = AppSpec::file_transfer(kFileMbit);

  // Both connections share the interface choice made for the device.
  const Instance shared = scale_for_n_connections(access_instance(u, kAlpha, 2));
  const auto fixed = [](const SelectionResult& sel, std::size_t offset) {
    std::vector<std::size_t> routes;
    for (std::size_t i = 0; i < sel.rates.size(); ++i)
      if (sel.rates[i] > 0.0) routes.push_back(offset + i);
    return routes;
  };
  struct Variant {
    std::string name;
    Scenario sc;
  };
  std::vector<Variant> variants;
  {
    Scenario sc = base;
    sc.sources = {video, file};
    for (auto& src : sc.sources) src.controller = Controller::RegularMptcp;
    variants.push_back({"regular_mptcp", sc});
  }
  for (const auto& [name, sel] :
       {std::pair{std::string("algorithm1"), solve_psp1(shared)}, std::pair{std::string("algorithm2"), solve_psp2(shared)}}) {
    Scenario sc = base;
    sc.sources = {video, file};
    sc.sources[0].controller = Controller::EeRealtime;
    sc.sources[0].alpha_s = kAlpha;
    sc.sources[0].fixed_selection = fixed(sel, 0);
    sc.sources[1].controller = Controller::EeFileTransfer;
    sc.sources[1].alpha_s = kAlpha;
    sc.sources[1].fixed_selection = fixed(sel, 2);
    variants.push_back({name, sc});
  }

  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.horizon = kCallLength + 1.0;
  cfg.gamma_factor = 20.0;

  const auto runs = parallel_map<RunResult>(
      variants.size(), [&](std::size_t i) { return run(variants[i].sc, cfg); }, opts.threads);

  ExperimentResult res;
  res.name = "two-apps";
  json& s = res.summary;
  s["experiment"] = res.name;
  s["alpha_s"] = kAlpha;
  s["newreno_tau_s"] = kTau;
  s["call_length_s"] = kCallLength;
  s["file_size_mbit"] = kFileMbit;
  json table = json::array();
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const double alpha = variants[i].name == "regular_mptcp" ? 0.0 : kAlpha;
    for (auto& r : metrics_rows(res.name, variants[i].name, alpha, variants[i].sc, runs[i]))
      res.rows.push_back(std::move(r));
    const SourceMetrics& v = runs[i].sources[0];
    const SourceMetrics& f = runs[i].sources[1];
    table.push_back({{"variant", variants[i].name},
                     {"interfaces", f.chosen_routes},
                     {"video_throughput_mbps", number(f.delivered_at_completion[0] / f.completion_time)},
                     {"video_throughput_after_file_mbps", number(v.final_throughput)},
                     {"file_completion_s", number(f.completion_time)},
                     {"file_phase_device_energy_j", number(f.device_energy_at_completion_j)},
                     {"full_window_device_energy_j", number(runs[i].device_energy_j)}});
  }
  s["table"] = table;
  s["reference"] = {
      {{"variant", "regular_mptcp"}, {"video_throughput_mbps", 8.42}, {"energy_j", 794}},
      {{"variant", "algorithm1"}, {"video_throughput_mbps", 0.40}, {"energy_j", 213}},
      {{"variant", "algorithm2"}, {"video_throughput_mbps", 0.64}, {"file_completion_s", 82.7}, {"energy_j", 161.4}}};
  s["all_converged"] = res.all_converged();
  return res;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"bottleneck-energy", "tradeoff-realtime", "tradeoff-filetransfer",
                                              "friendliness", "two-apps"};
  return names;
}

ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& opts) {
  if (name == "bottleneck-energy") return experiment_bottleneck_energy(opts);
  if (name == "tradeoff-realtime") return sweep_tradeoff(AppSpec::Kind::Realtime, opts);
  if (name == "tradeoff-filetransfer") return sweep_tradeoff(AppSpec::Kind::FileTransfer, opts);
  if (name == "friendliness") return experiment_friendliness(opts);
  if (name == "two-apps") return experiment_two_apps(opts);
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

void write_rows_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "scenario,variant,alpha_s,source,chosen,throughput_mbps,mean_throughput_mbps,power_mw,"
         "energy_per_bit_mj_per_mb,energy_j,completion_time_s,converged\n";
  for (const auto& r : rows) {
    std::string chosen;
    for (const auto& c : r.chosen) chosen += (chosen.empty() ? "" : "|") + c;
    out << csv_line({r.scenario, r.variant, fmt6(r.alpha_s), r.source, chosen, fmt6(r.throughput),
                     fmt6(r.mean_throughput), fmt6(r.power), fmt6(r.energy_per_bit), fmt6(r.energy_j),
                     fmt6(r.completion_time), r.converged ? "true" : "false"})
        << '\n';
  }
}

void write_experiment(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream csv(base / (result.name + "-results.csv"), std::ios::binary);
    write_rows_csv(result.rows, csv);
    if (!csv) throw std::runtime_error("cannot write results CSV in " + dir);
  }
  std::ofstream js(base / (result.name + "-summary.json"), std::ios::binary);
  js << result.summary.dump(2) << '\n';
  if (!js) throw std::runtime_error("cannot write summary JSON in " + dir);
}

}  // namespace eemptcp
