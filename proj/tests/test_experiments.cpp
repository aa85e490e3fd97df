#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "eemptcp/experiments.hpp"
#include "eemptcp/path_selection.hpp"
#include "support.hpp"

using namespace eemptcp;
using namespace testing_support;

namespace {

const MetricsRow& find_row(const std::vector<MetricsRow>& rows, const std::string& variant, double alpha,
                           const std::string& source) {
  for (const auto& r : rows)
    if (r.variant == variant && r.alpha_s == alpha && r.source == source) return r;
  throw std::runtime_error("row not found");
}

}  // namespace

TEST(Experiments, TradeoffZeroAlphaMatchesRegular) {
  for (auto kind : {AppSpec::Kind::Realtime, AppSpec::Kind::FileTransfer}) {
    const auto res = sweep_tradeoff(kind);
    const std::string variant = kind == AppSpec::Kind::Realtime ? "ee_realtime" : "ee_file_transfer";
    const auto& ee = find_row(res.rows, variant, 0.0, "phone");
    const auto& reg = find_row(res.rows, "regular_mptcp", 0.0, "phone");
    EXPECT_LT(rel_err(ee.throughput, reg.throughput), 1e-3);
    EXPECT_LT(rel_err(ee.energy_per_bit, reg.energy_per_bit), 1e-3);
    EXPECT_NEAR(ee.throughput, 16.86, 0.01);
    EXPECT_TRUE(res.all_converged());
  }
}

TEST(Experiments, RealtimeSweepSelectionSequence) {
  const auto res = sweep_tradeoff(AppSpec::Kind::Realtime);
  const auto& seq = res.summary["selection_sequence"];
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0].get<std::vector<std::string>>(), (std::vector<std::string>{"wifi", "lte"}));
  EXPECT_EQ(seq[1].get<std::vector<std::string>>(), (std::vector<std::string>{"lte"}));
  EXPECT_EQ(seq[2].get<std::vector<std::string>>(), (std::vector<std::string>{"wifi"}));
  // Last EE row is the largest alpha.
  const MetricsRow& last = res.rows[res.rows.size() - 2];
  EXPECT_LT(last.throughput, 0.1);
}

TEST(Experiments, FileTransferSweepPinsLte) {
  const auto res = sweep_tradeoff(AppSpec::Kind::FileTransfer);
  const MetricsRow& last = res.rows[res.rows.size() - 2];
  EXPECT_EQ(last.chosen, (std::vector<std::string>{"lte"}));
  EXPECT_NEAR(last.throughput, 12.74, 0.01);
}

TEST(Experiments, FriendlinessSymmetricAtZero) {
  const auto res = experiment_friendliness();
  for (const char* variant : {"ee_realtime", "ee_file_transfer"}) {
    const double ee = find_row(res.rows, variant, 0.0, "ee").throughput;
    const double reg = find_row(res.rows, variant, 0.0, "regular").throughput;
    EXPECT_NEAR(ee / reg, 1.0, 0.01);
  }
  EXPECT_TRUE(res.summary["ee_realtime"]["strictly_decreasing"].get<bool>());
  EXPECT_TRUE(res.summary["ee_file_transfer"]["strictly_increasing"].get<bool>());
}

TEST(Experiments, ReportedEnergyPerBitMatchesEnergyModel) {
  for (double alpha : {0.0, 0.5, 3.0}) {
    const Scenario sc = dual_access_scenario(10.0, Controller::EeFileTransfer, UtilityFunction::new_reno(0.025),
                                             alpha, 0.2, AppSpec::file_transfer());
    SimConfig cfg;
    cfg.dt = 2.5e-4;
    cfg.horizon = 30.0;
    const RunResult res = run(sc, cfg);
    const SourceMetrics& m = res.sources[0];
    std::vector<PathSpec> paths;
    for (std::size_t r = 0; r < sc.routes.size(); ++r)
      if (res.final_state.on[r]) paths.push_back(sc.routes[r].access);
    ASSERT_EQ(paths.size(), m.final_rates.size());
    const double expected = energy_per_bit(paths, m.final_rates, std::vector<bool>(paths.size(), true));
    EXPECT_NEAR(m.energy_per_bit, expected, 1e-9 * expected);
  }
}

TEST(Experiments, SweepCardinality) {
  const Scenario sc = shared_link_scenario(10.0, Controller::EeRealtime, 0.1, 0.0);
  SimConfig cfg;
  cfg.horizon = 5.0;
  const auto rows = run_alpha_sweep("t", "v", sc, cfg, {0.0, 0.1, 0.2}, 2);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].alpha_s, 0.0);
  EXPECT_EQ(rows[1].source, "regular");
  EXPECT_EQ(rows[5].alpha_s, 0.2);
}

TEST(Experiments, ParallelSweepIsDeterministic) {
  const Scenario sc = shared_link_scenario(10.0, Controller::EeFileTransfer, 0.1, 0.0);
  SimConfig cfg;
  cfg.horizon = 5.0;
  std::ostringstream a, b;
  write_rows_csv(run_alpha_sweep("t", "v", sc, cfg, {0.0, 1.0, 2.0, 3.0}, 1), a);
  write_rows_csv(run_alpha_sweep("t", "v", sc, cfg, {0.0, 1.0, 2.0, 3.0}, 4), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiments, CsvLayout) {
  MetricsRow r;
  r.scenario = "s";
  r.variant = "v";
  r.alpha_s = 0.1234567;
  r.source = "x";
  r.chosen = {"a", "b"};
  r.throughput = 10.0;
  r.completion_time = NAN;
  std::ostringstream out;
  write_rows_csv({r}, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "scenario,variant,alpha_s,source,chosen,throughput_mbps,mean_throughput_mbps,power_mw,"
            "energy_per_bit_mj_per_mb,energy_j,completion_time_s,converged");
  EXPECT_NE(text.find("s,v,0.123457,x,a|b,10,0,0,0,0,nan,false\n"), std::string::npos);
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Experiments, WritesNamedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "eemptcp_exp_test";
  std::filesystem::remove_all(dir);
  ExperimentResult res;
  res.name = "demo";
  res.summary["k"] = 1;
  write_experiment(res, dir.string());
  EXPECT_TRUE(std::filesystem::exists(dir / "demo-results.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "demo-summary.json"));
  std::filesystem::remove_all(dir);
}

TEST(Experiments, UnknownName) {
  EXPECT_THROW(run_experiment("nope"), std::invalid_argument);
  EXPECT_EQ(experiment_names().size(), 5u);
}
