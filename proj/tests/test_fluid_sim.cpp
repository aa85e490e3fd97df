#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "eemptcp/experiments.hpp"
#include "eemptcp/fluid_sim.hpp"
#include "eemptcp/path_selection.hpp"
#include "support.hpp"

using namespace eemptcp;
using namespace testing_support;

namespace {

const PathSpec kFree{"free", 0.0, 0.0, 1e3};

Scenario one_link(int n_flows, Mbps c = 10.0) {
  Scenario sc;
  sc.links = {{"l", c, 0.0}};
  for (int i = 0; i < n_flows; ++i) {
    PathSpec access = kFree;
    access.id = "if" + std::to_string(i);
    sc.routes.push_back({"r" + std::to_string(i), {0}, access});
    Source s;
    s.id = "s" + std::to_string(i);
    s.routes = {static_cast<std::size_t>(i)};
    s.controller = Controller::SinglePath;
    s.utility = UtilityFunction::new_reno(0.1);
    sc.sources.push_back(s);
  }
  return sc;
}

// One EE source on an uncongested path with the LTE power profile.
Scenario lonely(Controller c, double alpha) {
  Scenario sc;
  sc.links = {{"big", 1e3, 0.0}};
  sc.routes = {{"r", {0}, lte_path()}};
  Source s;
  s.id = "s";
  s.routes = {0};
  s.controller = c;
  s.utility = UtilityFunction::new_reno(0.1);
  s.alpha_s = alpha;
  s.app = c == Controller::EeFileTransfer ? AppSpec::file_transfer() : AppSpec::realtime();
  s.fixed_selection = std::vector<std::size_t>{0};
  sc.sources = {s};
  return sc;
}

}  // namespace

TEST(Regulation, FloorAndMaxPath) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double beta = uniform(rng, 0.0, 1.0);
    const double xmax = uniform(rng, 0.1, 10.0);
    const double x = uniform(rng, 1e-6, xmax);
    EXPECT_GE(regulation(x, xmax, beta), 1.0 - beta);
    EXPECT_DOUBLE_EQ(regulation(xmax, xmax, beta), 1.0);
  }
  EXPECT_DOUBLE_EQ(gain(2.0, 4.0), 6.0);
}

TEST(Gradient, MatchesFiniteDifference) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = uniform_int(rng, 1, 6);
    const auto paths = random_paths(rng, n);
    std::vector<double> x;
    for (const auto& p : paths) x.push_back(uniform(rng, 0.05, 1.0) * p.c);
    const auto epb = [&](const std::vector<double>& r) {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; ++i) {
        num += paths[i].b * r[i] + paths[i].theta;
        den += r[i];
      }
      return num / den;
    };
    for (int r = 0; r < n; ++r) {
      const double h = 1e-6 * x[r];
      auto up = x, down = x;
      up[r] += h;
      down[r] -= h;
      const double fd = (epb(up) - epb(down)) / (2 * h);
      const double scale = std::max(std::abs(fd), 1e-3 * epb(x) / x[r]);
      EXPECT_LT(std::abs(energy_per_bit_gradient(paths, x, r) - fd) / scale, 1e-6);
    }
  }
}

TEST(Phi, ControllerFormulas) {
  Scenario sc = dual_access_scenario(1e3, Controller::EeFileTransfer, UtilityFunction::new_reno(0.1), 2.0, 0.2,
                                     AppSpec::file_transfer());
  SimConfig cfg;
  SimState st = initial_state(sc, cfg);
  st.on = {true, true};
  st.x = {1.0, 3.0};
  const double X = 4.0, up = 200.0 / (X * X);
  const double P = 238.2 * 1.0 + 132.9 + 52.0 * 3.0 + 1288.0;
  const double f_wifi = 0.2 * 3.0 / 1.0 + 0.8;
  EXPECT_NEAR(phi(sc, cfg, st, 0, 0), f_wifi * up - 2.0 * (238.2 / X - P / (X * X)), 1e-9);
  EXPECT_NEAR(phi(sc, cfg, st, 0, 1), up - 2.0 * (52.0 / X - P / (X * X)), 1e-9);

  sc.sources[0].controller = Controller::EeRealtime;
  EXPECT_NEAR(phi(sc, cfg, st, 0, 0), f_wifi * up - 2.0 * 238.2, 1e-9);
  cfg.phi_alpha_weighting = false;
  EXPECT_NEAR(phi(sc, cfg, st, 0, 0), f_wifi * up - 238.2, 1e-9);

  sc.sources[0].controller = Controller::RegularMptcp;
  EXPECT_NEAR(phi(sc, cfg, st, 0, 0), f_wifi * up, 1e-9);
}

TEST(Phi, SinglePathHasNoRegulation) {
  const Scenario sc = one_link(1);
  SimConfig cfg;
  SimState st = initial_state(sc, cfg);
  st.x = {2.5};
  EXPECT_NEAR(phi(sc, cfg, st, 0, 0), 200.0 / (2.5 * 2.5), 1e-12);
}

TEST(Step, PricesDecayWithoutTraffic) {
  Scenario sc;
  sc.links = {{"l", 10.0, 0.0}};
  SimConfig cfg;
  SimState st = initial_state(sc, cfg);
  st.p = {0.05};
  for (int i = 0; i < 1000; ++i) st = step(sc, cfg, st, 1e-3);
  EXPECT_EQ(st.p[0], 0.0);
  const SimState again = step(sc, cfg, st, 1e-3);
  EXPECT_EQ(again.p[0], 0.0);
}

TEST(Step, NonFiniteStateThrows) {
  const Scenario sc = one_link(1);
  SimConfig cfg;
  SimState st = initial_state(sc, cfg);
  st.x = {1e200};
  EXPECT_THROW(step(sc, cfg, st, 1e-3), NumericalBlowup);
}

TEST(Run, SingleFlowFillsLink) {
  const Scenario sc = one_link(1);
  SimConfig cfg;
  cfg.horizon = 2000.0;
  const RunResult res = run(sc, cfg);
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.sources[0].final_throughput, 10.0, 0.01);
  const double y = res.final_state.x[0];
  EXPECT_LE(y, 10.0 * (1.0 + 1e-3));
  EXPECT_LE(res.final_state.p[0] * std::abs(10.0 - y), 1e-2);
}

TEST(Run, IdenticalFlowsSplitEvenly) {
  const Scenario sc = one_link(2);
  SimConfig cfg;
  cfg.horizon = 2000.0;
  const RunResult res = run(sc, cfg);
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.sources[0].final_throughput, 5.0, 0.05);
  EXPECT_NEAR(res.sources[1].final_throughput, 5.0, 0.05);
  EXPECT_DOUBLE_EQ(res.sources[0].final_throughput, res.sources[1].final_throughput);
}

TEST(Run, RealtimeEquilibriumIsInteriorSolution) {
  SimConfig cfg;
  cfg.horizon = 2000.0;
  for (double alpha : {0.1, 0.5, 2.0}) {
    const RunResult res = run(lonely(Controller::EeRealtime, alpha), cfg);
    ASSERT_TRUE(res.converged);
    const double expected = UtilityFunction::new_reno(0.1).deriv_inv(alpha * 52.0);
    EXPECT_LT(rel_err(res.sources[0].final_throughput, expected), 5e-3) << alpha;
  }
}

TEST(Run, RealtimeRateFallsWithAlpha) {
  SimConfig cfg;
  cfg.horizon = 2000.0;
  double prev = INFINITY;
  for (double alpha : {0.05, 0.2, 1.0, 5.0, 25.0}) {
    const double x = run(lonely(Controller::EeRealtime, alpha), cfg).sources[0].final_throughput;
    EXPECT_LT(x, prev);
    prev = x;
  }
}

TEST(Run, FileTransferPinnedAtCapacity) {
  for (double alpha : {0.0, 1.0, 10.0}) {
    Scenario sc = lonely(Controller::EeFileTransfer, alpha);
    sc.links.push_back({"access", 12.74, 0.0});
    sc.routes[0].links.push_back(1);
    SimConfig cfg;
    cfg.dt = 2.5e-4;
    cfg.horizon = 2000.0;
    cfg.gamma_factor = 20.0;
    const RunResult res = run(sc, cfg);
    ASSERT_TRUE(res.converged) << alpha;
    EXPECT_NEAR(res.sources[0].final_throughput, 12.74, 0.01) << alpha;
  }
}

TEST(SimConfigGuard, RejectsStiffEnergyGradient) {
  Scenario sc = lonely(Controller::EeFileTransfer, 10.0);
  sc.links.push_back({"access", 12.74, 0.0});
  sc.routes[0].links.push_back(1);
  SimConfig cfg;
  EXPECT_THROW(cfg.validate(sc), ScenarioError);
  cfg.dt = 2.5e-4;
  EXPECT_NO_THROW(cfg.validate(sc));
}

TEST(Run, FileCompletionAndEnergy) {
  Scenario sc = one_link(1);
  sc.routes[0].access = {"if0", 50.0, 700.0, 1e3};
  sc.sources[0].app = AppSpec::file_transfer(100.0);
  SimConfig cfg;
  const RunResult res = run(sc, cfg);
  ASSERT_TRUE(res.converged);
  const SourceMetrics& m = res.sources[0];
  const double T = m.completion_time;
  EXPECT_GT(T, res.t_end - cfg.dt);
  EXPECT_LE(T, res.t_end);
  EXPECT_DOUBLE_EQ(res.final_state.delivered[0], 100.0);
  EXPECT_FALSE(res.final_state.active[0]);
  EXPECT_FALSE(res.final_state.on[0]);
  // Energy is b * delivered + theta * active time.
  EXPECT_NEAR(m.energy_j, (50.0 * 100.0 + 700.0 * T) * 1e-3, 1e-9);
  EXPECT_NEAR(res.device_energy_j, m.energy_j, 1e-9);
  EXPECT_NEAR(m.device_energy_at_completion_j, m.energy_j, 1e-9);
}

TEST(Run, RealtimeEndsAtDuration) {
  Scenario sc = one_link(1);
  sc.sources[0].app = AppSpec::realtime(3.0);
  SimConfig cfg;
  const RunResult res = run(sc, cfg);
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.sources[0].completion_time, 3.0, 1e-9);
}

TEST(Run, SharedInterfacePaysSunkPowerOnce) {
  Scenario sc;
  sc.links = {{"l", 100.0, 0.0}};
  const PathSpec wifi{"wifi", 10.0, 500.0, 100.0};
  sc.routes = {{"a", {0}, wifi}, {"b", {0}, wifi}};
  for (std::size_t i = 0; i < 2; ++i) {
    Source s;
    s.id = i == 0 ? "a" : "b";
    s.routes = {i};
    s.controller = Controller::SinglePath;
    s.utility = UtilityFunction::new_reno(0.1);
    s.app = AppSpec::realtime(2.0);
    sc.sources.push_back(s);
  }
  const RunResult res = run(sc, SimConfig{});
  const double delivered = res.final_state.delivered[0] + res.final_state.delivered[1];
  EXPECT_NEAR(res.device_energy_j, (10.0 * delivered + 500.0 * 2.0) * 1e-3, 1e-9);
  EXPECT_NEAR(res.sources[0].energy_j + res.sources[1].energy_j, (10.0 * delivered + 1000.0 * 2.0) * 1e-3, 1e-9);
}

TEST(Run, NonConvergenceIsFlagged) {
  SimConfig cfg;
  cfg.horizon = 0.5;
  const RunResult res = run(one_link(1), cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_NEAR(res.t_end, 0.5, 1e-9);
}

TEST(Run, StatesStayNonNegative) {
  Scenario sc = dual_access_scenario(10.0, Controller::EeFileTransfer, UtilityFunction::new_reno(0.025), 1.0, 0.2,
                                     AppSpec::file_transfer());
  SimConfig cfg;
  cfg.dt = 2.5e-4;
  cfg.horizon = 50.0;
  cfg.trace_interval = 0.01;
  const RunResult res = run(sc, cfg);
  const std::size_t nr = sc.routes.size();
  for (const auto& row : res.trace.rows) {
    for (std::size_t r = 0; r < nr; ++r) EXPECT_GE(row[1 + r], cfg.x_min);
    for (std::size_t l = 0; l < sc.links.size(); ++l) EXPECT_GE(row[1 + nr + l], 0.0);
  }
}

TEST(Run, Deterministic) {
  Scenario sc = shared_link_scenario(10.0, Controller::EeRealtime, 0.1, 0.05);
  SimConfig cfg;
  cfg.horizon = 20.0;
  cfg.trace_interval = 0.1;
  std::ostringstream a, b;
  write_trace_csv(run(sc, cfg).trace, a);
  write_trace_csv(run(sc, cfg).trace, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "t,x_ee,x_regular,p_shared,power_mw_ee,power_mw_regular");
}

TEST(Selection, SimulatorUsesPathSelection) {
  const UtilityFunction u = UtilityFunction::log();
  for (double alpha : {0.0, 1e-4, 5e-4, 0.01, 1.0}) {
    for (Controller c : {Controller::EeRealtime, Controller::EeFileTransfer}) {
      const Scenario sc = dual_access_scenario(1e4, c, u, alpha, 0.2, AppSpec::realtime());
      Instance inst;
      inst.paths = {wifi_path(), lte_path()};
      inst.utility = u;
      inst.alpha_s = alpha;
      const auto sel = c == Controller::EeRealtime ? solve_psp1(inst) : solve_psp2(inst);
      const auto on = select_routes(sc);
      for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(on[i], sel.rates[i] > 0.0);
    }
  }
}

TEST(Stability, Bound) {
  const std::vector<double> b{52.0, 238.2};
  // beta = 1, alpha tau^2 = 1e-5
  const auto sb = stability_bound(1.0, 1e-5, 1.0, b);
  EXPECT_NEAR(sb.value, 1.0 / 2e-5 * 3.5 / 186.2, 1e-9);
  EXPECT_NEAR(sb.value, 939.85, 0.01);
  EXPECT_FALSE(sb.outside_regime);
  const std::vector<double> one{52.0};
  EXPECT_TRUE(std::isinf(stability_bound(1.0, 1e-5, 1.0, one).value));
  const std::vector<double> medium{52.0, 139.5};
  EXPECT_NEAR(stability_bound(1.0, 1e-5, 1.0, medium).value, 2000.0, 1e-9);
  const std::vector<double> ten(10, 1.0);
  const auto many = stability_bound(1.0, 1e-5, 1.0, ten);
  EXPECT_EQ(many.value, 0.0);
  EXPECT_TRUE(many.outside_regime);
}

TEST(Stability, WarningWhenExceeded) {
  Scenario sc = dual_access_scenario(1e3, Controller::EeFileTransfer, UtilityFunction::new_reno(0.1), 5.0, 0.2,
                                     AppSpec::file_transfer(50.0));
  sc.sources[0].fixed_selection = std::vector<std::size_t>{0, 1};
  SimConfig cfg;
  const RunResult res = run(sc, cfg);
  EXPECT_TRUE(res.sources[0].stability_exceeded);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_NE(res.warnings[0].find("stability"), std::string::npos);
  EXPECT_THROW(stability_bound(one_link(1), 0, {true}), DomainError);
}

TEST(Validation, RejectsStiffStep) {
  const Scenario sc = one_link(1);
  SimConfig cfg;
  cfg.dt = 0.5;
  EXPECT_THROW(cfg.validate(sc), ScenarioError);
  cfg.dt = 1e-3;
  cfg.gamma_factor = 500.0;
  EXPECT_THROW(cfg.validate(sc), ScenarioError);
}

TEST(Validation, ScenarioShape) {
  Scenario sc = one_link(1);
  sc.routes[0].links = {3};
  EXPECT_THROW(sc.validate(), ScenarioError);
  sc = one_link(2);
  sc.sources[1].routes = {0};
  EXPECT_THROW(sc.validate(), ScenarioError);
  sc = one_link(1);
  sc.sources[0].routes = {0, 0};
  EXPECT_THROW(sc.validate(), ScenarioError);
  sc = one_link(1);
  sc.sources[0].beta = 1.5;
  EXPECT_THROW(sc.validate(), ScenarioError);
}
