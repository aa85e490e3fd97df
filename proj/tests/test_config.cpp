#include <gtest/gtest.h>

#include <string>

#include "eemptcp/config.hpp"

using namespace eemptcp;

namespace {

const char* kScenario = R"({
  "paths": [
    {"id": "wifi", "b": 238.2, "theta": 132.9, "c": 4.12},
    {"id": "lte", "b": 52, "theta": 1288, "c": 12.74}
  ],
  "links": [
    {"id": "core", "capacity": 10},
    {"id": "wifi_access", "capacity": 4.12, "price_gain": 0.5}
  ],
  "routes": [
    {"id": "r_wifi", "links": ["wifi_access", "core"], "path": "wifi"},
    {"id": "r_lte", "links": ["core"], "path": "lte"}
  ],
  "sources": [
    {"id": "phone", "routes": ["r_wifi", "r_lte"], "controller": "ee_file_transfer",
     "utility": {"kind": "newreno", "tau": 0.025}, "alpha_s": 3, "beta": 0.1,
     "app": {"kind": "file_transfer", "size": 500}, "n_connections": 2, "selection": ["r_lte"]}
  ],
  "sim": {"dt": 0.00025, "horizon": 100, "tol": 0.001, "gamma_default": 2, "phi_alpha_weighting": false},
  "sweep": {"alpha": [0, 1, 2]}
})";

std::string error_location(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.where();
  }
  return "no error";
}

}  // namespace

TEST(Config, ParsesFullScenario) {
  const Config cfg = parse_config(kScenario);
  ASSERT_EQ(cfg.paths.size(), 2u);
  EXPECT_EQ(cfg.paths[1].theta, 1288.0);
  const Scenario& sc = cfg.scenario;
  ASSERT_EQ(sc.links.size(), 2u);
  EXPECT_EQ(sc.links[1].price_gain, 0.5);
  EXPECT_EQ(sc.routes[0].links, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(sc.routes[1].access.id, "lte");
  const Source& s = sc.sources[0];
  EXPECT_EQ(s.controller, Controller::EeFileTransfer);
  EXPECT_EQ(s.utility.kind(), UtilityFunction::Kind::NewReno);
  EXPECT_EQ(s.utility.tau(), 0.025);
  EXPECT_EQ(s.alpha_s, 3.0);
  EXPECT_EQ(s.beta, 0.1);
  EXPECT_EQ(s.app.kind, AppSpec::Kind::FileTransfer);
  EXPECT_EQ(s.app.amount, 500.0);
  EXPECT_EQ(s.n_connections, 2);
  ASSERT_TRUE(s.fixed_selection.has_value());
  EXPECT_EQ(*s.fixed_selection, (std::vector<std::size_t>{1}));
  EXPECT_EQ(cfg.sim.dt, 0.00025);
  EXPECT_EQ(cfg.sim.gamma_factor, 2.0);
  EXPECT_FALSE(cfg.sim.phi_alpha_weighting);
  EXPECT_EQ(cfg.sweep_alphas, (std::vector<double>{0, 1, 2}));
}

TEST(Config, SelectionInstance) {
  const Instance inst = selection_instance(parse_config(kScenario));
  EXPECT_EQ(inst.paths.size(), 2u);
  EXPECT_EQ(inst.alpha_s, 3.0);
  EXPECT_EQ(inst.n_connections, 2);
  const Instance fallback = selection_instance(parse_config(R"({"paths": [{"id": "a", "b": 1, "theta": 1, "c": 1}]})"));
  EXPECT_EQ(fallback.utility.kind(), UtilityFunction::Kind::Log);
  EXPECT_EQ(fallback.alpha_s, 0.0);
  EXPECT_THROW(selection_instance(parse_config("{}")), ConfigError);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_EQ(error_location(R"({"pathz": []})"), "/pathz");
  EXPECT_EQ(error_location(R"({"paths": [{"id": "a", "b": 1, "theta": 1, "c": 1, "colour": 2}]})"), "/paths/0/colour");
  EXPECT_EQ(error_location(R"({"sim": {"dtt": 1}})"), "/sim/dtt");
}

TEST(Config, ReportsFieldPointers) {
  EXPECT_EQ(error_location(R"({"paths": [{"id": "a", "b": -1, "theta": 1, "c": 1}]})"), "/paths/0");
  EXPECT_EQ(error_location(R"({"paths": [{"id": "a", "theta": 1, "c": 1}]})"), "/paths/0/b");
  EXPECT_EQ(error_location(R"({"paths": [{"id": "a", "b": "x", "theta": 1, "c": 1}]})"), "/paths/0/b");
  EXPECT_EQ(error_location(R"({"links": [{"id": "l", "capacity": 0}]})"), "/links/0/capacity");
  EXPECT_EQ(error_location(R"({"links": [{"id": "l", "capacity": 1}], "routes": [{"id": "r", "links": ["m"], "path": "p"}]})"),
            "/routes/0/links/0");
  EXPECT_EQ(error_location(R"({"sweep": {"alpha": [1, 0.5]}})"), "/sweep/alpha/1");
  EXPECT_EQ(error_location(R"({"sweep": {"alpha": []}})"), "/sweep/alpha");
}

TEST(Config, SourceFieldErrors) {
  const std::string head = R"({"paths": [{"id": "p", "b": 1, "theta": 1, "c": 5}],
    "links": [{"id": "l", "capacity": 5}], "routes": [{"id": "r", "links": ["l"], "path": "p"}],
    "sources": [{"id": "s", "routes": ["r"], )";
  EXPECT_EQ(error_location(head + R"("controller": "tcp", "utility": {"kind": "log"}}]})"), "/sources/0/controller");
  EXPECT_EQ(error_location(head + R"("controller": "single_path", "utility": {"kind": "cubic"}}]})"),
            "/sources/0/utility/kind");
  EXPECT_EQ(error_location(head + R"("controller": "single_path", "utility": {"kind": "newreno", "tau": -1}}]})"),
            "/sources/0/utility");
  EXPECT_EQ(error_location(head + R"("controller": "single_path", "utility": {"kind": "log"}, "beta": 2}]})"),
            "/sources/0/beta");
  EXPECT_EQ(error_location(head + R"("controller": "single_path", "utility": {"kind": "log"}, "app": {"kind": "realtime", "size": 3}}]})"),
            "/sources/0/app/size");
  EXPECT_EQ(error_location(head + R"("controller": "single_path", "utility": {"kind": "log"}}]})"), "no error");
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  const std::string loc = error_location("{\n  \"paths\": [\n    {\"id\": \"a\",}\n  ]\n}");
  EXPECT_EQ(loc.rfind("line 3", 0), 0u) << loc;
}

TEST(Config, StiffSimSettingsRejected) {
  const std::string text = R"({"paths": [{"id": "p", "b": 1, "theta": 1, "c": 5}],
    "links": [{"id": "l", "capacity": 5}], "routes": [{"id": "r", "links": ["l"], "path": "p"}],
    "sources": [{"id": "s", "routes": ["r"], "controller": "single_path", "utility": {"kind": "newreno", "tau": 0.1}}],
    "sim": {"dt": 1.0}})";
  EXPECT_EQ(error_location(text), "/sim");
}

TEST(Config, DuplicateIds) {
  EXPECT_EQ(error_location(R"({"paths": [{"id": "a", "b": 1, "theta": 1, "c": 1}, {"id": "a", "b": 1, "theta": 1, "c": 1}]})"),
            "/paths/1/id");
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/file.json"), ConfigError); }
