#include "eemptcp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace eemptcp {

namespace {

using json = nlohmann::json;

std::string at(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string at(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

const json& object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(at(ptr, key), "unknown key");
  }
  return j;
}

const json& array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array");
  return j;
}

double number(const json& obj, const std::string& ptr, const char* key) {
  if (!obj.contains(key)) throw ConfigError(at(ptr, key), "required field is missing");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(at(ptr, key), "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& ptr, const char* key, double fallback) {
  return obj.contains(key) ? number(obj, ptr, key) : fallback;
}

std::string string(const json& obj, const std::string& ptr, const char* key) {
  if (!obj.contains(key)) throw ConfigError(at(ptr, key), "required field is missing");
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(at(ptr, key), "expected a string");
  return v.get<std::string>();
}

template <typename T>
std::size_t find_id(const std::vector<T>& items, const std::string& id, const std::string& ptr,
                    const char* what) {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].id == id) return i;
  throw ConfigError(ptr, std::string("unknown ") + what + " '" + id + "'");
}

template <typename T>
void require_unique(const std::vector<T>& items, const std::string& ptr) {
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (items[i].id == items[j].id) throw ConfigError(at(at(ptr, i), "id"), "duplicate id '" + items[i].id + "'");
}

std::vector<std::string> id_list(const json& obj, const std::string& ptr, const char* key) {
  if (!obj.contains(key)) throw ConfigError(at(ptr, key), "required field is missing");
  const std::string p = at(ptr, key);
  std::vector<std::string> out;
  const json& arr = array(obj.at(key), p);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) throw ConfigError(at(p, i), "expected a string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

UtilityFunction parse_utility(const json& j, const std::string& ptr) {
  object(j, ptr, {"kind", "alpha", "gamma", "tau"});
  const std::string kind = string(j, ptr, "kind");
  try {
    if (kind == "alpha_fair") {
      object(j, ptr, {"kind", "alpha", "gamma"});
      return UtilityFunction::alpha_fair(number(j, ptr, "alpha"), number_or(j, ptr, "gamma", 1.0));
    }
    if (kind == "newreno") {
      object(j, ptr, {"kind", "tau"});
      return UtilityFunction::new_reno(number(j, ptr, "tau"));
    }
    if (kind == "log") {
      object(j, ptr, {"kind", "gamma"});
      return UtilityFunction::log(number_or(j, ptr, "gamma", 1.0));
    }
  } catch (const DomainError& e) {
    throw ConfigError(ptr, e.what());
  }
  throw ConfigError(at(ptr, "kind"), "expected one of alpha_fair, newreno, log");
}

Controller parse_controller(const std::string& s, const std::string& ptr) {
  for (Controller c : {Controller::SinglePath, Controller::RegularMptcp, Controller::EeRealtime,
                       Controller::EeFileTransfer})
    if (s == to_string(c)) return c;
  throw ConfigError(ptr, "expected one of single_path, regular_mptcp, ee_realtime, ee_file_transfer");
}

AppSpec parse_app(const json& j, const std::string& ptr) {
  object(j, ptr, {"kind", "duration", "size"});
  const std::string kind = string(j, ptr, "kind");
  if (kind == "realtime") {
    object(j, ptr, {"kind", "duration"});
    const double d = number_or(j, ptr, "duration", AppSpec().amount);
    if (!(d > 0.0)) throw ConfigError(at(ptr, "duration"), "must be > 0");
    return AppSpec::realtime(d);
  }
  if (kind == "file_transfer") {
    object(j, ptr, {"kind", "size"});
    const double size = number_or(j, ptr, "size", AppSpec().amount);
    if (!(size > 0.0)) throw ConfigError(at(ptr, "size"), "must be > 0");
    return AppSpec::file_transfer(size);
  }
  throw ConfigError(at(ptr, "kind"), "expected realtime or file_transfer");
}

void parse_sim(const json& j, SimConfig& sim) {
  const std::string ptr = "/sim";
  object(j, ptr,
         {"dt", "horizon", "tol", "gamma_default", "hold_steps", "x_min", "initial_rate", "trace_interval",
          "phi_alpha_weighting"});
  sim.dt = number_or(j, ptr, "dt", sim.dt);
  sim.horizon = number_or(j, ptr, "horizon", sim.horizon);
  sim.tol = number_or(j, ptr, "tol", sim.tol);
  sim.gamma_factor = number_or(j, ptr, "gamma_default", sim.gamma_factor);
  sim.x_min = number_or(j, ptr, "x_min", sim.x_min);
  sim.initial_rate = number_or(j, ptr, "initial_rate", sim.initial_rate);
  sim.trace_interval = number_or(j, ptr, "trace_interval", sim.trace_interval);
  if (j.contains("hold_steps")) {
    if (!j["hold_steps"].is_number_unsigned()) throw ConfigError(at(ptr, "hold_steps"), "expected a non-negative integer");
    sim.hold_steps = j["hold_steps"].get<std::size_t>();
  }
  if (j.contains("phi_alpha_weighting")) {
    if (!j["phi_alpha_weighting"].is_boolean()) throw ConfigError(at(ptr, "phi_alpha_weighting"), "expected a boolean");
    sim.phi_alpha_weighting = j["phi_alpha_weighting"].get<bool>();
  }
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col > 1 ? col - 1 : col);
}

}  // namespace

Config parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_column(text, e.byte), "invalid JSON");
  }
  object(doc, "", {"paths", "links", "routes", "sources", "sim", "sweep"});

  Config cfg;
  if (doc.contains("paths")) {
    const json& arr = array(doc["paths"], "/paths");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = at("/paths", i);
      object(arr[i], p, {"id", "b", "theta", "c"});
      PathSpec path{string(arr[i], p, "id"), number(arr[i], p, "b"), number(arr[i], p, "theta"),
                    number(arr[i], p, "c")};
      try {
        path.validate();
      } catch (const DomainError& e) {
        throw ConfigError(p, e.what());
      }
      cfg.paths.push_back(path);
    }
    require_unique(cfg.paths, "/paths");
  }

  Scenario& sc = cfg.scenario;
  if (doc.contains("links")) {
    const json& arr = array(doc["links"], "/links");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = at("/links", i);
      object(arr[i], p, {"id", "capacity", "price_gain"});
      Link l{string(arr[i], p, "id"), number(arr[i], p, "capacity"), number_or(arr[i], p, "price_gain", 0.0)};
      if (!(l.capacity > 0.0)) throw ConfigError(at(p, "capacity"), "must be > 0");
      if (l.price_gain < 0.0) throw ConfigError(at(p, "price_gain"), "must be >= 0");
      sc.links.push_back(l);
    }
    require_unique(sc.links, "/links");
  }

  if (doc.contains("routes")) {
    const json& arr = array(doc["routes"], "/routes");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = at("/routes", i);
      object(arr[i], p, {"id", "links", "path"});
      Route r;
      r.id = string(arr[i], p, "id");
      const auto links = id_list(arr[i], p, "links");
      if (links.empty()) throw ConfigError(at(p, "links"), "must name at least one link");
      for (std::size_t k = 0; k < links.size(); ++k)
        r.links.push_back(find_id(sc.links, links[k], at(at(p, "links"), k), "link"));
      r.access = cfg.paths[find_id(cfg.paths, string(arr[i], p, "path"), at(p, "path"), "path")];
      sc.routes.push_back(r);
    }
    require_unique(sc.routes, "/routes");
  }

  if (doc.contains("sources")) {
    const json& arr = array(doc["sources"], "/sources");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = at("/sources", i);
      const json& j = object(arr[i], p,
                             {"id", "routes", "controller", "utility", "alpha_s", "beta", "app", "n_connections",
                              "selection"});
      Source s;
      s.id = string(j, p, "id");
      if (j.contains("routes")) {
        const auto routes = id_list(j, p, "routes");
        for (std::size_t k = 0; k < routes.size(); ++k)
          s.routes.push_back(find_id(sc.routes, routes[k], at(at(p, "routes"), k), "route"));
      }
      s.controller = parse_controller(string(j, p, "controller"), at(p, "controller"));
      if (!j.contains("utility")) throw ConfigError(at(p, "utility"), "required field is missing");
      s.utility = parse_utility(j["utility"], at(p, "utility"));
      s.alpha_s = number_or(j, p, "alpha_s", 0.0);
      if (!(s.alpha_s >= 0.0) || !std::isfinite(s.alpha_s)) throw ConfigError(at(p, "alpha_s"), "must be >= 0");
      s.beta = number_or(j, p, "beta", s.beta);
      if (!(s.beta >= 0.0 && s.beta <= 1.0)) throw ConfigError(at(p, "beta"), "must be in [0, 1]");
      if (j.contains("app")) s.app = parse_app(j["app"], at(p, "app"));
      if (j.contains("n_connections")) {
        if (!j["n_connections"].is_number_integer() || j["n_connections"].get<long long>() < 1)
          throw ConfigError(at(p, "n_connections"), "expected an integer >= 1");
        s.n_connections = j["n_connections"].get<int>();
      }
      if (j.contains("selection")) {
        std::vector<std::size_t> sel;
        const auto ids = id_list(j, p, "selection");
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t r = find_id(sc.routes, ids[k], at(at(p, "selection"), k), "route");
          if (std::find(s.routes.begin(), s.routes.end(), r) == s.routes.end())
            throw ConfigError(at(at(p, "selection"), k), "route '" + ids[k] + "' is not one of the source's routes");
          sel.push_back(r);
        }
        s.fixed_selection = sel;
      }
      sc.sources.push_back(s);
    }
    require_unique(sc.sources, "/sources");
  }

  if (doc.contains("sim")) parse_sim(doc["sim"], cfg.sim);

  if (doc.contains("sweep")) {
    object(doc["sweep"], "/sweep", {"alpha"});
    const json grid = doc["sweep"].value("alpha", json::array());
    const json& arr = array(grid, "/sweep/alpha");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw ConfigError(at("/sweep/alpha", i), "expected a number");
      const double a = arr[i].get<double>();
      if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError(at("/sweep/alpha", i), "must be >= 0");
      if (!cfg.sweep_alphas.empty() && a <= cfg.sweep_alphas.back())
        throw ConfigError(at("/sweep/alpha", i), "grid must be strictly increasing");
      cfg.sweep_alphas.push_back(a);
    }
    if (cfg.sweep_alphas.empty()) throw ConfigError("/sweep/alpha", "grid must not be empty");
  }

  // Sources need routes; a selection-only document may carry routeless sources.
  if (!sc.links.empty() || !sc.routes.empty()) {
    try {
      sc.validate();
    } catch (const ScenarioError& e) {
      throw ConfigError("/", e.what());
    }
    try {
      cfg.sim.validate(sc);
    } catch (const ScenarioError& e) {
      throw ConfigError("/sim", e.what());
    }
  }
  return cfg;
}

Config load_config(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError(file, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(file + ":" + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

Instance selection_instance(const Config& cfg) {
  if (cfg.paths.empty()) throw ConfigError("/paths", "path selection needs at least one path");
  Instance inst;
  inst.paths = cfg.paths;
  if (!cfg.scenario.sources.empty()) {
    const Source& s = cfg.scenario.sources.front();
    inst.utility = s.utility;
    inst.alpha_s = s.alpha_s;
    inst.n_connections = s.n_connections;
  }
  return inst;
}

}  // namespace eemptcp
