#include "eemptcp/fluid_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "eemptcp/format.hpp"
#include "eemptcp/path_selection.hpp"

namespace eemptcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kStiffnessLimit = 0.1;
// Explicit Euler on the energy-gradient term alone is monotone below 1.
constexpr double kEnergyStiffnessLimit = 1.0;

// Per-run lookup tables so the stepping loop never touches strings.
struct StepContext {
  std::vector<double> gamma;           // per link
  std::vector<std::size_t> interface;  // per route, index into interfaces
  std::vector<PathSpec> interfaces;    // distinct access paths by id
  std::vector<std::size_t> owner;      // per route, owning source

  StepContext(const Scenario& sc, const SimConfig& cfg) {
    for (const auto& l : sc.links)
      gamma.push_back(l.price_gain > 0.0 ? l.price_gain : cfg.gamma_factor / l.capacity);
    for (const auto& r : sc.routes) {
      auto it = std::find_if(interfaces.begin(), interfaces.end(),
                             [&](const PathSpec& p) { return p.id == r.access.id; });
      if (it == interfaces.end()) {
        interface.push_back(interfaces.size());
        interfaces.push_back(r.access);
      } else {
        interface.push_back(static_cast<std::size_t>(it - interfaces.begin()));
      }
    }
    owner.assign(sc.routes.size(), 0);
    for (std::size_t s = 0; s < sc.sources.size(); ++s)
      for (std::size_t r : sc.sources[s].routes) owner[r] = s;
  }
};

struct SourceAggregate {
  Mbps total = 0.0;
  Mbps max_rate = 0.0;
  MilliWatt power = 0.0;
};

SourceAggregate aggregate(const Scenario& sc, const SimState& st, std::size_t s) {
  SourceAggregate agg;
  for (std::size_t r : sc.sources[s].routes) {
    if (!st.on[r]) continue;
    agg.total += st.x[r];
    agg.max_rate = std::max(agg.max_rate, st.x[r]);
    agg.power += power_on(sc.routes[r].access, st.x[r]);
  }
  return agg;
}

double driver(const Source& src, const SimConfig& cfg, const PathSpec& access, Mbps x_r,
              const SourceAggregate& agg) {
  const double f = regulation(x_r, agg.max_rate, src.beta);
  switch (src.controller) {
    case Controller::SinglePath:
      return src.utility.deriv(x_r);
    case Controller::RegularMptcp:
      return f * src.utility.deriv(agg.total);
    case Controller::EeRealtime: {
      const double weight = cfg.phi_alpha_weighting ? src.alpha_s : 1.0;
      return f * src.utility.deriv(agg.total) - weight * access.b;
    }
    case Controller::EeFileTransfer: {
      const double grad = access.b / agg.total - agg.power / (agg.total * agg.total);
      return f * src.utility.deriv(agg.total) - src.alpha_s * grad;
    }
  }
  return 0.0;
}

void step_into(const Scenario& sc, const SimConfig& cfg, const StepContext& ctx, const SimState& in,
               SimState& out, Seconds dt, std::vector<double>& load, std::vector<double>& iface_rate,
               std::vector<double>& iface_on) {
  out = in;
  out.t = in.t + dt;
  out.max_rate_change = 0.0;
  out.max_price_change = 0.0;

  std::fill(load.begin(), load.end(), 0.0);
  std::fill(iface_rate.begin(), iface_rate.end(), 0.0);
  std::fill(iface_on.begin(), iface_on.end(), 0.0);
  for (std::size_t r = 0; r < sc.routes.size(); ++r) {
    if (!in.on[r]) continue;
    for (std::size_t l : sc.routes[r].links) load[l] += in.x[r];
  }

  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    if (!in.active[s]) continue;
    const Source& src = sc.sources[s];
    const SourceAggregate agg = aggregate(sc, in, s);

    for (std::size_t r : src.routes) {
      if (!in.on[r]) continue;
      double price = 0.0;
      for (std::size_t l : sc.routes[r].links) price += in.p[l];
      const double rate_dot =
          gain(in.x[r], agg.max_rate) * (driver(src, cfg, sc.routes[r].access, in.x[r], agg) - price);
      const Mbps next = std::max(in.x[r] + dt * rate_dot, cfg.x_min);
      out.max_rate_change = std::max(out.max_rate_change, std::abs(next - in.x[r]) / dt);
      out.x[r] = next;
    }

    // Departures take effect at the end of this step.
    double fraction = 1.0;
    bool done = false;
    if (src.app.kind == AppSpec::Kind::FileTransfer) {
      const double remaining = src.app.amount - in.delivered[s];
      if (agg.total * dt >= remaining) {
        fraction = agg.total > 0.0 ? std::clamp(remaining / (agg.total * dt), 0.0, 1.0) : 0.0;
        done = true;
      }
    } else if (in.t + dt >= src.app.amount) {
      fraction = std::clamp((src.app.amount - in.t) / dt, 0.0, 1.0);
      done = true;
    }
    for (std::size_t r : src.routes) {
      if (!in.on[r]) continue;
      iface_rate[ctx.interface[r]] += in.x[r] * fraction;
      iface_on[ctx.interface[r]] = std::max(iface_on[ctx.interface[r]], fraction);
    }
    out.delivered[s] = in.delivered[s] + agg.total * dt * fraction;
    out.source_energy_j[s] = in.source_energy_j[s] + agg.power * dt * fraction * 1e-3;
    if (done) {
      if (src.app.kind == AppSpec::Kind::FileTransfer) out.delivered[s] = src.app.amount;
      out.completion[s] = in.t + fraction * dt;
      out.active[s] = false;
      for (std::size_t r : src.routes) {
        out.on[r] = false;
        out.x[r] = 0.0;
      }
    }
  }

  MilliWatt device_energy_rate = 0.0;
  for (std::size_t i = 0; i < ctx.interfaces.size(); ++i)
    device_energy_rate += ctx.interfaces[i].b * iface_rate[i] + ctx.interfaces[i].theta * iface_on[i];
  out.device_energy_j += device_energy_rate * dt * 1e-3;

  for (std::size_t l = 0; l < sc.links.size(); ++l) {
    const double next = in.p[l] + dt * ctx.gamma[l] * (load[l] - sc.links[l].capacity);
    out.p[l] = std::max(next, 0.0);
    out.max_price_change = std::max(out.max_price_change, std::abs(out.p[l] - in.p[l]) / dt);
  }

  for (std::size_t r = 0; r < sc.routes.size(); ++r) {
    if (!std::isfinite(out.x[r])) {
      std::ostringstream os;
      os << "non-finite rate on route '" << sc.routes[r].id << "' at t=" << out.t
         << " (previous rate " << in.x[r] << ")";
      throw NumericalBlowup(os.str());
    }
  }
  for (std::size_t l = 0; l < sc.links.size(); ++l) {
    if (!std::isfinite(out.p[l])) {
      std::ostringstream os;
      os << "non-finite price on link '" << sc.links[l].id << "' at t=" << out.t;
      throw NumericalBlowup(os.str());
    }
  }
}

// Capacity a route can carry: its access capacity or its tightest link.
Mbps route_capacity(const Scenario& sc, std::size_t r) {
  Mbps cap = sc.routes[r].access.c;
  for (std::size_t l : sc.routes[r].links) cap = std::min(cap, sc.links[l].capacity);
  return cap;
}

}  // namespace

const char* to_string(Controller c) {
  switch (c) {
    case Controller::SinglePath: return "single_path";
    case Controller::RegularMptcp: return "regular_mptcp";
    case Controller::EeRealtime: return "ee_realtime";
    case Controller::EeFileTransfer: return "ee_file_transfer";
  }
  return "unknown";
}

void Scenario::validate() const {
  for (const auto& l : links) {
    if (!(l.capacity > 0.0)) throw ScenarioError("link '" + l.id + "': capacity must be > 0");
    if (l.price_gain < 0.0) throw ScenarioError("link '" + l.id + "': price gain must be >= 0");
  }
  std::vector<int> owners(routes.size(), 0);
  for (const auto& r : routes) {
    if (r.links.empty()) throw ScenarioError("route '" + r.id + "' has no links");
    for (std::size_t l : r.links)
      if (l >= links.size()) throw ScenarioError("route '" + r.id + "' references a missing link");
    try {
      r.access.validate();
    } catch (const DomainError& e) {
      throw ScenarioError("route '" + r.id + "': " + e.what());
    }
  }
  for (const auto& s : sources) {
    if (s.routes.empty()) throw ScenarioError("source '" + s.id + "' has no routes");
    for (std::size_t r : s.routes) {
      if (r >= routes.size()) throw ScenarioError("source '" + s.id + "' references a missing route");
      if (++owners[r] > 1)
        throw ScenarioError("route '" + routes[r].id + "' is used by more than one source");
    }
    if (s.controller == Controller::SinglePath && s.routes.size() != 1)
      throw ScenarioError("single-path source '" + s.id + "' must have exactly one route");
    if (!(s.beta >= 0.0 && s.beta <= 1.0)) throw ScenarioError("source '" + s.id + "': beta must be in [0,1]");
    if (!(s.alpha_s >= 0.0)) throw ScenarioError("source '" + s.id + "': alpha_s must be >= 0");
    if (s.n_connections < 1) throw ScenarioError("source '" + s.id + "': n_connections must be >= 1");
    if (!(s.app.amount > 0.0)) throw ScenarioError("source '" + s.id + "': app amount must be > 0");
    if (s.fixed_selection) {
      for (std::size_t r : *s.fixed_selection)
        if (std::find(s.routes.begin(), s.routes.end(), r) == s.routes.end())
          throw ScenarioError("source '" + s.id + "': fixed selection names a foreign route");
    }
  }
}

void SimConfig::validate(const Scenario& sc) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ScenarioError("sim.dt must be > 0");
  if (!(horizon > 0.0)) throw ScenarioError("sim.horizon must be > 0");
  if (!(tol > 0.0)) throw ScenarioError("sim.tol must be > 0");
  if (!(x_min > 0.0)) throw ScenarioError("sim.x_min must be > 0");
  if (!(gamma_factor > 0.0)) throw ScenarioError("sim.gamma_default must be > 0");
  if (!(initial_rate > 0.0)) throw ScenarioError("sim.initial_rate must be > 0");
  if (trace_interval < 0.0) throw ScenarioError("sim.trace_interval must be >= 0");

  for (const auto& l : sc.links) {
    const double g = l.price_gain > 0.0 ? l.price_gain : gamma_factor / l.capacity;
    if (dt * g * l.capacity > kStiffnessLimit) {
      std::ostringstream os;
      os << "sim.dt=" << dt << " too large for link '" << l.id << "' (dt*gamma*c = " << dt * g * l.capacity
         << " > " << kStiffnessLimit << ")";
      throw ScenarioError(os.str());
    }
  }

  // Gain times utility curvature, evaluated at route capacities.
  for (const auto& s : sc.sources) {
    Mbps total = 0.0;
    Mbps widest = 0.0;
    MilliWatt full_power = 0.0;
    for (std::size_t r : s.routes) {
      total += route_capacity(sc, r);
      widest = std::max(widest, route_capacity(sc, r));
      full_power += power_on(sc.routes[r].access, route_capacity(sc, r));
    }
    for (std::size_t r : s.routes) {
      const Mbps cap = route_capacity(sc, r);
      const Mbps at = s.controller == Controller::SinglePath ? cap : total;
      const double stiffness = gain(cap, widest) * std::abs(s.utility.second_deriv(at));
      if (dt * stiffness > kStiffnessLimit) {
        std::ostringstream os;
        os << "sim.dt=" << dt << " too large for source '" << s.id << "' (gain*|U''| estimate "
           << stiffness << ", limit dt <= " << kStiffnessLimit / stiffness << ")";
        throw ScenarioError(os.str());
      }
      if (s.controller == Controller::EeFileTransfer) {
        // alpha * |d^2E/dx_r^2| = alpha * 2 |P - b_r X| / X^3 with every route at capacity.
        const double curvature = 2.0 * std::abs(full_power - sc.routes[r].access.b * total) / (total * total * total);
        const double energy_stiffness = gain(cap, widest) * s.alpha_s * curvature;
        if (dt * energy_stiffness > kEnergyStiffnessLimit) {
          std::ostringstream os;
          os << "sim.dt=" << dt << " too large for source '" << s.id << "' at alpha_s=" << s.alpha_s
             << " (gain*alpha*|E''| estimate " << energy_stiffness << ", limit dt <= "
             << kEnergyStiffnessLimit / energy_stiffness << ")";
          throw ScenarioError(os.str());
        }
      }
    }
  }
}

double regulation(Mbps x_r, Mbps x_max, double beta) { return beta * x_max / x_r + 1.0 - beta; }

double gain(Mbps x_r, Mbps x_max) { return 0.5 * x_r * (x_r + x_max); }

double energy_per_bit_gradient(std::span<const PathSpec> paths, std::span<const Mbps> rates,
                               std::size_t r) {
  Mbps total = 0.0;
  MilliWatt p = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    total += rates[i];
    p += power_on(paths[i], rates[i]);
  }
  if (!(total > 0.0)) throw DomainError("energy_per_bit_gradient: aggregate rate is zero");
  return paths[r].b / total - p / (total * total);
}

std::vector<bool> select_routes(const Scenario& sc) {
  std::vector<bool> on(sc.routes.size(), false);
  for (const auto& src : sc.sources) {
    if (src.fixed_selection) {
      for (std::size_t r : *src.fixed_selection) on[r] = true;
      continue;
    }
    if (src.controller == Controller::SinglePath || src.controller == Controller::RegularMptcp) {
      for (std::size_t r : src.routes) on[r] = true;
      continue;
    }
    Instance inst;
    for (std::size_t r : src.routes) inst.paths.push_back(sc.routes[r].access);
    inst.utility = src.utility;
    inst.alpha_s = src.alpha_s;
    inst.n_connections = src.n_connections;
    const Instance scaled = scale_for_n_connections(inst);
    const SelectionResult sel =
        src.controller == Controller::EeRealtime ? solve_psp1(scaled) : solve_psp2(scaled);
    for (std::size_t i = 0; i < src.routes.size(); ++i)
      if (sel.rates[i] > 0.0) on[src.routes[i]] = true;
  }
  return on;
}

SimState initial_state(const Scenario& sc, const SimConfig& cfg) {
  SimState st;
  st.on = select_routes(sc);
  st.x.assign(sc.routes.size(), 0.0);
  for (std::size_t r = 0; r < sc.routes.size(); ++r)
    if (st.on[r]) st.x[r] = std::min(cfg.initial_rate, route_capacity(sc, r));
  st.p.assign(sc.links.size(), 0.0);
  st.active.assign(sc.sources.size(), true);
  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    const auto& routes = sc.sources[s].routes;
    st.active[s] = std::any_of(routes.begin(), routes.end(), [&](std::size_t r) { return st.on[r]; });
  }
  st.delivered.assign(sc.sources.size(), 0.0);
  st.completion.assign(sc.sources.size(), kNaN);
  st.source_energy_j.assign(sc.sources.size(), 0.0);
  return st;
}

double phi(const Scenario& sc, const SimConfig& cfg, const SimState& st, std::size_t source,
           std::size_t route) {
  const SourceAggregate agg = aggregate(sc, st, source);
  return driver(sc.sources[source], cfg, sc.routes[route].access, st.x[route], agg);
}

SimState step(const Scenario& sc, const SimConfig& cfg, const SimState& st, Seconds dt) {
  if (!(dt > 0.0)) throw ScenarioError("step: dt must be > 0");
  const StepContext ctx(sc, cfg);
  std::vector<double> load(sc.links.size());
  std::vector<double> iface_rate(ctx.interfaces.size());
  std::vector<double> iface_on(ctx.interfaces.size());
  SimState out;
  step_into(sc, cfg, ctx, st, out, dt, load, iface_rate, iface_on);
  return out;
}

StabilityBound stability_bound(double beta, double alpha_s, Seconds tau,
                               std::span<const double> selected_b) {
  if (selected_b.empty()) throw DomainError("stability_bound: no selected paths");
  const double n = static_cast<double>(selected_b.size());
  if (n > 9.0) return {0.0, true};
  const auto [lo, hi] = std::minmax_element(selected_b.begin(), selected_b.end());
  const double spread = *hi - *lo;
  if (spread == 0.0 || alpha_s == 0.0) return {kInf, false};
  return {beta / (2.0 * alpha_s * tau * tau) * (9.0 / n - 1.0) / spread, false};
}

StabilityBound stability_bound(const Scenario& sc, std::size_t source, const std::vector<bool>& route_on) {
  const Source& src = sc.sources.at(source);
  if (src.controller != Controller::EeFileTransfer || src.utility.kind() != UtilityFunction::Kind::NewReno)
    throw DomainError("stability_bound applies to file-transfer sources with a NewReno utility");
  std::vector<double> b;
  for (std::size_t r : src.routes)
    if (route_on[r]) b.push_back(sc.routes[r].access.b);
  return stability_bound(src.beta, src.alpha_s, src.utility.tau(), b);
}

RunResult run(const Scenario& sc, const SimConfig& cfg) {
  sc.validate();
  cfg.validate(sc);
  const StepContext ctx(sc, cfg);
  const std::size_t n_src = sc.sources.size();

  RunResult res;
  SimState cur = initial_state(sc, cfg);
  SimState next = cur;
  const std::vector<bool> selected = cur.on;

  res.sources.resize(n_src);
  for (std::size_t s = 0; s < n_src; ++s) {
    SourceMetrics& m = res.sources[s];
    m.id = sc.sources[s].id;
    for (std::size_t r : sc.sources[s].routes)
      if (selected[r]) m.chosen_routes.push_back(sc.routes[r].id);
    if (sc.sources[s].controller == Controller::EeFileTransfer &&
        sc.sources[s].utility.kind() == UtilityFunction::Kind::NewReno && !m.chosen_routes.empty())
      m.stability = stability_bound(sc, s, selected);
  }

  // Snapshot of a source's rates and power while it was last active.
  const auto capture = [&](const SimState& st, std::size_t s) {
    SourceMetrics& m = res.sources[s];
    m.final_rates.clear();
    std::vector<PathSpec> paths;
    for (std::size_t r : sc.sources[s].routes) {
      if (!selected[r]) continue;
      m.final_rates.push_back(st.x[r]);
      paths.push_back(sc.routes[r].access);
    }
    const SourceAggregate agg = aggregate(sc, st, s);
    m.final_throughput = agg.total;
    m.final_power = agg.power;
    m.energy_per_bit = agg.total > 0.0
                           ? energy_per_bit(paths, m.final_rates, std::vector<bool>(paths.size(), true))
                           : kNaN;
  };

  if (cfg.trace_interval > 0.0) {
    res.trace.columns.push_back("t");
    for (const auto& r : sc.routes) res.trace.columns.push_back("x_" + r.id);
    for (const auto& l : sc.links) res.trace.columns.push_back("p_" + l.id);
    for (const auto& s : sc.sources) res.trace.columns.push_back("power_mw_" + s.id);
  }
  double next_trace = 0.0;
  const auto record = [&](const SimState& st) {
    std::vector<double> row{st.t};
    row.insert(row.end(), st.x.begin(), st.x.end());
    row.insert(row.end(), st.p.begin(), st.p.end());
    for (std::size_t s = 0; s < n_src; ++s) row.push_back(st.active[s] ? aggregate(sc, st, s).power : 0.0);
    res.trace.rows.push_back(std::move(row));
  };

  std::vector<double> load(sc.links.size());
  std::vector<double> iface_rate(ctx.interfaces.size());
  std::vector<double> iface_on(ctx.interfaces.size());
  std::size_t quiet_steps = 0;

  for (std::size_t s = 0; s < n_src; ++s)
    if (cur.active[s]) capture(cur, s);

  // Device energy over the first `frac` of the step from a to b; sources
  // that ended earlier in the step stop contributing at their completion.
  auto partial_device_energy = [&](const SimState& a, const SimState& b, double frac) {
    std::fill(iface_rate.begin(), iface_rate.end(), 0.0);
    std::fill(iface_on.begin(), iface_on.end(), 0.0);
    for (std::size_t r = 0; r < sc.routes.size(); ++r) {
      if (!a.on[r]) continue;
      const std::size_t o = ctx.owner[r];
      const double f = b.active[o] ? frac : std::min(frac, (b.completion[o] - a.t) / cfg.dt);
      iface_rate[ctx.interface[r]] += a.x[r] * f;
      iface_on[ctx.interface[r]] = std::max(iface_on[ctx.interface[r]], f);
    }
    double e = 0.0;
    for (std::size_t i = 0; i < ctx.interfaces.size(); ++i)
      e += ctx.interfaces[i].b * iface_rate[i] + ctx.interfaces[i].theta * iface_on[i];
    return e * cfg.dt * 1e-3;
  };

  while (true) {
    if (cfg.trace_interval > 0.0 && cur.t + 1e-12 >= next_trace) {
      record(cur);
      next_trace += cfg.trace_interval;
    }
    if (std::none_of(cur.active.begin(), cur.active.end(), [](bool a) { return a; })) {
      res.converged = true;
      break;
    }
    if (cur.t >= cfg.horizon - 1e-12) break;

    step_into(sc, cfg, ctx, cur, next, cfg.dt, load, iface_rate, iface_on);
    ++res.steps;

    for (std::size_t s = 0; s < n_src; ++s) {
      if (cur.active[s] && !next.active[s]) {
        SourceMetrics& m = res.sources[s];
        capture(cur, s);
        const double frac = (next.completion[s] - cur.t) / cfg.dt;
        m.device_energy_at_completion_j = cur.device_energy_j + partial_device_energy(cur, next, frac);
        m.delivered_at_completion.resize(n_src);
        for (std::size_t j = 0; j < n_src; ++j)
          m.delivered_at_completion[j] = cur.delivered[j] + (next.delivered[j] - cur.delivered[j]) * frac;
        m.delivered_at_completion[s] = next.delivered[s];
      }
      if (next.active[s] && std::isfinite(res.sources[s].stability.value) &&
          !res.sources[s].stability_exceeded) {
        Mbps widest = 0.0;
        for (std::size_t r : sc.sources[s].routes)
          if (next.on[r]) widest = std::max(widest, next.x[r]);
        if (widest > res.sources[s].stability.value) {
          res.sources[s].stability_exceeded = true;
          res.warnings.push_back("source '" + sc.sources[s].id + "' exceeds its stability bound (" +
                                 fmt6(widest) + " > " + fmt6(res.sources[s].stability.value) +
                                 " Mbps) at t=" + fmt6(next.t));
        }
      }
    }
    std::swap(cur, next);

    const bool endless_only = std::none_of(sc.sources.begin(), sc.sources.end(), [&](const Source& s) {
      const auto idx = static_cast<std::size_t>(&s - sc.sources.data());
      return cur.active[idx] && s.app.finite();
    });
    if (endless_only) {
      quiet_steps = cur.max_rate_change < cfg.tol && cur.max_price_change < cfg.tol ? quiet_steps + 1 : 0;
      if (quiet_steps >= cfg.hold_steps) {
        res.converged = true;
        break;
      }
    }
  }

  if (cfg.trace_interval > 0.0 && (res.trace.rows.empty() || res.trace.rows.back()[0] != cur.t)) record(cur);

  for (std::size_t s = 0; s < n_src; ++s) {
    SourceMetrics& m = res.sources[s];
    if (cur.active[s]) capture(cur, s);
    m.energy_j = cur.source_energy_j[s];
    m.completion_time = cur.completion[s];
    const Seconds lifetime = std::isnan(cur.completion[s]) ? cur.t : cur.completion[s];
    m.mean_throughput = lifetime > 0.0 ? cur.delivered[s] / lifetime : 0.0;
  }
  res.t_end = cur.t;
  res.device_energy_j = cur.device_energy_j;
  res.final_state = std::move(cur);
  return res;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << csv_line(trace.columns) << '\n';
  std::vector<std::string> fields;
  for (const auto& row : trace.rows) {
    fields.clear();
    for (double v : row) fields.push_back(fmt6(v));
    out << csv_line(fields) << '\n';
  }
}

}  // namespace eemptcp
