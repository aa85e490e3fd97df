#include "eemptcp/path_selection.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>

namespace eemptcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxPsp1BruteForce = 12;
constexpr std::size_t kMaxPsp2BruteForce = 8;
constexpr double kGoldenTol = 1e-10;

std::vector<std::string> positive_ids(const Instance& inst, const RateVector& rates) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rates.size(); ++i)
    if (rates[i] > 0.0) ids.push_back(inst.paths[i].id);
  return ids;
}

// U at an aggregate that may be zero.
double utility_at(const UtilityFunction& u, Mbps x) {
  return x > 0.0 ? u.value(x) : u.value_at_zero();
}

// Fills `subset` (already sorted by marginal cost) in order: each path takes
// what is left of the target aggregate (U')^{-1}(alpha * cost), clamped to
// [0, c]. Returns the aggregate.
template <typename CostFn>
Mbps waterfill(const Instance& inst, const std::vector<std::size_t>& subset, CostFn cost,
               RateVector& rates) {
  Mbps filled = 0.0;
  for (std::size_t i : subset) {
    const PathSpec& p = inst.paths[i];
    const Mbps target = inst.utility.deriv_inv(inst.alpha_s * cost(p));
    const Mbps x = std::clamp(target - filled, 0.0, p.c);
    rates[i] = x;
    filled += x;
  }
  return filled;
}

// Maximizes f on [lo, hi] assuming a single interior peak; endpoints are the
// caller's concern.
template <typename F>
std::pair<double, double> golden_section_max(F f, double lo, double hi) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > kGoldenTol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace

void Instance::validate() const {
  if (paths.empty()) throw DomainError("instance needs at least one path");
  for (const auto& p : paths) p.validate();
  if (!(alpha_s >= 0.0) || !std::isfinite(alpha_s)) throw DomainError("alpha_s must be >= 0");
  if (n_connections < 1) throw DomainError("n_connections must be >= 1");
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::None: return "none";
    case Algorithm::Psp1Greedy: return "psp1-greedy";
    case Algorithm::Psp1TwoPath: return "psp1-two-path";
    case Algorithm::Psp1BruteForce: return "psp1-bruteforce";
    case Algorithm::Psp2Prefix: return "psp2-prefix";
    case Algorithm::Psp2BruteForce: return "psp2-bruteforce";
  }
  return "unknown";
}

bool SelectionResult::is_chosen(const std::string& id) const {
  return std::find(chosen.begin(), chosen.end(), id) != chosen.end();
}

std::vector<std::size_t> order_by_b_prime(const std::vector<PathSpec>& paths) {
  std::vector<std::size_t> order(paths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return paths[i].b_prime() < paths[j].b_prime();
  });
  return order;
}

double psp1_objective(const Instance& inst, const RateVector& rates) {
  double aggregate = 0.0;
  double total_power = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    aggregate += rates[i];
    total_power += power(inst.paths[i], rates[i]);
  }
  return utility_at(inst.utility, aggregate) - inst.alpha_s * total_power;
}

double psp2_objective(const Instance& inst, const RateVector& rates) {
  double aggregate = 0.0;
  double total_power = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    aggregate += rates[i];
    total_power += power(inst.paths[i], rates[i]);
  }
  if (aggregate == 0.0) return inst.utility.value_at_zero();
  return inst.utility.value(aggregate) - inst.alpha_s * total_power / aggregate;
}

SelectionResult solve_psp1_greedy(const Instance& inst) {
  inst.validate();
  const auto& paths = inst.paths;
  const double a = inst.alpha_s;

  SelectionResult res;
  res.algorithm = Algorithm::Psp1Greedy;
  res.order = order_by_b_prime(paths);

  Mbps before = 0.0;        // capacity of the full prefix 1..k-1
  double full_power = 0.0;  // sum of z_i c_i over the full prefix
  std::vector<Mbps> prefix_rate;
  for (std::size_t i : res.order) {
    const PathSpec& p = paths[i];
    const Mbps through = before + p.c;
    const Mbps raw = std::min(inst.utility.deriv_inv(a * p.b), through);
    const Mbps floored = std::max(raw, before);
    res.prefix_objectives.push_back(utility_at(inst.utility, floored) -
                                    a * (full_power + p.theta + p.b * (floored - before)));
    res.prefix_objectives_unclamped.push_back(utility_at(inst.utility, raw) -
                                              a * (full_power + p.theta + p.b * (raw - before)));
    prefix_rate.push_back(raw >= through ? p.c : floored - before);
    before = through;
    full_power += p.b * p.c + p.theta;
  }

  const auto best = std::max_element(res.prefix_objectives.begin(), res.prefix_objectives.end());
  const std::size_t k = static_cast<std::size_t>(best - res.prefix_objectives.begin());

  res.rates.assign(paths.size(), 0.0);
  if (!(inst.utility.bounded_below() && inst.utility.value_at_zero() >= *best)) {
    for (std::size_t pos = 0; pos < k; ++pos) res.rates[res.order[pos]] = paths[res.order[pos]].c;
    res.rates[res.order[k]] = std::clamp(prefix_rate[k], 0.0, paths[res.order[k]].c);
  }
  res.chosen = positive_ids(inst, res.rates);
  res.objective = psp1_objective(inst, res.rates);
  res.upper_bound = rpsp1_waterfill(inst).upper_bound;
  res.gap_certificate = gap_certificate_psp1(inst, res);
  return res;
}

SelectionResult solve_psp1_two_path(const Instance& inst) {
  if (inst.paths.size() != 2) throw ArityError("two-path solver needs exactly 2 paths");
  inst.validate();
  const double a = inst.alpha_s;
  // first = smaller b
  const std::size_t lo = inst.paths[1].b < inst.paths[0].b ? 1 : 0;
  const std::size_t hi = 1 - lo;
  const PathSpec& p1 = inst.paths[lo];
  const PathSpec& p2 = inst.paths[hi];
  const Mbps t1 = inst.utility.deriv_inv(a * p1.b);
  const Mbps t2 = inst.utility.deriv_inv(a * p2.b);

  const std::pair<Mbps, Mbps> candidates[] = {
      {std::min(p1.c, t1), 0.0},
      {0.0, std::min(p2.c, t2)},
      {p1.c, std::min(std::max(t2 - p1.c, 0.0), p2.c)},
  };

  SelectionResult res;
  res.algorithm = Algorithm::Psp1TwoPath;
  res.objective = -kInf;
  RateVector rates(2, 0.0);
  for (const auto& [x1, x2] : candidates) {
    rates[lo] = x1;
    rates[hi] = x2;
    const double value = psp1_objective(inst, rates);
    if (value > res.objective) {
      res.objective = value;
      res.rates = rates;
    }
  }
  if (inst.utility.bounded_below() && inst.utility.value_at_zero() > res.objective) {
    res.rates.assign(2, 0.0);
    res.objective = inst.utility.value_at_zero();
  }
  res.chosen = positive_ids(inst, res.rates);
  res.upper_bound = rpsp1_waterfill(inst).upper_bound;
  return res;
}

SelectionResult solve_psp1_bruteforce(const Instance& inst) {
  inst.validate();
  const std::size_t n = inst.paths.size();
  if (n > kMaxPsp1BruteForce) throw SizeError("psp1 brute force supports at most 12 paths");

  SelectionResult res;
  res.algorithm = Algorithm::Psp1BruteForce;
  res.rates.assign(n, 0.0);
  res.objective = inst.utility.value_at_zero();

  const auto by_b = [&](std::size_t i, std::size_t j) { return inst.paths[i].b < inst.paths[j].b; };
  RateVector rates(n);
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) subset.push_back(i);
    std::stable_sort(subset.begin(), subset.end(), by_b);

    std::fill(rates.begin(), rates.end(), 0.0);
    const Mbps aggregate = waterfill(inst, subset, [](const PathSpec& p) { return p.b; }, rates);
    // Every path of the subset is on, even if water-filling left it empty.
    double total_power = 0.0;
    for (std::size_t i : subset) total_power += power_on(inst.paths[i], rates[i]);
    const double value = utility_at(inst.utility, aggregate) - inst.alpha_s * total_power;
    if (value > res.objective) {
      res.objective = value;
      res.rates = rates;
    }
  }
  res.objective = psp1_objective(inst, res.rates);
  res.chosen = positive_ids(inst, res.rates);
  res.upper_bound = rpsp1_waterfill(inst).upper_bound;
  return res;
}

SelectionResult solve_psp1(const Instance& inst) {
  switch (inst.paths.size()) {
    case 1: return solve_psp1_bruteforce(inst);
    case 2: return solve_psp1_two_path(inst);
    default: return solve_psp1_greedy(inst);
  }
}

WaterfillResult rpsp1_waterfill(const Instance& inst) {
  inst.validate();
  WaterfillResult res;
  res.order = order_by_b_prime(inst.paths);
  res.rates.assign(inst.paths.size(), 0.0);
  const Mbps aggregate =
      waterfill(inst, res.order, [](const PathSpec& p) { return p.b_prime(); }, res.rates);

  double relaxed_cost = 0.0;
  for (std::size_t pos = 0; pos < res.order.size(); ++pos) {
    const std::size_t i = res.order[pos];
    relaxed_cost += inst.paths[i].b_prime() * res.rates[i];
    if (!res.partial_position && res.rates[i] < inst.paths[i].c) res.partial_position = pos;
  }
  res.upper_bound = utility_at(inst.utility, aggregate) - inst.alpha_s * relaxed_cost;
  return res;
}

double gap_certificate_psp1(const Instance& inst, const SelectionResult& /*greedy*/) {
  // The certificate bounds O* - max(O_khat, O_khat-1), and the greedy value
  // is at least that maximum, so it only depends on the relaxation.
  const WaterfillResult relaxed = rpsp1_waterfill(inst);
  if (!relaxed.partial_position) return 0.0;

  const std::size_t pos = *relaxed.partial_position;
  const std::size_t khat = relaxed.order[pos];
  const PathSpec& p = inst.paths[khat];
  const Mbps partial = relaxed.rates[khat];

  Mbps filled_before = 0.0;
  for (std::size_t j = 0; j < pos; ++j) filled_before += inst.paths[relaxed.order[j]].c;

  const double sunk_bound = inst.alpha_s * p.theta * (1.0 - partial / p.c);
  double area_bound = kInf;
  if (pos > 0) {
    area_bound = 0.5 * partial * (inst.utility.deriv(filled_before) - inst.alpha_s * p.b_prime());
  }
  return std::max(0.0, std::min(sunk_bound, area_bound));
}

SelectionResult solve_psp2(const Instance& inst) {
  inst.validate();
  SelectionResult res;
  res.algorithm = Algorithm::Psp2Prefix;
  res.order = order_by_b_prime(inst.paths);

  Mbps capacity = 0.0;
  double full_power = 0.0;
  for (std::size_t i : res.order) {
    const PathSpec& p = inst.paths[i];
    capacity += p.c;
    full_power += p.b * p.c + p.theta;
    res.prefix_objectives.push_back(inst.utility.value(capacity) -
                                    inst.alpha_s * full_power / capacity);
  }

  const auto best = std::max_element(res.prefix_objectives.begin(), res.prefix_objectives.end());
  const std::size_t k = static_cast<std::size_t>(best - res.prefix_objectives.begin());
  res.rates.assign(inst.paths.size(), 0.0);
  if (inst.utility.bounded_below() && inst.utility.value_at_zero() > *best) {
    res.objective = inst.utility.value_at_zero();
  } else {
    for (std::size_t pos = 0; pos <= k; ++pos) res.rates[res.order[pos]] = inst.paths[res.order[pos]].c;
    res.objective = *best;
  }
  res.chosen = positive_ids(inst, res.rates);
  res.upper_bound = std::max(*best, inst.utility.value_at_zero());
  res.gap_certificate = std::max(0.0, res.upper_bound - res.objective);
  return res;
}

SelectionResult solve_psp2_bruteforce(const Instance& inst) {
  inst.validate();
  const std::size_t n = inst.paths.size();
  if (n > kMaxPsp2BruteForce) throw SizeError("psp2 brute force supports at most 8 paths");

  SelectionResult res;
  res.algorithm = Algorithm::Psp2BruteForce;
  res.rates.assign(n, 0.0);
  res.objective = inst.utility.value_at_zero();

  RateVector rates(n);
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::fill(rates.begin(), rates.end(), 0.0);
    Mbps capacity = 0.0;
    double full_power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      rates[i] = inst.paths[i].c;
      capacity += inst.paths[i].c;
      full_power += inst.paths[i].b * inst.paths[i].c + inst.paths[i].theta;
    }
    const double all_full = inst.utility.value(capacity) - inst.alpha_s * full_power / capacity;
    if (all_full > res.objective) {
      res.objective = all_full;
      res.rates = rates;
    }

    // One path of the subset runs below capacity.
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      const PathSpec& p = inst.paths[i];
      const Mbps rest = capacity - p.c;
      const double rest_power = full_power - (p.b * p.c + p.theta);
      const auto f = [&](Mbps t) {
        return inst.utility.value(rest + t) - inst.alpha_s * (rest_power + p.b * t + p.theta) / (rest + t);
      };
      const auto [t, value] = golden_section_max(f, rest > 0.0 ? 0.0 : kGoldenTol, p.c);
      if (value > res.objective) {
        res.objective = value;
        res.rates = rates;
        res.rates[i] = t;
      }
    }
  }
  res.chosen = positive_ids(inst, res.rates);
  res.upper_bound = rpsp2_upper_bound(inst);
  return res;
}

double rpsp2_upper_bound(const Instance& inst) {
  inst.validate();
  Mbps capacity = 0.0;
  double relaxed_cost = 0.0;
  double best = inst.utility.value_at_zero();
  for (std::size_t i : order_by_b_prime(inst.paths)) {
    const PathSpec& p = inst.paths[i];
    capacity += p.c;
    relaxed_cost += p.b_prime() * p.c;
    best = std::max(best, inst.utility.value(capacity) - inst.alpha_s * relaxed_cost / capacity);
  }
  return best;
}

Instance scale_for_n_connections(const Instance& inst) {
  inst.validate();
  if (inst.n_connections == 1) return inst;
  const double n = inst.n_connections;
  Instance out = inst;
  for (auto& p : out.paths) p.c /= n;
  out.utility = inst.utility.scaled(n);
  out.n_connections = 1;
  return out;
}

std::vector<std::size_t> min_theta_paths(const std::vector<PathSpec>& paths) {
  std::vector<std::size_t> out;
  double best = kInf;
  for (const auto& p : paths) best = std::min(best, p.theta);
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (paths[i].theta == best) out.push_back(i);
  return out;
}

std::vector<std::size_t> min_b_prime_paths(const std::vector<PathSpec>& paths) {
  std::vector<std::size_t> out;
  double best = kInf;
  for (const auto& p : paths) best = std::min(best, p.b_prime());
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (paths[i].b_prime() == best) out.push_back(i);
  return out;
}

}  // namespace eemptcp
