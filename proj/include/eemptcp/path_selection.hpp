#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eemptcp/energy_model.hpp"

namespace eemptcp {

/// Wrong number of paths for a solver that needs a fixed arity.
class ArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Instance too large for an exhaustive solver.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One source's path-selection problem.
struct Instance {
  std::vector<PathSpec> paths;
  UtilityFunction utility = UtilityFunction::log();
  double alpha_s = 0.0;  ///< utility units per mW
  int n_connections = 1;

  void validate() const;
};

enum class Algorithm {
  None,
  Psp1Greedy,
  Psp1TwoPath,
  Psp1BruteForce,
  Psp2Prefix,
  Psp2BruteForce,
};

const char* to_string(Algorithm a);

struct SelectionResult {
  std::vector<std::string> chosen;  ///< ids of paths with positive rate, input order
  RateVector rates;                 ///< aligned with Instance::paths
  double objective = 0.0;
  double upper_bound = 0.0;
  double gap_certificate = 0.0;
  Algorithm algorithm = Algorithm::None;

  /// Prefix scan details for the greedy and prefix solvers (empty otherwise).
  /// `order` lists path indices by ascending b' (ties by input index).
  std::vector<std::size_t> order;
  std::vector<double> prefix_objectives;
  /// Greedy only: O_k without flooring x_k at the previous prefix capacity.
  std::vector<double> prefix_objectives_unclamped;

  bool is_chosen(const std::string& id) const;
};

/// Path indices sorted by b' = b + theta / c, stable on ties.
std::vector<std::size_t> order_by_b_prime(const std::vector<PathSpec>& paths);

/// U(sum x) - alpha_s * sum P_r(x_r), off interfaces paying nothing.
double psp1_objective(const Instance& inst, const RateVector& rates);

/// U(sum x) - alpha_s * sum P_r(x_r) / sum x; U(0) when every rate is zero.
double psp2_objective(const Instance& inst, const RateVector& rates);

/// Prefix greedy over the b'-ordered paths (instantaneous power objective).
SelectionResult solve_psp1_greedy(const Instance& inst);

/// Exact solver for two paths: best of the three KKT candidates.
/// Throws ArityError unless the instance has exactly two paths.
SelectionResult solve_psp1_two_path(const Instance& inst);

/// Exhaustive subset enumeration with water-filling inside each subset.
/// Throws SizeError above 12 paths.
SelectionResult solve_psp1_bruteforce(const Instance& inst);

/// Exact for one or two paths, greedy otherwise.
SelectionResult solve_psp1(const Instance& inst);

struct WaterfillResult {
  RateVector rates;
  double upper_bound = 0.0;
  /// Position in b' order of the first path not filled to capacity.
  std::optional<std::size_t> partial_position;
  std::vector<std::size_t> order;
};

/// Optimum of the continuous relaxation where P_r(x) is replaced by b'_r x.
WaterfillResult rpsp1_waterfill(const Instance& inst);

/// Closed-form bound on (exact optimum - greedy objective); never below zero.
double gap_certificate_psp1(const Instance& inst, const SelectionResult& greedy);

/// Prefix scan over the b'-ordered paths (energy-per-bit objective), every
/// chosen path at full capacity. Exact when the utility satisfies C2.
SelectionResult solve_psp2(const Instance& inst);

/// Exhaustive search over (subset, partial path, partial rate) with a
/// golden-section line search. Throws SizeError above 8 paths.
SelectionResult solve_psp2_bruteforce(const Instance& inst);

/// Best prefix value of the relaxed energy-per-bit objective.
double rpsp2_upper_bound(const Instance& inst);

/// Instance for N connections sharing the device: capacities c / N and the
/// utility multiplied by N. n_connections is reset to 1 on the result.
Instance scale_for_n_connections(const Instance& inst);

/// S1: indices of paths with minimal theta.
std::vector<std::size_t> min_theta_paths(const std::vector<PathSpec>& paths);
/// S2: indices of paths with minimal b'.
std::vector<std::size_t> min_b_prime_paths(const std::vector<PathSpec>& paths);

}  // namespace eemptcp
