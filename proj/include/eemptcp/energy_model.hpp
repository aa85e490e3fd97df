#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eemptcp {

// Units are fixed across the library: rates in Mbps, power in mW, time in
// seconds. 1 mW/Mbps is exactly 1 mJ/Mb.
using Mbps = double;
using MilliWatt = double;
using Seconds = double;
using MilliJoulePerMbit = double;

/// Thrown when an argument lies outside the domain of a formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Power profile of one access interface: P(x) = b*x + theta for x > 0 and
/// P(0) = 0 (interface off).
struct PathSpec {
  std::string id;
  double b = 0.0;         ///< marginal power, mW per Mbps
  MilliWatt theta = 0.0;  ///< sunk power paid whenever the interface is on
  Mbps c = 1.0;           ///< access capacity

  /// Effective per-bit cost at full capacity, b + theta / c.
  double b_prime() const { return b + theta / c; }

  /// Throws DomainError if b < 0, theta < 0 or c <= 0.
  void validate() const;
};

/// Per-path rates, aligned with the path list they were computed for.
using RateVector = std::vector<Mbps>;

/// Power drawn by `path` at rate `x`; zero when the interface is off (x == 0).
/// Throws DomainError for x < 0 or x > c.
MilliWatt power(const PathSpec& path, Mbps x);

/// Power of an interface that is on, regardless of rate: b*x + theta. No
/// capacity check; used for transient simulator states.
inline MilliWatt power_on(const PathSpec& path, Mbps x) { return path.b * x + path.theta; }

/// Sum of power(path_i, rates_i) divided by the aggregate rate.
/// Throws DomainError if the aggregate is zero or sizes differ.
MilliJoulePerMbit energy_per_bit(std::span<const PathSpec> paths, std::span<const Mbps> rates);

/// Same ratio, but interfaces flagged in `on` pay theta even at zero rate.
MilliJoulePerMbit energy_per_bit(std::span<const PathSpec> paths, std::span<const Mbps> rates,
                                 const std::vector<bool>& on);

/// Concave increasing utility of an aggregate rate (in Mbps).
///
/// Every supported kind is a member of the alpha-fair family
/// U(x) = gamma * x^(1-alpha) / (1-alpha) (log when alpha == 1):
///   - AlphaFair(alpha, gamma)
///   - NewReno(tau), stored as U(x) = -2 / (tau^2 x), i.e. alpha = 2, gamma = 2 / tau^2
///   - Log(gamma) = gamma * ln(x)
class UtilityFunction {
 public:
  enum class Kind { AlphaFair, NewReno, Log };

  static UtilityFunction alpha_fair(double alpha, double gamma = 1.0);
  static UtilityFunction new_reno(Seconds tau);
  static UtilityFunction log(double gamma = 1.0);

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  /// Round-trip time for NewReno utilities, 0 otherwise.
  Seconds tau() const { return tau_; }

  /// U(x). Throws DomainError for x <= 0.
  double value(Mbps x) const;
  /// U'(x). Throws DomainError for x <= 0.
  double deriv(Mbps x) const;
  /// U''(x). Throws DomainError for x <= 0.
  double second_deriv(Mbps x) const;
  /// Unique x with U'(x) = m. Returns +infinity when no finite rate reaches
  /// marginal utility m (m <= 0, or m below the infimum of U').
  Mbps deriv_inv(double m) const;

  /// lim_{x -> 0+} U(x); -infinity when alpha >= 1.
  double value_at_zero() const;
  bool bounded_below() const { return alpha_ < 1.0; }

  /// The same utility multiplied by `factor` > 0.
  UtilityFunction scaled(double factor) const;

  std::string describe() const;

 private:
  UtilityFunction(Kind kind, double alpha, double gamma, Seconds tau)
      : kind_(kind), alpha_(alpha), gamma_(gamma), tau_(tau) {}

  Kind kind_;
  double alpha_;
  double gamma_;
  Seconds tau_;
};

inline double utility_eval(const UtilityFunction& u, Mbps x) { return u.value(x); }
inline double utility_deriv(const UtilityFunction& u, Mbps x) { return u.deriv(x); }
inline Mbps utility_deriv_inv(const UtilityFunction& u, double m) { return u.deriv_inv(m); }

/// C1: strictly increasing and strictly concave on (0, inf).
bool check_c1(const UtilityFunction& u);

/// C2: x^2 U'(x) nondecreasing. Closed form for AlphaFair (alpha <= 2),
/// grid check for the other kinds.
bool check_c2(const UtilityFunction& u);

/// Grid check of C2 on 1000 log-spaced points in [1e-6, 1e6] Mbps.
bool check_c2_numeric(const UtilityFunction& u);

}  // namespace eemptcp
