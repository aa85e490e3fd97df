#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "eemptcp/energy_model.hpp"

namespace testing_support {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<eemptcp::PathSpec> random_paths(Rng& rng, int n, double lo = 0.1, double hi = 10.0) {
  std::vector<eemptcp::PathSpec> out;
  for (int i = 0; i < n; ++i)
    out.push_back({"p" + std::to_string(i), uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)});
  return out;
}

// Solves U'(x) = m by bisection on a log scale; U' is decreasing.
inline double bisect_deriv_inv(const eemptcp::UtilityFunction& u, double m) {
  double lo = 1e-12, hi = 1e12;
  for (int i = 0; i < 400; ++i) {
    const double mid = std::sqrt(lo * hi);
    (u.deriv(mid) > m ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing_support
