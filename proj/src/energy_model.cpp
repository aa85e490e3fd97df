#include "eemptcp/energy_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace eemptcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rates accumulated from capacity sums may overshoot c by a few ulps.
constexpr double kCapacitySlack = 1e-12;

void require_positive(Mbps x, const char* what) {
  if (!(x > 0.0)) {
    std::ostringstream os;
    os << what << " requires a positive rate, got " << x;
    throw DomainError(os.str());
  }
}

}  // namespace

void PathSpec::validate() const {
  if (!(b >= 0.0) || !std::isfinite(b)) throw DomainError("path '" + id + "': b must be >= 0");
  if (!(theta >= 0.0) || !std::isfinite(theta))
    throw DomainError("path '" + id + "': theta must be >= 0");
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("path '" + id + "': c must be > 0");
}

MilliWatt power(const PathSpec& path, Mbps x) {
  if (x < 0.0 || x > path.c * (1.0 + kCapacitySlack) || std::isnan(x)) {
    std::ostringstream os;
    os << "rate " << x << " outside [0, " << path.c << "] on path '" << path.id << "'";
    throw DomainError(os.str());
  }
  if (x == 0.0) return 0.0;
  return path.b * x + path.theta;
}

MilliJoulePerMbit energy_per_bit(std::span<const PathSpec> paths, std::span<const Mbps> rates) {
  if (paths.size() != rates.size()) throw DomainError("energy_per_bit: size mismatch");
  double total_power = 0.0;
  double aggregate = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    total_power += power(paths[i], rates[i]);
    aggregate += rates[i];
  }
  if (!(aggregate > 0.0)) throw DomainError("energy_per_bit: aggregate rate is zero");
  return total_power / aggregate;
}

MilliJoulePerMbit energy_per_bit(std::span<const PathSpec> paths, std::span<const Mbps> rates,
                                 const std::vector<bool>& on) {
  if (paths.size() != rates.size() || paths.size() != on.size())
    throw DomainError("energy_per_bit: size mismatch");
  double total_power = 0.0;
  double aggregate = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (on[i]) {
      if (rates[i] < 0.0) throw DomainError("energy_per_bit: negative rate");
      total_power += power_on(paths[i], rates[i]);
    } else {
      total_power += power(paths[i], rates[i]);
    }
    aggregate += rates[i];
  }
  if (!(aggregate > 0.0)) throw DomainError("energy_per_bit: aggregate rate is zero");
  return total_power / aggregate;
}

UtilityFunction UtilityFunction::alpha_fair(double alpha, double gamma) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha-fair: alpha must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("alpha-fair: gamma must be > 0");
  return {Kind::AlphaFair, alpha, gamma, 0.0};
}

UtilityFunction UtilityFunction::new_reno(Seconds tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("newreno: tau must be > 0");
  return {Kind::NewReno, 2.0, 2.0 / (tau * tau), tau};
}

UtilityFunction UtilityFunction::log(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("log utility: gamma must be > 0");
  return {Kind::Log, 1.0, gamma, 0.0};
}

double UtilityFunction::value(Mbps x) const {
  require_positive(x, "U(x)");
  if (alpha_ == 1.0) return gamma_ * std::log(x);
  return gamma_ * std::pow(x, 1.0 - alpha_) / (1.0 - alpha_);
}

double UtilityFunction::deriv(Mbps x) const {
  require_positive(x, "U'(x)");
  if (alpha_ == 0.0) return gamma_;
  if (alpha_ == 1.0) return gamma_ / x;
  if (alpha_ == 2.0) return gamma_ / (x * x);
  return gamma_ * std::pow(x, -alpha_);
}

double UtilityFunction::second_deriv(Mbps x) const {
  require_positive(x, "U''(x)");
  return -alpha_ * gamma_ * std::pow(x, -alpha_ - 1.0);
}

Mbps UtilityFunction::deriv_inv(double m) const {
  if (std::isnan(m)) throw DomainError("deriv_inv: NaN marginal utility");
  if (m <= 0.0) return kInf;
  if (alpha_ == 0.0) return m < gamma_ ? kInf : 0.0;
  if (alpha_ == 1.0) return gamma_ / m;
  if (alpha_ == 2.0) return std::sqrt(gamma_ / m);
  return std::pow(gamma_ / m, 1.0 / alpha_);
}

double UtilityFunction::value_at_zero() const { return alpha_ < 1.0 ? 0.0 : -kInf; }

UtilityFunction UtilityFunction::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw DomainError("utility scale must be > 0");
  UtilityFunction out = *this;
  out.gamma_ *= factor;
  return out;
}

std::string UtilityFunction::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::AlphaFair:
      os << "alpha_fair(alpha=" << alpha_ << ", gamma=" << gamma_ << ")";
      break;
    case Kind::NewReno:
      os << "newreno(tau=" << tau_ << ", gamma=" << gamma_ << ")";
      break;
    case Kind::Log:
      os << "log(gamma=" << gamma_ << ")";
      break;
  }
  return os.str();
}

bool check_c1(const UtilityFunction& u) { return u.alpha() > 0.0 && u.gamma() > 0.0; }

bool check_c2(const UtilityFunction& u) {
  if (u.kind() == UtilityFunction::Kind::AlphaFair) return u.alpha() <= 2.0;
  return check_c2_numeric(u);
}

bool check_c2_numeric(const UtilityFunction& u) {
  constexpr int kPoints = 1000;
  const double lo = std::log(1e-6);
  const double hi = std::log(1e6);
  double prev = -kInf;
  for (int i = 0; i < kPoints; ++i) {
    const double x = std::exp(lo + (hi - lo) * i / (kPoints - 1));
    const double g = x * x * u.deriv(x);
    if (g < prev * (1.0 - 1e-12)) return false;
    prev = g;
  }
  return true;
}

}  // namespace eemptcp
