#pragma once

// Sample-based tail risk measures.
//
// Inputs are returns; every measure is reported on losses L = -r, so a
// positive number is money (or return) at risk. `alpha` is a confidence
// level: alpha = 0.95 looks at the worst 5% of outcomes.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "sayo/error.hpp"

namespace sayo {

template <typename Scalar>
class SortedLosses {
 public:
  template <typename Derived>
  explicit SortedLosses(const Eigen::DenseBase<Derived>& returns) : losses_(returns.size()) {
    require(returns.size() >= 2, ErrorCode::precondition, "risk measures need at least 2 samples");
    for (Eigen::Index j = 0; j < returns.size(); ++j) losses_[j] = -returns.derived().coeff(j);
    require(losses_.allFinite(), ErrorCode::parameter, "returns must be finite");
    std::sort(losses_.begin(), losses_.end());
  }

  Eigen::Index size() const { return losses_.size(); }
  const Eigen::Array<Scalar, Eigen::Dynamic, 1>& ascending() const { return losses_; }
  Scalar min() const { return losses_[0]; }
  Scalar max() const { return losses_[losses_.size() - 1]; }

 private:
  Eigen::Array<Scalar, Eigen::Dynamic, 1> losses_;
};

namespace detail {

template <typename Scalar>
void check_alpha(Scalar alpha) {
  require(alpha > Scalar(0) && alpha < Scalar(1), ErrorCode::parameter, "alpha must lie in (0, 1)");
}

}  // namespace detail

// Empirical alpha-quantile of losses interpolated at 1-based rank (n-1)*alpha + 1.
template <typename Scalar>
Scalar value_at_risk(const SortedLosses<Scalar>& losses, Scalar alpha) {
  detail::check_alpha(alpha);
  const auto& l = losses.ascending();
  const Scalar h = Scalar(losses.size() - 1) * alpha;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo + 1 >= losses.size()) return l[losses.size() - 1];
  const Scalar frac = h - Scalar(lo);
  return l[lo] + frac * (l[lo + 1] - l[lo]);
}

// Rockafellar-Uryasev tail mean: the worst n*(1-alpha) losses, the boundary
// order statistic carrying the fractional remainder of the mass.
template <typename Scalar>
Scalar conditional_value_at_risk(const SortedLosses<Scalar>& losses, Scalar alpha) {
  const Scalar var = value_at_risk(losses, alpha);
  const auto& l = losses.ascending();
  const Eigen::Index n = losses.size();
  const Scalar mass = Scalar(n) * (Scalar(1) - alpha);
  const auto whole = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(mass)), n);
  const Scalar remainder = mass - Scalar(whole);
  // Accumulated as excess over VaR so a degenerate sample returns VaR exactly.
  Scalar excess = (l.tail(whole) - var).sum();
  if (whole < n && remainder > Scalar(0)) excess += remainder * (l[n - 1 - whole] - var);
  return var + excess / mass;
}

template <typename Scalar>
struct EntropicResult {
  Scalar value;
  Scalar z;  // minimizer; infinity when the infimum is the sample maximum
};

// z^{-1} ln(mean(exp(z L)) / (1 - alpha)), stabilized by factoring out max L.
template <typename Scalar>
Scalar entropic_objective(const SortedLosses<Scalar>& losses, Scalar alpha, Scalar z) {
  const auto& l = losses.ascending();
  const Scalar top = losses.max();
  const Scalar mgf = (z * (l - top)).exp().sum() / Scalar(losses.size());
  return top + (std::log(mgf) - std::log1p(-alpha)) / z;
}

// Golden-section search on ln z over [1e-6, 1e6] / max|L|; the objective is
// unimodal in z. The z -> infinity limit (the sample maximum) is always a
// candidate.
template <typename Scalar>
EntropicResult<Scalar> entropic_value_at_risk_detail(const SortedLosses<Scalar>& losses, Scalar alpha,
                                                     Scalar rel_tol = Scalar(1e-8)) {
  detail::check_alpha(alpha);
  const Scalar top = losses.max();
  if (losses.min() == top) return {top, std::numeric_limits<Scalar>::infinity()};

  const Scalar scale = std::max(std::abs(losses.min()), std::abs(top));
  Scalar a = std::log(Scalar(1e-6) / scale);
  Scalar b = std::log(Scalar(1e6) / scale);
  const Scalar lower_edge = a;
  const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  auto objective = [&](Scalar t) { return entropic_objective(losses, alpha, std::exp(t)); };

  Scalar c = b - inv_phi * (b - a);
  Scalar d = a + inv_phi * (b - a);
  Scalar fc = objective(c);
  Scalar fd = objective(d);
  while (b - a > rel_tol * std::max(Scalar(1), std::abs(a + b) / Scalar(2))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  const Scalar t = (a + b) / Scalar(2);
  if (t - lower_edge <= Scalar(4) * rel_tol * std::max(Scalar(1), std::abs(t))) {
    fail(ErrorCode::numeric, "EVaR minimizer is not bracketed from below");
  }
  const Scalar value = objective(t);
  if (!std::isfinite(value)) fail(ErrorCode::numeric, "EVaR objective is not finite");
  if (top <= value) return {top, std::numeric_limits<Scalar>::infinity()};
  return {value, std::exp(t)};
}

template <typename Scalar>
Scalar entropic_value_at_risk(const SortedLosses<Scalar>& losses, Scalar alpha) {
  return entropic_value_at_risk_detail(losses, alpha).value;
}

template <typename Derived>
typename Derived::Scalar value_at_risk(const Eigen::DenseBase<Derived>& returns, typename Derived::Scalar alpha) {
  return value_at_risk(SortedLosses<typename Derived::Scalar>(returns), alpha);
}

template <typename Derived>
typename Derived::Scalar conditional_value_at_risk(const Eigen::DenseBase<Derived>& returns,
                                                   typename Derived::Scalar alpha) {
  return conditional_value_at_risk(SortedLosses<typename Derived::Scalar>(returns), alpha);
}

template <typename Derived>
typename Derived::Scalar entropic_value_at_risk(const Eigen::DenseBase<Derived>& returns,
                                                typename Derived::Scalar alpha) {
  return entropic_value_at_risk(SortedLosses<typename Derived::Scalar>(returns), alpha);
}

struct RiskReport {
  double alpha = 0.95;
  int horizon = 1;
  Eigen::Index n = 0;
  double var = 0.0;
  double cvar = 0.0;
  double evar = 0.0;
  std::chrono::system_clock::time_point computed_at{};
};

// Bit-equality of every field except computed_at.
bool same_measures(const RiskReport& a, const RiskReport& b);

// All three measures from one sorted snapshot; the var <= cvar <= evar
// ordering is asserted (numeric error), never repaired.
template <typename Derived>
RiskReport risk_report(const Eigen::DenseBase<Derived>& returns, double alpha, int horizon) {
  require(horizon >= 1, ErrorCode::parameter, "horizon must be at least 1");
  const SortedLosses<double> losses(returns);
  RiskReport r;
  r.alpha = alpha;
  r.horizon = horizon;
  r.n = losses.size();
  r.var = value_at_risk(losses, alpha);
  r.cvar = conditional_value_at_risk(losses, alpha);
  r.evar = entropic_value_at_risk(losses, alpha);
  r.computed_at = std::chrono::system_clock::now();
  if (!(r.var <= r.cvar && r.cvar <= r.evar)) {
    fail(ErrorCode::numeric, "risk ordering var <= cvar <= evar violated");
  }
  return r;
}

}  // namespace sayo
