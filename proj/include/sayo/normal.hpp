#pragma once

#include <cmath>
#include <numbers>

namespace sayo {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Acklam's rational approximation followed by one Halley step against erfc,
// giving close to full double precision on (0, 1).
double normal_quantile(double p);

}  // namespace sayo
