#pragma once

#include <string>
#include <variant>
#include <vector>

namespace sayo {

// Per-horizon return distributions an asset can be parameterized with.
namespace dist {

struct Constant {
  double value;

  bool operator==(const Constant&) const = default;
};
struct Normal {
  double mu;
  double sigma;

  bool operator==(const Normal&) const = default;
};
struct LogNormal {
  double mu_log;
  double sigma_log;

  bool operator==(const LogNormal&) const = default;
};
struct Uniform {
  double lo;
  double hi;

  bool operator==(const Uniform&) const = default;
};
struct Triangular {
  double lo;
  double mode;
  double hi;

  bool operator==(const Triangular&) const = default;
};
// Holds its samples sorted ascending; use make_empirical to construct.
struct Empirical {
  std::vector<double> sorted;

  bool operator==(const Empirical&) const = default;
};

}  // namespace dist

using MarginalDistribution =
    std::variant<dist::Constant, dist::Normal, dist::LogNormal, dist::Uniform, dist::Triangular, dist::Empirical>;

dist::Empirical make_empirical(std::vector<double> samples);

// Throws a parameter error when the family's invariants do not hold.
void validate(const MarginalDistribution& d);

// Quantile function F^{-1}(u), u in [0, 1]. The empirical family interpolates
// linearly between order statistics.
double inverse_cdf(const MarginalDistribution& d, double u);

// F^{-1}(Phi(z)). Normal and log-normal use their closed forms so the copula
// is exact for them.
double from_normal_score(const MarginalDistribution& d, double z);

double cdf(const MarginalDistribution& d, double x);

std::string family_name(const MarginalDistribution& d);

}  // namespace sayo
