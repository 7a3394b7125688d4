#include "sayo/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "sayo/error.hpp"
#include "sayo/normal.hpp"

namespace sayo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool finite(double x) { return std::isfinite(x); }

double empirical_quantile(const std::vector<double>& sorted, double u) {
  const double h = u * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

dist::Empirical make_empirical(std::vector<double> samples) {
  require(!samples.empty(), ErrorCode::parameter, "empirical distribution needs at least one sample");
  require(std::all_of(samples.begin(), samples.end(), finite), ErrorCode::parameter,
          "empirical samples must be finite");
  std::sort(samples.begin(), samples.end());
  return dist::Empirical{std::move(samples)};
}

void validate(const MarginalDistribution& d) {
  std::visit(overloaded{
                 [](const dist::Constant& c) {
                   require(finite(c.value), ErrorCode::parameter, "constant value must be finite");
                 },
                 [](const dist::Normal& n) {
                   require(finite(n.mu) && finite(n.sigma) && n.sigma > 0.0, ErrorCode::parameter,
                           "normal requires finite mu and sigma > 0");
                 },
                 [](const dist::LogNormal& n) {
                   require(finite(n.mu_log) && finite(n.sigma_log) && n.sigma_log > 0.0, ErrorCode::parameter,
                           "lognormal requires finite mu_log and sigma_log > 0");
                 },
                 [](const dist::Uniform& u) {
                   require(finite(u.lo) && finite(u.hi) && u.lo < u.hi, ErrorCode::parameter,
                           "uniform requires lo < hi");
                 },
                 [](const dist::Triangular& t) {
                   require(finite(t.lo) && finite(t.hi) && t.lo < t.hi && t.lo <= t.mode && t.mode <= t.hi,
                           ErrorCode::parameter, "triangular requires lo <= mode <= hi and lo < hi");
                 },
                 [](const dist::Empirical& e) {
                   require(!e.sorted.empty(), ErrorCode::parameter, "empirical distribution is empty");
                   require(std::all_of(e.sorted.begin(), e.sorted.end(), finite), ErrorCode::parameter,
                           "empirical samples must be finite");
                   require(std::is_sorted(e.sorted.begin(), e.sorted.end()), ErrorCode::parameter,
                           "empirical samples must be sorted; use make_empirical");
                 },
             },
             d);
}

double inverse_cdf(const MarginalDistribution& d, double u) {
  u = std::clamp(u, 0.0, 1.0);
  return std::visit(overloaded{
                        [](const dist::Constant& c) { return c.value; },
                        [u](const dist::Normal& n) { return n.mu + n.sigma * normal_quantile(u); },
                        [u](const dist::LogNormal& n) { return std::exp(n.mu_log + n.sigma_log * normal_quantile(u)); },
                        [u](const dist::Uniform& x) { return x.lo + (x.hi - x.lo) * u; },
                        [u](const dist::Triangular& t) {
                          const double width = t.hi - t.lo;
                          const double split = (t.mode - t.lo) / width;
                          if (u < split) return t.lo + std::sqrt(u * width * (t.mode - t.lo));
                          return t.hi - std::sqrt((1.0 - u) * width * (t.hi - t.mode));
                        },
                        [u](const dist::Empirical& e) { return empirical_quantile(e.sorted, u); },
                    },
                    d);
}

double from_normal_score(const MarginalDistribution& d, double z) {
  if (const auto* n = std::get_if<dist::Normal>(&d)) return n->mu + n->sigma * z;
  if (const auto* n = std::get_if<dist::LogNormal>(&d)) return std::exp(n->mu_log + n->sigma_log * z);
  if (const auto* c = std::get_if<dist::Constant>(&d)) return c->value;
  return inverse_cdf(d, normal_cdf(z));
}

double cdf(const MarginalDistribution& d, double x) {
  return std::visit(overloaded{
                        [x](const dist::Constant& c) { return x < c.value ? 0.0 : 1.0; },
                        [x](const dist::Normal& n) { return normal_cdf((x - n.mu) / n.sigma); },
                        [x](const dist::LogNormal& n) {
                          return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - n.mu_log) / n.sigma_log);
                        },
                        [x](const dist::Uniform& u) { return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0); },
                        [x](const dist::Triangular& t) {
                          if (x <= t.lo) return 0.0;
                          if (x >= t.hi) return 1.0;
                          const double width = t.hi - t.lo;
                          if (x <= t.mode) return (x - t.lo) * (x - t.lo) / (width * (t.mode - t.lo));
                          return 1.0 - (t.hi - x) * (t.hi - x) / (width * (t.hi - t.mode));
                        },
                        [x](const dist::Empirical& e) {
                          // Inverse of the interpolated quantile function.
                          const auto& s = e.sorted;
                          if (x < s.front()) return 0.0;
                          if (x >= s.back()) return 1.0;
                          const auto it = std::upper_bound(s.begin(), s.end(), x);
                          const auto hi = static_cast<std::size_t>(it - s.begin());
                          const std::size_t lo = hi - 1;
                          const double frac = s[hi] > s[lo] ? (x - s[lo]) / (s[hi] - s[lo]) : 0.0;
                          return (static_cast<double>(lo) + frac) / static_cast<double>(s.size() - 1);
                        },
                    },
                    d);
}

std::string family_name(const MarginalDistribution& d) {
  static constexpr const char* names[] = {"constant", "normal", "lognormal", "uniform", "triangular", "empirical"};
  return names[d.index()];
}

}  // namespace sayo
