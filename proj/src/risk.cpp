#include "sayo/risk.hpp"

#include <bit>
#include <cstdint>

namespace sayo {

namespace {
bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }
}  // namespace

bool same_measures(const RiskReport& a, const RiskReport& b) {
  return same_bits(a.alpha, b.alpha) && a.horizon == b.horizon && a.n == b.n && same_bits(a.var, b.var) &&
         same_bits(a.cvar, b.cvar) && same_bits(a.evar, b.evar);
}

}  // namespace sayo
