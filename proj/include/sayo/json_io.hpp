#pragma once

#include "json.hpp"

#include "sayo/distribution.hpp"
#include "sayo/risk.hpp"
#include "sayo/sampling.hpp"
#include "sayo/sensitivity.hpp"
#include "sayo/store.hpp"

namespace sayo {

using nlohmann::json;

json to_json(const MarginalDistribution& d);
MarginalDistribution distribution_from_json(const json& j);

json to_json(const RiskReport& r, bool include_timestamp = true);
json to_json(const SensitivityReport& r);
json to_json(const PriceHistory& h);
PriceHistory history_from_json(const json& j);
json to_json(const AssetRecord& r);
AssetRecord asset_from_json(const json& j);

// Shortest round-trip text of the record; the store writes exactly this.
std::string canonical_dump(const json& j);

}  // namespace sayo
