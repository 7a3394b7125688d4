#pragma once

// Asset definitions, ingested price histories, and the generated-tuple cache.
//
// The store is a single append-only file of JSON lines; replaying the file
// on open rebuilds the in-memory index (last write wins). Export writes one
// JSON file per record into a directory.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sayo/distribution.hpp"
#include "sayo/sampling.hpp"

namespace sayo {

// Milliseconds since the Unix epoch. Accepts YYYY-MM-DD with an optional
// [T| ]HH:MM[:SS[.fff]] time and an optional Z or +HH:MM / -HH:MM offset.
std::optional<std::int64_t> parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t epoch_ms);

struct HistoryRef {
  std::string history_id;
  bool operator==(const HistoryRef&) const = default;
};

using AssetSource = std::variant<MarginalDistribution, HistoryRef>;

struct AssetRecord {
  std::string asset_id;
  std::string name;
  AssetSource source;
  std::string updated_at;

  bool operator==(const AssetRecord&) const = default;
};

// Parses `timestamp,price` CSV. Errors carry the 1-based line number.
PriceHistory parse_price_csv(std::istream& in, const std::string& asset_id);

class AssetStore {
 public:
  // Opens (creating if needed) the store file at `path`.
  explicit AssetStore(std::filesystem::path path);
  // In-memory store, nothing persisted.
  AssetStore();

  // Path from SAYO_STORE, falling back to ./sayo-store.jsonl.
  static std::filesystem::path default_path();

  void put_asset(AssetRecord record);
  AssetRecord get_asset(const std::string& asset_id) const;
  std::vector<std::string> asset_ids() const;

  void put_history(PriceHistory history);
  PriceHistory get_history(const std::string& history_id) const;
  std::vector<std::string> history_ids() const;

  PriceHistory ingest_prices(std::istream& csv, const std::string& asset_id);

  void export_to(const std::filesystem::path& dir) const;
  void import_from(const std::filesystem::path& dir);

  // Rewrites the log with one line per live record.
  void compact();

  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const std::string& line);
  void replay();

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, AssetRecord> assets_;
  std::map<std::string, PriceHistory> histories_;
};

struct TupleKey {
  std::string asset_id;
  std::uint64_t seed = 0;
  Eigen::Index n = 0;
  int horizon = 0;
  // Fingerprint of whatever the tuple was generated from.
  std::uint64_t source_digest = 0;

  bool operator==(const TupleKey&) const = default;
};

struct TupleKeyHash {
  std::size_t operator()(const TupleKey& k) const;
};

// LRU cache of generated tuples bounded by a byte budget.
class TupleCache {
 public:
  static constexpr std::size_t kDefaultBudget = std::size_t{256} << 20;

  explicit TupleCache(std::size_t byte_budget = kDefaultBudget) : budget_(byte_budget) {}

  std::shared_ptr<const Eigen::VectorXd> fetch(const TupleKey& key);
  void store(const TupleKey& key, std::shared_ptr<const Eigen::VectorXd> values);

  std::size_t bytes() const;
  std::size_t entries() const;
  std::uint64_t hits() const;
  std::uint64_t misses() const;

 private:
  using Lru = std::list<TupleKey>;
  struct Entry {
    std::shared_ptr<const Eigen::VectorXd> values;
    Lru::iterator position;
  };

  mutable std::mutex mutex_;
  std::size_t budget_;
  std::size_t bytes_ = 0;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  Lru lru_;
  std::unordered_map<TupleKey, Entry, TupleKeyHash> entries_;
};

}  // namespace sayo
