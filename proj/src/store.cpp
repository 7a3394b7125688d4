#include "sayo/store.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "sayo/error.hpp"
#include "sayo/json_io.hpp"
#include "sayo/rng.hpp"

namespace sayo {

namespace {

bool digits(const std::string& s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string now_iso() {
  using namespace std::chrono;
  return format_iso8601(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

}  // namespace

std::optional<std::int64_t> parse_iso8601(const std::string& s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, ms = 0;
  if (!digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !digits(s, 5, 2, mo) || s[7] != '-' ||
      !digits(s, 8, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::size_t pos = 10;
  std::int64_t offset_min = 0;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!digits(s, pos + 1, 2, h) || pos + 3 >= s.size() || s[pos + 3] != ':' || !digits(s, pos + 4, 2, mi)) {
      return std::nullopt;
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!digits(s, pos + 1, 2, sec)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        int scale = 100;
        const std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
          ms += (s[pos] - '0') * scale;
          scale /= 10;
          ++pos;
        }
        if (pos == start) return std::nullopt;
      }
    }
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    if (pos < s.size() && s[pos] == 'Z') {
      ++pos;
    } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
      int oh = 0, om = 0;
      if (!digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' || !digits(s, pos + 4, 2, om)) {
        return std::nullopt;
      }
      offset_min = (s[pos] == '-' ? -1 : 1) * (oh * 60 + om);
      pos += 6;
    }
  }
  if (pos != s.size()) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return ((static_cast<std::int64_t>(days) * 24 + h) * 60 + mi - offset_min) * 60'000 + sec * 1000 + ms;
}

std::string format_iso8601(std::int64_t epoch_ms) {
  using namespace std::chrono;
  const auto tp = sys_time<milliseconds>{milliseconds{epoch_ms}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const auto rest = tp - day_point;
  const auto total_ms = rest.count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(total_ms / 3'600'000), static_cast<long long>(total_ms / 60'000 % 60),
                static_cast<long long>(total_ms / 1000 % 60), static_cast<long long>(total_ms % 1000));
  return buf;
}

PriceHistory parse_price_csv(std::istream& in, const std::string& asset_id) {
  PriceHistory h{asset_id, {}};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    if (!header) {
      require(row == "timestamp,price", ErrorCode::parse,
              "line " + std::to_string(line_no) + ": expected header 'timestamp,price'");
      header = true;
      continue;
    }
    const auto comma = row.find(',');
    require(comma != std::string::npos && row.find(',', comma + 1) == std::string::npos, ErrorCode::parse,
            "line " + std::to_string(line_no) + ": expected exactly two fields");
    const std::string ts = trim(row.substr(0, comma));
    const std::string price_text = trim(row.substr(comma + 1));
    const auto ms = parse_iso8601(ts);
    require(ms.has_value(), ErrorCode::parse, "line " + std::to_string(line_no) + ": bad timestamp '" + ts + "'");
    double price = 0.0;
    const auto [end, ec] = std::from_chars(price_text.data(), price_text.data() + price_text.size(), price);
    require(ec == std::errc{} && end == price_text.data() + price_text.size() && std::isfinite(price),
            ErrorCode::parse, "line " + std::to_string(line_no) + ": bad price '" + price_text + "'");
    require(price > 0.0, ErrorCode::parse, "line " + std::to_string(line_no) + ": price must be positive");
    if (!h.observations.empty()) {
      require(*ms > h.observations.back().epoch_ms, ErrorCode::ordering,
              "line " + std::to_string(line_no) + ": timestamps must be strictly increasing");
    }
    h.observations.push_back({ts, *ms, price});
  }
  require(header, ErrorCode::parse, "line 1: expected header 'timestamp,price'");
  validate(h);
  return h;
}

AssetStore::AssetStore() = default;

AssetStore::AssetStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) replay();
}

std::filesystem::path AssetStore::default_path() {
  if (const char* env = std::getenv("SAYO_STORE"); env != nullptr && *env != '\0') return env;
  return "sayo-store.jsonl";
}

void AssetStore::replay() {
  std::ifstream in(path_);
  require(in.good(), ErrorCode::io, "cannot read store '" + path_.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      fail(ErrorCode::parse, path_.string() + ":" + std::to_string(line_no) + ": corrupt store record");
    }
    const auto type = j.value("type", std::string());
    if (type == "asset") {
      auto r = asset_from_json(j.at("value"));
      assets_[r.asset_id] = std::move(r);
    } else if (type == "history") {
      auto h = history_from_json(j.at("value"));
      histories_[h.asset_id] = std::move(h);
    } else {
      fail(ErrorCode::parse, path_.string() + ":" + std::to_string(line_no) + ": unknown record type");
    }
  }
}

void AssetStore::append(const std::string& line) {
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  out << line << '\n';
  out.flush();
  require(out.good(), ErrorCode::io, "cannot write store '" + path_.string() + "'");
}

void AssetStore::put_asset(AssetRecord record) {
  require(!record.asset_id.empty(), ErrorCode::parameter, "asset_id must not be empty");
  if (const auto* d = std::get_if<MarginalDistribution>(&record.source)) validate(*d);
  if (record.updated_at.empty()) record.updated_at = now_iso();
  std::unique_lock lock(mutex_);
  append(canonical_dump(json{{"type", "asset"}, {"value", to_json(record)}}));
  assets_[record.asset_id] = std::move(record);
}

AssetRecord AssetStore::get_asset(const std::string& asset_id) const {
  std::shared_lock lock(mutex_);
  const auto it = assets_.find(asset_id);
  require(it != assets_.end(), ErrorCode::not_found, "unknown asset '" + asset_id + "'");
  return it->second;
}

std::vector<std::string> AssetStore::asset_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, r] : assets_) ids.push_back(id);
  return ids;
}

void AssetStore::put_history(PriceHistory history) {
  require(!history.asset_id.empty(), ErrorCode::parameter, "history asset_id must not be empty");
  validate(history);
  std::unique_lock lock(mutex_);
  append(canonical_dump(json{{"type", "history"}, {"value", to_json(history)}}));
  histories_[history.asset_id] = std::move(history);
}

PriceHistory AssetStore::get_history(const std::string& history_id) const {
  std::shared_lock lock(mutex_);
  const auto it = histories_.find(history_id);
  require(it != histories_.end(), ErrorCode::not_found, "unknown price history '" + history_id + "'");
  return it->second;
}

std::vector<std::string> AssetStore::history_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, h] : histories_) ids.push_back(id);
  return ids;
}

PriceHistory AssetStore::ingest_prices(std::istream& csv, const std::string& asset_id) {
  PriceHistory h = parse_price_csv(csv, asset_id);
  put_history(h);
  return h;
}

void AssetStore::export_to(const std::filesystem::path& dir) const {
  std::shared_lock lock(mutex_);
  std::filesystem::create_directories(dir / "assets");
  std::filesystem::create_directories(dir / "histories");
  auto write = [](const std::filesystem::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::io, "cannot write '" + p.string() + "'");
  };
  for (const auto& [id, r] : assets_) write(dir / "assets" / (id + ".json"), to_json(r));
  for (const auto& [id, h] : histories_) write(dir / "histories" / (id + ".json"), to_json(h));
}

void AssetStore::import_from(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    require(in.good(), ErrorCode::io, "cannot read '" + p.string() + "'");
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::parse, p.string() + ": " + e.what());
    }
  };
  if (std::filesystem::exists(dir / "histories")) {
    for (const auto& entry : std::filesystem::directory_iterator(dir / "histories"))
      if (entry.path().extension() == ".json") put_history(history_from_json(read(entry.path())));
  }
  if (std::filesystem::exists(dir / "assets")) {
    for (const auto& entry : std::filesystem::directory_iterator(dir / "assets"))
      if (entry.path().extension() == ".json") put_asset(asset_from_json(read(entry.path())));
  }
}

void AssetStore::compact() {
  std::unique_lock lock(mutex_);
  if (path_.empty()) return;
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, h] : histories_) out << canonical_dump(json{{"type", "history"}, {"value", to_json(h)}}) << '\n';
    for (const auto& [id, r] : assets_) out << canonical_dump(json{{"type", "asset"}, {"value", to_json(r)}}) << '\n';
    require(out.good(), ErrorCode::io, "cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path_);
}

std::size_t TupleKeyHash::operator()(const TupleKey& k) const {
  std::uint64_t h = hash_id(k.asset_id);
  h = mix64(h ^ k.seed);
  h = mix64(h ^ static_cast<std::uint64_t>(k.n));
  h = mix64(h ^ static_cast<std::uint64_t>(k.horizon));
  return static_cast<std::size_t>(mix64(h ^ k.source_digest));
}

std::shared_ptr<const Eigen::VectorXd> TupleCache::fetch(const TupleKey& key) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    ++misses_;
    return nullptr;
  }
  ++hits_;
  lru_.splice(lru_.begin(), lru_, it->second.position);
  return it->second.values;
}

void TupleCache::store(const TupleKey& key, std::shared_ptr<const Eigen::VectorXd> values) {
  const std::size_t size = static_cast<std::size_t>(values->size()) * sizeof(double);
  std::lock_guard lock(mutex_);
  if (size > budget_) return;
  if (const auto it = entries_.find(key); it != entries_.end()) {
    bytes_ -= static_cast<std::size_t>(it->second.values->size()) * sizeof(double);
    lru_.erase(it->second.position);
    entries_.erase(it);
  }
  while (bytes_ + size > budget_ && !lru_.empty()) {
    const auto victim = entries_.find(lru_.back());
    bytes_ -= static_cast<std::size_t>(victim->second.values->size()) * sizeof(double);
    entries_.erase(victim);
    lru_.pop_back();
  }
  lru_.push_front(key);
  entries_.emplace(key, Entry{std::move(values), lru_.begin()});
  bytes_ += size;
}

std::size_t TupleCache::bytes() const {
  std::lock_guard lock(mutex_);
  return bytes_;
}
std::size_t TupleCache::entries() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}
std::uint64_t TupleCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}
std::uint64_t TupleCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace sayo
