#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "windmoe/csv.hpp"
#include "windmoe/error.hpp"
#include "windmoe/timebase.hpp"

namespace windmoe {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class FuelClass : std::uint8_t {
  CCGT,
  Coal,
  WindOnshoreEngland,
  WindOnshoreScotland,
  WindOffshoreEngland,
  WindOffshoreScotland,
  Other,
};

inline constexpr std::size_t kFuelClassCount = 7;
inline constexpr std::array<FuelClass, kFuelClassCount> kFuelClasses{
    FuelClass::CCGT,
    FuelClass::Coal,
    FuelClass::WindOnshoreEngland,
    FuelClass::WindOnshoreScotland,
    FuelClass::WindOffshoreEngland,
    FuelClass::WindOffshoreScotland,
    FuelClass::Other,
};

constexpr std::size_t fuel_index(FuelClass f) { return static_cast<std::size_t>(f); }

constexpr bool is_onshore_wind(FuelClass f) {
  return f == FuelClass::WindOnshoreEngland || f == FuelClass::WindOnshoreScotland;
}
constexpr bool is_offshore_wind(FuelClass f) {
  return f == FuelClass::WindOffshoreEngland || f == FuelClass::WindOffshoreScotland;
}
constexpr bool is_wind(FuelClass f) { return is_onshore_wind(f) || is_offshore_wind(f); }

inline std::string_view fuel_name(FuelClass f) {
  switch (f) {
    case FuelClass::CCGT: return "CCGT";
    case FuelClass::Coal: return "Coal";
    case FuelClass::WindOnshoreEngland: return "WindOnshoreEngland";
    case FuelClass::WindOnshoreScotland: return "WindOnshoreScotland";
    case FuelClass::WindOffshoreEngland: return "WindOffshoreEngland";
    case FuelClass::WindOffshoreScotland: return "WindOffshoreScotland";
    case FuelClass::Other: return "Other";
  }
  return "Other";
}

inline std::optional<FuelClass> parse_fuel(std::string_view name) {
  for (FuelClass f : kFuelClasses) {
    if (fuel_name(f) == name) {
      return f;
    }
  }
  return std::nullopt;
}

enum class Role : std::uint8_t { Producer, Consumer, Unknown };

inline char role_code(Role r) {
  switch (r) {
    case Role::Producer: return 'P';
    case Role::Consumer: return 'C';
    case Role::Unknown: return 'U';
  }
  return 'U';
}

struct UnitRegistryEntry {
  std::string unit_id;
  FuelClass fuel{FuelClass::Other};
  Role role{Role::Unknown};

  friend bool operator==(const UnitRegistryEntry&, const UnitRegistryEntry&) = default;
};

/// Unit identity → fuel class and producer/consumer role. Ids are unique.
class UnitRegistry {
 public:
  UnitRegistry() = default;

  explicit UnitRegistry(std::span<const UnitRegistryEntry> entries) {
    for (const auto& e : entries) {
      if (!entries_.emplace(e.unit_id, e).second) {
        throw ValidationError("registry: duplicate unit_id " + e.unit_id);
      }
    }
  }

  [[nodiscard]] const UnitRegistryEntry* find(std::string_view unit_id) const {
    auto it = entries_.find(unit_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Registry entry, or an Other/Unknown placeholder for unregistered ids.
  [[nodiscard]] UnitRegistryEntry lookup(std::string_view unit_id) const {
    if (const auto* e = find(unit_id)) {
      return *e;
    }
    return UnitRegistryEntry{std::string(unit_id), FuelClass::Other, Role::Unknown};
  }

  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] std::vector<UnitRegistryEntry> entries() const {
    std::vector<UnitRegistryEntry> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) {
      out.push_back(e);
    }
    return out;
  }

 private:
  std::map<std::string, UnitRegistryEntry, std::less<>> entries_;
};

/// Registry hit returns its class; a miss is Other.
inline FuelClass classify_fuel(std::string_view unit_id, const UnitRegistry& registry) {
  const auto* e = registry.find(unit_id);
  return e ? e->fuel : FuelClass::Other;
}

struct GenerationRecord {
  SettlementKey key;
  std::string unit_id;
  double volume{};  // MWh, >= 0

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct SpotRecord {
  SettlementKey key;
  double price{};          // GBP/MWh
  double traded_volume{};  // MWh, >= 0

  friend bool operator==(const SpotRecord&, const SpotRecord&) = default;
};

enum class ActionKind : std::uint8_t { Offer, Bid };

/// Accepted offer or bid. Volume is a positive magnitude; sign conventions live in imbalance.
struct BalancingAction {
  SettlementKey key;
  std::string unit_id;
  ActionKind kind{ActionKind::Offer};
  double volume{};  // MWh, > 0
  double price{};   // GBP/MWh, signed; offers >= 0
  std::optional<double> tlm_published;

  friend bool operator==(const BalancingAction&, const BalancingAction&) = default;
};

struct TlmEntry {
  SettlementKey key;
  Role role{Role::Producer};  // Producer or Consumer only
  double multiplier{1.0};

  friend bool operator==(const TlmEntry&, const TlmEntry&) = default;
};

struct RowReject {
  std::size_t line{};  // 1-based physical line, header is line 1
  std::string reason;
};

struct IngestReport {
  std::size_t rows_accepted{};
  std::size_t rows_rejected{};
  std::vector<RowReject> rejects;

  [[nodiscard]] std::size_t rows_total() const { return rows_accepted + rows_rejected; }
};

template <class Record>
struct ParseResult {
  std::vector<Record> records;
  IngestReport report;
};

struct ParseOptions {
  /// When set, keys are checked against day length and coverage.
  const ClockRule* rule{nullptr};
  std::string source{"<input>"};
};

enum class DatasetKind { Generation, Spot, Actions, TlmElexon, TlmBmr, Registry };

inline constexpr std::array<DatasetKind, 6> kDatasetKinds{DatasetKind::Generation, DatasetKind::Spot,
                                                          DatasetKind::Actions,    DatasetKind::TlmElexon,
                                                          DatasetKind::TlmBmr,     DatasetKind::Registry};

inline std::string_view dataset_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Generation: return "generation";
    case DatasetKind::Spot: return "spot";
    case DatasetKind::Actions: return "actions";
    case DatasetKind::TlmElexon: return "tlm_elexon";
    case DatasetKind::TlmBmr: return "tlm_bmr";
    case DatasetKind::Registry: return "registry";
  }
  return "";
}

inline std::optional<DatasetKind> parse_dataset_kind(std::string_view name) {
  for (auto k : kDatasetKinds) {
    if (dataset_name(k) == name) {
      return k;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

namespace detail {

using Fields = std::vector<std::string_view>;

template <class Record>
using RowOutcome = std::variant<Record, std::string>;

inline std::variant<SettlementKey, std::string> parse_key(std::string_view date_text, std::string_view sp_text,
                                                          const ParseOptions& options) {
  auto date = parse_date(date_text);
  if (!date) {
    return std::string("invalid date `") + std::string(date_text) + "`";
  }
  auto sp = csv::parse_int(sp_text);
  if (!sp) {
    return std::string("invalid settlement period `") + std::string(sp_text) + "`";
  }
  int max_sp = 50;
  if (options.rule != nullptr) {
    if (!options.rule->covers(*date)) {
      return "date " + format_date(*date) + " outside clock rule coverage";
    }
    max_sp = options.rule->periods_in_day(*date);
  }
  if (*sp < 1 || *sp > max_sp) {
    return fmt::format("settlement period {} out of range 1..{}", *sp, max_sp);
  }
  return SettlementKey{*date, *sp};
}

inline std::string key_fields(const SettlementKey& key) {
  return format_date(key.date) + "," + std::to_string(key.sp);
}

}  // namespace detail

/// Column layout, row parser and row writer per record type.
template <class Record>
struct DatasetSchema;

template <>
struct DatasetSchema<GenerationRecord> {
  static constexpr std::array<std::string_view, 4> kColumns{"date", "sp", "unit_id", "volume_mwh"};

  static detail::RowOutcome<GenerationRecord> parse_row(const detail::Fields& f, const ParseOptions& o) {
    auto key = detail::parse_key(f[0], f[1], o);
    if (auto* err = std::get_if<std::string>(&key)) {
      return *err;
    }
    if (f[2].empty()) {
      return std::string("empty unit_id");
    }
    auto volume = csv::parse_double(f[3]);
    if (!volume) {
      return std::string("invalid volume_mwh");
    }
    if (*volume < 0.0) {
      return std::string("volume_mwh must be non-negative");
    }
    return GenerationRecord{std::get<SettlementKey>(key), std::string(f[2]), *volume};
  }

  static std::string write_row(const GenerationRecord& r) {
    return detail::key_fields(r.key) + "," + r.unit_id + "," + csv::format_double(r.volume);
  }
};

template <>
struct DatasetSchema<SpotRecord> {
  static constexpr std::array<std::string_view, 4> kColumns{"date", "sp", "price_gbp_mwh", "traded_volume_mwh"};

  static detail::RowOutcome<SpotRecord> parse_row(const detail::Fields& f, const ParseOptions& o) {
    auto key = detail::parse_key(f[0], f[1], o);
    if (auto* err = std::get_if<std::string>(&key)) {
      return *err;
    }
    auto price = csv::parse_double(f[2]);
    if (!price) {
      return std::string("invalid price_gbp_mwh");
    }
    auto traded = csv::parse_double(f[3]);
    if (!traded) {
      return std::string("invalid traded_volume_mwh");
    }
    if (*traded < 0.0) {
      return std::string("traded_volume_mwh must be non-negative");
    }
    return SpotRecord{std::get<SettlementKey>(key), *price, *traded};
  }

  static std::string write_row(const SpotRecord& r) {
    return detail::key_fields(r.key) + "," + csv::format_double(r.price) + "," + csv::format_double(r.traded_volume);
  }
};

template <>
struct DatasetSchema<BalancingAction> {
  static constexpr std::array<std::string_view, 7> kColumns{"date",       "sp",           "unit_id", "kind",
                                                            "volume_mwh", "price_gbp_mwh", "tlm"};

  static detail::RowOutcome<BalancingAction> parse_row(const detail::Fields& f, const ParseOptions& o) {
    auto key = detail::parse_key(f[0], f[1], o);
    if (auto* err = std::get_if<std::string>(&key)) {
      return *err;
    }
    if (f[2].empty()) {
      return std::string("empty unit_id");
    }
    ActionKind kind{};
    if (f[3] == "offer") {
      kind = ActionKind::Offer;
    } else if (f[3] == "bid") {
      kind = ActionKind::Bid;
    } else {
      return std::string("kind must be `offer` or `bid`");
    }
    auto volume = csv::parse_double(f[4]);
    if (!volume) {
      return std::string("invalid volume_mwh");
    }
    if (*volume <= 0.0) {
      return std::string("volume_mwh must be strictly positive");
    }
    auto price = csv::parse_double(f[5]);
    if (!price) {
      return std::string("invalid price_gbp_mwh");
    }
    if (kind == ActionKind::Offer && *price < 0.0) {
      return std::string("offer price must be non-negative");
    }
    std::optional<double> tlm;
    if (!f[6].empty()) {
      tlm = csv::parse_double(f[6]);
      if (!tlm || *tlm <= 0.0) {
        return std::string("invalid tlm");
      }
    }
    return BalancingAction{std::get<SettlementKey>(key), std::string(f[2]), kind, *volume, *price, tlm};
  }

  static std::string write_row(const BalancingAction& r) {
    return detail::key_fields(r.key) + "," + r.unit_id + "," + (r.kind == ActionKind::Offer ? "offer" : "bid") + "," +
           csv::format_double(r.volume) + "," + csv::format_double(r.price) + "," +
           (r.tlm_published ? csv::format_double(*r.tlm_published) : std::string());
  }
};

template <>
struct DatasetSchema<TlmEntry> {
  static constexpr std::array<std::string_view, 4> kColumns{"date", "sp", "role", "multiplier"};

  static detail::RowOutcome<TlmEntry> parse_row(const detail::Fields& f, const ParseOptions& o) {
    auto key = detail::parse_key(f[0], f[1], o);
    if (auto* err = std::get_if<std::string>(&key)) {
      return *err;
    }
    Role role{};
    if (f[2] == "P") {
      role = Role::Producer;
    } else if (f[2] == "C") {
      role = Role::Consumer;
    } else {
      return std::string("role must be `P` or `C`");
    }
    auto m = csv::parse_double(f[3]);
    if (!m || *m <= 0.0) {
      return std::string("invalid multiplier");
    }
    return TlmEntry{std::get<SettlementKey>(key), role, *m};
  }

  static std::string write_row(const TlmEntry& r) {
    return detail::key_fields(r.key) + "," + role_code(r.role) + "," + csv::format_double(r.multiplier);
  }
};

template <>
struct DatasetSchema<UnitRegistryEntry> {
  static constexpr std::array<std::string_view, 3> kColumns{"unit_id", "fuel", "role"};

  static detail::RowOutcome<UnitRegistryEntry> parse_row(const detail::Fields& f, const ParseOptions&) {
    if (f[0].empty()) {
      return std::string("empty unit_id");
    }
    auto fuel = parse_fuel(f[1]);
    if (!fuel) {
      return "unknown fuel `" + std::string(f[1]) + "`";
    }
    Role role{};
    if (f[2] == "P") {
      role = Role::Producer;
    } else if (f[2] == "C") {
      role = Role::Consumer;
    } else if (f[2] == "U") {
      role = Role::Unknown;
    } else {
      return std::string("role must be `P`, `C` or `U`");
    }
    return UnitRegistryEntry{std::string(f[0]), *fuel, role};
  }

  static std::string unique_id(const UnitRegistryEntry& r) { return r.unit_id; }

  static std::string write_row(const UnitRegistryEntry& r) {
    return r.unit_id + "," + std::string(fuel_name(r.fuel)) + "," + role_code(r.role);
  }
};

template <class Record>
std::string dataset_header() {
  std::string header;
  for (auto col : DatasetSchema<Record>::kColumns) {
    if (!header.empty()) {
      header += ',';
    }
    header += col;
  }
  return header;
}

// ---------------------------------------------------------------------------
// Parse / serialize
// ---------------------------------------------------------------------------

/// Parses one canonical dataset. A malformed header throws FormatError; malformed rows are
/// rejected with their line number and parsing continues. Blank lines are skipped.
template <class Record>
ParseResult<Record> parse_dataset(std::istream& in, const ParseOptions& options = {}) {
  using Schema = DatasetSchema<Record>;
  ParseResult<Record> result;

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw FormatError(options.source, 1, "missing header row");
  }
  ++line_no;
  std::string_view header_view = line;
  if (header_view.starts_with("\xEF\xBB\xBF")) {
    header_view.remove_prefix(3);
  }
  const auto header = csv::split(header_view);
  bool header_ok = header.size() == Schema::kColumns.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) {
    header_ok = header[i] == Schema::kColumns[i];
  }
  if (!header_ok) {
    throw FormatError(options.source, 1, "expected header `" + dataset_header<Record>() + "`");
  }

  std::set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) {
      continue;
    }
    const auto fields = csv::split(line);
    auto reject = [&](std::string reason) {
      ++result.report.rows_rejected;
      result.report.rejects.push_back(RowReject{line_no, std::move(reason)});
    };
    if (fields.size() != Schema::kColumns.size()) {
      reject(fmt::format("expected {} fields, found {}", Schema::kColumns.size(), fields.size()));
      continue;
    }
    auto outcome = Schema::parse_row(fields, options);
    if (auto* err = std::get_if<std::string>(&outcome)) {
      reject(std::move(*err));
      continue;
    }
    auto& record = std::get<Record>(outcome);
    if constexpr (requires { Schema::unique_id(record); }) {
      if (!seen_ids.insert(Schema::unique_id(record)).second) {
        reject("duplicate unit_id " + Schema::unique_id(record));
        continue;
      }
    }
    ++result.report.rows_accepted;
    result.records.push_back(std::move(record));
  }
  return result;
}

template <class Record>
ParseResult<Record> read_dataset_file(const std::filesystem::path& path, ParseOptions options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(path.string(), 0, "cannot open file");
  }
  options.source = path.string();
  return parse_dataset<Record>(in, options);
}

/// Writes the header plus one LF-terminated row per record.
template <class Record>
void write_dataset(std::ostream& out, std::span<const Record> records) {
  out << dataset_header<Record>() << '\n';
  for (const auto& r : records) {
    out << DatasetSchema<Record>::write_row(r) << '\n';
  }
}

template <class Record>
std::string serialize_dataset(std::span<const Record> records) {
  std::string out = dataset_header<Record>() + "\n";
  for (const auto& r : records) {
    out += DatasetSchema<Record>::write_row(r);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Join
// ---------------------------------------------------------------------------

/// Per-key market facts. Generation is summed per fuel class.
struct KeyInfo {
  std::optional<double> spot_price;
  double traded_volume{};
  std::array<double, kFuelClassCount> generation{};

  [[nodiscard]] bool price_missing() const { return !spot_price.has_value(); }

  [[nodiscard]] double total_generation() const {
    double total = 0.0;
    for (double v : generation) {
      total += v;
    }
    return total;
  }
};

struct JoinedRow {
  SettlementKey key;
  std::string unit_id;
  FuelClass fuel{FuelClass::Other};
  double generation_mwh{};
  double offer_mwh{};
  double bid_mwh{};
};

struct JoinedAction {
  BalancingAction action;
  FuelClass fuel{FuelClass::Other};
};

/// Outer join on SettlementKey of generation, spot and balancing data.
struct JoinedTable {
  std::vector<JoinedRow> rows;  // sorted by (key, unit_id)
  std::map<SettlementKey, KeyInfo> keys;
  std::vector<JoinedAction> actions;  // deduplicated, file order
  std::size_t duplicate_actions{};
  std::size_t duplicate_spot{};
  std::size_t registry_misses{};  // distinct unit ids absent from the registry

  [[nodiscard]] const KeyInfo* find(const SettlementKey& key) const {
    auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::vector<BalancingAction> action_list() const {
    std::vector<BalancingAction> out;
    out.reserve(actions.size());
    for (const auto& a : actions) {
      out.push_back(a.action);
    }
    return out;
  }

  [[nodiscard]] std::optional<DateRange> extent() const {
    if (keys.empty()) {
      return std::nullopt;
    }
    return DateRange{keys.begin()->first.date, keys.rbegin()->first.date};
  }
};

inline JoinedTable join_settlement(std::span<const GenerationRecord> gen, std::span<const SpotRecord> spot,
                                   std::span<const BalancingAction> actions, const UnitRegistry& registry) {
  JoinedTable table;

  std::set<std::string, std::less<>> misses;
  auto fuel_of = [&](const std::string& unit_id) {
    const auto* e = registry.find(unit_id);
    if (e == nullptr) {
      misses.insert(unit_id);
      return FuelClass::Other;
    }
    return e->fuel;
  };

  for (const auto& s : spot) {
    auto& info = table.keys[s.key];
    if (info.spot_price) {
      ++table.duplicate_spot;
      continue;
    }
    info.spot_price = s.price;
    info.traded_volume = s.traded_volume;
  }

  std::vector<JoinedRow> staged;
  staged.reserve(gen.size() + actions.size());
  for (const auto& g : gen) {
    const FuelClass fuel = fuel_of(g.unit_id);
    table.keys[g.key].generation[fuel_index(fuel)] += g.volume;
    staged.push_back(JoinedRow{g.key, g.unit_id, fuel, g.volume, 0.0, 0.0});
  }

  std::set<std::tuple<SettlementKey, std::string_view, ActionKind>> seen;
  for (const auto& a : actions) {
    if (!seen.emplace(a.key, a.unit_id, a.kind).second) {
      ++table.duplicate_actions;
      continue;
    }
    const FuelClass fuel = fuel_of(a.unit_id);
    table.keys.try_emplace(a.key);
    table.actions.push_back(JoinedAction{a, fuel});
    staged.push_back(JoinedRow{a.key, a.unit_id, fuel, 0.0, a.kind == ActionKind::Offer ? a.volume : 0.0,
                               a.kind == ActionKind::Bid ? a.volume : 0.0});
  }

  std::stable_sort(staged.begin(), staged.end(), [](const JoinedRow& x, const JoinedRow& y) {
    return std::tie(x.key, x.unit_id) < std::tie(y.key, y.unit_id);
  });
  for (auto& row : staged) {
    if (!table.rows.empty() && table.rows.back().key == row.key && table.rows.back().unit_id == row.unit_id) {
      auto& merged = table.rows.back();
      merged.generation_mwh += row.generation_mwh;
      merged.offer_mwh += row.offer_mwh;
      merged.bid_mwh += row.bid_mwh;
    } else {
      table.rows.push_back(std::move(row));
    }
  }
  table.registry_misses = misses.size();
  return table;
}

/// Copy of `table` restricted to keys whose settlement date lies in `window`.
inline JoinedTable restrict_to_window(const JoinedTable& table, const DateRange& window) {
  JoinedTable out;
  out.duplicate_actions = table.duplicate_actions;
  out.duplicate_spot = table.duplicate_spot;
  out.registry_misses = table.registry_misses;
  for (const auto& row : table.rows) {
    if (window.contains(row.key.date)) {
      out.rows.push_back(row);
    }
  }
  for (const auto& [key, info] : table.keys) {
    if (window.contains(key.date)) {
      out.keys.emplace(key, info);
    }
  }
  for (const auto& a : table.actions) {
    if (window.contains(a.action.key.date)) {
      out.actions.push_back(a);
    }
  }
  return out;
}

}  // namespace windmoe
