#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"
#include "windmoe/moe.hpp"
#include "windmoe/timebase.hpp"

namespace windmoe {

enum class Scenario : std::uint8_t { Actual, LowWind, NoOnshore, NoOffshore };

inline constexpr std::array<Scenario, 4> kScenarios{Scenario::Actual, Scenario::NoOnshore, Scenario::NoOffshore,
                                                    Scenario::LowWind};

inline std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Actual: return "actual";
    case Scenario::LowWind: return "low_wind";
    case Scenario::NoOnshore: return "no_onshore";
    case Scenario::NoOffshore: return "no_offshore";
  }
  return "";
}

constexpr std::size_t scenario_index(Scenario s) { return static_cast<std::size_t>(s); }

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

/// Currency totals are carried as integer micro-pounds so partitions sum exactly.
using MicroPounds = std::int64_t;

inline constexpr MicroPounds kMicroPerPound = 1'000'000;

inline MicroPounds to_micro_pounds(double gbp) { return static_cast<MicroPounds>(std::llround(gbp * 1e6)); }

inline double to_pounds(MicroPounds v) { return static_cast<double>(v) / 1e6; }

namespace detail {

/// Integer division rounding half away from zero.
inline __int128 round_div(__int128 num, __int128 den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const __int128 half = den / 2;
  return num >= 0 ? (num + half) / den : -((-num + half) / den);
}

inline std::string format_scaled(__int128 scaled, int decimals) {
  const bool negative = scaled < 0;
  if (negative) {
    scaled = -scaled;
  }
  __int128 unit = 1;
  for (int i = 0; i < decimals; ++i) {
    unit *= 10;
  }
  const auto whole = static_cast<long long>(scaled / unit);
  const auto frac = static_cast<long long>(scaled % unit);
  std::string out = negative && scaled != 0 ? "-" : "";
  out += std::to_string(whole);
  if (decimals > 0) {
    out += fmt::format(".{:0{}}", frac, decimals);
  }
  return out;
}

}  // namespace detail

/// Billions of pounds rounded half away from zero to `decimals` places, computed on the integers.
inline std::string format_gbp_bn(MicroPounds v, int decimals = 2) {
  __int128 denom = static_cast<__int128>(kMicroPerPound) * 1'000'000'000;
  for (int i = 0; i < decimals; ++i) {
    denom /= 10;
  }
  return detail::format_scaled(detail::round_div(v, denom), decimals);
}

/// 100 × num / den rounded to `decimals` places, computed on the integers.
inline std::string format_percent(MicroPounds num, MicroPounds den, int decimals = 1) {
  if (den == 0) {
    return "";
  }
  __int128 scale = 100;
  for (int i = 0; i < decimals; ++i) {
    scale *= 10;
  }
  return detail::format_scaled(detail::round_div(static_cast<__int128>(num) * scale, den), decimals);
}

// ---------------------------------------------------------------------------
// Binned price table
// ---------------------------------------------------------------------------

struct PriceCell {
  double mean{};  // volume-weighted mean spot price
  std::size_t n{};
  double volume{};
};

/// Volume-weighted mean price per (settlement period index, wind-share bin).
/// Bin b covers [b·w, (b+1)·w); a share of exactly 100 % falls in the last bin.
class BinnedPriceTable {
 public:
  explicit BinnedPriceTable(double bin_width = 5.0) : bin_width_(bin_width) {
    if (!(bin_width > 0.0) || bin_width > 100.0) {
      throw ValidationError("BinnedPriceTable: bin width must be in (0, 100]");
    }
  }

  [[nodiscard]] double bin_width() const { return bin_width_; }

  [[nodiscard]] int bin_count() const { return static_cast<int>(std::ceil(100.0 / bin_width_ - 1e-12)); }

  [[nodiscard]] int bin_of(double pct) const {
    const int b = static_cast<int>(std::floor(pct / bin_width_));
    return std::clamp(b, 0, bin_count() - 1);
  }

  void add(int sp, double wind_pct, double price, double volume) {
    auto& acc = accum_[{sp, bin_of(wind_pct)}];
    acc.weighted += price * volume;
    acc.plain += price;
    acc.volume += volume;
    ++acc.n;
  }

  [[nodiscard]] std::optional<PriceCell> find(int sp, int bin) const {
    auto it = accum_.find({sp, bin});
    if (it == accum_.end()) {
      return std::nullopt;
    }
    const auto& a = it->second;
    const double mean = a.volume > 0.0 ? a.weighted / a.volume : a.plain / static_cast<double>(a.n);
    return PriceCell{mean, a.n, a.volume};
  }

  [[nodiscard]] std::vector<std::pair<std::pair<int, int>, PriceCell>> cells() const {
    std::vector<std::pair<std::pair<int, int>, PriceCell>> out;
    for (const auto& [k, a] : accum_) {
      out.emplace_back(k, *find(k.first, k.second));
    }
    return out;
  }

  [[nodiscard]] std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& [k, a] : accum_) {
      n += a.n;
    }
    return n;
  }

 private:
  struct Accum {
    double weighted{};
    double plain{};
    double volume{};
    std::size_t n{};
  };

  double bin_width_;
  std::map<std::pair<int, int>, Accum> accum_;
};

inline BinnedPriceTable build_bins(std::span<const WindSharePoint> points, double bin_width = 5.0) {
  BinnedPriceTable table(bin_width);
  for (const auto& p : points) {
    table.add(p.key.sp, p.wind_pct, p.price, p.volume);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Scenario prices and costs
// ---------------------------------------------------------------------------

struct ScenarioPrice {
  double price{};
  bool fallback{false};  // cell missing or thinner than min_n; actual price used
};

/// Simulated spot price of one settlement period. LowWind reads the lowest bin; NoOnshore reads the
/// bin of the offshore share alone and NoOffshore the bin of the onshore share alone. Missing or
/// sparse cells fall back to the actual price.
inline ScenarioPrice scenario_price(const WindSharePoint& point, Scenario scenario, const BinnedPriceTable& table,
                                    std::size_t min_n) {
  if (scenario == Scenario::Actual) {
    return ScenarioPrice{point.price, false};
  }
  int bin = 0;
  switch (scenario) {
    case Scenario::LowWind: bin = 0; break;
    case Scenario::NoOnshore: bin = table.bin_of(point.offshore_pct); break;
    case Scenario::NoOffshore: bin = table.bin_of(point.onshore_pct); break;
    case Scenario::Actual: break;
  }
  const auto cell = table.find(point.key.sp, bin);
  if (!cell || cell->n < min_n) {
    return ScenarioPrice{point.price, true};
  }
  return ScenarioPrice{cell->mean, false};
}

/// Cost of one period: total generated MWh × scenario price, rounded to micro-pounds.
inline MicroPounds period_cost(const WindSharePoint& point, double price) { return to_micro_pounds(point.volume * price); }

struct CostResult {
  MicroPounds total{};
  std::size_t keys{};
  std::size_t fallback_keys{};
  std::size_t skipped_keys{};  // generation without a spot price
  double skipped_volume{};
};

inline CostResult scenario_cost(const MarketPanel& panel, const DateRange& window, Scenario scenario,
                                const BinnedPriceTable& table, std::size_t min_n) {
  CostResult r;
  for (const auto& p : panel.points) {
    if (!window.contains(p.key.date)) {
      continue;
    }
    const auto sp = scenario_price(p, scenario, table, min_n);
    r.total += period_cost(p, sp.price);
    ++r.keys;
    r.fallback_keys += sp.fallback ? 1 : 0;
  }
  for (const auto& s : panel.skipped) {
    if (window.contains(s.key.date)) {
      ++r.skipped_keys;
      r.skipped_volume += s.volume;
    }
  }
  return r;
}

struct MonthKey {
  int year{};
  unsigned month{};

  friend auto operator<=>(const MonthKey&, const MonthKey&) = default;
};

/// Cost per calendar month and scenario; months partition the window exactly.
using MonthlySeries = std::map<MonthKey, std::array<MicroPounds, 4>>;

inline MonthlySeries monthly_series(const MarketPanel& panel, const DateRange& window,
                                    std::span<const Scenario> scenarios, const BinnedPriceTable& table,
                                    std::size_t min_n) {
  MonthlySeries series;
  for (const auto& p : panel.points) {
    if (!window.contains(p.key.date)) {
      continue;
    }
    auto& row = series[MonthKey{static_cast<int>(p.key.date.year()), static_cast<unsigned>(p.key.date.month())}];
    for (Scenario s : scenarios) {
      row[scenario_index(s)] += period_cost(p, scenario_price(p, s, table, min_n).price);
    }
  }
  return series;
}

struct CostReportRow {
  int year{};
  std::array<MicroPounds, 4> cost{};  // indexed by scenario_index
  std::array<std::size_t, 4> fallback_keys{};
  std::size_t keys{};
  std::size_t skipped_keys{};
  double skipped_volume{};

  [[nodiscard]] MicroPounds actual() const { return cost[scenario_index(Scenario::Actual)]; }
  [[nodiscard]] MicroPounds low_wind() const { return cost[scenario_index(Scenario::LowWind)]; }
  [[nodiscard]] MicroPounds increase() const { return low_wind() - actual(); }
};

/// Annual actual / no-onshore / no-offshore / low-wind costs over the years touched by `window`.
inline std::vector<CostReportRow> cost_report(const MarketPanel& panel, const DateRange& window,
                                              const BinnedPriceTable& table, std::size_t min_n) {
  std::vector<CostReportRow> rows;
  if (window.empty()) {
    return rows;
  }
  for (int y = static_cast<int>(window.from.year()); y <= static_cast<int>(window.to.year()); ++y) {
    using namespace std::chrono;
    DateRange year_window{Date{year{y} / January / 1}, Date{year{y} / December / 31}};
    if (sys_days{year_window.from} < sys_days{window.from}) {
      year_window.from = window.from;
    }
    if (sys_days{year_window.to} > sys_days{window.to}) {
      year_window.to = window.to;
    }
    CostReportRow row;
    row.year = y;
    for (Scenario s : kScenarios) {
      const auto r = scenario_cost(panel, year_window, s, table, min_n);
      row.cost[scenario_index(s)] = r.total;
      row.fallback_keys[scenario_index(s)] = r.fallback_keys;
      row.keys = r.keys;
      row.skipped_keys = r.skipped_keys;
      row.skipped_volume = r.skipped_volume;
    }
    if (row.keys > 0 || row.skipped_keys > 0) {
      rows.push_back(row);
    }
  }
  return rows;
}

/// Savings net of subsidy and curtailment costs; all arguments in pounds.
constexpr double net_position(double savings, double roc_cost, double curtailment_cost, double other_subsidy) {
  return savings - roc_cost - curtailment_cost - other_subsidy;
}

}  // namespace windmoe
