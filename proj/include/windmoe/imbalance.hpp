#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/tlm.hpp"

namespace windmoe {

enum class ActionCategory : std::uint8_t { Offer, PositiveBid, NegativeBid };

inline constexpr std::array<ActionCategory, 3> kActionCategories{ActionCategory::Offer, ActionCategory::PositiveBid,
                                                                 ActionCategory::NegativeBid};

inline std::string_view category_name(ActionCategory c) {
  switch (c) {
    case ActionCategory::Offer: return "offers";
    case ActionCategory::PositiveBid: return "positive_bids";
    case ActionCategory::NegativeBid: return "negative_bids";
  }
  return "";
}

/// A bid priced at exactly zero is a positive bid; only strictly negative prices cost the system.
constexpr ActionCategory classify_action(const BalancingAction& action) {
  if (action.kind == ActionKind::Offer) {
    return ActionCategory::Offer;
  }
  return action.price < 0.0 ? ActionCategory::NegativeBid : ActionCategory::PositiveBid;
}

/// Σ v·w / Σ w. Weights must be non-negative with at least one positive.
inline double volume_weighted_mean(std::span<const std::pair<double, double>> pairs) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& [value, weight] : pairs) {
    if (weight < 0.0) {
      throw ValidationError("volume_weighted_mean: negative weight");
    }
    num += value * weight;
    den += weight;
  }
  if (!(den > 0.0)) {
    throw ValidationError("volume_weighted_mean: all weights are zero");
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Cash flow
// ---------------------------------------------------------------------------

struct CashFlowKey {
  FuelClass fuel{FuelClass::Other};
  int year{};
  ActionCategory category{ActionCategory::Offer};

  friend auto operator<=>(const CashFlowKey&, const CashFlowKey&) = default;
};

/// Signed GBP from the grid operator's side: payouts positive, income negative.
struct CashFlowSummary {
  std::map<CashFlowKey, double> totals;

  [[nodiscard]] double at(FuelClass fuel, int year, ActionCategory category) const {
    auto it = totals.find(CashFlowKey{fuel, year, category});
    return it == totals.end() ? 0.0 : it->second;
  }

  [[nodiscard]] double total(ActionCategory category) const {
    double sum = 0.0;
    for (const auto& [k, v] : totals) {
      if (k.category == category) {
        sum += v;
      }
    }
    return sum;
  }

  CashFlowSummary& operator+=(const CashFlowSummary& other) {
    for (const auto& [k, v] : other.totals) {
      totals[k] += v;
    }
    return *this;
  }
};

/// Signed cash flow of one action given its loss multiplier.
/// Offers are paid out at V·P·TLM; for bids the unit pays P per MWh, so the flow is −V·P·TLM.
constexpr double action_cash_flow(const BalancingAction& action, double tlm) {
  const double gross = action.volume * action.price * tlm;
  return action.kind == ActionKind::Offer ? gross : -gross;
}

/// Σ V·P·TLM per (fuel, year, category). TLM failures propagate with the action named.
inline CashFlowSummary cash_flow(std::span<const BalancingAction> actions, const UnitRegistry& registry,
                                 const TlmResolver& resolver) {
  CashFlowSummary summary;
  for (const auto& a : actions) {
    const double tlm = resolver.resolve(a).value;
    const CashFlowKey k{classify_fuel(a.unit_id, registry), static_cast<int>(a.key.date.year()), classify_action(a)};
    summary.totals[k] += action_cash_flow(a, tlm);
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Imbalance volume as a share of generation
// ---------------------------------------------------------------------------

struct FuelYear {
  FuelClass fuel{FuelClass::Other};
  int year{};

  friend auto operator<=>(const FuelYear&, const FuelYear&) = default;
};

struct ImbalanceVolumes {
  double generation_mwh{};
  std::array<double, 3> category_mwh{};  // indexed by ActionCategory

  ImbalanceVolumes& operator+=(const ImbalanceVolumes& o) {
    generation_mwh += o.generation_mwh;
    for (std::size_t i = 0; i < category_mwh.size(); ++i) {
      category_mwh[i] += o.category_mwh[i];
    }
    return *this;
  }

  /// 100 × category MWh / generation MWh; bid categories are negated. Absent when generation is zero.
  [[nodiscard]] std::optional<double> percentage(ActionCategory category) const {
    if (!(generation_mwh > 0.0)) {
      return std::nullopt;
    }
    const double sign = category == ActionCategory::Offer ? 1.0 : -1.0;
    return sign * 100.0 * category_mwh[static_cast<std::size_t>(category)] / generation_mwh;
  }
};

struct ImbalanceTable {
  std::map<FuelYear, ImbalanceVolumes> cells;

  [[nodiscard]] std::optional<double> percentage(FuelClass fuel, int year, ActionCategory category) const {
    auto it = cells.find(FuelYear{fuel, year});
    if (it == cells.end()) {
      return std::nullopt;
    }
    return it->second.percentage(category);
  }

  /// Sum of the cells of one year whose fuel satisfies `pred` (e.g. all wind).
  template <class Pred>
  [[nodiscard]] ImbalanceVolumes aggregate(int year, Pred pred) const {
    ImbalanceVolumes sum;
    for (const auto& [fy, v] : cells) {
      if (fy.year == year && pred(fy.fuel)) {
        sum += v;
      }
    }
    return sum;
  }

  [[nodiscard]] std::vector<int> years() const {
    std::vector<int> ys;
    for (const auto& [fy, v] : cells) {
      if (std::find(ys.begin(), ys.end(), fy.year) == ys.end()) {
        ys.push_back(fy.year);
      }
    }
    std::sort(ys.begin(), ys.end());
    return ys;
  }
};

inline ImbalanceTable imbalance_percentages(const JoinedTable& joined) {
  ImbalanceTable table;
  for (const auto& [key, info] : joined.keys) {
    const int year = static_cast<int>(key.date.year());
    for (FuelClass f : kFuelClasses) {
      const double g = info.generation[fuel_index(f)];
      if (g != 0.0) {
        table.cells[FuelYear{f, year}].generation_mwh += g;
      }
    }
  }
  for (const auto& ja : joined.actions) {
    const int year = static_cast<int>(ja.action.key.date.year());
    auto& cell = table.cells[FuelYear{ja.fuel, year}];
    cell.category_mwh[static_cast<std::size_t>(classify_action(ja.action))] += ja.action.volume;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Negative-bid statistics
// ---------------------------------------------------------------------------

struct BidDeviation {
  std::size_t action_index{};  // index into the input span
  double deviation{};          // bid price − volume-weighted mean negative-bid price of its period
};

/// Deviation of every negative bid from the volume-weighted mean of all negative bids in its
/// settlement period (own bid included). Non-negative-bid actions are ignored.
inline std::vector<BidDeviation> negative_bid_deviation(std::span<const BalancingAction> actions) {
  std::map<SettlementKey, std::pair<double, double>> sums;  // Σ p·v, Σ v
  for (const auto& a : actions) {
    if (classify_action(a) == ActionCategory::NegativeBid) {
      auto& s = sums[a.key];
      s.first += a.price * a.volume;
      s.second += a.volume;
    }
  }
  std::vector<BidDeviation> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (classify_action(a) != ActionCategory::NegativeBid) {
      continue;
    }
    const auto& s = sums.at(a.key);
    out.push_back(BidDeviation{i, a.price - s.first / s.second});
  }
  return out;
}

/// Box-plot summary with whiskers at exactly one interquartile range beyond the quartiles.
struct BoxStats {
  double median{};
  double q1{};
  double q3{};
  double whisker_low{};
  double whisker_high{};
  std::size_t n{};
};

namespace detail {

inline double sorted_median(std::span<const double> v) {
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Quartiles by median-of-halves; for odd n the overall median belongs to neither half.
inline BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) {
    throw ValidationError("box_stats: empty sample");
  }
  std::sort(values.begin(), values.end());
  const std::span<const double> all{values};
  const std::size_t n = values.size();
  BoxStats s;
  s.n = n;
  s.median = detail::sorted_median(all);
  if (n == 1) {
    s.q1 = s.q3 = s.median;
  } else {
    const std::size_t half = n / 2;
    s.q1 = detail::sorted_median(all.first(half));
    s.q3 = detail::sorted_median(all.last(half));
  }
  const double iqr = s.q3 - s.q1;
  s.whisker_low = s.q1 - iqr;
  s.whisker_high = s.q3 + iqr;
  return s;
}

// ---------------------------------------------------------------------------
// Simplified system prices
// ---------------------------------------------------------------------------

inline constexpr double kPricingVolumeMwh = 500.0;

struct SystemPrices {
  std::optional<double> ssp;  // set when the system is long (net < 0)
  std::optional<double> sbp;  // set when the system is short (net > 0)
  double accepted_mwh{};
};

namespace detail {

// Accepts (price, volume) in stack order until `need` MWh is covered; returns the accepted slices.
inline std::vector<std::pair<double, double>> walk_stack(std::vector<std::pair<double, double>> stack, double need,
                                                         const char* side) {
  std::vector<std::pair<double, double>> accepted;
  double remaining = need;
  for (const auto& [price, volume] : stack) {
    if (remaining <= 0.0) {
      break;
    }
    const double take = std::min(volume, remaining);
    accepted.emplace_back(price, take);
    remaining -= take;
  }
  if (remaining > 1e-9 * std::max(1.0, need)) {
    throw ShortfallError(fmt::format("system_prices: {} stack short by {} MWh", side, remaining), remaining);
  }
  return accepted;
}

// Volume-weighted price of the first `cap` MWh of `slices`, which are ordered most expensive first.
inline double top_volume_price(const std::vector<std::pair<double, double>>& slices, double cap) {
  std::vector<std::pair<double, double>> top;
  double left = cap;
  for (const auto& [price, volume] : slices) {
    if (left <= 0.0) {
      break;
    }
    const double take = std::min(volume, left);
    top.emplace_back(price, take);
    left -= take;
  }
  return volume_weighted_mean(top);
}

}  // namespace detail

/// Imbalance price for one settlement period from the most expensive 500 MWh of accepted energy.
///
/// This is only the volume-weighted 500 MWh rule; the full BSC calculation (NIV tagging,
/// arbitrage and de-minimis filters) is not modelled. Short system: offers are accepted in
/// ascending price order and SBP is taken from the highest-priced 500 MWh. Long system: bids are
/// accepted in descending price order and SSP is taken from the lowest-priced 500 MWh, which can
/// be negative. Net imbalance of zero yields neither price.
inline SystemPrices system_prices(std::span<const BalancingAction> actions, double net_imbalance_mwh) {
  for (const auto& a : actions) {
    if (a.key != actions.front().key) {
      throw ValidationError("system_prices: actions span more than one settlement period");
    }
  }
  SystemPrices out;
  if (net_imbalance_mwh == 0.0) {
    return out;
  }
  const bool short_system = net_imbalance_mwh > 0.0;
  const ActionKind wanted = short_system ? ActionKind::Offer : ActionKind::Bid;
  std::vector<std::pair<double, double>> stack;
  for (const auto& a : actions) {
    if (a.kind == wanted) {
      stack.emplace_back(a.price, a.volume);
    }
  }
  using Slice = std::pair<double, double>;
  const auto by_price_asc = [](const Slice& x, const Slice& y) { return x.first < y.first; };
  const auto by_price_desc = [](const Slice& x, const Slice& y) { return x.first > y.first; };
  if (short_system) {
    std::stable_sort(stack.begin(), stack.end(), by_price_asc);
  } else {
    std::stable_sort(stack.begin(), stack.end(), by_price_desc);
  }
  auto accepted = detail::walk_stack(std::move(stack), std::abs(net_imbalance_mwh), short_system ? "offer" : "bid");
  for (const auto& [p, v] : accepted) {
    out.accepted_mwh += v;
  }
  // Most expensive to the system first: highest offers, lowest bids.
  std::stable_sort(accepted.begin(), accepted.end(), short_system ? +by_price_desc : +by_price_asc);
  const double price = detail::top_volume_price(accepted, kPricingVolumeMwh);
  if (short_system) {
    out.sbp = price;
  } else {
    out.ssp = price;
  }
  return out;
}

}  // namespace windmoe
