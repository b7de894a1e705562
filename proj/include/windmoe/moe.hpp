#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"
#include "windmoe/imbalance.hpp"
#include "windmoe/ingest.hpp"

namespace windmoe {

enum class PriceSeries : std::uint8_t { SSP, SBP, Spot };

inline std::string_view series_name(PriceSeries s) {
  switch (s) {
    case PriceSeries::SSP: return "SSP";
    case PriceSeries::SBP: return "SBP";
    case PriceSeries::Spot: return "Spot";
  }
  return "";
}

/// Wind shares of one settlement period, in percent of total generation.
struct WindShare {
  double wind_pct{};
  double onshore_pct{};
  double offshore_pct{};
  double total_mwh{};
};

/// A settlement period's wind shares together with a price and its weight.
struct WindSharePoint {
  SettlementKey key;
  double wind_pct{};
  double onshore_pct{};
  double offshore_pct{};
  double price{};   // GBP/MWh
  double volume{};  // MWh, used as the regression / averaging weight
};

inline WindShare wind_share(const KeyInfo& info) {
  double onshore = 0.0;
  double offshore = 0.0;
  for (FuelClass f : kFuelClasses) {
    if (is_onshore_wind(f)) {
      onshore += info.generation[fuel_index(f)];
    } else if (is_offshore_wind(f)) {
      offshore += info.generation[fuel_index(f)];
    }
  }
  const double total = info.total_generation();
  if (!(total > 0.0)) {
    throw ValidationError("wind_share: zero total generation");
  }
  WindShare s;
  s.total_mwh = total;
  s.onshore_pct = 100.0 * onshore / total;
  s.offshore_pct = 100.0 * offshore / total;
  s.wind_pct = s.onshore_pct + s.offshore_pct;
  return s;
}

inline WindShare wind_share(const JoinedTable& joined, const SettlementKey& key) {
  const auto* info = joined.find(key);
  if (info == nullptr) {
    throw ValidationError("wind_share: key " + format_key(key) + " not in joined table");
  }
  return wind_share(*info);
}

/// Priced points for one series; the weight is total generation at the key.
///
/// Spot uses the exchange price. SSP/SBP come from `system_prices` over the period's accepted
/// actions with net imbalance = offer MWh − bid MWh, so a period contributes to SBP when short and
/// to SSP when long.
inline std::vector<WindSharePoint> price_points(const JoinedTable& joined, PriceSeries series) {
  std::map<SettlementKey, std::vector<BalancingAction>> by_key;
  if (series != PriceSeries::Spot) {
    for (const auto& ja : joined.actions) {
      by_key[ja.action.key].push_back(ja.action);
    }
  }
  std::vector<WindSharePoint> points;
  for (const auto& [key, info] : joined.keys) {
    if (!(info.total_generation() > 0.0)) {
      continue;
    }
    std::optional<double> price;
    if (series == PriceSeries::Spot) {
      price = info.spot_price;
    } else if (auto it = by_key.find(key); it != by_key.end()) {
      double net = 0.0;
      for (const auto& a : it->second) {
        net += a.kind == ActionKind::Offer ? a.volume : -a.volume;
      }
      const auto prices = system_prices(it->second, net);
      price = series == PriceSeries::SSP ? prices.ssp : prices.sbp;
    }
    if (!price) {
      continue;
    }
    const WindShare s = wind_share(info);
    points.push_back(WindSharePoint{key, s.wind_pct, s.onshore_pct, s.offshore_pct, *price, s.total_mwh});
  }
  return points;
}

struct SkippedKey {
  SettlementKey key;
  double volume{};
};

/// Spot-priced points plus the generation-bearing keys that had no spot price.
struct MarketPanel {
  std::vector<WindSharePoint> points;
  std::vector<SkippedKey> skipped;
};

inline MarketPanel build_panel(const JoinedTable& joined) {
  MarketPanel panel;
  for (const auto& [key, info] : joined.keys) {
    const double total = info.total_generation();
    if (!(total > 0.0)) {
      continue;
    }
    if (info.price_missing()) {
      panel.skipped.push_back(SkippedKey{key, total});
      continue;
    }
    const WindShare s = wind_share(info);
    panel.points.push_back(WindSharePoint{key, s.wind_pct, s.onshore_pct, s.offshore_pct, *info.spot_price, total});
  }
  return panel;
}

// ---------------------------------------------------------------------------
// Piecewise-linear fit
// ---------------------------------------------------------------------------

struct FitResult {
  double y0{};                // zero-wind intercept, GBP/MWh
  double m{};                 // GBP/MWh per percentage point
  std::optional<double> x0;   // wind share at which the line crosses zero; absent when m == 0
  PriceSeries series{PriceSeries::Spot};
  double range_lo{};
  double range_hi{};
  std::size_t n{};
};

struct FitWindow {
  double lo{0.0};
  double hi{100.0};
  bool lo_inclusive{true};
  bool hi_inclusive{true};

  [[nodiscard]] bool contains(double x) const {
    const bool above_lo = lo_inclusive ? x >= lo : x > lo;
    const bool below_hi = hi_inclusive ? x <= hi : x < hi;
    return above_lo && below_hi;
  }
};

/// Least-squares line y = y0 + m·x over the points inside `window`.
inline FitResult fit_line(std::span<const WindSharePoint> points, PriceSeries series, const FitWindow& window,
                          bool weighted = true) {
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  std::size_t n = 0;
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!window.contains(p.wind_pct)) {
      continue;
    }
    const double w = weighted ? p.volume : 1.0;
    if (w < 0.0) {
      throw ValidationError("fit_line: negative weight");
    }
    ++n;
    if (w > 0.0) {
      sw += w;
      sx += w * p.wind_pct;
      sy += w * p.price;
      distinct.insert(p.wind_pct);
    }
  }
  if (distinct.size() < 2) {
    throw RankDeficiencyError(fmt::format("fit_line: fewer than two distinct wind shares in [{}, {}] for {}",
                                          window.lo, window.hi, series_name(series)));
  }
  const double xm = sx / sw;
  const double ym = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : points) {
    if (!window.contains(p.wind_pct)) {
      continue;
    }
    const double w = weighted ? p.volume : 1.0;
    const double dx = p.wind_pct - xm;
    sxx += w * dx * dx;
    sxy += w * dx * (p.price - ym);
  }
  FitResult fit;
  fit.m = sxy / sxx;
  fit.y0 = ym - fit.m * xm;
  if (fit.m != 0.0) {
    fit.x0 = -fit.y0 / fit.m;
  }
  fit.series = series;
  fit.range_lo = window.lo;
  fit.range_hi = window.hi;
  fit.n = n;
  return fit;
}

struct FitOptions {
  double knee{30.0};
  std::optional<double> below_cap{25.0};  // upper end of the below-knee window, if tighter than the knee
  bool weighted{true};
};

struct PiecewiseFit {
  FitResult below;
  FitResult above;
};

/// Independent lines below and above a fixed knee. Below uses wind_pct ≤ min(knee, cap); above uses wind_pct > knee.
inline PiecewiseFit fit_piecewise(std::span<const WindSharePoint> points, PriceSeries series,
                                  const FitOptions& options = {}) {
  const double below_hi = options.below_cap ? std::min(*options.below_cap, options.knee) : options.knee;
  PiecewiseFit fit;
  fit.below = fit_line(points, series, FitWindow{0.0, below_hi, true, true}, options.weighted);
  fit.above = fit_line(points, series, FitWindow{options.knee, 100.0, false, true}, options.weighted);
  return fit;
}

/// Percent price decrease per percentage point of wind, relative to the zero-wind price.
inline double relative_moe(const FitResult& fit) {
  if (!(fit.y0 > 0.0)) {
    throw ValidationError("relative_moe: zero-wind intercept must be positive");
  }
  return 100.0 * std::abs(fit.m) / fit.y0;
}

// ---------------------------------------------------------------------------
// Onshore / offshore contour grid
// ---------------------------------------------------------------------------

struct ContourCell {
  std::optional<double> mean_price;  // absent if every point in the cell had zero weight
  std::size_t n{};
  double volume{};
};

struct ContourGrid {
  double cell_width{1.0};
  std::map<std::pair<int, int>, ContourCell> cells;  // (onshore bin, offshore bin); only populated cells

  [[nodiscard]] const ContourCell* find(int onshore_bin, int offshore_bin) const {
    auto it = cells.find({onshore_bin, offshore_bin});
    return it == cells.end() ? nullptr : &it->second;
  }
};

inline ContourGrid contour_grid(std::span<const WindSharePoint> points, double cell_width = 1.0) {
  if (!(cell_width > 0.0)) {
    throw ValidationError("contour_grid: cell width must be positive");
  }
  std::map<std::pair<int, int>, std::pair<double, double>> sums;  // Σ p·w, Σ w
  ContourGrid grid;
  grid.cell_width = cell_width;
  for (const auto& p : points) {
    const std::pair<int, int> bin{static_cast<int>(std::floor(p.onshore_pct / cell_width)),
                                  static_cast<int>(std::floor(p.offshore_pct / cell_width))};
    auto& cell = grid.cells[bin];
    ++cell.n;
    cell.volume += p.volume;
    auto& s = sums[bin];
    s.first += p.price * p.volume;
    s.second += p.volume;
  }
  for (auto& [bin, cell] : grid.cells) {
    const auto& s = sums[bin];
    if (s.second > 0.0) {
      cell.mean_price = s.first / s.second;
    }
  }
  return grid;
}

}  // namespace windmoe
