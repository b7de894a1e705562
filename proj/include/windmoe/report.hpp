#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/counterfactual.hpp"
#include "windmoe/csv.hpp"
#include "windmoe/error.hpp"
#include "windmoe/imbalance.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/moe.hpp"
#include "windmoe/store.hpp"
#include "windmoe/subsidy.hpp"
#include "windmoe/tlm.hpp"

// Report tables as CSV text. Every renderer is a pure function of its inputs, so identical
// stores give identical bytes.
namespace windmoe::report {

using File = std::pair<std::string, std::string>;

/// Fixed-point text without a stray "-0.00".
inline std::string fixed(double v, int decimals) {
  std::string s = fmt::format("{:.{}f}", v, decimals);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, 1);
  }
  return s;
}

inline std::string opt_fixed(const std::optional<double>& v, int decimals) { return v ? fixed(*v, decimals) : ""; }

/// Micro-pounds as pounds with two decimals, exact.
inline std::string pounds(MicroPounds v) { return detail::format_scaled(detail::round_div(v, 10'000), 2); }

struct NetCase {
  std::string name;
  double savings{};
  double roc{};
  double curtailment{};
  double other{};
};

/// Parses `NAME:SAVINGS:ROC:CURTAILMENT:OTHER`, amounts in pounds (exponents allowed).
inline NetCase parse_net_case(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
    if (colon == std::string_view::npos) {
      break;
    }
    start = colon + 1;
  }
  if (parts.size() != 5 || parts[0].empty()) {
    throw ValidationError("net case must look like NAME:SAVINGS:ROC:CURTAILMENT:OTHER");
  }
  NetCase c;
  c.name = std::string(parts[0]);
  double* targets[] = {&c.savings, &c.roc, &c.curtailment, &c.other};
  for (std::size_t i = 0; i < 4; ++i) {
    auto v = csv::parse_double(parts[i + 1]);
    if (!v) {
      throw ValidationError(fmt::format("net case `{}`: invalid amount `{}`", c.name, parts[i + 1]));
    }
    *targets[i] = *v;
  }
  return c;
}

struct Options {
  std::optional<DateRange> window;  // defaults to the store's extent
  FitOptions fit;
  double bin_width{5.0};
  std::size_t min_n{5};
  double contour_cell{1.0};
  std::optional<RocLedger> roc_ledger;
  std::vector<std::string> roc_periods;  // empty: every ledger period
  std::vector<NetCase> cases;
  SubsidyConstants subsidy;
};

inline constexpr std::array<std::string_view, 9> kReports{"table1",  "table3", "table4", "cashflow", "contour",
                                                          "monthly", "net",    "negbids", "subsidy"};

/// Everything derived once from a store and a window.
struct Analysis {
  DateRange window;
  UnitRegistry registry;
  TlmSources tlm;
  JoinedTable joined;
  std::vector<BalancingAction> actions;
  MarketPanel panel;

  Analysis(const Store& store, const std::optional<DateRange>& requested)
      : registry(store.registry), tlm(TlmSources::from_tables(store.tlm_elexon, store.tlm_bmr)) {
    JoinedTable full = join_settlement(store.generation, store.spot, store.actions, registry);
    const auto extent = full.extent();
    if (!extent) {
      throw ValidationError("store holds no settlement data");
    }
    window = requested.value_or(*extent);
    if (window.empty()) {
      throw ValidationError("window " + format_date(window.from) + ".." + format_date(window.to) + " is empty");
    }
    joined = restrict_to_window(full, window);
    if (joined.keys.empty()) {
      throw ValidationError("window " + format_date(window.from) + ".." + format_date(window.to) +
                            " contains no settlement data");
    }
    actions = joined.action_list();
    panel = build_panel(joined);
  }
};

// ---------------------------------------------------------------------------
// Individual reports
// ---------------------------------------------------------------------------

/// Imbalance volumes as a share of generation per fuel and year, with wind and all-fuel rows.
inline File table1(const Analysis& a) {
  const ImbalanceTable t = imbalance_percentages(a.joined);
  std::string out = "fuel,year,generation_twh,offers_pct,positive_bids_pct,negative_bids_pct\n";
  auto row = [&](std::string_view name, int year, const ImbalanceVolumes& v) {
    out += fmt::format("{},{},{},{},{},{}\n", name, year, fixed(v.generation_mwh / 1e6, 6),
                       opt_fixed(v.percentage(ActionCategory::Offer), 4),
                       opt_fixed(v.percentage(ActionCategory::PositiveBid), 4),
                       opt_fixed(v.percentage(ActionCategory::NegativeBid), 4));
  };
  for (int year : t.years()) {
    for (FuelClass f : kFuelClasses) {
      if (auto it = t.cells.find(FuelYear{f, year}); it != t.cells.end()) {
        row(fuel_name(f), year, it->second);
      }
    }
    row("AllWind", year, t.aggregate(year, [](FuelClass f) { return is_wind(f); }));
    row("All", year, t.aggregate(year, [](FuelClass) { return true; }));
  }
  return {"table1_imbalance.csv", out};
}

/// Cash flow per fuel, year and category, plus the per-action TLM disagreement log.
inline std::vector<File> cashflow(const Analysis& a) {
  const TlmResolver resolver(a.registry, a.tlm);
  const CashFlowSummary summary = cash_flow(a.actions, a.registry, resolver);
  std::string out = "fuel,year,category,cash_flow_gbp\n";
  std::map<std::pair<int, ActionCategory>, double> all;
  for (const auto& [k, v] : summary.totals) {
    out += fmt::format("{},{},{},{}\n", fuel_name(k.fuel), k.year, category_name(k.category), fixed(v, 2));
    all[{k.year, k.category}] += v;
  }
  for (const auto& [k, v] : all) {
    out += fmt::format("All,{},{},{}\n", k.first, category_name(k.second), fixed(v, 2));
  }
  std::string dis = "date,sp,unit_id,kind,published_tlm,resolved_tlm,relative_difference\n";
  for (const auto& d : find_tlm_disagreements(a.actions, resolver)) {
    const auto& act = a.actions[d.action_index];
    dis += fmt::format("{},{},{},{},{},{},{}\n", format_date(act.key.date), act.key.sp, act.unit_id,
                       act.kind == ActionKind::Offer ? "offer" : "bid", csv::format_double(d.published),
                       csv::format_double(d.resolved), fixed(d.relative_difference, 6));
  }
  return {{"cashflow.csv", out}, {"tlm_disagreements.csv", dis}};
}

/// Piecewise fits of price against wind share for SSP, SBP and spot, plus the scatter data.
inline std::vector<File> table3(const Analysis& a, const FitOptions& options) {
  const double below_hi = options.below_cap ? std::min(*options.below_cap, options.knee) : options.knee;
  const std::array<std::pair<std::string_view, FitWindow>, 2> segments{
      std::pair{std::string_view{"below"}, FitWindow{0.0, below_hi, true, true}},
      std::pair{std::string_view{"above"}, FitWindow{options.knee, 100.0, false, true}}};
  std::string out = "series,segment,lo_pct,hi_pct,n,y0,m,x0,relative_moe_pct\n";
  std::string scatter = "series,date,sp,wind_pct,onshore_pct,offshore_pct,price,volume_mwh\n";
  for (PriceSeries series : {PriceSeries::SSP, PriceSeries::SBP, PriceSeries::Spot}) {
    const auto points = price_points(a.joined, series);
    for (const auto& p : points) {
      scatter += fmt::format("{},{},{},{},{},{},{},{}\n", series_name(series), format_date(p.key.date), p.key.sp,
                             csv::format_double(p.wind_pct), csv::format_double(p.onshore_pct),
                             csv::format_double(p.offshore_pct), csv::format_double(p.price),
                             csv::format_double(p.volume));
    }
    for (const auto& [name, window] : segments) {
      const auto n = static_cast<std::size_t>(std::count_if(
          points.begin(), points.end(), [&](const WindSharePoint& p) { return window.contains(p.wind_pct); }));
      std::string fields = ",,,";
      try {
        const FitResult fit = fit_line(points, series, window, options.weighted);
        std::string rel;
        if (fit.y0 > 0.0) {
          rel = csv::format_double(relative_moe(fit));
        }
        fields = fmt::format("{},{},{},{}", csv::format_double(fit.y0), csv::format_double(fit.m),
                             fit.x0 ? csv::format_double(*fit.x0) : "", rel);
      } catch (const RankDeficiencyError&) {
        // Too few distinct wind shares; the row stays blank.
      }
      out += fmt::format("{},{},{},{},{},{}\n", series_name(series), name, csv::format_double(window.lo),
                         csv::format_double(window.hi), n, fields);
    }
  }
  return {{"table3_fits.csv", out}, {"moe_points.csv", scatter}};
}

/// Annual scenario costs and the binned price table they were drawn from.
inline std::vector<File> table4(const Analysis& a, double bin_width, std::size_t min_n) {
  const BinnedPriceTable bins = build_bins(a.panel.points, bin_width);
  std::string out =
      "year,actual_gbp_bn,no_onshore_gbp_bn,no_offshore_gbp_bn,low_wind_gbp_bn,increase_gbp_bn,increase_pct,"
      "keys,skipped_keys,low_wind_fallback_keys\n";
  for (const auto& r : cost_report(a.panel, a.window, bins, min_n)) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.year, format_gbp_bn(r.actual()),
                       format_gbp_bn(r.cost[scenario_index(Scenario::NoOnshore)]),
                       format_gbp_bn(r.cost[scenario_index(Scenario::NoOffshore)]), format_gbp_bn(r.low_wind()),
                       format_gbp_bn(r.increase()), format_percent(r.increase(), r.actual()), r.keys,
                       r.skipped_keys, r.fallback_keys[scenario_index(Scenario::LowWind)]);
  }
  std::string cells = "sp,bin_lo_pct,bin_hi_pct,mean_price,n,volume_mwh\n";
  for (const auto& [k, c] : bins.cells()) {
    cells += fmt::format("{},{},{},{},{},{}\n", k.first, csv::format_double(k.second * bin_width),
                         csv::format_double(std::min(100.0, (k.second + 1) * bin_width)),
                         csv::format_double(c.mean), c.n, csv::format_double(c.volume));
  }
  return {{"table4_scenarios.csv", out}, {"price_bins.csv", cells}};
}

/// Volume-weighted spot price over a full onshore × offshore rectangle; empty cells have n = 0.
inline File contour(const Analysis& a, double cell_width) {
  const ContourGrid grid = contour_grid(a.panel.points, cell_width);
  int max_on = 0;
  int max_off = 0;
  for (const auto& [bin, cell] : grid.cells) {
    max_on = std::max(max_on, bin.first);
    max_off = std::max(max_off, bin.second);
  }
  std::string out = "onshore_lo_pct,offshore_lo_pct,mean_price,n\n";
  for (int on = 0; on <= max_on; ++on) {
    for (int off = 0; off <= max_off; ++off) {
      const auto* cell = grid.find(on, off);
      out += fmt::format("{},{},{},{}\n", csv::format_double(on * cell_width), csv::format_double(off * cell_width),
                         cell && cell->mean_price ? csv::format_double(*cell->mean_price) : "",
                         cell ? cell->n : 0);
    }
  }
  return {"contour.csv", out};
}

inline File monthly(const Analysis& a, double bin_width, std::size_t min_n) {
  const BinnedPriceTable bins = build_bins(a.panel.points, bin_width);
  const auto series = monthly_series(a.panel, a.window, kScenarios, bins, min_n);
  std::string out = "month,actual_gbp,no_onshore_gbp,no_offshore_gbp,low_wind_gbp\n";
  for (const auto& [m, cost] : series) {
    out += fmt::format("{:04}-{:02},{},{},{},{}\n", m.year, m.month, pounds(cost[scenario_index(Scenario::Actual)]),
                       pounds(cost[scenario_index(Scenario::NoOnshore)]),
                       pounds(cost[scenario_index(Scenario::NoOffshore)]),
                       pounds(cost[scenario_index(Scenario::LowWind)]));
  }
  return {"monthly_costs.csv", out};
}

/// Curtailment cost: what was paid to wind units through negative-priced bids.
inline double wind_curtailment_cost(const Analysis& a) {
  const TlmResolver resolver(a.registry, a.tlm);
  double total = 0.0;
  for (const auto& act : a.actions) {
    if (is_wind(classify_fuel(act.unit_id, a.registry)) && classify_action(act) == ActionCategory::NegativeBid) {
      total += action_cash_flow(act, resolver.resolve(act).value);
    }
  }
  return total;
}

inline std::vector<std::string> selected_periods(const Options& o) {
  return o.roc_periods.empty() && o.roc_ledger ? o.roc_ledger->periods() : o.roc_periods;
}

/// The data-derived case (savings from the scenario costs) followed by any supplied cases.
inline File net(const Analysis& a, const Options& o) {
  std::vector<NetCase> cases;
  NetCase data{"data", 0.0, 0.0, 0.0, 0.0};
  const BinnedPriceTable bins = build_bins(a.panel.points, o.bin_width);
  MicroPounds savings = 0;
  for (const auto& r : cost_report(a.panel, a.window, bins, o.min_n)) {
    savings += r.increase();
  }
  data.savings = to_pounds(savings);
  if (o.roc_ledger) {
    data.roc = static_cast<double>(roc_totals(*o.roc_ledger, selected_periods(o)).cost_gbp);
  }
  data.curtailment = wind_curtailment_cost(a);
  cases.push_back(data);
  cases.insert(cases.end(), o.cases.begin(), o.cases.end());

  std::string out = "case,savings_gbp,roc_gbp,curtailment_gbp,other_gbp,net_gbp,net_gbp_m\n";
  for (const auto& c : cases) {
    const double n = net_position(c.savings, c.roc, c.curtailment, c.other);
    out += fmt::format("{},{},{},{},{},{},{}\n", c.name, fixed(c.savings, 2), fixed(c.roc, 2),
                       fixed(c.curtailment, 2), fixed(c.other, 2), fixed(n, 2), fixed(n / 1e6, 1));
  }
  return {"net_position.csv", out};
}

/// Box statistics of negative-bid prices and of their deviation from the period mean, plus the
/// bids priced beyond the lost-subsidy threshold.
inline std::vector<File> negbids(const Analysis& a, const SubsidyConstants& constants) {
  std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& d : negative_bid_deviation(a.actions)) {
    const auto& act = a.actions[d.action_index];
    const FuelClass fuel = classify_fuel(act.unit_id, a.registry);
    const int year = static_cast<int>(act.key.date.year());
    for (std::string name : {std::string(fuel_name(fuel)), std::string(is_wind(fuel) ? "AllWind" : "")}) {
      if (name.empty()) {
        continue;
      }
      auto& g = groups[{name, year}];
      g.first.push_back(act.price);
      g.second.push_back(d.deviation);
    }
  }
  std::string out = "group,year,statistic,n,median,q1,q3,whisker_low,whisker_high\n";
  for (const auto& [k, g] : groups) {
    for (const auto& [stat, values] : {std::pair{"price", &g.first}, std::pair{"deviation", &g.second}}) {
      const BoxStats s = box_stats(*values);
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", k.first, k.second, stat, s.n, fixed(s.median, 4),
                         fixed(s.q1, 4), fixed(s.q3, 4), fixed(s.whisker_low, 4), fixed(s.whisker_high, 4));
    }
  }
  std::map<int, std::pair<std::size_t, double>> flagged;
  for (std::size_t i : screen_lost_subsidy(a.actions, constants)) {
    auto& f = flagged[static_cast<int>(a.actions[i].key.date.year())];
    ++f.first;
    f.second += a.actions[i].volume;
  }
  std::string lost = "year,threshold_gbp_mwh,flagged_bids,flagged_mwh\n";
  for (const auto& [year, f] : flagged) {
    lost += fmt::format("{},{},{},{}\n", year, csv::format_double(constants.lost_subsidy_threshold), f.first,
                        fixed(f.second, 3));
  }
  return {{"negative_bids.csv", out}, {"lost_subsidy.csv", lost}};
}

/// ROC costs per obligation period, their sum, and the month-apportioned calendar-year figure
/// for the years of the window when the ledger covers them.
inline File subsidy(const Analysis& a, const Options& o) {
  if (!o.roc_ledger) {
    throw ValidationError("the subsidy report needs --roc-ledger");
  }
  const RocLedger& ledger = *o.roc_ledger;
  std::string out = "convention,label,certificates_millions,cost_gbp_bn\n";
  auto row = [&](std::string_view convention, const std::string& label, std::optional<RocAmount> amount,
                 std::optional<double> cost) {
    out += fmt::format("{},{},{},{}\n", convention, label,
                       amount ? fixed(static_cast<double>(amount->certificates) / 1e6, 2) : "",
                       fixed((cost ? *cost : static_cast<double>(amount->cost_gbp)) / 1e9, 3));
  };
  for (const auto& p : ledger.periods()) {
    const std::array<std::string, 1> one{p};
    row("obligation_period", p, roc_totals(ledger, one), std::nullopt);
  }
  const auto periods = selected_periods(o);
  std::string joined_label;
  for (const auto& p : periods) {
    joined_label += (joined_label.empty() ? "" : "+") + p;
  }
  row("obligation_period_sum", joined_label, roc_totals(ledger, periods), std::nullopt);
  const int first = static_cast<int>(a.window.from.year());
  const int last = static_cast<int>(a.window.to.year());
  try {
    row("calendar_apportioned", fmt::format("{}-{}", first, last), std::nullopt,
        apportioned_calendar_cost(ledger, first, last));
  } catch (const ValidationError&) {
    // Ledger does not span the calendar years of the window.
  }
  return {"subsidy.csv", out};
}

/// Renders the named report (or `all`) into file name → contents.
inline std::vector<File> run(const Store& store, std::string_view which, const Options& o) {
  if (which != "all" && std::find(kReports.begin(), kReports.end(), which) == kReports.end()) {
    throw ValidationError("unknown report `" + std::string(which) + "`");
  }
  const Analysis a(store, o.window);
  std::vector<File> files;
  auto want = [&](std::string_view name) {
    if (name == "subsidy" && which == "all") {
      return o.roc_ledger.has_value();
    }
    return which == "all" || which == name;
  };
  auto add = [&](auto&& produced) {
    if constexpr (std::is_same_v<std::decay_t<decltype(produced)>, File>) {
      files.push_back(std::move(produced));
    } else {
      files.insert(files.end(), produced.begin(), produced.end());
    }
  };
  if (want("table1")) add(table1(a));
  if (want("table3")) add(table3(a, o.fit));
  if (want("table4")) add(table4(a, o.bin_width, o.min_n));
  if (want("cashflow")) add(cashflow(a));
  if (want("contour")) add(contour(a, o.contour_cell));
  if (want("monthly")) add(monthly(a, o.bin_width, o.min_n));
  if (want("net")) add(net(a, o));
  if (want("negbids")) add(negbids(a, o.subsidy));
  if (want("subsidy")) add(subsidy(a, o));
  return files;
}

}  // namespace windmoe::report
