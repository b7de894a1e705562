// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "windmoe/counterfactual.hpp"
#include "windmoe/imbalance.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/moe.hpp"
#include "windmoe/report.hpp"
#include "windmoe/store.hpp"
#include "windmoe/subsidy.hpp"
#include "windmoe/synthgen.hpp"
#include "windmoe/timebase.hpp"
#include "windmoe/tlm.hpp"

namespace fs = std::filesystem;
using namespace windmoe;

namespace {

Date ymd(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}; }

// Collects the individual failures of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      failures_.push_back(what);
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol, fmt::format("{}: got {:.10g}, want {:.10g} ± {:.3g}", what, got, want, tol));
  }
  [[nodiscard]] bool ok() const { return failures_.empty(); }
  [[nodiscard]] const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

struct Criterion {
  int number;
  std::string title;
  std::optional<double> limit_s;  // stated runtime limit
  std::function<void(Check&)> body;
};

// ---------------------------------------------------------------------------

void criterion_table3(Check& c) {
  struct Row {
    double x0, y0, m;
  };
  for (const Row& r : {Row{59.34, 46.88, -0.79}, Row{64.62, 60.10, -0.93}, Row{60.06, 52.85, -0.88}}) {
    std::vector<WindSharePoint> pts;
    for (int i = 0; i <= 250; ++i) {
      const double x = 0.1 * i;
      pts.push_back(WindSharePoint{SettlementKey{ymd(2013, 1, 1), 1 + i % 48}, x, x / 2, x / 2, r.y0 + r.m * x,
                                   1000.0 + i});
    }
    for (int i = 1; i <= 60; ++i) {
      const double x = 30.0 + 0.5 * i;
      pts.push_back(WindSharePoint{SettlementKey{ymd(2013, 1, 2), 1 + i % 48}, x, x / 2, x / 2,
                                   r.y0 + r.m * 30.0 + 0.3 * (x - 30.0), 1000.0});
    }
    const auto fit = fit_piecewise(pts, PriceSeries::Spot).below;
    const std::string tag = fmt::format("line y0={} m={}", r.y0, r.m);
    c.near(fit.y0, r.y0, 1e-6 * std::abs(r.y0), tag + " y0");
    c.near(fit.m, r.m, 1e-6 * std::abs(r.m), tag + " m");
    c.expect(fit.x0.has_value(), tag + " x0 missing");
    const double x0_true = -r.y0 / r.m;
    if (fit.x0) {
      c.near(*fit.x0, x0_true, 1e-6 * x0_true, tag + " x0 vs -y0/m");
      c.near(*fit.x0, r.x0, 0.01, tag + " x0 vs published");
    }
  }
}

void criterion_relative_moe(Check& c) {
  FitResult f;
  f.y0 = 52.85;
  f.m = -0.88;
  const double r = relative_moe(f);
  c.expect(r >= 1.66 && r <= 1.67, fmt::format("relative MOE {:.4f} outside [1.66, 1.67]", r));
}

void criterion_net_position(Check& c) {
  const double headline = net_position(4.30e9, 3.70e9, 86.2e6, 0.0);
  c.near(headline, 513.8e6, 1.0, "net position headline");
  c.near(headline, 514e6, 20e6, "net position vs published");
  const double no_offshore = net_position(840e6, 1.554e9, 86.2e6, 0.0);
  c.near(no_offshore, -797e6, 30e6, "no-offshore net position");
  const double no_onshore = net_position(1.49e9, 2.105e9, 0.0, 0.0);
  c.near(no_onshore, -618e6, 30e6, "no-onshore net position");
}

void criterion_table2(Check& c) {
  const RocLedger ledger = RocLedger::load(fs::path(WINDMOE_DATA_DIR) / "roc_ledger.csv");
  struct Cell {
    const char* period;
    std::optional<RocTechnology> tech;
    std::int64_t certificates;
    std::int64_t cost;
  };
  const Cell cells[] = {
      {"2012-13", RocTechnology::OffshoreWind, 15'690'000, 639'000'000},
      {"2013-14", RocTechnology::OffshoreWind, 23'940'000, 1'006'000'000},
      {"2014-15", RocTechnology::OffshoreWind, 25'370'000, 1'099'000'000},
      {"2012-13", RocTechnology::OnshoreWind, 12'210'000, 497'000'000},
      {"2013-14", RocTechnology::OnshoreWind, 18'710'000, 786'000'000},
      {"2014-15", RocTechnology::OnshoreWind, 17'730'000, 768'000'000},
      {"2012-13", std::nullopt, 27'900'000, 1'136'000'000},
      {"2013-14", std::nullopt, 42'650'000, 1'792'000'000},
      {"2014-15", std::nullopt, 43'100'000, 1'866'000'000},
  };
  for (const auto& cell : cells) {
    const std::array<std::string, 1> ps{cell.period};
    const RocAmount got =
        cell.tech ? roc_totals(ledger, ps, std::array{*cell.tech}) : roc_totals(ledger, ps);
    c.expect(got == RocAmount{cell.certificates, cell.cost},
             fmt::format("{} {}: got {} certificates / £{}", cell.period,
                         cell.tech ? technology_name(*cell.tech) : "total", got.certificates, got.cost_gbp));
  }
}

// A year of settlement periods in four wind groups whose prices are solved so the annual
// scenario costs land on the given targets (GBP bn): actual, no onshore, no offshore, low wind.
struct Table4Target {
  int year;
  double actual, no_onshore, no_offshore, low_wind;
};

void append_table4_year(Store& store, const Table4Target& t) {
  constexpr double kVolume = 40000.0;  // MWh per period
  struct Group {
    double onshore, offshore;
  };
  const Group groups[4] = {{1, 1}, {3, 4}, {4, 8}, {8, 14}};
  const DateRange year{ymd(t.year, 1, 1), ymd(t.year, 12, 31)};
  std::vector<std::pair<Date, int>> day_group;
  std::array<double, 4> n{};
  int cycle = 0;
  for (Date d = year.from;; d = next_day(d)) {
    // Days of irregular length go in the calm group; their extra periods have no peers and fall back.
    const int periods = store.rule.periods_in_day(d);
    const int g = periods == 48 ? cycle++ % 4 : 0;
    day_group.emplace_back(d, g);
    n[g] += periods;
    if (d == year.to) break;
  }
  const double total = n[0] + n[1] + n[2] + n[3];
  std::array<double, 4> p{};
  p[0] = t.low_wind * 1e9 / (kVolume * total);
  p[1] = (t.no_offshore * 1e9 / kVolume - (n[0] + n[1] + n[2]) * p[0]) / n[3];
  p[2] = (t.no_onshore * 1e9 / kVolume - (n[0] + n[1]) * p[0] - n[2] * p[1]) / n[3];
  p[3] = (t.actual * 1e9 / kVolume - n[0] * p[0] - n[1] * p[1] - n[2] * p[2]) / n[3];
  for (const auto& [d, g] : day_group) {
    const int periods = store.rule.periods_in_day(d);
    for (int sp = 1; sp <= periods; ++sp) {
      const SettlementKey k{d, sp};
      const double on = kVolume * groups[g].onshore / 100.0;
      const double off = kVolume * groups[g].offshore / 100.0;
      store.generation.push_back({k, "WON", on});
      store.generation.push_back({k, "WOFF", off});
      store.generation.push_back({k, "GAS", kVolume - on - off});
      store.spot.push_back({k, p[g], kVolume / 2});
    }
  }
}

void criterion_table4(Check& c) {
  Store store;
  store.rule = ClockRule::uk_statutory(2013, 2014);
  store.registry = {{"WON", FuelClass::WindOnshoreScotland, Role::Producer},
                    {"WOFF", FuelClass::WindOffshoreEngland, Role::Producer},
                    {"GAS", FuelClass::CCGT, Role::Producer}};
  append_table4_year(store, {2013, 36.69, 38.24, 38.45, 39.04});
  append_table4_year(store, {2014, 29.4049, 30.67, 31.11, 31.3551});
  // Price bins pool every year in the window, so each year is reported on its own.
  std::map<int, std::vector<std::string>> rows;
  for (int year : {2013, 2014}) {
    report::Options o;
    o.window = DateRange{ymd(year, 1, 1), ymd(year, 12, 31)};
    const auto files = report::run(store, "table4", o);
    std::istringstream in(files.at(0).second);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = csv::split(line);
      rows[std::stoi(std::string(f[0]))] = std::vector<std::string>(f.begin(), f.end());
    }
  }
  const std::map<int, std::vector<std::string>> want{
      {2013, {"2013", "36.69", "38.24", "38.45", "39.04", "2.35", "6.4"}},
      {2014, {"2014", "29.40", "30.67", "31.11", "31.36", "1.95", "6.6"}},
  };
  for (const auto& [year, cols] : want) {
    auto it = rows.find(year);
    c.expect(it != rows.end(), fmt::format("no table4 row for {}", year));
    if (it == rows.end()) continue;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      c.expect(it->second.at(i) == cols[i],
               fmt::format("{} column {}: got {}, want {}", year, i, it->second.at(i), cols[i]));
    }
  }
}

// Independent per-action oracle: registry role or the sign of the published value, then Elexon
// before BMR, then the sign convention of each action kind.
double oracle_tlm(const BalancingAction& a, const std::map<std::string, Role>& roles, const TlmSources& s) {
  Role role = roles.count(a.unit_id) ? roles.at(a.unit_id) : Role::Unknown;
  if (role == Role::Unknown) {
    role = *a.tlm_published < 1.0 ? Role::Producer : Role::Consumer;
  }
  const TlmKey k{a.key, role};
  if (auto it = s.elexon.find(k); it != s.elexon.end()) return it->second;
  return s.bmr_historic.at(k);
}

void criterion_oracle_recovery(Check& c) {
  const fs::path root = fs::temp_directory_path() / fmt::format("windmoe_acceptance_{}", ::getpid());
  fs::remove_all(root);
  SynthConfig config;  // one calendar year of 2013, seed 1
  const SynthData data = generate(config);
  write_files_atomically(root / "raw", render_files(data));

  Store store;
  store.rule = ClockRule::load(root / "raw" / kClockRuleFile);
  std::size_t rejects = 0;
  auto read = [&]<class Record>(DatasetKind kind, std::vector<Record>& into) {
    ParseOptions o;
    o.rule = kind == DatasetKind::Registry ? nullptr : &store.rule;
    auto parsed = read_dataset_file<Record>(root / "raw" / dataset_file(kind), o);
    rejects += parsed.report.rows_rejected;
    into = std::move(parsed.records);
  };
  read(DatasetKind::Registry, store.registry);
  read(DatasetKind::Generation, store.generation);
  read(DatasetKind::Spot, store.spot);
  read(DatasetKind::Actions, store.actions);
  read(DatasetKind::TlmElexon, store.tlm_elexon);
  read(DatasetKind::TlmBmr, store.tlm_bmr);
  c.expect(rejects == 0, fmt::format("{} rows rejected on ingest", rejects));
  write_files_atomically(root / "store", render_store(store));
  const Store loaded = load_store(root / "store");
  const auto files = report::run(loaded, "all", report::Options{});
  c.expect(files.size() == 12, fmt::format("report wrote {} files", files.size()));

  const std::size_t periods = data.manifest["settlement_periods"].get<std::size_t>();
  c.expect(periods == 17520, fmt::format("{} settlement periods", periods));
  c.expect(loaded.registry.size() >= 45 && loaded.registry.size() <= 55,
           fmt::format("{} units", loaded.registry.size()));

  // Merit-order gradient below the knee.
  const UnitRegistry registry(loaded.registry);
  const JoinedTable joined = join_settlement(loaded.generation, loaded.spot, loaded.actions, registry);
  const auto fit = fit_piecewise(price_points(joined, PriceSeries::Spot), PriceSeries::Spot).below;
  c.expect(fit.n >= 10000, fmt::format("only {} sub-knee points", fit.n));
  c.near(fit.m, config.moe_m, 0.05 * std::abs(config.moe_m), "MOE gradient");

  // Imbalance percentages against the planted expectations.
  const ImbalanceTable table = imbalance_percentages(joined);
  for (FuelClass f : kFuelClasses) {
    for (auto [suffix, cat] : {std::pair{"offers_pct", ActionCategory::Offer},
                               std::pair{"positive_bids_pct", ActionCategory::PositiveBid},
                               std::pair{"negative_bids_pct", ActionCategory::NegativeBid}}) {
      const std::string key = fmt::format("imbalance.{}.{}", fuel_name(f), suffix);
      if (!data.manifest.contains(key)) continue;
      const auto got = table.percentage(f, 2013, cat);
      c.expect(got.has_value(), key + " missing");
      if (got) c.near(*got, data.manifest[key].get<double>(), 0.1, key);
    }
  }

  // Cash flow against the brute-force per-action sum.
  const TlmSources sources = TlmSources::from_tables(loaded.tlm_elexon, loaded.tlm_bmr);
  const TlmResolver resolver(registry, sources);
  const auto actions = joined.action_list();
  const CashFlowSummary summary = cash_flow(actions, registry, resolver);
  std::map<std::string, Role> roles;
  std::map<std::string, FuelClass> fuels;
  for (const auto& e : loaded.registry) {
    roles[e.unit_id] = e.role;
    fuels[e.unit_id] = e.fuel;
  }
  std::map<std::tuple<FuelClass, int, ActionCategory>, double> oracle;
  for (const auto& a : actions) {
    const ActionCategory cat =
        a.kind == ActionKind::Offer ? ActionCategory::Offer
                                    : (a.price < 0.0 ? ActionCategory::NegativeBid : ActionCategory::PositiveBid);
    const double sign = a.kind == ActionKind::Offer ? 1.0 : -1.0;
    oracle[{fuels.at(a.unit_id), static_cast<int>(a.key.date.year()), cat}] +=
        sign * a.volume * a.price * oracle_tlm(a, roles, sources);
  }
  c.expect(oracle.size() == summary.totals.size(),
           fmt::format("{} oracle cells vs {} summary cells", oracle.size(), summary.totals.size()));
  for (const auto& [k, v] : oracle) {
    const double got = summary.at(std::get<0>(k), std::get<1>(k), std::get<2>(k));
    c.near(got, v, 1e-9 * std::abs(v), fmt::format("cash flow {} {}", fuel_name(std::get<0>(k)),
                                                   category_name(std::get<2>(k))));
  }
  fs::remove_all(root);
}

void criterion_tlm_totality(Check& c) {
  const SettlementKey k{ymd(2013, 6, 1), 20};
  int branches = 0;
  int matched = 0;
  for (Role role : {Role::Producer, Role::Consumer, Role::Unknown}) {
    for (bool elexon : {true, false}) {
      for (bool bmr : {true, false}) {
        for (std::optional<double> detsys : {std::optional<double>{0.992}, std::optional<double>{1.008},
                                             std::optional<double>{1.0}, std::optional<double>{}}) {
          ++branches;
          TlmSources s;
          if (elexon) {
            s.elexon[{k, Role::Producer}] = 0.990;
            s.elexon[{k, Role::Consumer}] = 1.010;
          }
          if (bmr) {
            s.bmr_historic[{k, Role::Producer}] = 0.985;
            s.bmr_historic[{k, Role::Consumer}] = 1.015;
          }
          // Specified outcome.
          std::optional<TlmError::Code> want_error;
          double want_value = 0.0;
          Role r = role;
          if (r == Role::Unknown) {
            if (!detsys) {
              want_error = TlmError::Code::Unresolved;
            } else if (*detsys == 1.0) {
              want_error = TlmError::Code::AmbiguousRole;
            } else {
              r = *detsys < 1.0 ? Role::Producer : Role::Consumer;
            }
          }
          if (!want_error) {
            if (elexon) {
              want_value = r == Role::Producer ? 0.990 : 1.010;
            } else if (bmr) {
              want_value = r == Role::Producer ? 0.985 : 1.015;
            } else {
              want_error = TlmError::Code::NoTableEntry;
            }
          }
          try {
            const auto got = resolve_tlm(UnitRegistryEntry{"X", FuelClass::Other, role}, k, detsys, s);
            matched += !want_error && got.value == want_value && got.inferred_role == r;
          } catch (const TlmError& e) {
            matched += want_error && e.code() == *want_error;
          }
        }
      }
    }
  }
  c.expect(branches == 48, fmt::format("{} branches enumerated", branches));
  c.expect(matched == branches, fmt::format("{} of {} branches matched", matched, branches));
}

void criterion_invariants(Check& c) {
  const ClockRule rule = ClockRule::uk_statutory(2012, 2016);
  // Timebase: round trip over every period and year-hour conservation.
  for (int y = 2012; y <= 2016; ++y) {
    const auto keys = enumerate_keys(DateRange{ymd(y, 1, 1), ymd(y, 12, 31)}, rule);
    const std::size_t hours = std::chrono::year{y}.is_leap() ? 8784 : 8760;
    c.expect(keys.size() == 2 * hours, fmt::format("{}: {} periods", y, keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto r = sp_to_utc_range(keys[i], rule);
      if (to_settlement_key(r.start, rule) != keys[i] ||
          (i > 0 && sp_to_utc_range(keys[i - 1], rule).end != r.start)) {
        c.expect(false, "round trip fails at " + format_key(keys[i]));
        break;
      }
    }
  }

  // Join volume conservation.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<UnitRegistryEntry> entries{{"A", FuelClass::CCGT, Role::Producer},
                                               {"B", FuelClass::WindOnshoreEngland, Role::Producer}};
  const UnitRegistry registry(entries);
  const auto keys = enumerate_keys(DateRange{ymd(2013, 3, 1), ymd(2013, 3, 31)}, rule);
  std::vector<GenerationRecord> gen;
  double gen_total = 0.0;
  for (const auto& k : keys) {
    for (const char* unit : {"A", "B", "C"}) {
      const double v = std::round(u(rng) * 1e6) / 1e3;
      gen.push_back({k, unit, v});
      gen_total += v;
    }
  }
  const JoinedTable joined = join_settlement(gen, {}, {}, registry);
  double joined_total = 0.0;
  for (const auto& [k, info] : joined.keys) joined_total += info.total_generation();
  c.near(joined_total, gen_total, 1e-9 * gen_total, "join volume conservation");

  // Negative-bid deviation has zero volume-weighted mean per period.
  std::vector<BalancingAction> bids;
  for (int i = 0; i < 600; ++i) {
    bids.push_back(BalancingAction{keys[i % 12], "U" + std::to_string(i), ActionKind::Bid, 1.0 + 100 * u(rng),
                                   -150.0 * u(rng), std::nullopt});
  }
  std::map<SettlementKey, std::pair<double, double>> dev;
  for (const auto& d : negative_bid_deviation(bids)) {
    const auto& a = bids[d.action_index];
    dev[a.key].first += a.volume * d.deviation;
    dev[a.key].second += a.volume * std::abs(a.price);
  }
  for (const auto& [k, s] : dev) c.near(s.first, 0.0, 1e-12 * s.second, "deviation mean " + format_key(k));

  // Counterfactual: actual identity, monthly partition and bin partition counts.
  MarketPanel panel;
  for (const auto& k : enumerate_keys(DateRange{ymd(2013, 1, 1), ymd(2013, 12, 31)}, rule)) {
    const double on = 15 * u(rng);
    const double off = 15 * u(rng);
    panel.points.push_back(WindSharePoint{k, on + off, on, off, 55 - 0.9 * (on + off) + 5 * (u(rng) - 0.5),
                                          20000 + 20000 * u(rng)});
  }
  const DateRange y2013{ymd(2013, 1, 1), ymd(2013, 12, 31)};
  const BinnedPriceTable bins = build_bins(panel.points, 5.0);
  MicroPounds direct = 0;
  for (const auto& p : panel.points) direct += period_cost(p, p.price);
  c.expect(scenario_cost(panel, y2013, Scenario::Actual, bins, 5).total == direct, "actual-scenario identity");
  const auto months = monthly_series(panel, y2013, kScenarios, bins, 5);
  const auto annual = cost_report(panel, y2013, bins, 5);
  for (Scenario s : kScenarios) {
    MicroPounds sum = 0;
    for (const auto& [m, v] : months) sum += v[scenario_index(s)];
    c.expect(!annual.empty() && sum == annual[0].cost[scenario_index(s)],
             fmt::format("monthly partition residual for {}", scenario_name(s)));
  }
  c.expect(bins.total_count() == panel.points.size(), "bin partition counts");

  // System prices.
  const SettlementKey k{ymd(2013, 2, 1), 10};
  std::vector<BalancingAction> stack;
  for (int i = 0; i < 5; ++i) stack.push_back(BalancingAction{k, "S" + std::to_string(i), ActionKind::Offer, 150, 47, {}});
  for (double net : {10.0, 300.0, 500.0, 750.0}) {
    c.expect(system_prices(stack, net).sbp == 47.0, fmt::format("uniform stack at net {}", net));
  }
  const std::vector<BalancingAction> two{BalancingAction{k, "A", ActionKind::Offer, 400, 40, {}},
                                         BalancingAction{k, "B", ActionKind::Offer, 400, 60, {}}};
  c.near(*system_prices(two, 800).sbp, 56.0, 1e-12, "marginal stack SBP");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Table 3 fits recover published lines", 1.0, criterion_table3},
      {2, "relative MOE of the spot line in [1.66, 1.67] %", std::nullopt, criterion_relative_moe},
      {3, "net positions", std::nullopt, criterion_net_position},
      {4, "ROC ledger reproduces every published cell", std::nullopt, criterion_table2},
      {5, "scenario cost report rounding", std::nullopt, criterion_table4},
      {6, "oracle recovery on a seeded synthetic year", 60.0, criterion_oracle_recovery},
      {7, "TLM decision tree totality", std::nullopt, criterion_tlm_totality},
      {8, "invariant suites", std::nullopt, criterion_invariants},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt::format(" ({:.3f} s)", secs);
    if (cr.limit_s) {
      check.expect(secs < *cr.limit_s, fmt::format("runtime {:.3f} s exceeds {} s", secs, *cr.limit_s));
      timing = fmt::format(" ({:.3f} s, limit {} s)", secs, *cr.limit_s);
    }
    std::cout << fmt::format("[{}] criterion {}: {}{}\n", check.ok() ? "PASS" : "FAIL", cr.number, cr.title, timing);
    for (const auto& f : check.failures()) {
      std::cout << "    " << f << '\n';
    }
    failed += !check.ok();
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
