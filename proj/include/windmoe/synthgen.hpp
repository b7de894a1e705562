#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "windmoe/error.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/moe.hpp"
#include "windmoe/timebase.hpp"

namespace windmoe {

/// SplitMix64 over a counter; independent streams are keyed by (seed, stream id).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed ^ mix(stream + kGolden))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one draw per call).
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Uniform distribution on [mean − spread, mean + spread].
struct UniformSpec {
  double mean{};
  double spread{};

  [[nodiscard]] double lo() const { return mean - spread; }
  [[nodiscard]] double hi() const { return mean + spread; }

  /// Probability that a draw is strictly negative.
  [[nodiscard]] double negative_share() const {
    if (spread == 0.0) {
      return mean < 0.0 ? 1.0 : 0.0;
    }
    return std::clamp((0.0 - lo()) / (hi() - lo()), 0.0, 1.0);
  }
};

struct SynthConfig {
  std::uint64_t seed{1};
  DateRange window{Date{std::chrono::year{2013} / 1 / 1}, Date{std::chrono::year{2013} / 12 / 31}};

  std::map<FuelClass, int> units{
      {FuelClass::CCGT, 15},
      {FuelClass::Coal, 10},
      {FuelClass::WindOnshoreEngland, 3},
      {FuelClass::WindOnshoreScotland, 8},
      {FuelClass::WindOffshoreEngland, 8},
      {FuelClass::WindOffshoreScotland, 3},
      {FuelClass::Other, 2},
  };
  int consumer_units{1};
  int unknown_role_every{10};  // every n-th producer is registered with unknown role; 0 disables

  double demand_mean_mwh{40000.0};
  double demand_daily_amplitude{0.2};

  // Wind share: a per-day level, boosted in the early morning, plus bounded noise.
  double wind_daily_min{2.0};
  double wind_daily_max{28.0};
  double wind_early_boost{0.35};
  double wind_noise{1.5};
  double wind_cap{60.0};
  double onshore_fraction_min{0.35};
  double onshore_fraction_max{0.5};

  double moe_y0{52.85};
  double moe_m{-0.88};
  double knee{30.0};
  double moe_m_above{0.5};
  double noise_sigma{5.0};
  double traded_fraction{0.5};
  double missing_spot_fraction{0.0};

  double imbalance_ratio{0.03};
  double action_probability{0.25};
  std::map<FuelClass, double> offer_fraction{
      {FuelClass::CCGT, 0.6},
      {FuelClass::Coal, 0.2},
      {FuelClass::WindOnshoreEngland, 0.05},
      {FuelClass::WindOnshoreScotland, 0.5},
      {FuelClass::WindOffshoreEngland, 0.05},
      {FuelClass::WindOffshoreScotland, 0.05},
      {FuelClass::Other, 0.5},
  };
  UniformSpec offer_price{60.0, 20.0};
  std::map<FuelClass, UniformSpec> bid_distributions{
      {FuelClass::CCGT, {25.0, 15.0}},
      {FuelClass::Coal, {15.0, 20.0}},
      {FuelClass::WindOnshoreEngland, {-60.0, 30.0}},
      {FuelClass::WindOnshoreScotland, {-70.0, 40.0}},
      {FuelClass::WindOffshoreEngland, {-50.0, 40.0}},
      {FuelClass::WindOffshoreScotland, {-50.0, 40.0}},
      {FuelClass::Other, {10.0, 20.0}},
  };

  double elexon_coverage{0.9};
  double detsys_probability{0.3};

  void validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("synth config: " + what); };
    if (window.empty()) {
      fail("window is empty");
    }
    int onshore = 0;
    int offshore = 0;
    int other = 0;
    for (const auto& [fuel, n] : units) {
      if (n < 0) {
        fail(fmt::format("negative unit count for {}", fuel_name(fuel)));
      }
      (is_onshore_wind(fuel) ? onshore : is_offshore_wind(fuel) ? offshore : other) += n;
    }
    if (onshore == 0 || offshore == 0 || other == 0) {
      fail("need at least one onshore wind, one offshore wind and one non-wind producer unit");
    }
    if (consumer_units < 0 || unknown_role_every < 0) {
      fail("negative consumer_units or unknown_role_every");
    }
    if (!(demand_mean_mwh > 0.0) || demand_daily_amplitude < 0.0 || demand_daily_amplitude >= 1.0) {
      fail("demand parameters out of range");
    }
    if (wind_daily_min < 0.0 || wind_daily_max < wind_daily_min || wind_cap <= 0.0 || wind_cap > 100.0 ||
        wind_noise < 0.0 || wind_early_boost < 0.0) {
      fail("wind share parameters out of range");
    }
    if (onshore_fraction_min < 0.0 || onshore_fraction_max > 1.0 || onshore_fraction_max < onshore_fraction_min) {
      fail("onshore fraction out of range");
    }
    if (noise_sigma < 0.0 || traded_fraction < 0.0 || missing_spot_fraction < 0.0 || missing_spot_fraction > 1.0) {
      fail("price parameters out of range");
    }
    if (imbalance_ratio < 0.0 || !(action_probability > 0.0) || action_probability > 1.0) {
      fail("imbalance parameters out of range");
    }
    for (const auto& [fuel, f] : offer_fraction) {
      if (f < 0.0 || f > 1.0) {
        fail("offer_fraction outside [0, 1]");
      }
    }
    if (offer_price.spread < 0.0 || offer_price.lo() < 0.0) {
      fail("offer prices must be non-negative");
    }
    for (const auto& [fuel, d] : bid_distributions) {
      if (d.spread < 0.0) {
        fail("negative bid spread");
      }
    }
    if (elexon_coverage < 0.0 || elexon_coverage > 1.0 || detsys_probability < 0.0 || detsys_probability > 1.0) {
      fail("TLM parameters out of range");
    }
  }

  [[nodiscard]] double offer_fraction_for(FuelClass f) const {
    auto it = offer_fraction.find(f);
    return it == offer_fraction.end() ? 0.5 : it->second;
  }

  [[nodiscard]] UniformSpec bid_distribution_for(FuelClass f) const {
    auto it = bid_distributions.find(f);
    return it == bid_distributions.end() ? UniformSpec{20.0, 10.0} : it->second;
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    auto get = [&](const char* name, auto& field) {
      if (j.contains(name)) {
        j.at(name).get_to(field);
      }
    };
    auto fuel_map = [&](const char* name, auto& field, auto convert) {
      if (!j.contains(name)) {
        return;
      }
      for (const auto& [k, v] : j.at(name).items()) {
        auto fuel = parse_fuel(k);
        if (!fuel) {
          throw ValidationError(fmt::format("synth config: unknown fuel `{}` in {}", k, name));
        }
        field[*fuel] = convert(v);
      }
    };
    try {
      get("seed", c.seed);
      if (j.contains("window")) {
        auto from = parse_date(j.at("window").at("from").get<std::string>());
        auto to = parse_date(j.at("window").at("to").get<std::string>());
        if (!from || !to) {
          throw ValidationError("synth config: invalid window date");
        }
        c.window = DateRange{*from, *to};
      }
      fuel_map("units", c.units, [](const nlohmann::json& v) { return v.get<int>(); });
      get("consumer_units", c.consumer_units);
      get("unknown_role_every", c.unknown_role_every);
      get("demand_mean_mwh", c.demand_mean_mwh);
      get("demand_daily_amplitude", c.demand_daily_amplitude);
      get("wind_daily_min", c.wind_daily_min);
      get("wind_daily_max", c.wind_daily_max);
      get("wind_early_boost", c.wind_early_boost);
      get("wind_noise", c.wind_noise);
      get("wind_cap", c.wind_cap);
      get("onshore_fraction_min", c.onshore_fraction_min);
      get("onshore_fraction_max", c.onshore_fraction_max);
      get("moe_y0", c.moe_y0);
      get("moe_m", c.moe_m);
      get("knee", c.knee);
      get("moe_m_above", c.moe_m_above);
      get("noise_sigma", c.noise_sigma);
      get("traded_fraction", c.traded_fraction);
      get("missing_spot_fraction", c.missing_spot_fraction);
      get("imbalance_ratio", c.imbalance_ratio);
      get("action_probability", c.action_probability);
      fuel_map("offer_fraction", c.offer_fraction, [](const nlohmann::json& v) { return v.get<double>(); });
      if (j.contains("offer_price")) {
        c.offer_price = UniformSpec{j.at("offer_price").at("mean").get<double>(),
                                    j.at("offer_price").at("spread").get<double>()};
      }
      fuel_map("bid_distributions", c.bid_distributions, [](const nlohmann::json& v) {
        return UniformSpec{v.at("mean").get<double>(), v.at("spread").get<double>()};
      });
      get("elexon_coverage", c.elexon_coverage);
      get("detsys_probability", c.detsys_probability);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

/// Everything one synthetic run emits, in memory.
struct SynthData {
  ClockRule rule;
  std::vector<UnitRegistryEntry> registry;
  std::vector<GenerationRecord> generation;
  std::vector<SpotRecord> spot;
  std::vector<BalancingAction> actions;
  std::vector<TlmEntry> tlm_elexon;
  std::vector<TlmEntry> tlm_bmr;
  nlohmann::ordered_json manifest;
};

namespace detail {

inline double round_to(double x, double scale) { return std::round(x * scale) / scale; }

// Stream ids keep each random aspect independent of the others.
enum SynthStream : std::uint64_t {
  kStreamUnits = 1,
  kStreamWindDay,
  kStreamWindNoise,
  kStreamPriceNoise,
  kStreamActions,
  kStreamTlm,
  kStreamSpotGaps,
  kStreamConsumers,
};

struct SynthUnit {
  std::string id;
  FuelClass fuel;
  Role registered_role;
  bool consumer;
  double weight;
};

}  // namespace detail

/// Deterministic synthetic market: identical config and seed give identical records.
inline SynthData generate(const SynthConfig& config) {
  using detail::round_to;
  config.validate();
  SynthData out;
  out.rule = ClockRule::uk_statutory(static_cast<int>(config.window.from.year()),
                                     static_cast<int>(config.window.to.year()));

  // Units and registry.
  CounterRng unit_rng(config.seed, detail::kStreamUnits);
  std::vector<detail::SynthUnit> units;
  int producer_ordinal = 0;
  for (FuelClass fuel : kFuelClasses) {
    auto it = config.units.find(fuel);
    const int n = it == config.units.end() ? 0 : it->second;
    for (int i = 1; i <= n; ++i) {
      ++producer_ordinal;
      const bool unknown = config.unknown_role_every > 0 && producer_ordinal % config.unknown_role_every == 0;
      units.push_back(detail::SynthUnit{fmt::format("{}-{:03}", fuel_name(fuel), i), fuel,
                                        unknown ? Role::Unknown : Role::Producer, false, unit_rng.uniform(0.5, 1.5)});
    }
  }
  for (int i = 1; i <= config.consumer_units; ++i) {
    units.push_back(detail::SynthUnit{fmt::format("Consumer-{:03}", i), FuelClass::Other, Role::Consumer, true, 0.0});
  }
  for (const auto& u : units) {
    out.registry.push_back(UnitRegistryEntry{u.id, u.fuel, u.registered_role});
  }

  std::array<double, kFuelClassCount> class_weight_sum{};
  for (const auto& u : units) {
    if (!u.consumer) {
      class_weight_sum[fuel_index(u.fuel)] += u.weight;
    }
  }
  auto present = [&](FuelClass f) { return class_weight_sum[fuel_index(f)] > 0.0; };
  auto split = [&](std::initializer_list<std::pair<FuelClass, double>> shares) {
    std::array<double, kFuelClassCount> out_shares{};
    double total = 0.0;
    for (const auto& [f, s] : shares) {
      if (present(f)) {
        total += s;
      }
    }
    for (const auto& [f, s] : shares) {
      if (present(f)) {
        out_shares[fuel_index(f)] = s / total;
      }
    }
    return out_shares;
  };
  const auto onshore_split = split({{FuelClass::WindOnshoreEngland, 0.1}, {FuelClass::WindOnshoreScotland, 0.9}});
  const auto offshore_split = split({{FuelClass::WindOffshoreEngland, 0.85}, {FuelClass::WindOffshoreScotland, 0.15}});
  const auto thermal_split = split({{FuelClass::CCGT, 0.45}, {FuelClass::Coal, 0.50}, {FuelClass::Other, 0.05}});

  CounterRng wind_day_rng(config.seed, detail::kStreamWindDay);
  CounterRng wind_noise_rng(config.seed, detail::kStreamWindNoise);
  CounterRng price_rng(config.seed, detail::kStreamPriceNoise);
  CounterRng action_rng(config.seed, detail::kStreamActions);
  CounterRng tlm_rng(config.seed, detail::kStreamTlm);
  CounterRng gap_rng(config.seed, detail::kStreamSpotGaps);
  CounterRng consumer_rng(config.seed, detail::kStreamConsumers);

  const double two_pi = 2.0 * std::numbers::pi;
  std::size_t periods = 0;
  for (Date d = config.window.from;; d = next_day(d)) {
    const double level = wind_day_rng.uniform(config.wind_daily_min, config.wind_daily_max);
    const double onshore_fraction = wind_day_rng.uniform(config.onshore_fraction_min, config.onshore_fraction_max);
    const bool elexon_day = wind_day_rng.uniform() < config.elexon_coverage;
    const int n = out.rule.periods_in_day(d);
    for (int sp = 1; sp <= n; ++sp) {
      ++periods;
      const SettlementKey key{d, sp};
      // Early-morning trough in demand coincides with the wind peak.
      const double phase = std::cos(two_pi * (sp - 8) / 48.0);
      const double demand = config.demand_mean_mwh * (1.0 - config.demand_daily_amplitude * phase);
      const double target_wind = std::clamp(level * (1.0 + config.wind_early_boost * phase) +
                                                config.wind_noise * wind_noise_rng.normal(),
                                            0.0, config.wind_cap);
      const double wind_mwh = demand * target_wind / 100.0;
      std::array<double, kFuelClassCount> class_total{};
      for (FuelClass f : kFuelClasses) {
        const std::size_t i = fuel_index(f);
        if (is_onshore_wind(f)) {
          class_total[i] = wind_mwh * onshore_fraction * onshore_split[i];
        } else if (is_offshore_wind(f)) {
          class_total[i] = wind_mwh * (1.0 - onshore_fraction) * offshore_split[i];
        } else {
          class_total[i] = (demand - wind_mwh) * thermal_split[i];
        }
      }

      KeyInfo emitted;
      std::vector<std::pair<const detail::SynthUnit*, double>> unit_gen;
      for (const auto& u : units) {
        if (u.consumer) {
          continue;
        }
        const std::size_t i = fuel_index(u.fuel);
        const double g = round_to(class_total[i] * u.weight / class_weight_sum[i], 1e3);
        emitted.generation[i] += g;
        out.generation.push_back(GenerationRecord{key, u.id, g});
        unit_gen.emplace_back(&u, g);
      }

      // Price is planted on the wind share the pipeline will recompute from the emitted volumes.
      const double wind_pct = wind_share(emitted).wind_pct;
      const double line = wind_pct <= config.knee
                              ? config.moe_y0 + config.moe_m * wind_pct
                              : config.moe_y0 + config.moe_m * config.knee + config.moe_m_above * (wind_pct - config.knee);
      const double price = line + config.noise_sigma * price_rng.normal();
      if (!(gap_rng.uniform() < config.missing_spot_fraction)) {
        out.spot.push_back(SpotRecord{key, price, round_to(config.traded_fraction * demand, 1e3)});
      }

      // Loss multipliers: BMR historic for every period, Elexon on covered days.
      const double bmr_p = round_to(tlm_rng.uniform(0.975, 0.995), 1e6);
      const double bmr_c = round_to(tlm_rng.uniform(1.005, 1.025), 1e6);
      const double elexon_p = round_to(bmr_p + tlm_rng.uniform(-0.002, 0.002), 1e6);
      const double elexon_c = round_to(bmr_c + tlm_rng.uniform(-0.002, 0.002), 1e6);
      out.tlm_bmr.push_back(TlmEntry{key, Role::Producer, bmr_p});
      out.tlm_bmr.push_back(TlmEntry{key, Role::Consumer, bmr_c});
      if (elexon_day) {
        out.tlm_elexon.push_back(TlmEntry{key, Role::Producer, elexon_p});
        out.tlm_elexon.push_back(TlmEntry{key, Role::Consumer, elexon_c});
      }
      auto published_tlm = [&](Role physical, bool force) -> std::optional<double> {
        if (!force && !(tlm_rng.uniform() < config.detsys_probability)) {
          return std::nullopt;
        }
        const double base = physical == Role::Producer ? bmr_p : bmr_c;
        return round_to(base * (1.0 + tlm_rng.uniform(-2e-4, 2e-4)), 1e6);
      };

      for (const auto& [u, g] : unit_gen) {
        if (!(g > 0.0) || !(action_rng.uniform() < config.action_probability)) {
          continue;
        }
        const bool offer = action_rng.uniform() < config.offer_fraction_for(u->fuel);
        const double volume =
            round_to(config.imbalance_ratio * g / config.action_probability * action_rng.uniform(0.5, 1.5), 1e3);
        const UniformSpec dist = offer ? config.offer_price : config.bid_distribution_for(u->fuel);
        double action_price = round_to(action_rng.uniform(dist.lo(), dist.hi()), 1e2);
        if (offer) {
          action_price = std::max(action_price, 0.0);
        }
        const auto tlm = published_tlm(Role::Producer, u->registered_role == Role::Unknown);
        if (!(volume > 0.0)) {
          continue;
        }
        out.actions.push_back(BalancingAction{key, u->id, offer ? ActionKind::Offer : ActionKind::Bid, volume,
                                              action_price, tlm});
      }
      for (const auto& u : units) {
        if (!u.consumer || !(consumer_rng.uniform() < config.action_probability)) {
          continue;
        }
        const bool offer = consumer_rng.uniform() < 0.5;
        const double volume = round_to(consumer_rng.uniform(5.0, 50.0), 1e3);
        const UniformSpec dist = offer ? config.offer_price : config.bid_distribution_for(FuelClass::Other);
        double action_price = round_to(consumer_rng.uniform(dist.lo(), dist.hi()), 1e2);
        if (offer) {
          action_price = std::max(action_price, 0.0);
        }
        out.actions.push_back(BalancingAction{key, u.id, offer ? ActionKind::Offer : ActionKind::Bid, volume,
                                              action_price, published_tlm(Role::Consumer, false)});
      }
    }
    if (d == config.window.to) {
      break;
    }
  }

  auto& m = out.manifest;
  m["seed"] = config.seed;
  m["window.from"] = format_date(config.window.from);
  m["window.to"] = format_date(config.window.to);
  m["settlement_periods"] = periods;
  m["units.producers"] = producer_ordinal;
  m["units.consumers"] = config.consumer_units;
  for (FuelClass f : kFuelClasses) {
    auto it = config.units.find(f);
    m[fmt::format("units.{}", fuel_name(f))] = it == config.units.end() ? 0 : it->second;
  }
  m["moe.y0"] = config.moe_y0;
  m["moe.m"] = config.moe_m;
  m["moe.knee"] = config.knee;
  m["moe.m_above"] = config.moe_m_above;
  m["moe.noise_sigma"] = config.noise_sigma;
  m["imbalance.ratio"] = config.imbalance_ratio;
  m["imbalance.action_probability"] = config.action_probability;
  for (FuelClass f : kFuelClasses) {
    if (f == FuelClass::Other || !present(f)) {
      continue;
    }
    const double r = 100.0 * config.imbalance_ratio;
    const double offer_share = config.offer_fraction_for(f);
    const double negative_share = config.bid_distribution_for(f).negative_share();
    m[fmt::format("imbalance.{}.offers_pct", fuel_name(f))] = r * offer_share;
    m[fmt::format("imbalance.{}.positive_bids_pct", fuel_name(f))] = 0.0 - r * (1.0 - offer_share) * (1.0 - negative_share);
    m[fmt::format("imbalance.{}.negative_bids_pct", fuel_name(f))] = 0.0 - r * (1.0 - offer_share) * negative_share;
  }
  m["rows.registry"] = out.registry.size();
  m["rows.generation"] = out.generation.size();
  m["rows.spot"] = out.spot.size();
  m["rows.actions"] = out.actions.size();
  m["rows.tlm_elexon"] = out.tlm_elexon.size();
  m["rows.tlm_bmr"] = out.tlm_bmr.size();
  return out;
}

/// File name → contents for every dataset of a synthetic run, plus the clock rule and manifest.
inline std::vector<std::pair<std::string, std::string>> render_files(const SynthData& data) {
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("registry.csv", serialize_dataset<UnitRegistryEntry>(data.registry));
  files.emplace_back("generation.csv", serialize_dataset<GenerationRecord>(data.generation));
  files.emplace_back("spot.csv", serialize_dataset<SpotRecord>(data.spot));
  files.emplace_back("actions.csv", serialize_dataset<BalancingAction>(data.actions));
  files.emplace_back("tlm_elexon.csv", serialize_dataset<TlmEntry>(data.tlm_elexon));
  files.emplace_back("tlm_bmr.csv", serialize_dataset<TlmEntry>(data.tlm_bmr));
  files.emplace_back("clock_rule.csv", data.rule.to_csv());
  files.emplace_back("manifest.json", data.manifest.dump(2) + "\n");
  return files;
}

}  // namespace windmoe
