#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "support.hpp"
#include "windmoe/imbalance.hpp"

using namespace windmoe;
using namespace windmoe::testing;

namespace {

const SettlementKey kKey = key(2013, 2, 1, 10);

struct Fixture {
  std::vector<UnitRegistryEntry> entries{{"CCGT-1", FuelClass::CCGT, Role::Producer},
                                         {"WIND-1", FuelClass::WindOnshoreScotland, Role::Producer},
                                         {"COAL-1", FuelClass::Coal, Role::Producer},
                                         {"LOAD-1", FuelClass::Other, Role::Consumer}};
  UnitRegistry registry{entries};
  TlmSources sources;
  TlmResolver resolver{registry, sources};

  explicit Fixture(double producer_tlm = 0.99, double consumer_tlm = 1.01) {
    for (const auto& k : enumerate_keys(DateRange{ymd(2013, 1, 1), ymd(2014, 12, 31)}, uk_rule())) {
      sources.bmr_historic[{k, Role::Producer}] = producer_tlm;
      sources.bmr_historic[{k, Role::Consumer}] = consumer_tlm;
    }
  }
};

}  // namespace

TEST(ClassifyAction, ThreeCategories) {
  EXPECT_EQ(classify_action(offer(kKey, "A", 1, 40)), ActionCategory::Offer);
  EXPECT_EQ(classify_action(bid(kKey, "A", 1, 10)), ActionCategory::PositiveBid);
  EXPECT_EQ(classify_action(bid(kKey, "A", 1, -60)), ActionCategory::NegativeBid);
  EXPECT_EQ(classify_action(bid(kKey, "A", 1, 0.0)), ActionCategory::PositiveBid);
  EXPECT_EQ(classify_action(offer(kKey, "A", 1, 0.0)), ActionCategory::Offer);
}

TEST(CashFlow, SingleNegativeBid) {
  Fixture fx;
  const std::vector<BalancingAction> actions{bid(kKey, "WIND-1", 10, -60)};
  const auto s = cash_flow(actions, fx.registry, fx.resolver);
  EXPECT_NEAR(s.at(FuelClass::WindOnshoreScotland, 2013, ActionCategory::NegativeBid), 594.0, 1e-9);
  EXPECT_EQ(s.total(ActionCategory::Offer), 0.0);
}

TEST(CashFlow, EmptyIsZero) {
  Fixture fx;
  const auto s = cash_flow({}, fx.registry, fx.resolver);
  for (auto c : kActionCategories) {
    EXPECT_EQ(s.total(c), 0.0);
  }
}

TEST(CashFlow, SignConventionsAndTlmPropagation) {
  Fixture fx;
  const std::vector<BalancingAction> actions{offer(kKey, "CCGT-1", 100, 50), bid(kKey, "COAL-1", 50, 20),
                                             bid(kKey, "LOAD-1", 10, -30)};
  const auto s = cash_flow(actions, fx.registry, fx.resolver);
  EXPECT_GT(s.total(ActionCategory::Offer), 0.0);
  EXPECT_LT(s.total(ActionCategory::PositiveBid), 0.0);
  EXPECT_GT(s.total(ActionCategory::NegativeBid), 0.0);
  EXPECT_NEAR(s.total(ActionCategory::NegativeBid), 10 * 30 * 1.01, 1e-9);

  const std::vector<BalancingAction> unresolvable{offer(key(2016, 1, 1, 1), "CCGT-1", 1, 1)};
  EXPECT_THROW(cash_flow(unresolvable, fx.registry, fx.resolver), TlmError);
}

TEST(CashFlow, MatchesBruteForceOracleAndIsLinear) {
  Fixture fx(0.987, 1.013);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> vol(0.001, 300.0);
  std::uniform_real_distribution<double> price(-120.0, 120.0);
  std::uniform_int_distribution<int> unit(0, 3);
  std::uniform_int_distribution<int> day(0, 700);
  std::vector<BalancingAction> actions;
  for (int i = 0; i < 1000; ++i) {
    const Date d{std::chrono::sys_days{ymd(2013, 1, 1)} + std::chrono::days{day(rng)}};
    const bool is_offer = i % 2 == 0;
    actions.push_back(BalancingAction{SettlementKey{d, 1 + i % 46}, fx.entries[unit(rng)].unit_id,
                                      is_offer ? ActionKind::Offer : ActionKind::Bid, vol(rng),
                                      is_offer ? std::abs(price(rng)) : price(rng), std::nullopt});
  }
  // Oracle: accumulate V·P·TLM per action with signs and TLMs written out by hand.
  std::map<std::tuple<FuelClass, int, int>, double> oracle;
  for (const auto& a : actions) {
    FuelClass f{};
    Role r{};
    for (const auto& e : fx.entries) {
      if (e.unit_id == a.unit_id) {
        f = e.fuel;
        r = e.role;
      }
    }
    const double tlm = r == Role::Producer ? 0.987 : 1.013;
    const int cat = a.kind == ActionKind::Offer ? 0 : (a.price < 0 ? 2 : 1);
    const double sign = a.kind == ActionKind::Offer ? 1.0 : -1.0;
    oracle[{f, static_cast<int>(a.key.date.year()), cat}] += sign * a.volume * a.price * tlm;
  }
  const auto s = cash_flow(actions, fx.registry, fx.resolver);
  for (const auto& [k, v] : oracle) {
    const double got = s.at(std::get<0>(k), std::get<1>(k), static_cast<ActionCategory>(std::get<2>(k)));
    EXPECT_NEAR(got, v, 1e-9 * std::abs(v));
  }
  std::size_t nonzero = 0;
  for (const auto& [k, v] : s.totals) {
    nonzero += v != 0.0;
  }
  EXPECT_EQ(nonzero, oracle.size());

  const std::span<const BalancingAction> all{actions};
  CashFlowSummary split = cash_flow(all.first(400), fx.registry, fx.resolver);
  split += cash_flow(all.subspan(400), fx.registry, fx.resolver);
  for (auto c : kActionCategories) {
    EXPECT_NEAR(split.total(c), s.total(c), 1e-9 * std::abs(s.total(c)));
  }
}

TEST(ImbalancePercentages, SimpleCellAndAbsentFuel) {
  const std::vector<UnitRegistryEntry> entries{{"G", FuelClass::CCGT, Role::Producer},
                                               {"G2", FuelClass::CCGT, Role::Producer},
                                               {"W", FuelClass::WindOffshoreEngland, Role::Producer}};
  const UnitRegistry reg(entries);
  const std::vector<GenerationRecord> gen{{key(2013, 1, 1, 1), "G", 60}, {key(2013, 1, 1, 2), "G", 40},
                                          {key(2013, 1, 1, 1), "W", 10}};
  const std::vector<BalancingAction> actions{offer(key(2013, 1, 1, 1), "G", 3, 50),
                                             bid(key(2013, 1, 1, 2), "G", 2, 10),
                                             bid(key(2013, 1, 1, 2), "G2", 1, -10)};
  const auto t = imbalance_percentages(join_settlement(gen, {}, actions, reg));
  EXPECT_NEAR(*t.percentage(FuelClass::CCGT, 2013, ActionCategory::Offer), 3.0, 1e-12);
  EXPECT_NEAR(*t.percentage(FuelClass::CCGT, 2013, ActionCategory::PositiveBid), -2.0, 1e-12);
  EXPECT_NEAR(*t.percentage(FuelClass::CCGT, 2013, ActionCategory::NegativeBid), -1.0, 1e-12);
  for (auto c : kActionCategories) {
    EXPECT_EQ(*t.percentage(FuelClass::WindOffshoreEngland, 2013, c), 0.0);
  }
  EXPECT_FALSE(t.percentage(FuelClass::Coal, 2013, ActionCategory::Offer));
}

TEST(ImbalancePercentages, ZeroGenerationIsUndefined) {
  const std::vector<UnitRegistryEntry> entries{{"G", FuelClass::CCGT, Role::Producer}};
  const UnitRegistry reg(entries);
  const std::vector<BalancingAction> actions{offer(key(2013, 1, 1, 1), "G", 3, 50)};
  const auto t = imbalance_percentages(join_settlement({}, {}, actions, reg));
  EXPECT_FALSE(t.percentage(FuelClass::CCGT, 2013, ActionCategory::Offer));
}

TEST(ImbalancePercentages, ScalingVolumesLeavesPercentagesUnchanged) {
  const std::vector<UnitRegistryEntry> entries{{"G", FuelClass::CCGT, Role::Producer}};
  const UnitRegistry reg(entries);
  auto build = [&](double k) {
    const std::vector<GenerationRecord> gen{{key(2013, 1, 1, 1), "G", 80 * k}, {key(2014, 1, 1, 1), "G", 50 * k}};
    const std::vector<BalancingAction> actions{offer(key(2013, 1, 1, 1), "G", 2.5 * k, 50),
                                               bid(key(2014, 1, 1, 1), "G", 1.5 * k, -5)};
    return imbalance_percentages(join_settlement(gen, {}, actions, reg));
  };
  const auto a = build(1.0);
  const auto b = build(8.0);
  EXPECT_EQ(a.years(), (std::vector<int>{2013, 2014}));
  for (int y : {2013, 2014}) {
    for (auto c : kActionCategories) {
      EXPECT_NEAR(*a.percentage(FuelClass::CCGT, y, c), *b.percentage(FuelClass::CCGT, y, c), 1e-12);
    }
  }
}

TEST(NegativeBidDeviation, DocumentedExamples) {
  std::vector<BalancingAction> single{bid(kKey, "A", 5, -70)};
  EXPECT_EQ(negative_bid_deviation(single)[0].deviation, 0.0);

  std::vector<BalancingAction> pair{bid(kKey, "A", 10, -50), bid(kKey, "B", 10, -70)};
  auto d = negative_bid_deviation(pair);
  EXPECT_NEAR(d[0].deviation, 10.0, 1e-12);
  EXPECT_NEAR(d[1].deviation, -10.0, 1e-12);

  std::vector<BalancingAction> weighted{bid(kKey, "A", 30, -40), offer(kKey, "C", 5, 40), bid(kKey, "B", 10, -80),
                                        bid(kKey, "D", 10, 5)};
  d = negative_bid_deviation(weighted);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d[0].deviation, 10.0, 1e-12);
  EXPECT_EQ(d[1].action_index, 2u);
  EXPECT_NEAR(d[1].deviation, -30.0, 1e-12);
}

TEST(NegativeBidDeviation, VolumeWeightedMeanIsZeroPerPeriod) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> vol(0.1, 200.0);
  std::uniform_real_distribution<double> price(-150.0, 30.0);
  std::vector<BalancingAction> actions;
  for (int i = 0; i < 2000; ++i) {
    actions.push_back(bid(key(2013, 4, 1 + i % 5, 1 + i % 7), "U" + std::to_string(i), vol(rng), price(rng)));
  }
  std::map<SettlementKey, std::pair<double, double>> acc;  // Σ v·dev, Σ v·|price|
  for (const auto& d : negative_bid_deviation(actions)) {
    const auto& a = actions[d.action_index];
    ASSERT_LT(a.price, 0.0);
    acc[a.key].first += a.volume * d.deviation;
    acc[a.key].second += a.volume * std::abs(a.price);
  }
  for (const auto& [k, s] : acc) {
    EXPECT_NEAR(s.first, 0.0, 1e-12 * s.second) << format_key(k);
  }
}

TEST(BoxStats, DocumentedExamples) {
  auto s = box_stats({5});
  EXPECT_EQ(s.median, 5);
  EXPECT_EQ(s.q1, 5);
  EXPECT_EQ(s.q3, 5);
  EXPECT_EQ(s.whisker_low, 5);
  EXPECT_EQ(s.whisker_high, 5);

  s = box_stats({4, 1, 3, 2});
  EXPECT_EQ(s.median, 2.5);
  EXPECT_EQ(s.q1, 1.5);
  EXPECT_EQ(s.q3, 3.5);
  EXPECT_EQ(s.whisker_low, -0.5);
  EXPECT_EQ(s.whisker_high, 5.5);
  EXPECT_EQ(s.n, 4u);

  s = box_stats({-7, -7, -7});
  EXPECT_EQ(s.median, -7);
  EXPECT_EQ(s.q1, -7);
  EXPECT_EQ(s.whisker_high, -7);

  // Odd n: the median belongs to neither half.
  s = box_stats({1, 2, 3, 4, 5});
  EXPECT_EQ(s.q1, 1.5);
  EXPECT_EQ(s.q3, 4.5);
  EXPECT_THROW(box_stats({}), ValidationError);
}

TEST(BoxStats, QuartilesAreOrdered) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> x(-50, 20);
  for (int n = 1; n < 60; ++n) {
    std::vector<double> v(n);
    for (auto& e : v) e = x(rng);
    const auto s = box_stats(v);
    ASSERT_LE(s.q1, s.median);
    ASSERT_LE(s.median, s.q3);
  }
}

TEST(VolumeWeightedMean, DocumentedExamples) {
  const std::vector<std::pair<double, double>> a{{10, 1}, {20, 1}};
  EXPECT_EQ(volume_weighted_mean(a), 15.0);
  const std::vector<std::pair<double, double>> b{{10, 3}, {20, 1}};
  EXPECT_EQ(volume_weighted_mean(b), 12.5);
  const std::vector<std::pair<double, double>> c{{-42.5, 7.25}};
  EXPECT_EQ(volume_weighted_mean(c), -42.5);
  const std::vector<std::pair<double, double>> zero{{1, 0}, {2, 0}};
  EXPECT_THROW(volume_weighted_mean(zero), ValidationError);
}

TEST(SystemPrices, DocumentedExamples) {
  std::vector<BalancingAction> uniform{offer(kKey, "A", 60, 47), offer(kKey, "B", 70, 47)};
  EXPECT_EQ(*system_prices(uniform, 100).sbp, 47.0);
  EXPECT_FALSE(system_prices(uniform, 100).ssp);

  std::vector<BalancingAction> two{offer(kKey, "A", 400, 40), offer(kKey, "B", 400, 60)};
  const auto p = system_prices(two, 800);
  EXPECT_DOUBLE_EQ(*p.sbp, 56.0);
  EXPECT_EQ(p.accepted_mwh, 800.0);

  std::vector<BalancingAction> bids{bid(kKey, "A", 600, -65)};
  EXPECT_EQ(*system_prices(bids, -600).ssp, -65.0);
}

TEST(SystemPrices, ShortfallAndMixedKeys) {
  std::vector<BalancingAction> small{offer(kKey, "A", 100, 40)};
  try {
    system_prices(small, 150);
    FAIL();
  } catch (const ShortfallError& e) {
    EXPECT_NEAR(e.gap_mwh(), 50.0, 1e-9);
  }
  std::vector<BalancingAction> mixed{offer(kKey, "A", 100, 40), offer(key(2013, 2, 1, 11), "B", 100, 40)};
  EXPECT_THROW(system_prices(mixed, 10), ValidationError);
  EXPECT_FALSE(system_prices(small, 0).sbp);
}

TEST(SystemPrices, UniformStackPriceIndependentOfNet) {
  std::vector<BalancingAction> stack;
  for (int i = 0; i < 6; ++i) stack.push_back(bid(kKey, "U" + std::to_string(i), 150, -12.5));
  for (double net : {-1.0, -100.0, -499.0, -500.0, -777.0, -900.0}) {
    EXPECT_EQ(*system_prices(stack, net).ssp, -12.5) << net;
  }
}

// Oracle: expand each action into 1 MWh units, accept in stack order, price the most expensive 500.
TEST(SystemPrices, MatchesUnitExpansionOracle) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> vol(1, 300);
  std::uniform_int_distribution<int> price(-90, 120);
  std::uniform_int_distribution<int> count(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const bool short_system = trial % 2 == 0;
    std::vector<BalancingAction> actions;
    std::vector<double> units;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const int v = vol(rng);
      const int p = short_system ? std::abs(price(rng)) : price(rng);
      actions.push_back(BalancingAction{kKey, "U" + std::to_string(i),
                                        short_system ? ActionKind::Offer : ActionKind::Bid, double(v), double(p),
                                        std::nullopt});
      units.insert(units.end(), v, p);
    }
    std::uniform_int_distribution<int> need_dist(1, static_cast<int>(units.size()));
    const int need = need_dist(rng);
    if (short_system) {
      std::sort(units.begin(), units.end());
    } else {
      std::sort(units.begin(), units.end(), std::greater<>());
    }
    std::vector<double> accepted(units.begin(), units.begin() + need);
    if (short_system) {
      std::sort(accepted.begin(), accepted.end(), std::greater<>());
    } else {
      std::sort(accepted.begin(), accepted.end());
    }
    const std::size_t take = std::min<std::size_t>(500, accepted.size());
    double sum = 0;
    for (std::size_t i = 0; i < take; ++i) sum += accepted[i];
    const double want = sum / static_cast<double>(take);
    const auto got = system_prices(actions, short_system ? need : -need);
    const double price_got = short_system ? *got.sbp : *got.ssp;
    ASSERT_NEAR(price_got, want, 1e-9 * std::max(1.0, std::abs(want))) << "trial " << trial;
  }
}
