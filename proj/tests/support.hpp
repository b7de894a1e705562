#pragma once

#include <chrono>
#include <string>

#include "windmoe/ingest.hpp"
#include "windmoe/timebase.hpp"

namespace windmoe::testing {

inline Date ymd(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

inline SettlementKey key(int y, unsigned m, unsigned d, int sp) { return SettlementKey{ymd(y, m, d), sp}; }

inline UtcInstant utc(int y, unsigned m, unsigned d, int hh, int mm) {
  return UtcInstant{std::chrono::sys_days{ymd(y, m, d)} + std::chrono::hours{hh} + std::chrono::minutes{mm}};
}

inline const ClockRule& uk_rule() {
  static const ClockRule rule = ClockRule::uk_statutory(2012, 2016);
  return rule;
}

inline BalancingAction offer(const SettlementKey& k, std::string unit, double volume, double price,
                             std::optional<double> tlm = std::nullopt) {
  return BalancingAction{k, std::move(unit), ActionKind::Offer, volume, price, tlm};
}

inline BalancingAction bid(const SettlementKey& k, std::string unit, double volume, double price,
                           std::optional<double> tlm = std::nullopt) {
  return BalancingAction{k, std::move(unit), ActionKind::Bid, volume, price, tlm};
}

}  // namespace windmoe::testing
