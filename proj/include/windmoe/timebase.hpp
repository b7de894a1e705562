#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"

namespace windmoe {

using Date = std::chrono::year_month_day;
using UtcInstant = std::chrono::sys_seconds;

inline constexpr std::chrono::minutes kPeriodLength{30};

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt on any deviation.
inline std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    return std::nullopt;
  }
  auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int value = 0;
    const char* first = text.data() + pos;
    const char* last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
      return std::nullopt;
    }
    return value;
  };
  auto y = field(0, 4);
  auto m = field(5, 2);
  auto d = field(8, 2);
  if (!y || !m || !d) {
    return std::nullopt;
  }
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) {
    return std::nullopt;
  }
  return date;
}

inline std::string format_date(const Date& date) {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                     static_cast<unsigned>(date.day()));
}

inline std::string format_instant(UtcInstant t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const Date date{day};
  const std::chrono::hh_mm_ss hms{t - day};
  return fmt::format("{} {:02}:{:02}:{:02}Z", format_date(date), hms.hours().count(), hms.minutes().count(),
                     hms.seconds().count());
}

inline Date next_day(const Date& date) {
  return Date{std::chrono::sys_days{date} + std::chrono::days{1}};
}

/// One half-hour trading window: UK settlement day plus 1-based period index.
struct SettlementKey {
  Date date{};
  int sp{1};

  friend bool operator==(const SettlementKey&, const SettlementKey&) = default;
  friend std::strong_ordering operator<=>(const SettlementKey& a, const SettlementKey& b) {
    if (auto c = std::chrono::sys_days{a.date} <=> std::chrono::sys_days{b.date}; c != 0) {
      return c;
    }
    return a.sp <=> b.sp;
  }
};

inline std::string format_key(const SettlementKey& key) {
  return fmt::format("{} SP{}", format_date(key.date), key.sp);
}

/// Inclusive calendar-date window.
struct DateRange {
  Date from{};
  Date to{};

  [[nodiscard]] bool empty() const { return std::chrono::sys_days{to} < std::chrono::sys_days{from}; }
  [[nodiscard]] bool contains(const Date& d) const {
    const std::chrono::sys_days day{d};
    return std::chrono::sys_days{from} <= day && day <= std::chrono::sys_days{to};
  }
};

/// Parses `FROM..TO` with ISO dates on both sides.
inline std::optional<DateRange> parse_date_range(std::string_view text) {
  const auto sep = text.find("..");
  if (sep == std::string_view::npos) {
    return std::nullopt;
  }
  auto from = parse_date(text.substr(0, sep));
  auto to = parse_date(text.substr(sep + 2));
  if (!from || !to) {
    return std::nullopt;
  }
  return DateRange{*from, *to};
}

struct UtcRange {
  UtcInstant start{};
  UtcInstant end{};  // exclusive
};

enum class Transition { Spring, Fall };

/// UK clock-change table. Transitions happen at 01:00 UTC on the listed dates;
/// a year is covered only when both its spring-forward and fall-back dates are known.
class ClockRule {
 public:
  ClockRule() = default;

  static ClockRule from_transitions(const std::vector<std::pair<Date, Transition>>& transitions) {
    std::map<int, std::pair<std::optional<Date>, std::optional<Date>>> staged;
    for (const auto& [date, kind] : transitions) {
      auto& slot = staged[static_cast<int>(date.year())];
      auto& target = kind == Transition::Spring ? slot.first : slot.second;
      if (target) {
        throw ValidationError(fmt::format("clock rule: year {} has more than one {} transition",
                                          static_cast<int>(date.year()),
                                          kind == Transition::Spring ? "spring" : "fall"));
      }
      target = date;
    }
    ClockRule rule;
    for (const auto& [year, slot] : staged) {
      if (!slot.first || !slot.second) {
        throw ValidationError(fmt::format("clock rule: year {} needs both a spring and a fall transition", year));
      }
      if (std::chrono::sys_days{*slot.first} >= std::chrono::sys_days{*slot.second}) {
        throw ValidationError(fmt::format("clock rule: year {} spring transition is not before fall", year));
      }
      rule.years_.emplace(year, YearTransitions{*slot.first, *slot.second});
    }
    return rule;
  }

  /// Reads `YYYY-MM-DD,spring|fall` lines. Blank lines are ignored; CR before LF is tolerated.
  static ClockRule parse(std::istream& in, const std::string& source = "<clock-rule>") {
    std::vector<std::pair<Date, Transition>> transitions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      if (line.empty()) {
        continue;
      }
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw FormatError(source, line_no, "expected `YYYY-MM-DD,spring|fall`");
      }
      auto date = parse_date(std::string_view{line}.substr(0, comma));
      const std::string_view kind = std::string_view{line}.substr(comma + 1);
      if (!date) {
        throw FormatError(source, line_no, "invalid date");
      }
      if (kind == "spring") {
        transitions.emplace_back(*date, Transition::Spring);
      } else if (kind == "fall") {
        transitions.emplace_back(*date, Transition::Fall);
      } else {
        throw FormatError(source, line_no, "transition must be `spring` or `fall`");
      }
    }
    return from_transitions(transitions);
  }

  static ClockRule load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw FormatError(path.string(), 0, "cannot open clock rule file");
    }
    return parse(in, path.string());
  }

  /// Last Sunday of March / last Sunday of October for each year in [first, last].
  static ClockRule uk_statutory(int first_year, int last_year) {
    using namespace std::chrono;
    std::vector<std::pair<Date, Transition>> transitions;
    for (int y = first_year; y <= last_year; ++y) {
      transitions.emplace_back(Date{sys_days{year{y} / March / Sunday[last]}}, Transition::Spring);
      transitions.emplace_back(Date{sys_days{year{y} / October / Sunday[last]}}, Transition::Fall);
    }
    return from_transitions(transitions);
  }

  [[nodiscard]] bool covers(const Date& date) const { return years_.contains(static_cast<int>(date.year())); }

  [[nodiscard]] int periods_in_day(const Date& date) const {
    const auto& t = transitions_for(date);
    if (date == t.spring) {
      return 46;
    }
    if (date == t.fall) {
      return 50;
    }
    return 48;
  }

  /// UTC instant of 00:00 local time on `date`.
  [[nodiscard]] UtcInstant day_start(const Date& date) const {
    const auto& t = transitions_for(date);
    const std::chrono::sys_days day{date};
    // Local midnight is still BST on the fall-back date; it is GMT on the spring-forward date.
    const bool bst = std::chrono::sys_days{t.spring} < day && day <= std::chrono::sys_days{t.fall};
    return UtcInstant{day} - (bst ? std::chrono::hours{1} : std::chrono::hours{0});
  }

  /// Serializes back to the config-file format, ordered by date.
  [[nodiscard]] std::string to_csv() const {
    std::string out;
    for (const auto& [year, t] : years_) {
      out += format_date(t.spring) + ",spring\n";
      out += format_date(t.fall) + ",fall\n";
    }
    return out;
  }

  [[nodiscard]] std::optional<std::pair<int, int>> year_span() const {
    if (years_.empty()) {
      return std::nullopt;
    }
    return std::pair{years_.begin()->first, years_.rbegin()->first};
  }

 private:
  struct YearTransitions {
    Date spring;
    Date fall;
  };

  [[nodiscard]] const YearTransitions& transitions_for(const Date& date) const {
    auto it = years_.find(static_cast<int>(date.year()));
    if (it == years_.end()) {
      throw CoverageError(fmt::format("date {} is outside clock rule coverage", format_date(date)));
    }
    return it->second;
  }

  std::map<int, YearTransitions> years_;
};

inline int periods_in_day(const Date& date, const ClockRule& rule) { return rule.periods_in_day(date); }

/// Settlement key whose half-hour window contains `t`.
inline SettlementKey to_settlement_key(UtcInstant t, const ClockRule& rule) {
  Date date{std::chrono::floor<std::chrono::days>(t)};
  // Local midnight is at or before UTC midnight, so the local date is the UTC date or the day after.
  UtcInstant start = rule.day_start(date);
  const UtcInstant end = start + rule.periods_in_day(date) * kPeriodLength;
  if (t >= end) {
    date = next_day(date);
    start = rule.day_start(date);
  }
  const auto offset = t - start;
  return SettlementKey{date, static_cast<int>(offset / kPeriodLength) + 1};
}

/// Half-open UTC window [start, end) of a settlement period.
inline UtcRange sp_to_utc_range(const SettlementKey& key, const ClockRule& rule) {
  const int n = rule.periods_in_day(key.date);
  if (key.sp < 1 || key.sp > n) {
    throw ValidationError(fmt::format("settlement period {} out of range 1..{} for {}", key.sp, n,
                                      format_date(key.date)));
  }
  const UtcInstant start = rule.day_start(key.date) + (key.sp - 1) * kPeriodLength;
  return UtcRange{start, start + kPeriodLength};
}

/// Every settlement key of every day in `window`, in order.
inline std::vector<SettlementKey> enumerate_keys(const DateRange& window, const ClockRule& rule) {
  std::vector<SettlementKey> keys;
  if (window.empty()) {
    return keys;
  }
  for (Date d = window.from;; d = next_day(d)) {
    const int n = rule.periods_in_day(d);
    for (int sp = 1; sp <= n; ++sp) {
      keys.push_back(SettlementKey{d, sp});
    }
    if (d == window.to) {
      break;
    }
  }
  return keys;
}

}  // namespace windmoe
