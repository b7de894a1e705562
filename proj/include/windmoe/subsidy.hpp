#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/csv.hpp"
#include "windmoe/error.hpp"
#include "windmoe/imbalance.hpp"
#include "windmoe/ingest.hpp"

namespace windmoe {

enum class RocTechnology : std::uint8_t { OffshoreWind, OnshoreWind };

inline constexpr std::array<RocTechnology, 2> kRocTechnologies{RocTechnology::OffshoreWind,
                                                               RocTechnology::OnshoreWind};

inline std::string_view technology_name(RocTechnology t) {
  return t == RocTechnology::OffshoreWind ? "offshore_wind" : "onshore_wind";
}

/// Certificates and cost as exact integers (certificates, pounds).
struct RocAmount {
  std::int64_t certificates{};
  std::int64_t cost_gbp{};

  RocAmount& operator+=(const RocAmount& o) {
    certificates += o.certificates;
    cost_gbp += o.cost_gbp;
    return *this;
  }
  friend RocAmount operator+(RocAmount a, const RocAmount& b) { return a += b; }
  friend bool operator==(const RocAmount&, const RocAmount&) = default;
};

namespace detail {

struct ScaledDecimal {
  std::int64_t value{};  // in units of 10^-scale_digits of the column unit
  std::int64_t unit{};   // size of one unit in the last published decimal place, same scale
};

/// Parses a non-negative decimal into an integer scaled by 10^scale_digits, exactly.
inline std::optional<ScaledDecimal> parse_scaled(std::string_view text, int scale_digits) {
  if (text.empty()) {
    return std::nullopt;
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() || static_cast<int>(frac.size()) > scale_digits) {
    return std::nullopt;
  }
  auto digits_only = [](std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!digits_only(whole) || !digits_only(frac)) {
    return std::nullopt;
  }
  std::int64_t pow10 = 1;
  for (int i = 0; i < scale_digits; ++i) {
    pow10 *= 10;
  }
  std::int64_t w = 0;
  std::from_chars(whole.data(), whole.data() + whole.size(), w);
  std::int64_t f = 0;
  if (!frac.empty()) {
    std::from_chars(frac.data(), frac.data() + frac.size(), f);
  }
  std::int64_t unit = pow10;
  for (std::size_t i = 0; i < frac.size(); ++i) {
    unit /= 10;
  }
  return ScaledDecimal{w * pow10 + f * unit, unit};
}

inline bool valid_period(std::string_view p) {
  if (p.size() != 7 || p[4] != '-') {
    return false;
  }
  auto first = csv::parse_int(p.substr(0, 4));
  auto second = csv::parse_int(p.substr(5, 2));
  return first && second && (*first + 1) % 100 == *second;
}

}  // namespace detail

/// Certificates issued and their cost per obligation period (April–March, written `YYYY-YY`)
/// and technology, with the published TOTAL rows kept alongside the component rows.
class RocLedger {
 public:
  static constexpr std::array<std::string_view, 4> kColumns{"period", "technology", "certificates_millions",
                                                            "cost_gbp_bn"};

  /// Reads the ledger CSV and checks each TOTAL row against its component sum within published rounding.
  static RocLedger parse(std::istream& in, const std::string& source = "<roc-ledger>") {
    RocLedger ledger;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
      throw FormatError(source, 1, "missing header row");
    }
    ++line_no;
    const auto header = csv::split(line);
    if (!std::equal(header.begin(), header.end(), kColumns.begin(), kColumns.end())) {
      throw FormatError(source, 1, "expected header `period,technology,certificates_millions,cost_gbp_bn`");
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (csv::trim(line).empty()) {
        continue;
      }
      const auto f = csv::split(line);
      if (f.size() != kColumns.size()) {
        throw FormatError(source, line_no, "expected 4 fields");
      }
      if (!detail::valid_period(f[0])) {
        throw FormatError(source, line_no, "period must look like 2013-14");
      }
      auto certs = detail::parse_scaled(f[2], 6);
      auto cost = detail::parse_scaled(f[3], 9);
      if (!certs || !cost) {
        throw FormatError(source, line_no, "invalid non-negative decimal");
      }
      Entry entry{RocAmount{certs->value, cost->value}, certs->unit, cost->unit};
      const std::string period(f[0]);
      bool inserted = false;
      if (f[1] == "total") {
        inserted = ledger.totals_.emplace(period, entry).second;
      } else if (f[1] == "offshore_wind") {
        inserted = ledger.cells_.emplace(std::pair{period, RocTechnology::OffshoreWind}, entry).second;
      } else if (f[1] == "onshore_wind") {
        inserted = ledger.cells_.emplace(std::pair{period, RocTechnology::OnshoreWind}, entry).second;
      } else {
        throw FormatError(source, line_no, "technology must be offshore_wind, onshore_wind or total");
      }
      if (!inserted) {
        throw FormatError(source, line_no, "duplicate row for " + period + " " + std::string(f[1]));
      }
    }
    ledger.validate_totals();
    return ledger;
  }

  static RocLedger load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw FormatError(path.string(), 0, "cannot open ROC ledger");
    }
    return parse(in, path.string());
  }

  [[nodiscard]] std::vector<std::string> periods() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : cells_) {
      if (out.empty() || out.back() != k.first) {
        out.push_back(k.first);
      }
    }
    for (const auto& [p, e] : totals_) {
      if (std::find(out.begin(), out.end(), p) == out.end()) {
        out.push_back(p);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  [[nodiscard]] bool has_period(std::string_view period) const {
    const auto ps = periods();
    return std::find(ps.begin(), ps.end(), period) != ps.end();
  }

  [[nodiscard]] std::optional<RocAmount> cell(const std::string& period, RocTechnology tech) const {
    auto it = cells_.find({period, tech});
    return it == cells_.end() ? std::nullopt : std::optional{it->second.amount};
  }

  [[nodiscard]] std::optional<RocAmount> published_total(const std::string& period) const {
    auto it = totals_.find(period);
    return it == totals_.end() ? std::nullopt : std::optional{it->second.amount};
  }

 private:
  struct Entry {
    RocAmount amount;
    std::int64_t cert_unit{};
    std::int64_t cost_unit{};
  };

  void validate_totals() const {
    for (const auto& [period, total] : totals_) {
      RocAmount sum;
      std::int64_t cert_unit = total.cert_unit;
      std::int64_t cost_unit = total.cost_unit;
      int parts = 0;
      for (auto tech : kRocTechnologies) {
        if (auto it = cells_.find({period, tech}); it != cells_.end()) {
          sum += it->second.amount;
          cert_unit = std::max(cert_unit, it->second.cert_unit);
          cost_unit = std::max(cost_unit, it->second.cost_unit);
          ++parts;
        }
      }
      if (parts == 0) {
        continue;
      }
      // Each published figure carries up to half a unit of rounding.
      auto within = [&](std::int64_t a, std::int64_t b, std::int64_t unit) {
        return 2 * std::llabs(a - b) <= static_cast<std::int64_t>(parts + 1) * unit;
      };
      if (!within(total.amount.certificates, sum.certificates, cert_unit) ||
          !within(total.amount.cost_gbp, sum.cost_gbp, cost_unit)) {
        throw ValidationError("ROC ledger: TOTAL row for " + period + " does not match its components");
      }
    }
  }

  std::map<std::pair<std::string, RocTechnology>, Entry> cells_;
  std::map<std::string, Entry> totals_;
};

/// Sums over periods and technologies. When all technologies are requested and a period has a
/// published TOTAL row, that row is used, since it was rounded from unrounded components.
inline RocAmount roc_totals(const RocLedger& ledger, std::span<const std::string> periods,
                            std::span<const RocTechnology> technologies = kRocTechnologies) {
  const bool all_tech = std::all_of(kRocTechnologies.begin(), kRocTechnologies.end(), [&](RocTechnology t) {
    return std::find(technologies.begin(), technologies.end(), t) != technologies.end();
  });
  RocAmount sum;
  for (const auto& period : periods) {
    if (!ledger.has_period(period)) {
      throw ValidationError("roc_totals: unknown obligation period " + period);
    }
    if (all_tech) {
      if (auto total = ledger.published_total(period)) {
        sum += *total;
        continue;
      }
    }
    for (auto tech : technologies) {
      if (auto c = ledger.cell(period, tech)) {
        sum += *c;
      }
    }
  }
  return sum;
}

/// Cost per certificate; `technology` absent means the period total.
inline double implied_roc_price(const RocLedger& ledger, const std::string& period,
                                std::optional<RocTechnology> technology = std::nullopt) {
  const std::array<std::string, 1> ps{period};
  const RocAmount a = technology ? roc_totals(ledger, ps, std::array{*technology}) : roc_totals(ledger, ps);
  if (a.certificates == 0) {
    throw ValidationError("implied_roc_price: zero certificates for " + period);
  }
  return static_cast<double>(a.cost_gbp) / static_cast<double>(a.certificates);
}

inline std::string obligation_period_label(int start_year) {
  return fmt::format("{:04}-{:02}", start_year, (start_year + 1) % 100);
}

/// Cost attributed to calendar years [first, last] by apportioning each April–March period by
/// months (3/12 to the earlier calendar year's tail, 9/12 to the period's own start year).
inline double apportioned_calendar_cost(const RocLedger& ledger, int first_year, int last_year,
                                        std::span<const RocTechnology> technologies = kRocTechnologies) {
  double total = 0.0;
  for (int y = first_year; y <= last_year; ++y) {
    const std::array<std::string, 1> jan_mar{obligation_period_label(y - 1)};
    const std::array<std::string, 1> apr_dec{obligation_period_label(y)};
    total += 0.25 * static_cast<double>(roc_totals(ledger, jan_mar, technologies).cost_gbp);
    total += 0.75 * static_cast<double>(roc_totals(ledger, apr_dec, technologies).cost_gbp);
  }
  return total;
}

struct SubsidyConstants {
  double lost_subsidy_threshold{55.0};  // GBP/MWh
  std::map<std::string, double> fit_costs{{"2011-12", 6e6}, {"2012-13", 56e6}, {"2013-14", 97e6}};

  void validate() const {
    if (!(lost_subsidy_threshold > 0.0)) {
      throw ValidationError("lost subsidy threshold must be positive");
    }
  }
};

/// Negative bids priced strictly below −threshold. Returns indices into `actions`.
inline std::vector<std::size_t> screen_lost_subsidy(std::span<const BalancingAction> actions,
                                                    const SubsidyConstants& constants = {}) {
  constants.validate();
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (classify_action(a) == ActionCategory::NegativeBid && a.price < -constants.lost_subsidy_threshold) {
      flagged.push_back(i);
    }
  }
  return flagged;
}

}  // namespace windmoe
