#pragma once

#include <cmath>
#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/timebase.hpp"

namespace windmoe {

enum class TlmProvenance : std::uint8_t { ElexonTable, BmrHistoric };

struct ResolvedTlm {
  double value{1.0};
  TlmProvenance provenance{TlmProvenance::ElexonTable};
  Role inferred_role{Role::Producer};  // Producer or Consumer
  bool role_inferred{false};           // role came from the per-action published value
};

class TlmError : public Error {
 public:
  enum class Code {
    Unresolved,      // unknown role and no published per-action value
    AmbiguousRole,   // published per-action value is exactly 1
    NoTableEntry,    // role known but neither table has the key
    DataIntegrity,   // a source value violates the role bound or the sanity envelope
  };

  TlmError(Code code, const std::string& what) : Error(what), code_(code) {}

  [[nodiscard]] Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct TlmPolicy {
  double lower{0.5};  // exclusive sanity envelope
  double upper{1.5};
  double disagreement_threshold{1e-3};  // relative
};

struct TlmKey {
  SettlementKey key;
  Role role{Role::Producer};

  friend bool operator==(const TlmKey&, const TlmKey&) = default;
  friend std::strong_ordering operator<=>(const TlmKey& a, const TlmKey& b) {
    if (auto c = a.key <=> b.key; c != 0) {
      return c;
    }
    return a.role <=> b.role;
  }
};

struct TlmSources {
  std::map<TlmKey, double> elexon;
  std::map<TlmKey, double> bmr_historic;

  /// First entry per (key, role) wins.
  static TlmSources from_tables(std::span<const TlmEntry> elexon_rows, std::span<const TlmEntry> bmr_rows) {
    TlmSources s;
    for (const auto& e : elexon_rows) {
      s.elexon.try_emplace(TlmKey{e.key, e.role}, e.multiplier);
    }
    for (const auto& e : bmr_rows) {
      s.bmr_historic.try_emplace(TlmKey{e.key, e.role}, e.multiplier);
    }
    return s;
  }
};

namespace detail {

inline void check_tlm_value(double value, Role role, const TlmPolicy& policy, const std::string& what) {
  const bool in_envelope = value > policy.lower && value < policy.upper;
  const bool role_ok = role == Role::Producer ? value < 1.0 : value > 1.0;
  if (!in_envelope || !role_ok) {
    throw TlmError(TlmError::Code::DataIntegrity,
                   fmt::format("{}: multiplier {} violates the {} bound", what, value,
                               role == Role::Producer ? "producer (<1)" : "consumer (>1)"));
  }
}

}  // namespace detail

/// Transmission loss multiplier for one unit and settlement period.
///
/// Known role: the Elexon table entry for (key, role) if present, else the BMReports historic
/// entry. Unknown role: a published per-action value below 1 means producer, above 1 means
/// consumer, after which the known-role rules apply. There is no default value; any gap is an error.
inline ResolvedTlm resolve_tlm(const UnitRegistryEntry& unit, const SettlementKey& key, std::optional<double> detsys,
                               const TlmSources& sources, const TlmPolicy& policy = {}) {
  const std::string where = fmt::format("unit {} at {}", unit.unit_id, format_key(key));

  Role role = unit.role;
  bool inferred = false;
  if (role == Role::Unknown) {
    if (!detsys) {
      throw TlmError(TlmError::Code::Unresolved, where + ": role unknown and no published TLM to infer it from");
    }
    if (!(*detsys > policy.lower && *detsys < policy.upper)) {
      throw TlmError(TlmError::Code::DataIntegrity,
                     fmt::format("{}: published TLM {} outside sanity envelope", where, *detsys));
    }
    if (*detsys == 1.0) {
      throw TlmError(TlmError::Code::AmbiguousRole, where + ": published TLM is exactly 1, role ambiguous");
    }
    role = *detsys < 1.0 ? Role::Producer : Role::Consumer;
    inferred = true;
  }

  const TlmKey lookup{key, role};
  if (auto it = sources.elexon.find(lookup); it != sources.elexon.end()) {
    detail::check_tlm_value(it->second, role, policy, where + " (Elexon table)");
    return ResolvedTlm{it->second, TlmProvenance::ElexonTable, role, inferred};
  }
  if (auto it = sources.bmr_historic.find(lookup); it != sources.bmr_historic.end()) {
    detail::check_tlm_value(it->second, role, policy, where + " (BMR historic)");
    return ResolvedTlm{it->second, TlmProvenance::BmrHistoric, role, inferred};
  }
  throw TlmError(TlmError::Code::NoTableEntry, where + ": no Elexon or BMR historic TLM for role " + role_code(role));
}

/// Binds a registry, the TLM tables and a policy so actions can be resolved one at a time.
class TlmResolver {
 public:
  TlmResolver(const UnitRegistry& registry, const TlmSources& sources, TlmPolicy policy = {})
      : registry_(&registry), sources_(&sources), policy_(policy) {}

  [[nodiscard]] ResolvedTlm resolve(const BalancingAction& action) const {
    return resolve_tlm(registry_->lookup(action.unit_id), action.key, action.tlm_published, *sources_, policy_);
  }

  [[nodiscard]] const TlmPolicy& policy() const { return policy_; }

 private:
  const UnitRegistry* registry_;
  const TlmSources* sources_;
  TlmPolicy policy_;
};

struct TlmDisagreement {
  std::size_t action_index{};
  double published{};
  double resolved{};
  double relative_difference{};
};

/// Actions whose published per-action multiplier differs from the resolved one by more than
/// the policy threshold. Reported only; the resolved value stays authoritative.
inline std::vector<TlmDisagreement> find_tlm_disagreements(std::span<const BalancingAction> actions,
                                                           const TlmResolver& resolver) {
  std::vector<TlmDisagreement> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (!a.tlm_published) {
      continue;
    }
    const double resolved = resolver.resolve(a).value;
    const double rel = std::abs(resolved - *a.tlm_published) / std::abs(*a.tlm_published);
    if (rel > resolver.policy().disagreement_threshold) {
      out.push_back(TlmDisagreement{i, *a.tlm_published, resolved, rel});
    }
  }
  return out;
}

}  // namespace windmoe
