#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "windmoe/error.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/timebase.hpp"
#include "windmoe/tlm.hpp"

namespace windmoe {

/// The normalized dataset set written by `ingest` and read by `report`.
struct Store {
  ClockRule rule;
  std::vector<UnitRegistryEntry> registry;
  std::vector<GenerationRecord> generation;
  std::vector<SpotRecord> spot;
  std::vector<BalancingAction> actions;
  std::vector<TlmEntry> tlm_elexon;
  std::vector<TlmEntry> tlm_bmr;
};

inline constexpr const char* kClockRuleFile = "clock_rule.csv";

inline std::string dataset_file(DatasetKind kind) { return std::string(dataset_name(kind)) + ".csv"; }

/// Writes every file to a hidden temporary beside its target and renames only after all writes
/// succeeded, so a failure leaves no partial output behind.
inline void write_files_atomically(const std::filesystem::path& dir,
                                   const std::vector<std::pair<std::string, std::string>>& files) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& [tmp, target] : staged) {
      fs::remove(tmp, ec);
    }
  };
  try {
    for (const auto& [name, content] : files) {
      const fs::path target = dir / name;
      const fs::path tmp = dir / ("." + name + ".tmp");
      staged.emplace_back(tmp, target);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) {
        throw Error("cannot write " + tmp.string());
      }
    }
  } catch (...) {
    cleanup();
    throw;
  }
  for (const auto& [tmp, target] : staged) {
    fs::rename(tmp, target);
  }
}

inline std::vector<std::pair<std::string, std::string>> render_store(const Store& s) {
  return {
      {kClockRuleFile, s.rule.to_csv()},
      {dataset_file(DatasetKind::Registry), serialize_dataset<UnitRegistryEntry>(s.registry)},
      {dataset_file(DatasetKind::Generation), serialize_dataset<GenerationRecord>(s.generation)},
      {dataset_file(DatasetKind::Spot), serialize_dataset<SpotRecord>(s.spot)},
      {dataset_file(DatasetKind::Actions), serialize_dataset<BalancingAction>(s.actions)},
      {dataset_file(DatasetKind::TlmElexon), serialize_dataset<TlmEntry>(s.tlm_elexon)},
      {dataset_file(DatasetKind::TlmBmr), serialize_dataset<TlmEntry>(s.tlm_bmr)},
  };
}

/// Loads a store written by `render_store`. Stores are already clean, so any reject is fatal.
inline Store load_store(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error("store directory " + dir.string() + " does not exist");
  }
  Store s;
  s.rule = ClockRule::load(dir / kClockRuleFile);
  auto load = [&]<class Record>(DatasetKind kind, std::vector<Record>& into) {
    const fs::path path = dir / dataset_file(kind);
    ParseOptions options;
    options.rule = kind == DatasetKind::Registry ? nullptr : &s.rule;
    auto parsed = read_dataset_file<Record>(path, options);
    if (!parsed.report.rejects.empty()) {
      const auto& r = parsed.report.rejects.front();
      throw FormatError(path.string(), r.line, r.reason);
    }
    into = std::move(parsed.records);
  };
  load(DatasetKind::Registry, s.registry);
  load(DatasetKind::Generation, s.generation);
  load(DatasetKind::Spot, s.spot);
  load(DatasetKind::Actions, s.actions);
  load(DatasetKind::TlmElexon, s.tlm_elexon);
  load(DatasetKind::TlmBmr, s.tlm_bmr);
  return s;
}

}  // namespace windmoe
