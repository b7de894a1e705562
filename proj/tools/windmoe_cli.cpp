// windmoe: ingest market data, generate synthetic corpora, and write report tables.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "windmoe/error.hpp"
#include "windmoe/ingest.hpp"
#include "windmoe/report.hpp"
#include "windmoe/store.hpp"
#include "windmoe/synthgen.hpp"
#include "windmoe/timebase.hpp"
#include "windmoe/tlm.hpp"

namespace fs = std::filesystem;
using namespace windmoe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::size_t kMaxRejectsShown = 20;

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string data_dir;
  std::map<DatasetKind, std::string> paths;
  std::string clock_rule;
  std::string out;
  bool allow_rejects{false};
};

fs::path resolve_input(const IngestArgs& args, DatasetKind kind, bool required) {
  if (auto it = args.paths.find(kind); it != args.paths.end() && !it->second.empty()) {
    if (!fs::exists(it->second)) {
      throw UsageError(fmt::format("--{}: {} does not exist", dataset_name(kind), it->second));
    }
    return it->second;
  }
  if (!args.data_dir.empty()) {
    const fs::path p = fs::path(args.data_dir) / dataset_file(kind);
    if (fs::exists(p)) {
      return p;
    }
  }
  if (required) {
    throw UsageError(fmt::format("no {} input: pass --{} or a --data directory containing {}", dataset_name(kind),
                                 dataset_name(kind), dataset_file(kind)));
  }
  return {};
}

int cmd_ingest(const IngestArgs& args) {
  fs::path rule_path = args.clock_rule;
  if (rule_path.empty() && !args.data_dir.empty()) {
    rule_path = fs::path(args.data_dir) / kClockRuleFile;
  }
  if (rule_path.empty() || !fs::exists(rule_path)) {
    throw UsageError("no clock rule: pass --clock-rule or a --data directory containing clock_rule.csv");
  }

  Store store;
  store.rule = ClockRule::load(rule_path);
  std::size_t total_rejects = 0;

  auto ingest = [&]<class Record>(DatasetKind kind, bool required, std::vector<Record>& into) {
    const fs::path path = resolve_input(args, kind, required);
    if (path.empty()) {
      std::cerr << fmt::format("{}: not supplied, treated as empty\n", dataset_name(kind));
      return;
    }
    ParseOptions options;
    options.rule = kind == DatasetKind::Registry ? nullptr : &store.rule;
    auto parsed = read_dataset_file<Record>(path, options);
    const auto& r = parsed.report;
    std::cerr << fmt::format("{}: {} rows, {} accepted, {} rejected\n", dataset_name(kind), r.rows_total(),
                             r.rows_accepted, r.rows_rejected);
    for (std::size_t i = 0; i < r.rejects.size() && i < kMaxRejectsShown; ++i) {
      std::cerr << fmt::format("  {}:{}: {}\n", path.string(), r.rejects[i].line, r.rejects[i].reason);
    }
    if (r.rejects.size() > kMaxRejectsShown) {
      std::cerr << fmt::format("  ... {} more\n", r.rejects.size() - kMaxRejectsShown);
    }
    total_rejects += r.rows_rejected;
    into = std::move(parsed.records);
  };
  ingest(DatasetKind::Registry, true, store.registry);
  ingest(DatasetKind::Generation, true, store.generation);
  ingest(DatasetKind::Spot, true, store.spot);
  ingest(DatasetKind::Actions, false, store.actions);
  ingest(DatasetKind::TlmElexon, false, store.tlm_elexon);
  ingest(DatasetKind::TlmBmr, false, store.tlm_bmr);

  const UnitRegistry registry(store.registry);
  const JoinedTable joined = join_settlement(store.generation, store.spot, store.actions, registry);
  std::cerr << fmt::format("join: {} settlement periods, {} duplicate actions, {} duplicate spot rows, "
                           "{} unregistered units\n",
                           joined.keys.size(), joined.duplicate_actions, joined.duplicate_spot,
                           joined.registry_misses);
  const TlmSources sources = TlmSources::from_tables(store.tlm_elexon, store.tlm_bmr);
  const TlmResolver resolver(registry, sources);
  std::size_t unresolved = 0;
  for (const auto& ja : joined.actions) {
    try {
      (void)resolver.resolve(ja.action);
    } catch (const TlmError& e) {
      if (unresolved++ == 0) {
        std::cerr << "tlm: " << e.what() << '\n';
      }
    }
  }
  std::cerr << fmt::format("tlm: {} of {} actions unresolved\n", unresolved, joined.actions.size());

  if (total_rejects > 0 && !args.allow_rejects) {
    std::cerr << fmt::format("error: {} rejected rows; rerun with --allow-rejects to keep the accepted rows\n",
                             total_rejects);
    return kExitData;
  }
  write_files_atomically(args.out, render_store(store));
  std::cerr << fmt::format("store written to {} ({} rejected rows dropped)\n", args.out, total_rejects);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  SynthConfig config;
  if (!args.config.empty()) {
    std::ifstream in(args.config, std::ios::binary);
    if (!in) {
      throw UsageError("cannot open config " + args.config);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(args.config + ": " + e.what());
    }
    config = SynthConfig::from_json(j);
  }
  if (args.seed) {
    config.seed = *args.seed;
  }
  const SynthData data = generate(config);
  write_files_atomically(args.out, render_files(data));
  std::cerr << fmt::format("synthetic corpus written to {}: {} periods, {} actions\n", args.out,
                           data.manifest["settlement_periods"].get<std::size_t>(), data.actions.size());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string which;
  std::string store;
  std::string out;
  std::string window;
  double knee{30.0};
  double below_cap{25.0};
  bool ols{false};
  double bin_width{5.0};
  std::size_t min_n{5};
  double cell{1.0};
  std::string roc_ledger;
  std::vector<std::string> roc_periods;
  std::vector<std::string> cases;
};

int cmd_report(const ReportArgs& args) {
  report::Options o;
  if (!args.window.empty()) {
    auto w = parse_date_range(args.window);
    if (!w) {
      throw UsageError("--window must look like 2013-01-01..2013-12-31");
    }
    if (w->empty()) {
      throw ValidationError("window " + args.window + " is empty");
    }
    o.window = *w;
  }
  o.fit.knee = args.knee;
  o.fit.below_cap = args.below_cap;
  o.fit.weighted = !args.ols;
  o.bin_width = args.bin_width;
  o.min_n = args.min_n;
  o.contour_cell = args.cell;
  if (!args.roc_ledger.empty()) {
    o.roc_ledger = RocLedger::load(args.roc_ledger);
  }
  o.roc_periods = args.roc_periods;
  for (const auto& c : args.cases) {
    o.cases.push_back(report::parse_net_case(c));
  }
  const Store store = load_store(args.store);
  const auto files = report::run(store, args.which, o);
  write_files_atomically(args.out, files);
  for (const auto& [name, content] : files) {
    std::cerr << fmt::format("wrote {}\n", (fs::path(args.out) / name).string());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind merit-order-effect and balancing-market analysis"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Validate raw datasets and write a normalized store");
  ingest->add_option("--data", ingest_args.data_dir, "Directory holding <dataset>.csv files and clock_rule.csv");
  for (DatasetKind kind : kDatasetKinds) {
    ingest->add_option("--" + std::string(dataset_name(kind)), ingest_args.paths[kind],
                       "Path overriding " + dataset_file(kind));
  }
  ingest->add_option("--clock-rule", ingest_args.clock_rule, "Clock-change rule CSV (date,spring|fall)");
  ingest->add_option("--out", ingest_args.out, "Store directory")->required();
  ingest->add_flag("--allow-rejects", ingest_args.allow_rejects, "Keep accepted rows when some rows are rejected");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted ground truth");
  synth->add_option("--config", synth_args.config, "JSON config; built-in defaults when omitted");
  synth->add_option("--seed", synth_args.seed, "Override the config seed");
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  ReportArgs report_args;
  auto* rep = app.add_subcommand("report", "Write report tables as CSV");
  rep->add_option("which", report_args.which, "table1|table3|table4|cashflow|contour|monthly|net|negbids|subsidy|all")
      ->required();
  rep->add_option("--store", report_args.store, "Store directory written by ingest")->required();
  rep->add_option("--out", report_args.out, "Output directory")->required();
  rep->add_option("--window", report_args.window, "Date window FROM..TO (inclusive); default: whole store");
  rep->add_option("--knee", report_args.knee, "Knee of the piecewise fit, % wind")->check(CLI::Range(0.0, 100.0));
  rep->add_option("--below-cap", report_args.below_cap, "Upper end of the below-knee fit window, % wind")
      ->check(CLI::Range(0.0, 100.0));
  rep->add_flag("--ols", report_args.ols, "Unweighted least squares instead of volume-weighted");
  rep->add_option("--bin-width", report_args.bin_width, "Counterfactual wind-share bin width, %")
      ->check(CLI::Range(0.01, 100.0));
  rep->add_option("--min-n", report_args.min_n, "Minimum samples for a price bin to be used");
  rep->add_option("--cell", report_args.cell, "Contour cell width, %")->check(CLI::Range(0.01, 100.0));
  rep->add_option("--roc-ledger", report_args.roc_ledger, "ROC ledger CSV")->check(CLI::ExistingFile);
  rep->add_option("--roc-periods", report_args.roc_periods, "Obligation periods for the net position, e.g. 2013-14")
      ->delimiter(',');
  rep->add_option("--case", report_args.cases, "Extra net-position case NAME:SAVINGS:ROC:CURTAILMENT:OTHER (GBP)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      return cmd_ingest(ingest_args);
    }
    if (*synth) {
      return cmd_synth(synth_args);
    }
    return cmd_report(report_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
