// fbas: backtest runner, synthetic market generator, metrics and self test.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbas/backtest.hpp"
#include "fbas/io.hpp"
#include "fbas/synth.hpp"
#include "fbas/testing/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(const std::string& kind, const std::string& message, json extra = json::object()) {
  json err{{"error", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  std::cerr << err.dump() << "\n";
  return 1;
}

struct RunArgs {
  std::string config, events, out;
  std::uint64_t seed = 0;
};

int cmd_run(const RunArgs& a) {
  fbas::BacktestConfig cfg = fbas::io::load_config(a.config);
  cfg.seed = a.seed;
  fbas::io::RunManifest manifest;
  manifest.seed = a.seed;
  std::vector<fbas::MarketEvent> events;
  if (!a.events.empty()) {
    const std::string bytes = fbas::io::detail::read_file(a.events);
    std::istringstream in(bytes);
    events = fbas::io::parse_events(in);
    manifest.input_kind = "events";
    manifest.input_path = a.events;
    manifest.input_digest = fbas::io::sha256_hex(bytes);
  } else {
    events = fbas::synthesize_market(cfg.market, a.seed);
    manifest.input_kind = "synthetic";
    manifest.input_digest = fbas::io::synthetic_digest(cfg.market, a.seed);
  }
  const fbas::BacktestResult result = fbas::run_backtest(events, cfg);
  manifest.config = cfg;
  fbas::io::write_outputs(result, manifest, a.out);
  std::cout << fbas::io::metrics_to_string(result.metrics);
  return 0;
}

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::optional<double> sigma, drift, duration, mid0;
};

int cmd_synth(const SynthArgs& a) {
  fbas::BacktestConfig cfg = a.config.empty() ? fbas::BacktestConfig{} : fbas::io::load_config(a.config);
  if (a.sigma) cfg.market.sigma = *a.sigma;
  if (a.drift) cfg.market.drift_per_sec = *a.drift;
  if (a.duration) cfg.market.duration_sec = *a.duration;
  if (a.mid0) cfg.market.mid0 = *a.mid0;
  const auto events = fbas::synthesize_market(cfg.market, a.seed);
  const std::string csv = fbas::io::events_to_csv(events);
  if (a.out.empty() || a.out == "-") std::cout << csv;
  else fbas::io::detail::write_file(a.out, csv);
  return 0;
}

struct MetricsArgs {
  std::string run_dir, equity, fills, config, out;
};

int cmd_metrics(const MetricsArgs& a) {
  fbas::MetricsConfig mc;
  std::string equity = a.equity, fills = a.fills;
  if (!a.run_dir.empty()) {
    const fs::path dir(a.run_dir);
    if (equity.empty()) equity = (dir / "equity.csv").string();
    if (fills.empty()) fills = (dir / "fills.csv").string();
    const json manifest = json::parse(fbas::io::detail::read_file(dir / "manifest.json"));
    mc = fbas::io::effective_metrics_config(fbas::io::config_from_json(manifest.at("config")));
  }
  if (!a.config.empty()) mc = fbas::io::effective_metrics_config(fbas::io::load_config(a.config));
  if (equity.empty()) return fail("usage", "metrics needs --equity or --run");
  const auto curve = fbas::io::load_equity_csv(equity);
  std::vector<fbas::FillRecord> fill_records;
  if (!fills.empty()) fill_records = fbas::io::load_fills_csv(fills);
  const std::string text = fbas::io::metrics_to_string(fbas::compute_metrics(curve, fill_records, mc));
  if (a.out.empty() || a.out == "-") std::cout << text;
  else fbas::io::detail::write_file(a.out, text);
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  bool all = true;
  for (const auto& s : fbas::testing::run_selftest(seed)) {
    std::printf("%-24s %s  cases=%zu worst=%.3e tol=%.1e\n", s.name.c_str(), s.passed ? "PASS" : "FAIL", s.cases,
                s.worst, s.tolerance);
    all = all && s.passed;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive market-making backtester"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a backtest and write outputs");
  run->add_option("--config", run_args.config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--events", run_args.events, "Event CSV (default: synthesize from [market])")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", run_args.seed, "Run seed")->required();
  run->add_option("--out", run_args.out, "Output directory")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic event CSV");
  synth->add_option("--config", synth_args.config, "Config file ([market] section)")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_args.seed, "Seed")->required();
  synth->add_option("--out", synth_args.out, "Output CSV (default: stdout)");
  synth->add_option("--sigma", synth_args.sigma, "Mid volatility, price per sqrt(sec)");
  synth->add_option("--drift", synth_args.drift, "Mid drift, price per sec");
  synth->add_option("--duration", synth_args.duration, "Duration in seconds");
  synth->add_option("--mid0", synth_args.mid0, "Opening mid");

  MetricsArgs metrics_args;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from an equity curve");
  metrics->add_option("--run", metrics_args.run_dir, "Run output directory")->check(CLI::ExistingDirectory);
  metrics->add_option("--equity", metrics_args.equity, "Equity CSV")->check(CLI::ExistingFile);
  metrics->add_option("--fills", metrics_args.fills, "Fills CSV")->check(CLI::ExistingFile);
  metrics->add_option("--config", metrics_args.config, "Config file for [metrics]")->check(CLI::ExistingFile);
  metrics->add_option("--out", metrics_args.out, "Output JSON (default: stdout)");

  std::uint64_t selftest_seed = 20240601;
  auto* selftest = app.add_subcommand("selftest", "Run the oracle suites");
  selftest->add_option("--seed", selftest_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*synth) return cmd_synth(synth_args);
    if (*metrics) return cmd_metrics(metrics_args);
    if (*selftest) return cmd_selftest(selftest_seed);
  } catch (const fbas::IngestionError& e) {
    return fail(e.kind(), e.what(), {{"line", e.line()}, {"column", e.column()}});
  } catch (const fbas::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const json::exception& e) {
    return fail("io_error", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 2;
}
