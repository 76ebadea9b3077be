#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "fbas/backtest.hpp"
#include "fbas/errors.hpp"
#include "fbas/events.hpp"
#include "fbas/format.hpp"
#include "fbas/metrics.hpp"

namespace fbas::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Small parsing helpers

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s == "nan" || s == "NaN" || s == "-nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// ---------------------------------------------------------------------------
// Event CSV: ts_ns,kind,price,size,side

inline constexpr std::string_view kEventHeader = "ts_ns,kind,price,size,side";

inline std::vector<MarketEvent> parse_events(std::istream& in) {
  std::vector<MarketEvent> events;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw IngestionError("event file is empty; expected header", 1);
  ++line_no;
  if (detail::trim(line) != kEventHeader)
    throw IngestionError("event header must be '" + std::string(kEventHeader) + "'", line_no);
  static const char* columns[] = {"ts_ns", "kind", "price", "size", "side"};
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != 5)
      throw IngestionError("expected 5 columns, found " + std::to_string(cells.size()), line_no);
    MarketEvent e;
    if (!detail::parse_int64(cells[0], e.timestamp_ns))
      throw IngestionError("bad timestamp", line_no, columns[0]);
    const auto kind = detail::trim(cells[1]);
    if (kind == "mid") e.kind = EventKind::mid_update;
    else if (kind == "trade") e.kind = EventKind::trade;
    else throw IngestionError("kind must be 'mid' or 'trade'", line_no, columns[1]);
    if (!detail::parse_double(cells[2], e.price) || !(e.price > 0.0) || !std::isfinite(e.price))
      throw IngestionError("price must be a positive number", line_no, columns[2]);
    if (!detail::parse_double(cells[3], e.size) || !(e.size >= 0.0) || !std::isfinite(e.size))
      throw IngestionError("size must be a non-negative number", line_no, columns[3]);
    const auto side = detail::trim(cells[4]);
    if (side == "buy") e.aggressor = Aggressor::buy;
    else if (side == "sell") e.aggressor = Aggressor::sell;
    else if (side == "-") e.aggressor = Aggressor::none;
    else throw IngestionError("side must be 'buy', 'sell' or '-'", line_no, columns[4]);
    if (!events.empty() && e.timestamp_ns < events.back().timestamp_ns)
      throw IngestionError("timestamp goes backwards", line_no, columns[0]);
    events.push_back(e);
  }
  return events;
}

inline std::vector<MarketEvent> parse_events(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event file " + path.string());
  return parse_events(in);
}

inline std::string events_to_csv(std::span<const MarketEvent> events) {
  std::string out(kEventHeader);
  out += '\n';
  for (const auto& e : events) {
    out += std::to_string(e.timestamp_ns);
    out += e.kind == EventKind::mid_update ? ",mid," : ",trade,";
    out += format_number(e.price) + ',' + format_number(e.size) + ',';
    out += e.aggressor == Aggressor::buy ? "buy" : e.aggressor == Aggressor::sell ? "sell" : "-";
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config file: sectioned key = value, units in the key names.

/// Binding between one config key and a BacktestConfig field.
struct ConfigKey {
  std::string name;  // "section.key"
  std::function<void(BacktestConfig&, const std::string&)> set;
  std::function<std::string(const BacktestConfig&)> get;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  if (!parse_double(v, d) || !std::isfinite(d)) throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  return d;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t i = 0;
  if (!parse_int64(v, i)) throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
  return i;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const auto i = to_int(key, v);
  if (i < 0) throw ConfigError("config key " + key + ": must be >= 0");
  return static_cast<std::size_t>(i);
}

template <class Get>
ConfigKey number_key(std::string name, Get get) {
  return {name,
          [name, get](BacktestConfig& c, const std::string& v) { get(c) = to_double(name, v); },
          [get](const BacktestConfig& c) { return format_number(get(const_cast<BacktestConfig&>(c))); }};
}

template <class Get>
ConfigKey count_key(std::string name, Get get) {
  return {name,
          [name, get](BacktestConfig& c, const std::string& v) { get(c) = to_count(name, v); },
          [get](const BacktestConfig& c) { return std::to_string(get(const_cast<BacktestConfig&>(c))); }};
}

template <class Get>
ConfigKey int_key(std::string name, Get get) {
  return {name,
          [name, get](BacktestConfig& c, const std::string& v) { get(c) = static_cast<int>(to_int(name, v)); },
          [get](const BacktestConfig& c) { return std::to_string(get(const_cast<BacktestConfig&>(c))); }};
}

inline std::vector<ConfigKey> build_config_keys() {
  using C = BacktestConfig;
  std::vector<ConfigKey> k;
  k.push_back({"backtest.strategy",
               [](C& c, const std::string& v) {
                 if (v == "adaptive_fb_as") c.strategy = StrategyKind::adaptive_fb_as;
                 else if (v == "fixed_as") c.strategy = StrategyKind::fixed_as;
                 else if (v == "symmetric_naive") c.strategy = StrategyKind::symmetric_naive;
                 else throw ConfigError("backtest.strategy must be adaptive_fb_as, fixed_as or symmetric_naive");
               },
               [](const C& c) { return std::string(to_string(c.strategy)); }});
  k.push_back({"backtest.quote_mode",
               [](C& c, const std::string& v) {
                 if (v == "direct") c.quote_mode = QuoteMode::direct;
                 else if (v == "centered") c.quote_mode = QuoteMode::centered;
                 else throw ConfigError("backtest.quote_mode must be direct or centered");
               },
               [](const C& c) { return std::string(c.quote_mode == QuoteMode::direct ? "direct" : "centered"); }});
  k.push_back(number_key("backtest.decision_dt_sec", [](C& c) -> double& { return c.decision_dt_sec; }));
  k.push_back(count_key("backtest.max_decisions", [](C& c) -> std::size_t& { return c.max_decisions; }));
  k.push_back(number_key("backtest.initial_cash", [](C& c) -> double& { return c.initial_cash; }));
  k.push_back(number_key("backtest.fee_per_fill", [](C& c) -> double& { return c.fee_per_fill; }));

  k.push_back(int_key("hjb.horizon_steps", [](C& c) -> int& { return c.hjb.horizon_steps; }));
  k.push_back(number_key("hjb.dt_sec", [](C& c) -> double& { return c.hjb.dt; }));
  k.push_back(number_key("hjb.discount_beta", [](C& c) -> double& { return c.hjb.discount_beta; }));
  k.push_back(number_key("hjb.order_size", [](C& c) -> double& { return c.hjb.features.order_size; }));
  k.push_back(number_key("hjb.risk_scale", [](C& c) -> double& { return c.hjb.features.risk_scale; }));
  k.push_back(int_key("hjb.grid_q_min_units", [](C& c) -> int& { return c.grid_q_min; }));
  k.push_back(int_key("hjb.grid_q_max_units", [](C& c) -> int& { return c.grid_q_max; }));
  k.push_back(count_key("hjb.n_delta_bid", [](C& c) -> std::size_t& { return c.n_delta_bid; }));
  k.push_back(count_key("hjb.n_delta_ask", [](C& c) -> std::size_t& { return c.n_delta_ask; }));

  k.push_back(number_key("limits.delta_min_price", [](C& c) -> double& { return c.limits.delta_min; }));
  k.push_back(number_key("limits.delta_max_price", [](C& c) -> double& { return c.limits.delta_max; }));
  k.push_back(number_key("limits.q_max_size", [](C& c) -> double& { return c.limits.q_max; }));
  k.push_back(number_key("limits.v_max_size", [](C& c) -> double& { return c.limits.v_max; }));

  k.push_back({"adapter.estimator",
               [](C& c, const std::string& v) {
                 if (v == "ridge") c.adapter.estimator = ObjectiveEstimator::ridge;
                 else if (v == "fb") c.adapter.estimator = ObjectiveEstimator::fb;
                 else throw ConfigError("adapter.estimator must be ridge or fb");
               },
               [](const C& c) { return std::string(c.adapter.estimator == ObjectiveEstimator::ridge ? "ridge" : "fb"); }});
  k.push_back(count_key("adapter.markout_steps", [](C& c) -> std::size_t& { return c.adapter.markout_steps; }));
  k.push_back(count_key("adapter.window_steps", [](C& c) -> std::size_t& { return c.adapter.window_steps; }));
  k.push_back(number_key("adapter.decay_steps", [](C& c) -> double& { return c.adapter.decay_steps; }));
  k.push_back(number_key("adapter.ridge_lambda", [](C& c) -> double& { return c.adapter.ridge_lambda; }));
  k.push_back(number_key("adapter.mix_beta", [](C& c) -> double& { return c.adapter.mix_beta; }));
  k.push_back(number_key("adapter.alpha_z", [](C& c) -> double& { return c.adapter.alpha_z; }));
  k.push_back(number_key("adapter.kernel_bandwidth", [](C& c) -> double& { return c.adapter.kernel_bandwidth; }));
  k.push_back(count_key("adapter.min_observations", [](C& c) -> std::size_t& { return c.adapter.min_observations; }));
  k.push_back(number_key("adapter.lambda0", [](C& c) -> double& { return c.adapter.lambda0; }));
  k.push_back(number_key("adapter.nu0", [](C& c) -> double& { return c.adapter.nu0; }));
  k.push_back(number_key("adapter.lambda_min", [](C& c) -> double& { return c.adapter.constraints.lambda_min; }));

  k.push_back(number_key("estimator.window_sec", [](C& c) -> double& { return c.estimator.window_sec; }));
  k.push_back(count_key("estimator.outcome_capacity", [](C& c) -> std::size_t& { return c.estimator.outcome_capacity; }));
  k.push_back(count_key("estimator.markout_capacity", [](C& c) -> std::size_t& { return c.estimator.markout_capacity; }));
  k.push_back(count_key("estimator.buckets", [](C& c) -> std::size_t& { return c.estimator.buckets; }));
  k.push_back(number_key("estimator.bucket_delta_max_price", [](C& c) -> double& { return c.estimator.bucket_delta_max; }));
  k.push_back(count_key("estimator.min_fills", [](C& c) -> std::size_t& { return c.estimator.min_fills; }));
  k.push_back(count_key("estimator.min_returns", [](C& c) -> std::size_t& { return c.estimator.min_returns; }));
  k.push_back(count_key("estimator.min_markouts", [](C& c) -> std::size_t& { return c.estimator.min_markouts; }));

  auto params_keys = [&k](const std::string& section, auto member) {
    k.push_back(number_key(section + ".sigma_per_sqrt_sec", [member](C& c) -> double& { return member(c).sigma; }));
    k.push_back(number_key(section + ".A_bid_per_sec", [member](C& c) -> double& { return member(c).A_bid; }));
    k.push_back(number_key(section + ".A_ask_per_sec", [member](C& c) -> double& { return member(c).A_ask; }));
    k.push_back(number_key(section + ".kappa_bid_per_price", [member](C& c) -> double& { return member(c).kappa_bid; }));
    k.push_back(number_key(section + ".kappa_ask_per_price", [member](C& c) -> double& { return member(c).kappa_ask; }));
    k.push_back(number_key(section + ".c_bid_price", [member](C& c) -> double& { return member(c).c_bid; }));
    k.push_back(number_key(section + ".c_ask_price", [member](C& c) -> double& { return member(c).c_ask; }));
  };
  params_keys("estimator_defaults", [](C& c) -> MarketParams& { return c.estimator_defaults; });
  params_keys("sim", [](C& c) -> MarketParams& { return c.truth; });

  k.push_back(number_key("market.mid0_price", [](C& c) -> double& { return c.market.mid0; }));
  k.push_back(number_key("market.sigma_per_sqrt_sec", [](C& c) -> double& { return c.market.sigma; }));
  k.push_back(number_key("market.drift_per_sec", [](C& c) -> double& { return c.market.drift_per_sec; }));
  k.push_back(number_key("market.A_bid_per_sec", [](C& c) -> double& { return c.market.A_bid; }));
  k.push_back(number_key("market.A_ask_per_sec", [](C& c) -> double& { return c.market.A_ask; }));
  k.push_back(number_key("market.kappa_bid_per_price", [](C& c) -> double& { return c.market.kappa_bid; }));
  k.push_back(number_key("market.kappa_ask_per_price", [](C& c) -> double& { return c.market.kappa_ask; }));
  k.push_back(number_key("market.duration_sec", [](C& c) -> double& { return c.market.duration_sec; }));
  k.push_back(number_key("market.dt_event_sec", [](C& c) -> double& { return c.market.dt_event_sec; }));
  k.push_back(number_key("market.trade_size", [](C& c) -> double& { return c.market.trade_size; }));

  k.push_back(number_key("metrics.notional_base", [](C& c) -> double& { return c.metrics.notional_base; }));
  k.push_back(number_key("metrics.steps_per_day", [](C& c) -> double& { return c.metrics.steps_per_day; }));
  k.push_back(number_key("metrics.days_per_year", [](C& c) -> double& { return c.metrics.days_per_year; }));
  k.push_back(number_key("metrics.seconds_per_day", [](C& c) -> double& { return c.metrics.seconds_per_day; }));
  return k;
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = detail::build_config_keys();
  return keys;
}

/// Fill-simulation truth taken from the synthetic market parameters.
inline MarketParams truth_from_market(const SynthConfig& m) {
  return {m.sigma, m.A_bid, m.A_ask, m.kappa_bid, m.kappa_ask, 0.0, 0.0};
}

/// Parses the sectioned key-value config. Unknown keys are rejected. When no
/// `sim.*` key is given, fills are simulated with the synthetic market's own
/// parameters. The objective's inventory bound follows limits.q_max_size.
inline BacktestConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  std::map<std::string, const ConfigKey*> index;
  for (const auto& key : config_keys()) index[key.name] = &key;

  BacktestConfig cfg;
  bool sim_given = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' must live in a [section]");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = index.find(name);
      if (it == index.end()) throw ConfigError("unknown config key '" + name + "'");
      it->second->set(cfg, std::string(detail::trim(value.data())));
      if (section == "sim") sim_given = true;
    }
  }
  if (!sim_given) cfg.truth = truth_from_market(cfg.market);
  cfg.adapter.constraints.q_max = cfg.limits.q_max;
  return cfg;
}

inline BacktestConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline BacktestConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

/// Canonical text form of a config: every key, grouped by section.
inline std::string config_to_text(const BacktestConfig& cfg) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::string> order;
  for (const auto& key : config_keys()) {
    const auto dot = key.name.find('.');
    const std::string section = key.name.substr(0, dot);
    if (!sections.count(section)) order.push_back(section);
    sections[section].emplace_back(key.name.substr(dot + 1), key.get(cfg));
  }
  std::string out;
  for (const auto& s : order) {
    out += "[" + s + "]\n";
    for (const auto& [k, v] : sections[s]) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

inline json config_to_json(const BacktestConfig& cfg) {
  json j = json::object();
  for (const auto& key : config_keys()) {
    const auto dot = key.name.find('.');
    j[key.name.substr(0, dot)][key.name.substr(dot + 1)] = key.get(cfg);
  }
  return j;
}

inline BacktestConfig config_from_json(const json& j) {
  std::string text;
  for (const auto& [section, body] : j.items()) {
    text += "[" + section + "]\n";
    for (const auto& [k, v] : body.items()) text += k + " = " + v.get<std::string>() + "\n";
  }
  return parse_config_string(text);
}

/// Metrics settings as applied by run_backtest: the notional base defaults
/// to the opening cash.
inline MetricsConfig effective_metrics_config(const BacktestConfig& cfg) {
  MetricsConfig mc = cfg.metrics;
  if (!(mc.notional_base > 0.0) && cfg.initial_cash > 0.0) mc.notional_base = cfg.initial_cash;
  return mc;
}

// ---------------------------------------------------------------------------
// Outputs

namespace detail {

inline json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return quantize(x);
}

inline double number_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace detail

/// Fixed-key JSON form of a report; undefined ratios become null.
inline json metrics_to_json(const MetricsReport& r) {
  using detail::number_or_null;
  return json{{"cumulative_return", number_or_null(r.cumulative_return)},
              {"sharpe", number_or_null(r.sharpe)},
              {"sortino", number_or_null(r.sortino)},
              {"max_drawdown", number_or_null(r.max_drawdown)},
              {"daily_trades", number_or_null(r.daily_trades)},
              {"daily_turnover", number_or_null(r.daily_turnover)},
              {"return_over_max_drawdown", number_or_null(r.return_over_max_drawdown)},
              {"return_per_trade", number_or_null(r.return_per_trade)},
              {"max_position_value", number_or_null(r.max_position_value)},
              {"trades", r.trades},
              {"turnover", number_or_null(r.turnover)}};
}

inline MetricsReport metrics_from_json(const json& j) {
  using detail::number_from;
  MetricsReport r;
  r.cumulative_return = number_from(j.at("cumulative_return"));
  r.sharpe = number_from(j.at("sharpe"));
  r.sortino = number_from(j.at("sortino"));
  r.max_drawdown = number_from(j.at("max_drawdown"));
  r.daily_trades = number_from(j.at("daily_trades"));
  r.daily_turnover = number_from(j.at("daily_turnover"));
  r.return_over_max_drawdown = number_from(j.at("return_over_max_drawdown"));
  r.return_per_trade = number_from(j.at("return_per_trade"));
  r.max_position_value = number_from(j.at("max_position_value"));
  r.trades = j.at("trades").get<std::size_t>();
  r.turnover = number_from(j.at("turnover"));
  return r;
}

inline std::string metrics_to_string(const MetricsReport& r) { return metrics_to_json(r).dump(2) + "\n"; }

inline constexpr std::string_view kEquityHeader = "ts_ns,wealth,cash,inventory,mid";
inline constexpr std::string_view kDiagnosticsHeader =
    "ts_ns,sigma,A_bid,A_ask,kappa_bid,kappa_ask,c_bid,c_ask,z_q,z_q2,z_adv,theta_implied,lambda_implied,"
    "delta_bid,delta_ask";
inline constexpr std::string_view kFillsHeader = "ts_ns,side,delta,size,mid,price";

inline std::string equity_to_csv(std::span<const EquityPoint> equity) {
  std::string out(kEquityHeader);
  out += '\n';
  for (const auto& e : equity) {
    out += std::to_string(e.timestamp_ns) + ',' + format_number(e.wealth) + ',' + format_number(e.cash) + ',' +
           format_number(e.inventory) + ',' + format_number(e.mid) + '\n';
  }
  return out;
}

inline std::string diagnostics_to_csv(std::span<const DiagnosticRow> rows) {
  std::string out(kDiagnosticsHeader);
  out += '\n';
  for (const auto& d : rows) {
    const double fields[] = {d.xi.sigma, d.xi.A_bid, d.xi.A_ask, d.xi.kappa_bid, d.xi.kappa_ask, d.xi.c_bid,
                             d.xi.c_ask, d.z.q, d.z.q2, d.z.adv, d.theta, d.lambda, d.delta_bid, d.delta_ask};
    out += std::to_string(d.timestamp_ns);
    for (double f : fields) out += ',' + format_number(f);
    out += '\n';
  }
  return out;
}

inline std::string fills_to_csv(std::span<const FillRecord> fills) {
  std::string out(kFillsHeader);
  out += '\n';
  for (const auto& f : fills) {
    out += std::to_string(f.timestamp_ns) + (f.side == Side::bid ? ",bid," : ",ask,") + format_number(f.delta) + ',' +
           format_number(f.size) + ',' + format_number(f.mid) + ',' + format_number(f.price()) + '\n';
  }
  return out;
}

namespace detail {

template <class Row>
std::vector<Row> parse_table(std::istream& in, std::string_view header, std::size_t columns,
                             const std::function<Row(const std::vector<std::string_view>&, std::size_t)>& row) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || trim(line) != header)
    throw IngestionError("expected header '" + std::string(header) + "'", 1);
  std::vector<Row> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != columns) throw IngestionError("wrong column count", line_no);
    out.push_back(row(cells, line_no));
  }
  return out;
}

inline double cell_number(std::string_view cell, std::size_t line, const char* column) {
  double d = 0.0;
  if (!parse_double(cell, d)) throw IngestionError("bad number", line, column);
  return d;
}

inline std::int64_t cell_ts(std::string_view cell, std::size_t line) {
  std::int64_t t = 0;
  if (!parse_int64(cell, t)) throw IngestionError("bad timestamp", line, "ts_ns");
  return t;
}

}  // namespace detail

inline std::vector<EquityPoint> parse_equity_csv(std::istream& in) {
  return detail::parse_table<EquityPoint>(in, kEquityHeader, 5, [](const auto& c, std::size_t line) {
    return EquityPoint{detail::cell_ts(c[0], line), detail::cell_number(c[1], line, "wealth"),
                       detail::cell_number(c[2], line, "cash"), detail::cell_number(c[3], line, "inventory"),
                       detail::cell_number(c[4], line, "mid")};
  });
}

inline std::vector<FillRecord> parse_fills_csv(std::istream& in) {
  return detail::parse_table<FillRecord>(in, kFillsHeader, 6, [](const auto& c, std::size_t line) {
    FillRecord f;
    f.timestamp_ns = detail::cell_ts(c[0], line);
    const auto side = detail::trim(c[1]);
    if (side == "bid") f.side = Side::bid;
    else if (side == "ask") f.side = Side::ask;
    else throw IngestionError("side must be bid or ask", line, "side");
    f.delta = detail::cell_number(c[2], line, "delta");
    f.size = detail::cell_number(c[3], line, "size");
    f.mid = detail::cell_number(c[4], line, "mid");
    return f;
  });
}

inline std::vector<EquityPoint> load_equity_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return parse_equity_csv(in);
}

inline std::vector<FillRecord> load_fills_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return parse_fills_csv(in);
}

/// Record of what produced an output directory.
struct RunManifest {
  BacktestConfig config;
  std::string input_kind;  // "events" or "synthetic"
  std::string input_path;
  std::string input_digest;
  std::uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::vector<std::string> outputs;
};

inline json manifest_to_json(const RunManifest& m) {
  return json{{"artifact_version", m.artifact_version},
              {"seed", m.seed},
              {"input", {{"kind", m.input_kind}, {"path", m.input_path}, {"digest", m.input_digest}}},
              {"config", config_to_json(m.config)},
              {"outputs", m.outputs}};
}

/// Digest of the synthetic-market inputs: generator parameters plus seed.
inline std::string synthetic_digest(const SynthConfig& m, std::uint64_t seed) {
  BacktestConfig c;
  c.market = m;
  std::string canon = "seed=" + std::to_string(seed) + "\n";
  for (const auto& key : config_keys())
    if (key.name.rfind("market.", 0) == 0) canon += key.name + "=" + key.get(c) + "\n";
  return sha256_hex(canon);
}

/// Writes metrics.json, equity.csv, diagnostics.csv, fills.csv and
/// manifest.json into `out_dir`, creating it if needed. Returns the paths.
inline std::vector<fs::path> write_outputs(const BacktestResult& result, RunManifest manifest, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::vector<std::pair<std::string, std::string>> files{
      {"metrics.json", metrics_to_string(result.metrics)},
      {"equity.csv", equity_to_csv(result.equity)},
      {"diagnostics.csv", diagnostics_to_csv(result.diagnostics)},
      {"fills.csv", fills_to_csv(result.fills)}};
  std::vector<fs::path> paths;
  manifest.outputs.clear();
  for (const auto& [name, content] : files) {
    detail::write_file(out_dir / name, content);
    paths.push_back(out_dir / name);
    manifest.outputs.push_back(name);
  }
  manifest.outputs.push_back("manifest.json");
  detail::write_file(out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  paths.push_back(out_dir / "manifest.json");
  return paths;
}

}  // namespace fbas::io
