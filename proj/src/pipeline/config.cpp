#include "grace/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "grace/data/csv.hpp"
#include "grace/synth/dgp.hpp"

namespace grace::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw UsageError("config: " + key + " = '" + value + "' is not an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  return csv::parse_double(value, "config key " + key);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool affects_results = true;
};

template <typename T>
Field integer_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_integer<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_real(k, v);
          },
          [member](const RunConfig& c) { return csv::format_double(c.*member); }};
}

Field text_field(std::string RunConfig::*member, bool affects = true) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }, affects};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      {"out_dir", text_field(&RunConfig::out_dir, false)},
      {"prices", text_field(&RunConfig::prices, false)},
      {"factors", text_field(&RunConfig::factors, false)},
      {"relations", text_field(&RunConfig::relations, false)},
      {"relations_meta", text_field(&RunConfig::relations_meta, false)},
      {"factor_columns", text_field(&RunConfig::factor_columns)},
      {"risk_free_column", text_field(&RunConfig::risk_free_column)},
      {"synth_stocks", integer_field(&RunConfig::synth_stocks)},
      {"synth_days", integer_field(&RunConfig::synth_days)},
      {"synth_signal", text_field(&RunConfig::synth_signal)},
      {"synth_signal_bps", real_field(&RunConfig::synth_signal_bps)},
      {"penalty", real_field(&RunConfig::penalty)},
      {"learning_rate", real_field(&RunConfig::learning_rate)},
      {"lags", integer_field(&RunConfig::lags)},
      {"hidden", integer_field(&RunConfig::hidden)},
      {"alpha", real_field(&RunConfig::alpha)},
      {"K", integer_field(&RunConfig::quantiles)},
      {"K0", integer_field(&RunConfig::k0)},
      {"max_epochs", integer_field(&RunConfig::max_epochs)},
      {"patience", integer_field(&RunConfig::patience)},
      {"mean_max_epochs", integer_field(&RunConfig::mean_max_epochs)},
      {"mean_patience", integer_field(&RunConfig::mean_patience)},
      {"baseline_steps", integer_field(&RunConfig::baseline_steps)},
      {"windows", text_field(&RunConfig::windows)},
      {"exposure_window", integer_field(&RunConfig::exposure_window)},
      {"method", text_field(&RunConfig::method)},
      {"measures", text_field(&RunConfig::measures)},
      {"cost_bps", real_field(&RunConfig::cost_bps)},
      {"seed", integer_field(&RunConfig::seed)},
      {"jobs", {[](RunConfig& c, const std::string& k, const std::string& v) {
                  c.jobs = parse_integer<int>(k, v);
                },
                [](const RunConfig& c) { return std::to_string(c.jobs); }, false}},
      {"train_end", integer_field(&RunConfig::train_end)},
      {"valid_end", integer_field(&RunConfig::valid_end)},
      {"test_end", integer_field(&RunConfig::test_end)},
  };
  return table;
}

std::vector<int> parse_windows(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_integer<int>("windows", item));
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("config: unknown key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError("config: " + what);
  };
  need(method == "grace" || method == "grace1" || method == "grace2",
       "method must be grace, grace1 or grace2");
  need(quantiles >= 4, "K must be at least 4");
  need(k0 >= 4, "K0 must be at least 4");
  need(alpha >= 0 && alpha < 1, "alpha must lie in [0, 1)");
  need(learning_rate > 0, "learning_rate must be positive");
  need(penalty >= 0, "penalty must be nonnegative");
  need(lags >= 1 && hidden >= 1, "lags and hidden must be positive");
  need(max_epochs >= 1 && patience >= 1, "max_epochs and patience must be positive");
  need(mean_max_epochs >= 0 && mean_patience >= 0, "mean_max_epochs and mean_patience must be >= 0");
  need(baseline_steps >= 1, "baseline_steps must be positive");
  need(cost_bps >= 0, "cost_bps must be nonnegative");
  need(jobs >= 1, "jobs must be at least 1");
  need(synth_stocks >= 10 && synth_days >= 200, "synthetic market needs >= 10 stocks and >= 200 days");
  synth::parse_signal_kind(synth_signal);
  need(synth_signal_bps >= 0 && std::isfinite(synth_signal_bps), "synth_signal_bps must be finite and >= 0");
  need(!parse_windows(windows).empty(), "windows must list at least one window");
  need(exposure_window >= 20, "exposure_window must be at least 20");
  measure_list();
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, field] : fields()) {
    if (!field.affects_results) continue;
    for (char c : key + "=" + field.get(*this) + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::provenance() const {
  return "config_hash=" + hash() + " seed=" + std::to_string(seed);
}

namespace {

std::filesystem::path or_default(const std::string& value, const std::filesystem::path& out,
                                 const char* file) {
  return value.empty() ? out / "data" / file : std::filesystem::path(value);
}

}  // namespace

std::filesystem::path RunConfig::prices_path() const { return or_default(prices, out(), "prices.csv"); }
std::filesystem::path RunConfig::factors_path() const { return or_default(factors, out(), "factors.csv"); }
std::filesystem::path RunConfig::relations_path() const {
  return or_default(relations, out(), "relations.csv");
}
std::filesystem::path RunConfig::relations_meta_path() const {
  return or_default(relations_meta, out(), "relations_meta.csv");
}

data::FeatureLayout RunConfig::layout() const {
  data::FeatureLayout l;
  l.windows = parse_windows(windows);
  l.exposure_window = exposure_window;
  return l;
}

data::FactorColumns RunConfig::columns() const {
  data::FactorColumns c;
  c.factors.clear();
  std::stringstream in(factor_columns);
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) c.factors.push_back(trim(item));
  c.risk_free = risk_free_column;
  return c;
}

data::SplitSpec RunConfig::split(Index days) const {
  data::SplitSpec s;
  s.train_end = train_end ? train_end : days * 2 / 3;
  s.valid_end = valid_end ? valid_end : days * 5 / 6;
  s.test_end = test_end ? test_end : days;
  s.validate(days);
  return s;
}

std::vector<backtest::MeasureKind> RunConfig::measure_list() const {
  return backtest::parse_measures(measures);
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line.substr(0, line.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(number) + ": expected key = value");
    try {
      cfg.set(trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

}  // namespace grace::pipeline
