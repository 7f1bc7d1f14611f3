#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "grace/pipeline/stages.hpp"

namespace {

struct Options {
  std::string config;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("-c,--config", opt.config, "key = value configuration file");
  auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        name, [&opt, key](const std::string& v) { opt.overrides[key] = v; }, help);
  };
  flag("--out", "out_dir", "output directory");
  flag("--prices", "prices", "prices CSV (date,ticker,return|close)");
  flag("--factors", "factors", "factors CSV");
  flag("--relations", "relations", "relations CSV (i,j,relation_id)");
  flag("--relations-meta", "relations_meta", "relation names CSV");
  flag("--cost-bps", "cost_bps", "transaction cost in basis points (default 30)");
  flag("--alpha", "alpha", "coverage-test level");
  flag("--K", "K", "number of quantile levels");
  flag("--K0", "K0", "minimum valid levels per stock");
  flag("--method", "method", "grace | grace1 | grace2");
  flag("--measures", "measures", "comma-separated performance measures");
  flag("--seed", "seed", "random seed");
  flag("--jobs", "jobs", "parallel training jobs");
  cmd->add_option_function<std::vector<std::string>>(
      "--set",
      [&opt](const std::vector<std::string>& items) {
        for (const auto& item : items) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set expects key=value");
          opt.overrides[item.substr(0, eq)] = item.substr(eq + 1);
        }
      },
      "override any config key (key=value)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grace: quantile graph networks, conditional moments and decile backtests"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> stages{
      {"synth", "generate the synthetic market"},
      {"featurize", "build normalized feature frames"},
      {"train", "train the quantile and mean models"},
      {"predict", "predict quantiles and means"},
      {"validate", "coverage tests, valid level sets and stock filtering"},
      {"qcm", "conditional moments from quantiles, moment t tests"},
      {"backtest", "lambda grid search and out-of-sample long-short portfolios"},
      {"report", "annualized return, risk and Sharpe ratio per measure"},
      {"run-all", "every stage in order"}};
  for (const auto& [name, help] : stages) add_common(app.add_subcommand(name, help), opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    grace::pipeline::RunConfig cfg =
        opt.config.empty() ? grace::pipeline::RunConfig{} : grace::pipeline::load_config(opt.config);
    for (const auto& [key, value] : opt.overrides) cfg.set(key, value);
    grace::pipeline::run_stage(stage, cfg, std::cerr);
  } catch (const grace::Error& e) {
    std::cerr << "error stage=" << stage << " kind=" << e.kind() << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error stage=" << stage << " kind=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
