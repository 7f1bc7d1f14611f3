#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "grace/backtest/measures.hpp"
#include "grace/data/features.hpp"

namespace grace::pipeline {

// Every tunable of a run. Parsed from `key = value` lines; CLI flags
// override file values through set().
struct RunConfig {
  // Paths. Empty data paths default to <out_dir>/data/<file>.
  std::string out_dir = "out";
  std::string prices;
  std::string factors;
  std::string relations;
  std::string relations_meta;
  std::string factor_columns = "mkt_rf,smb,hml,rmw,cma";
  std::string risk_free_column = "rf";

  // Synthetic market emitted by `synth`.
  Index synth_stocks = 20;
  Index synth_days = 900;
  std::string synth_signal = "trend";  // none | trend | magnitude
  double synth_signal_bps = 1.5;       // half the gap between the two mean groups

  // Hyperparameters.
  double penalty = 0.1;
  double learning_rate = 1e-3;
  Index lags = 16;
  Index hidden = 64;
  double alpha = 0.01;
  int quantiles = 199;  // K
  int k0 = 30;
  int max_epochs = 200;
  int patience = 5;
  // The mean model fits a much weaker signal than the quantile models and
  // keeps improving for longer; 0 reuses max_epochs / patience.
  int mean_max_epochs = 0;
  int mean_patience = 0;
  int baseline_steps = 500;
  std::string windows = "1,5,10,20,30";
  int exposure_window = 126;

  std::string method = "grace";  // grace | grace1 | grace2
  std::string measures = "M,MV,MVSK,SR,SRSK";
  double cost_bps = 30;
  std::uint64_t seed = 0;
  int jobs = 1;

  // Split boundaries as day indices; 0 means 2/3, 5/6 and all of the days.
  Index train_end = 0;
  Index valid_end = 0;
  Index test_end = 0;

  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Canonical `key = value` listing of every field.
  std::string dump() const;
  // FNV-1a over the listing, without paths and `jobs` (they do not change results).
  std::string hash() const;
  // `config_hash=<hash> seed=<seed>`, the provenance line of every output.
  std::string provenance() const;

  std::filesystem::path out() const { return out_dir; }
  std::filesystem::path prices_path() const;
  std::filesystem::path factors_path() const;
  std::filesystem::path relations_path() const;
  std::filesystem::path relations_meta_path() const;

  data::FeatureLayout layout() const;
  data::FactorColumns columns() const;
  data::SplitSpec split(Index days) const;
  std::vector<backtest::MeasureKind> measure_list() const;
  bool include_factors() const { return method != "grace1"; }
  bool is_baseline() const { return method == "grace2"; }
  double cost() const { return cost_bps * 1e-4; }
};

RunConfig parse_config(std::istream& in, const std::string& source);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace grace::pipeline
