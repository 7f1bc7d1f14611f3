#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "grace/diag/coverage.hpp"
#include "grace/graph/hypergraph.hpp"
#include "grace/pipeline/config.hpp"
#include "grace/qcm/qcm.hpp"

namespace grace::pipeline {

// Inputs shared by the stages after `synth`.
struct Market {
  data::PricePanel prices;
  data::FactorPanel factors;
  graph::Hypergraph graph;
  data::SplitSpec split;
};

Market load_market(const RunConfig& cfg);

void write_features(const std::filesystem::path& dir, const data::FeaturePanel& panel,
                    const Market& market, const std::string& provenance);
data::FeaturePanel read_features(const std::filesystem::path& dir, const Market& market);

// Days with predictions: the first usable target day up to the end of the test span.
std::vector<Index> prediction_days(const RunConfig& cfg, const data::FeaturePanel& features,
                                   const Market& market);

struct Predictions {
  train::QuantilePanel quantiles;
  Matrix mean;  // stocks x |days|
};
Predictions read_predictions(const RunConfig& cfg, const Market& market);

// Restricts a quantile panel to days < end.
train::QuantilePanel days_before(const train::QuantilePanel& panel, Index end);

struct OmegaFile {
  diag::OmegaSet omega;
  std::vector<Index> survivors;
};
OmegaFile read_omega(const RunConfig& cfg, const Market& market, const std::vector<double>& levels);

struct MomentFile {
  qcm::MomentPanel moments;
  std::vector<Index> pool;
};
MomentFile read_moments(const RunConfig& cfg, const Market& market);

// One row of the report.
struct ReportRow {
  std::string method;
  std::string measure;
  double return_pct = 0;
  double risk_pct = 0;
  double sharpe = 0;
};

void stage_synth(const RunConfig& cfg, std::ostream& log);
void stage_featurize(const RunConfig& cfg, std::ostream& log);
void stage_train(const RunConfig& cfg, std::ostream& log);
void stage_predict(const RunConfig& cfg, std::ostream& log);
void stage_validate(const RunConfig& cfg, std::ostream& log);
void stage_qcm(const RunConfig& cfg, std::ostream& log);
void stage_backtest(const RunConfig& cfg, std::ostream& log);
std::vector<ReportRow> stage_report(const RunConfig& cfg, std::ostream& log);
std::vector<ReportRow> run_all(const RunConfig& cfg, std::ostream& log);

// Runs one stage by name; unknown names raise UsageError.
void run_stage(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace grace::pipeline
