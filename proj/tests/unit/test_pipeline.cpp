#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "grace/model/checkpoint.hpp"
#include "grace/pipeline/stages.hpp"
#include "test_util.hpp"

namespace grace::pipeline {
namespace {

RunConfig tiny(const std::string& dir) {
  RunConfig c;
  c.out_dir = dir;
  c.synth_stocks = 12;
  c.synth_days = 360;
  c.quantiles = 9;
  c.k0 = 4;
  c.alpha = 0;  // keep every stock
  c.lags = 4;
  c.hidden = 4;
  c.max_epochs = 2;
  c.patience = 2;
  c.baseline_steps = 50;
  c.windows = "1,5,10";
  c.exposure_window = 40;
  c.seed = 3;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Config, ParseOverridesAndValidates) {
  std::istringstream in("# comment\nK = 49\nK0 = 7\nmethod = grace1\n");
  const auto c = parse_config(in, "test");
  EXPECT_EQ(c.quantiles, 49);
  EXPECT_FALSE(c.include_factors());
  RunConfig d;
  EXPECT_THROW(d.set("no_such_key", "1"), UsageError);
  d.quantiles = 3;
  EXPECT_THROW(d.validate(), UsageError);
}

TEST(Config, HashIgnoresPathsAndJobs) {
  RunConfig a, b;
  b.out_dir = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Pipeline, SynthIsDeterministic) {
  std::ostringstream log;
  const auto a = testutil::scratch_dir("synth_a"), b = testutil::scratch_dir("synth_b");
  stage_synth(tiny(a.string()), log);
  stage_synth(tiny(b.string()), log);
  for (const char* f : {"prices.csv", "factors.csv", "relations.csv", "truth_moments.csv"})
    EXPECT_EQ(slurp(a / "data" / f), slurp(b / "data" / f)) << f;
}

TEST(Pipeline, RunAllProducesFullReport) {
  std::ostringstream log;
  const auto dir = testutil::scratch_dir("run_all");
  const auto cfg = tiny(dir.string());
  const auto rows = run_all(cfg, log);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_TRUE(std::isfinite(r.sharpe)) << r.measure;
  const auto report = slurp(dir / "report.csv");
  EXPECT_NE(report.find(cfg.provenance()), std::string::npos);
  EXPECT_NE(report.find("grace,SRSK,"), std::string::npos);
}

TEST(Pipeline, Grace1TrainsWithoutFactorVertices) {
  std::ostringstream log;
  const auto dir = testutil::scratch_dir("grace1");
  auto cfg = tiny(dir.string());
  cfg.method = "grace1";
  for (const char* s : {"synth", "featurize", "train"}) run_stage(s, cfg, log);
  const auto ck = model::load_checkpoint(dir / "models" / model::checkpoint_name("mean", 0));
  EXPECT_EQ(ck.meta.method, "grace1");
  EXPECT_FALSE(ck.theta.dims.include_factors);
  EXPECT_THROW(run_stage("no_such_stage", cfg, log), UsageError);
}

}  // namespace
}  // namespace grace::pipeline
