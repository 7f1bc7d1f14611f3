#include "grace/pipeline/stages.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "grace/backtest/grid_search.hpp"
#include "grace/baseline/linear.hpp"
#include "grace/data/csv.hpp"
#include "grace/diag/moment_tests.hpp"
#include "grace/model/checkpoint.hpp"
#include "grace/synth/dgp.hpp"

namespace grace::pipeline {

namespace fs = std::filesystem;
using csv::format_double;

namespace {

std::ofstream open_output(const fs::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write " + path.string());
  out << "# " << cfg.provenance() << '\n';
  return out;
}

void require_file(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path))
    throw PipelineError(stage + ": missing input " + path.string() + " (run the earlier stages first)");
}

void echo_config(const RunConfig& cfg) {
  auto out = open_output(cfg.out() / "config.txt", cfg);
  out << cfg.dump();
}

std::map<std::string, Index> index_of(const std::vector<std::string>& names) {
  std::map<std::string, Index> out;
  for (std::size_t k = 0; k < names.size(); ++k) out[names[k]] = static_cast<Index>(k);
  return out;
}

Index lookup(const std::map<std::string, Index>& map, const std::string& key, const std::string& where) {
  const auto it = map.find(key);
  if (it == map.end()) throw LoadError(where + ": unknown identifier '" + key + "'");
  return it->second;
}

std::vector<std::string> feature_names(const data::FeatureLayout& layout,
                                       const std::vector<std::string>& factors) {
  std::vector<std::string> out;
  for (int w : layout.windows) out.push_back("ma_" + std::to_string(w));
  for (const auto& f : factors) out.push_back("exp_" + f);
  return out;
}

fs::path model_dir(const RunConfig& cfg) { return cfg.out() / "models"; }
fs::path prediction_dir(const RunConfig& cfg) { return cfg.out() / "predictions"; }
fs::path diag_dir(const RunConfig& cfg) { return cfg.out() / "diagnostics"; }
fs::path backtest_dir(const RunConfig& cfg) { return cfg.out() / "backtest"; }

std::string quantile_column(double tau) { return "q_" + model::level_tag(tau); }

}  // namespace

Market load_market(const RunConfig& cfg) {
  for (const auto& p : {cfg.prices_path(), cfg.factors_path(), cfg.relations_path()})
    require_file(p, "load");
  Market m;
  m.prices = data::load_prices(cfg.prices_path());
  m.factors = data::align_factors(data::load_factors(cfg.factors_path(), cfg.columns()), m.prices.dates);
  const fs::path meta = fs::exists(cfg.relations_meta_path()) ? cfg.relations_meta_path() : fs::path();
  m.graph = graph::load_hypergraph(cfg.relations_path(), meta, m.prices.stocks(), m.factors.factors(),
                                   cfg.include_factors());
  m.split = cfg.split(m.prices.days());
  return m;
}

void write_features(const fs::path& dir, const data::FeaturePanel& panel, const Market& market,
                    const std::string& provenance) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "layout.csv", std::ios::binary);
    out << "# " << provenance << '\n' << "key,value\n";
    out << "stocks," << panel.stocks << "\nfactors," << panel.factors << "\nfirst_valid,"
        << panel.first_valid << "\ndays," << panel.days() << "\nexposure_window,"
        << panel.layout.exposure_window << "\n";
    for (int w : panel.layout.windows) out << "window," << w << '\n';
  }
  {
    std::ofstream out(dir / "features.csv", std::ios::binary);
    out << "# " << provenance << '\n' << "date,entity";
    for (const auto& name : feature_names(panel.layout, market.factors.names)) out << ',' << name;
    out << '\n';
    for (Index t = panel.first_valid; t < panel.days(); ++t)
      for (Index e = 0; e < panel.entities(); ++e) {
        out << market.prices.dates[t] << ','
            << (e < panel.stocks ? market.prices.tickers[e] : market.factors.names[e - panel.stocks]);
        for (Index f = 0; f < panel.features(); ++f) out << ',' << format_double(panel.frames[t](e, f));
        out << '\n';
      }
  }
  {
    std::ofstream out(dir / "normalization.csv", std::ios::binary);
    out << "# " << provenance << '\n' << "entity,feature,min,max,zero_range\n";
    for (Index e = 0; e < panel.entities(); ++e)
      for (Index f = 0; f < panel.features(); ++f)
        out << e << ',' << f << ',' << format_double(panel.stats.min(e, f)) << ','
            << format_double(panel.stats.max(e, f)) << ',' << (panel.stats.zero_range(e, f) ? 1 : 0)
            << '\n';
  }
  {
    std::ofstream out(dir / "warnings.txt", std::ios::binary);
    out << "# " << provenance << '\n';
    for (const auto& w : panel.warnings) out << w << '\n';
  }
}

data::FeaturePanel read_features(const fs::path& dir, const Market& market) {
  require_file(dir / "layout.csv", "features");
  require_file(dir / "features.csv", "features");
  data::FeaturePanel panel;
  panel.layout.windows.clear();
  Index days = 0;
  const csv::Table layout = csv::read_file(dir / "layout.csv");
  for (const auto& row : layout.rows) {
    const std::string where = (dir / "layout.csv").string() + ":" + std::to_string(row.line);
    const long v = csv::parse_long(row.fields.at(1), where);
    const std::string& key = row.fields.at(0);
    if (key == "stocks") panel.stocks = v;
    else if (key == "factors") panel.factors = v;
    else if (key == "first_valid") panel.first_valid = v;
    else if (key == "days") days = v;
    else if (key == "exposure_window") panel.layout.exposure_window = static_cast<int>(v);
    else if (key == "window") panel.layout.windows.push_back(static_cast<int>(v));
  }
  if (panel.stocks != market.prices.stocks() || panel.factors != market.factors.factors() ||
      days != market.prices.days())
    throw PipelineError("features were built for a different market; rerun featurize");
  const Index p = static_cast<Index>(panel.layout.windows.size()) + panel.factors;
  panel.frames.assign(days, Matrix::Zero(panel.entities(), p));

  auto entities = index_of(market.prices.tickers);
  for (Index b = 0; b < panel.factors; ++b) entities[market.factors.names[b]] = panel.stocks + b;
  const auto dates = index_of(market.prices.dates);
  const fs::path path = dir / "features.csv";
  const csv::Table table = csv::read_file(path);
  if (static_cast<Index>(table.header.size()) != 2 + p)
    throw LoadError(path.string() + ": expected " + std::to_string(2 + p) + " columns");
  for (const auto& row : table.rows) {
    const std::string where = path.string() + ":" + std::to_string(row.line);
    if (static_cast<Index>(row.fields.size()) != 2 + p) throw LoadError(where + ": wrong field count");
    const Index t = lookup(dates, row.fields[0], where);
    const Index e = lookup(entities, row.fields[1], where);
    for (Index f = 0; f < p; ++f) panel.frames[t](e, f) = csv::parse_double(row.fields[2 + f], where);
  }
  return panel;
}

std::vector<Index> prediction_days(const RunConfig& cfg, const data::FeaturePanel& features,
                                   const Market& market) {
  const Index first = features.first_target_day(cfg.lags);
  if (first >= market.split.train_end)
    throw PipelineError("the first usable target day " + std::to_string(first) +
                        " is not inside the training span ending at " +
                        std::to_string(market.split.train_end));
  std::vector<Index> days;
  for (Index t = first; t < market.split.test_end; ++t) days.push_back(t);
  return days;
}

void stage_synth(const RunConfig& cfg, std::ostream& log) {
  auto spec = synth::DgpSpec::standard(cfg.synth_stocks, cfg.synth_days, cfg.seed,
                                       synth::parse_signal_kind(cfg.synth_signal));
  spec.signal.amplitude = cfg.synth_signal_bps * 1e-4;
  const auto ds = synth::generate(spec);
  const fs::path dir = cfg.out() / "data";
  synth::write_dataset(ds, dir, cfg.provenance());
  echo_config(cfg);
  log << "synth: " << ds.prices.stocks() << " stocks x " << ds.prices.days() << " days -> "
      << dir.string() << '\n';
}

void stage_featurize(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const data::FeaturePanel panel =
      data::build_feature_panel(market.prices, market.factors, market.split.train_end, cfg.layout());
  write_features(cfg.out() / "features", panel, market, cfg.provenance());
  echo_config(cfg);
  log << "featurize: " << panel.entities() << " entities x " << panel.features()
      << " features, first valid day " << panel.first_valid << ", " << panel.warnings.size() << " warnings\n";
}

namespace {

struct Job {
  train::Target target;
  fs::path checkpoint;
  fs::path log;
};

std::vector<Job> training_jobs(const RunConfig& cfg) {
  std::vector<Job> jobs;
  for (double tau : train::quantile_levels(cfg.quantiles)) {
    const std::string tag = model::level_tag(tau);
    jobs.push_back({train::Target::quantile(tau), model_dir(cfg) / model::checkpoint_name("tau", tau),
                    cfg.out() / "logs" / ("log_tau_" + tag + ".csv")});
  }
  jobs.push_back({train::Target::mean(), model_dir(cfg) / model::checkpoint_name("mean", 0),
                  cfg.out() / "logs" / "log_mean.csv"});
  return jobs;
}

// Runs `work(k)` for k in [0, count) on `threads` workers. The first error
// is rethrown after every worker has finished.
template <typename Work>
void parallel_for(std::size_t count, int threads, Work work) {
  std::mutex mutex;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard lock(mutex);
        if (next >= count || failure) return;
        k = next++;
      }
      try {
        work(k);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void stage_train(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const data::FeaturePanel features = read_features(cfg.out() / "features", market);
  const auto jobs = training_jobs(cfg);
  std::mutex log_mutex;
  fs::create_directories(cfg.out() / "logs");

  if (cfg.is_baseline()) {
    const Matrix w = graph::collapse(market.graph);
    std::vector<Index> days;
    for (Index t = features.first_target_day(cfg.lags); t < market.split.valid_end; ++t) days.push_back(t);
    const auto design =
        baseline::linear_design(features, market.prices.returns, market.factors.values, w, days);
    baseline::LinearFitConfig fit_cfg;
    fit_cfg.learning_rate = cfg.learning_rate;
    fit_cfg.max_steps = cfg.baseline_steps;
    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t k) {
      const auto fit = baseline::fit_linear(jobs[k].target, design, fit_cfg);
      baseline::save_linear(jobs[k].checkpoint, fit.params, jobs[k].target, cfg.seed, cfg.provenance());
      auto out = open_output(jobs[k].log, cfg);
      out << "steps,loss,gradient_norm\n"
          << fit.steps << ',' << format_double(fit.loss) << ',' << format_double(fit.gradient_norm) << '\n';
      std::lock_guard lock(log_mutex);
      for (const auto& warn : fit.warnings)
        log << "train: " << jobs[k].target.label() << ": " << warn << '\n';
    });
    echo_config(cfg);
    log << "train: fitted " << jobs.size() << " linear baseline models\n";
    return;
  }

  const train::TrainingData data =
      train::make_training_data(features, market.prices.returns, cfg.lags, market.split);
  train::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.penalty = cfg.penalty;
  tc.lags = cfg.lags;
  tc.hidden = cfg.hidden;
  tc.max_epochs = cfg.max_epochs;
  tc.patience = cfg.patience;
  tc.seed = cfg.seed;
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t k) {
    const Job& job = jobs[k];
    train::TrainConfig job_tc = tc;
    if (job.target.is_mean()) {
      if (cfg.mean_max_epochs > 0) job_tc.max_epochs = cfg.mean_max_epochs;
      if (cfg.mean_patience > 0) job_tc.patience = cfg.mean_patience;
    }
    const auto result = train::train(market.graph, data, job.target, job_tc);
    model::CheckpointMeta meta{cfg.method, job.target.is_mean() ? "mean" : "tau",
                               job.target.is_mean() ? 0.0 : job.target.tau, cfg.seed, cfg.provenance()};
    model::save_checkpoint(job.checkpoint, result.theta, meta);
    auto out = open_output(job.log, cfg);
    out << "epoch,train_loss,valid_loss\n";
    for (const auto& row : result.log)
      out << row.epoch << ',' << format_double(row.train_loss) << ',' << format_double(row.valid_loss)
          << '\n';
    std::lock_guard lock(log_mutex);
    log << "train: " << job.target.label() << " best epoch " << result.best_epoch << " of "
        << result.log.size() << '\n';
  });
  echo_config(cfg);
}

void stage_predict(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const data::FeaturePanel features = read_features(cfg.out() / "features", market);
  const auto days = prediction_days(cfg, features, market);
  const auto levels = train::quantile_levels(cfg.quantiles);
  std::vector<Matrix> values;
  Matrix mean;

  for (const auto& job : training_jobs(cfg)) require_file(job.checkpoint, "predict");
  if (cfg.is_baseline()) {
    const Matrix w = graph::collapse(market.graph);
    auto run = [&](const fs::path& path) {
      const auto ck = baseline::load_linear(path);
      return baseline::linear_predict(ck.params, features, market.prices.returns, market.factors.values, w,
                                      days);
    };
    for (double tau : levels) values.push_back(run(model_dir(cfg) / model::checkpoint_name("tau", tau)));
    mean = run(model_dir(cfg) / model::checkpoint_name("mean", 0));
  } else {
    const model::ModelDims dims = model::dims_for(market.graph, features.features(), cfg.lags, cfg.hidden);
    const model::Ftgcn net(market.graph, dims);
    auto run = [&](const fs::path& path) {
      const auto ck = model::load_checkpoint(path);
      if (!(ck.theta.dims == dims))
        throw PipelineError(path.string() + " was trained with different dimensions; retrain");
      if (ck.meta.method != cfg.method)
        throw PipelineError(path.string() + " belongs to method " + ck.meta.method + ", not " + cfg.method);
      return train::predict_days(net, ck.theta, features, days);
    };
    values.resize(levels.size());
    parallel_for(levels.size(), cfg.jobs, [&](std::size_t k) {
      values[k] = run(model_dir(cfg) / model::checkpoint_name("tau", levels[k]));
    });
    mean = run(model_dir(cfg) / model::checkpoint_name("mean", 0));
  }

  const auto& tickers = market.prices.tickers;
  {
    auto out = open_output(prediction_dir(cfg) / "quantiles.csv", cfg);
    out << "date,ticker";
    for (double tau : levels) out << ',' << quantile_column(tau);
    out << '\n';
    for (std::size_t d = 0; d < days.size(); ++d)
      for (Index i = 0; i < market.prices.stocks(); ++i) {
        out << market.prices.dates[days[d]] << ',' << tickers[i];
        for (const auto& v : values) out << ',' << format_double(v(i, static_cast<Index>(d)));
        out << '\n';
      }
  }
  {
    auto out = open_output(prediction_dir(cfg) / "mean.csv", cfg);
    out << "date,ticker,mu\n";
    for (std::size_t d = 0; d < days.size(); ++d)
      for (Index i = 0; i < market.prices.stocks(); ++i)
        out << market.prices.dates[days[d]] << ',' << tickers[i] << ','
            << format_double(mean(i, static_cast<Index>(d))) << '\n';
  }
  echo_config(cfg);
  log << "predict: " << levels.size() << " quantile levels and the mean over " << days.size() << " days\n";
}

Predictions read_predictions(const RunConfig& cfg, const Market& market) {
  const fs::path qpath = prediction_dir(cfg) / "quantiles.csv";
  const fs::path mpath = prediction_dir(cfg) / "mean.csv";
  require_file(qpath, "predictions");
  require_file(mpath, "predictions");
  const auto dates = index_of(market.prices.dates);
  const auto tickers = index_of(market.prices.tickers);
  const Index n = market.prices.stocks();

  const csv::Table q = csv::read_file(qpath);
  Predictions p;
  for (std::size_t c = 2; c < q.header.size(); ++c) {
    if (q.header[c].rfind("q_", 0) != 0) throw LoadError(qpath.string() + ": bad column " + q.header[c]);
    p.quantiles.levels.push_back(csv::parse_double(q.header[c].substr(2), qpath.string()));
  }
  const auto expected = train::quantile_levels(cfg.quantiles);
  if (p.quantiles.levels.size() != expected.size())
    throw PipelineError(qpath.string() + " holds " + std::to_string(p.quantiles.levels.size()) +
                        " levels but K = " + std::to_string(cfg.quantiles) + "; rerun predict");
  p.quantiles.levels = expected;
  std::map<Index, Index> column;
  for (const auto& row : q.rows) {
    const Index t = lookup(dates, row.fields.at(0), qpath.string());
    if (!column.count(t)) {
      column[t] = static_cast<Index>(p.quantiles.days.size());
      p.quantiles.days.push_back(t);
    }
  }
  const Index days = static_cast<Index>(p.quantiles.days.size());
  p.quantiles.values.assign(expected.size(), Matrix::Zero(n, days));
  for (const auto& row : q.rows) {
    const std::string where = qpath.string() + ":" + std::to_string(row.line);
    if (row.fields.size() != q.header.size()) throw LoadError(where + ": wrong field count");
    const Index d = column.at(lookup(dates, row.fields[0], where));
    const Index i = lookup(tickers, row.fields[1], where);
    for (std::size_t k = 0; k < expected.size(); ++k)
      p.quantiles.values[k](i, d) = csv::parse_double(row.fields[2 + k], where);
  }
  p.mean = Matrix::Zero(n, days);
  const csv::Table m = csv::read_file(mpath);
  const int cmu = m.require_column("mu", mpath.string());
  for (const auto& row : m.rows) {
    const std::string where = mpath.string() + ":" + std::to_string(row.line);
    const Index t = lookup(dates, row.fields.at(0), where);
    if (!column.count(t)) throw LoadError(where + ": date missing from the quantile file");
    p.mean(lookup(tickers, row.fields.at(1), where), column.at(t)) =
        csv::parse_double(row.fields.at(cmu), where);
  }
  return p;
}

train::QuantilePanel days_before(const train::QuantilePanel& panel, Index end) {
  train::QuantilePanel out;
  out.levels = panel.levels;
  Index count = 0;
  while (count < static_cast<Index>(panel.days.size()) && panel.days[count] < end) ++count;
  out.days.assign(panel.days.begin(), panel.days.begin() + count);
  for (const auto& v : panel.values) out.values.push_back(v.leftCols(count));
  return out;
}

void stage_validate(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const Predictions p = read_predictions(cfg, market);
  const auto in_sample = days_before(p.quantiles, market.split.valid_end);
  const diag::OmegaSet omega = diag::build_omega(in_sample, market.prices.returns, cfg.alpha);
  std::vector<bool> survived(market.prices.stocks(), false);
  std::vector<Index> keep;
  std::string failure;
  try {
    keep = diag::filter_stocks(omega, cfg.k0, market.prices.tickers);
  } catch (const PipelineError& e) {
    failure = e.what();
  }
  for (Index i : keep) survived[i] = true;
  {
    auto out = open_output(diag_dir(cfg) / "omega.csv", cfg);
    out << "ticker,|omega|,survived\n";
    for (Index i = 0; i < omega.stocks(); ++i)
      out << market.prices.tickers[i] << ',' << omega.size(i) << ',' << (survived[i] ? 1 : 0) << '\n';
  }
  {
    auto out = open_output(diag_dir(cfg) / "omega_levels.csv", cfg);
    out << "ticker,level\n";
    for (Index i = 0; i < omega.stocks(); ++i)
      for (int k : omega.accepted[i])
        out << market.prices.tickers[i] << ',' << model::level_tag(omega.levels[k]) << '\n';
  }
  echo_config(cfg);
  if (!failure.empty()) throw PipelineError("validate: " + failure);
  log << "validate: " << keep.size() << " of " << omega.stocks() << " stocks keep at least K0=" << cfg.k0
      << " levels at alpha=" << cfg.alpha << '\n';
}

OmegaFile read_omega(const RunConfig& cfg, const Market& market, const std::vector<double>& levels) {
  const fs::path spath = diag_dir(cfg) / "omega.csv";
  const fs::path lpath = diag_dir(cfg) / "omega_levels.csv";
  require_file(spath, "omega");
  require_file(lpath, "omega");
  const auto tickers = index_of(market.prices.tickers);
  std::map<std::string, Index> level_index;
  for (std::size_t k = 0; k < levels.size(); ++k)
    level_index[model::level_tag(levels[k])] = static_cast<Index>(k);
  OmegaFile f;
  f.omega.levels = levels;
  f.omega.accepted.resize(market.prices.stocks());
  for (const auto& row : csv::read_file(lpath).rows) {
    const std::string where = lpath.string() + ":" + std::to_string(row.line);
    f.omega.accepted[lookup(tickers, row.fields.at(0), where)].push_back(
        static_cast<int>(lookup(level_index, row.fields.at(1), where)));
  }
  for (auto& a : f.omega.accepted) std::sort(a.begin(), a.end());
  const csv::Table s = csv::read_file(spath);
  const int cs = s.require_column("survived", spath.string());
  for (const auto& row : s.rows)
    if (row.fields.at(cs) == "1") f.survivors.push_back(lookup(tickers, row.fields.at(0), spath.string()));
  std::sort(f.survivors.begin(), f.survivors.end());
  return f;
}

void stage_qcm(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const Predictions p = read_predictions(cfg, market);
  const OmegaFile of = read_omega(cfg, market, p.quantiles.levels);
  if (of.survivors.empty()) throw PipelineError("qcm: no surviving stocks in omega.csv");
  std::vector<std::vector<int>> omega(market.prices.stocks());
  for (Index i : of.survivors) omega[i] = of.omega.accepted[i];
  const qcm::MomentPanel moments = qcm::qcm_panel(p.quantiles, omega, p.mean);

  const auto& dates = market.prices.dates;
  const auto& tickers = market.prices.tickers;
  {
    auto out = open_output(cfg.out() / "moments.csv", cfg);
    out << "date,ticker,mu,h,s,k,degenerate,projected\n";
    for (Index d = 0; d < moments.size(); ++d)
      for (Index i : of.survivors)
        out << dates[moments.days[d]] << ',' << tickers[i] << ',' << format_double(moments.mu(i, d)) << ','
            << format_double(moments.h(i, d)) << ',' << format_double(moments.s(i, d)) << ','
            << format_double(moments.k(i, d)) << ',' << (moments.degenerate(i, d) ? 1 : 0) << ','
            << (moments.projected(i, d) ? 1 : 0) << '\n';
  }

  // Moment validity over the in-sample and out-of-sample spans.
  auto summary = open_output(diag_dir(cfg) / "moment_acceptance.csv", cfg);
  summary << "span,moment,alpha,pct_accepted\n";
  for (const std::string span : {"in_sample", "out_of_sample"}) {
    qcm::MomentPanel part;
    std::vector<Index> cols;
    for (Index d = 0; d < moments.size(); ++d) {
      const Index t = moments.days[d];
      const bool in = t < market.split.valid_end;
      if (in == (span == "in_sample")) cols.push_back(d);
    }
    const Index m = static_cast<Index>(cols.size());
    part.mu.resize(moments.stocks(), m);
    part.h.resize(moments.stocks(), m);
    part.s.resize(moments.stocks(), m);
    part.k.resize(moments.stocks(), m);
    for (Index c = 0; c < m; ++c) {
      part.days.push_back(moments.days[cols[c]]);
      part.mu.col(c) = moments.mu.col(cols[c]);
      part.h.col(c) = moments.h.col(cols[c]);
      part.s.col(c) = moments.s.col(cols[c]);
      part.k.col(c) = moments.k.col(cols[c]);
    }
    if (m < 30) continue;
    const auto tests = diag::moment_ttests(market.prices.returns, part, of.survivors);
    auto out = open_output(diag_dir(cfg) / ("moment_ttests_" + span + ".csv"), cfg);
    out << "ticker,moment,tstat,pvalue\n";
    for (const auto& st : tests)
      for (std::size_t k = 0; k < diag::kMoments.size(); ++k) {
        const auto& r = st.tests[k];
        out << tickers[st.stock] << ',' << diag::moment_name(diag::kMoments[k]) << ','
            << (r.defined ? format_double(r.tstat) : "undefined") << ','
            << (r.defined ? format_double(r.p_value) : "undefined") << '\n';
      }
    for (diag::Moment mom : diag::kMoments)
      for (double a : {0.01, 0.05, 0.10})
        summary << span << ',' << diag::moment_name(mom) << ',' << format_double(a) << ','
                << format_double(diag::acceptance_rate(tests, mom, a)) << '\n';
  }
  echo_config(cfg);
  int degenerate = 0, projected = 0;
  for (Index i : of.survivors) {
    degenerate += moments.degenerate_count[i];
    projected += moments.projected_count[i];
  }
  log << "qcm: moments for " << of.survivors.size() << " stocks x " << moments.size() << " days ("
      << degenerate << " degenerate, " << projected << " projected cells)\n";
}

MomentFile read_moments(const RunConfig& cfg, const Market& market) {
  const fs::path path = cfg.out() / "moments.csv";
  require_file(path, "moments");
  const csv::Table t = csv::read_file(path);
  const auto dates = index_of(market.prices.dates);
  const auto tickers = index_of(market.prices.tickers);
  std::map<Index, Index> column;
  std::vector<bool> in_pool(market.prices.stocks(), false);
  MomentFile f;
  for (const auto& row : t.rows) {
    const Index day = lookup(dates, row.fields.at(0), path.string());
    if (!column.count(day)) {
      column[day] = static_cast<Index>(f.moments.days.size());
      f.moments.days.push_back(day);
    }
    in_pool[lookup(tickers, row.fields.at(1), path.string())] = true;
  }
  const Index n = market.prices.stocks();
  const Index days = static_cast<Index>(f.moments.days.size());
  auto& m = f.moments;
  m.mu = Matrix::Zero(n, days);
  m.h = Matrix::Zero(n, days);
  m.s = Matrix::Zero(n, days);
  m.k = Matrix::Constant(n, days, 3.0);
  m.degenerate.setConstant(n, days, false);
  m.projected.setConstant(n, days, false);
  m.invalid.setConstant(n, days, false);
  for (const auto& row : t.rows) {
    const std::string where = path.string() + ":" + std::to_string(row.line);
    if (row.fields.size() < 8) throw LoadError(where + ": expected 8 fields");
    const Index d = column.at(lookup(dates, row.fields[0], where));
    const Index i = lookup(tickers, row.fields[1], where);
    m.mu(i, d) = csv::parse_double(row.fields[2], where);
    m.h(i, d) = csv::parse_double(row.fields[3], where);
    m.s(i, d) = csv::parse_double(row.fields[4], where);
    m.k(i, d) = csv::parse_double(row.fields[5], where);
    m.degenerate(i, d) = row.fields[6] == "1";
    m.projected(i, d) = row.fields[7] == "1";
  }
  m.usable = in_pool;
  for (Index i = 0; i < n; ++i)
    if (in_pool[i]) f.pool.push_back(i);
  return f;
}

namespace {

qcm::MomentPanel select_days(const qcm::MomentPanel& m, Index begin, Index end) {
  qcm::MomentPanel out;
  std::vector<Index> cols;
  for (Index d = 0; d < m.size(); ++d)
    if (m.days[d] >= begin && m.days[d] < end) cols.push_back(d);
  const Index c = static_cast<Index>(cols.size());
  out.mu.resize(m.stocks(), c);
  out.h.resize(m.stocks(), c);
  out.s.resize(m.stocks(), c);
  out.k.resize(m.stocks(), c);
  for (Index j = 0; j < c; ++j) {
    out.days.push_back(m.days[cols[j]]);
    out.mu.col(j) = m.mu.col(cols[j]);
    out.h.col(j) = m.h.col(cols[j]);
    out.s.col(j) = m.s.col(cols[j]);
    out.k.col(j) = m.k.col(cols[j]);
  }
  return out;
}

std::vector<double> risk_free_on(const Market& market, const std::vector<Index>& days) {
  std::vector<double> rf;
  for (Index t : days) rf.push_back(market.factors.risk_free(t));
  return rf;
}

}  // namespace

void stage_backtest(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const MomentFile mf = read_moments(cfg, market);
  if (mf.pool.size() < 10)
    throw PipelineError("backtest: only " + std::to_string(mf.pool.size()) +
                        " surviving stocks, deciles need at least 10");
  const auto in_sample = select_days(mf.moments, 0, market.split.valid_end);
  const auto out_sample = select_days(mf.moments, market.split.valid_end, market.split.test_end);
  auto lambdas = open_output(backtest_dir(cfg) / "lambdas.csv", cfg);
  lambdas << "measure,lambda1,lambda2,lambda3,in_sample_sharpe,candidates\n";
  for (backtest::MeasureKind kind : cfg.measure_list()) {
    const auto best = backtest::grid_search_lambdas(kind, in_sample, market.prices.returns, mf.pool,
                                                    risk_free_on(market, in_sample.days), cfg.cost());
    lambdas << backtest::measure_name(kind) << ',' << format_double(best.best.lambda1) << ','
            << format_double(best.best.lambda2) << ',' << format_double(best.best.lambda3) << ','
            << format_double(best.sharpe) << ',' << best.evaluated << '\n';
    const auto series =
        backtest::run_backtest(best.best, out_sample, market.prices.returns, mf.pool, cfg.cost());
    auto out = open_output(backtest_dir(cfg) / ("series_" + backtest::measure_name(kind) + ".csv"), cfg);
    out << "date,gross,turnover,net\n";
    for (Index d = 0; d < series.size(); ++d)
      out << market.prices.dates[series.days[d]] << ',' << format_double(series.gross[d]) << ','
          << format_double(series.turnover[d]) << ',' << format_double(series.net[d]) << '\n';
    log << "backtest: " << backtest::measure_name(kind) << " in-sample Sharpe "
        << format_double(best.sharpe) << " over " << best.evaluated << " candidates\n";
  }
  echo_config(cfg);
}

std::vector<ReportRow> stage_report(const RunConfig& cfg, std::ostream& log) {
  const Market market = load_market(cfg);
  const auto dates = index_of(market.prices.dates);
  std::vector<ReportRow> rows;
  for (backtest::MeasureKind kind : cfg.measure_list()) {
    const fs::path path = backtest_dir(cfg) / ("series_" + backtest::measure_name(kind) + ".csv");
    require_file(path, "report");
    const csv::Table t = csv::read_file(path);
    const int cn = t.require_column("net", path.string());
    std::vector<double> net, rf;
    for (const auto& row : t.rows) {
      const std::string where = path.string() + ":" + std::to_string(row.line);
      net.push_back(csv::parse_double(row.fields.at(cn), where));
      rf.push_back(market.factors.risk_free(lookup(dates, row.fields.at(0), where)));
    }
    const auto a = backtest::annualize(net, rf);
    rows.push_back({cfg.method, backtest::measure_name(kind), a.return_pct, a.risk_pct, a.sharpe});
  }
  auto out = open_output(cfg.out() / "report.csv", cfg);
  out << "method,measure,return_pct,risk_pct,sharpe\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.measure << ',' << format_double(r.return_pct) << ','
        << format_double(r.risk_pct) << ',' << format_double(r.sharpe) << '\n';
  echo_config(cfg);
  for (const auto& r : rows)
    log << "report: " << r.method << ' ' << r.measure << " return " << r.return_pct << "% risk "
        << r.risk_pct << "% Sharpe " << r.sharpe << '\n';
  return rows;
}

void run_stage(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (name == "synth") return stage_synth(cfg, log);
  if (name == "featurize") return stage_featurize(cfg, log);
  if (name == "train") return stage_train(cfg, log);
  if (name == "predict") return stage_predict(cfg, log);
  if (name == "validate") return stage_validate(cfg, log);
  if (name == "qcm") return stage_qcm(cfg, log);
  if (name == "backtest") return stage_backtest(cfg, log);
  if (name == "report") {
    stage_report(cfg, log);
    return;
  }
  if (name == "run-all") {
    run_all(cfg, log);
    return;
  }
  throw UsageError("unknown stage '" + name + "'");
}

std::vector<ReportRow> run_all(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (!fs::exists(cfg.prices_path())) stage_synth(cfg, log);
  stage_featurize(cfg, log);
  stage_train(cfg, log);
  stage_predict(cfg, log);
  stage_validate(cfg, log);
  stage_qcm(cfg, log);
  stage_backtest(cfg, log);
  return stage_report(cfg, log);
}

}  // namespace grace::pipeline
