#include "grace/synth/dgp.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "grace/core/special_functions.hpp"
#include "grace/data/csv.hpp"

namespace grace::synth {

void Innovation::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != scales.size())
    throw SpecError("innovation mixture: weights, means and scales must have equal nonzero length");
  double total = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (!(weights[c] > 0)) throw SpecError("innovation mixture: weights must be positive");
    if (!(scales[c] > 0)) throw SpecError("innovation mixture: scales must be positive");
    total += weights[c];
  }
  if (std::abs(total - 1.0) > 1e-12) throw SpecError("innovation mixture: weights must sum to 1");
}

namespace {

struct RawMoments {
  double mean = 0;
  double var = 0;
  double m3 = 0;
  double m4 = 0;
};

// Central moments of a normal mixture.
RawMoments central_moments(const std::vector<double>& w, const std::vector<double>& m,
                           const std::vector<double>& s) {
  RawMoments out;
  for (std::size_t c = 0; c < w.size(); ++c) out.mean += w[c] * m[c];
  for (std::size_t c = 0; c < w.size(); ++c) {
    const double d = m[c] - out.mean;
    const double v = s[c] * s[c];
    out.var += w[c] * (v + d * d);
    out.m3 += w[c] * (d * d * d + 3 * d * v);
    out.m4 += w[c] * (d * d * d * d + 6 * d * d * v + 3 * v * v);
  }
  return out;
}

// Standardized components: (mean_c - mean) / sd and scale_c / sd.
void standardized_components(const Innovation& law, std::vector<double>& m,
                             std::vector<double>& s) {
  const RawMoments raw = central_moments(law.weights, law.means, law.scales);
  const double sd = std::sqrt(raw.var);
  m.resize(law.weights.size());
  s.resize(law.weights.size());
  for (std::size_t c = 0; c < law.weights.size(); ++c) {
    m[c] = (law.means[c] - raw.mean) / sd;
    s[c] = law.scales[c] / sd;
  }
}

double mixture_cdf(const std::vector<double>& w, const std::vector<double>& m,
                   const std::vector<double>& s, double x) {
  double p = 0;
  for (std::size_t c = 0; c < w.size(); ++c) p += w[c] * normal_cdf((x - m[c]) / s[c]);
  return p;
}

double mixture_quantile(const std::vector<double>& w, const std::vector<double>& m,
                        const std::vector<double>& s, double tau) {
  if (!(tau > 0 && tau < 1)) throw UsageError("quantile level outside (0, 1)");
  if (w.size() == 1) return m[0] + s[0] * normal_quantile(tau);
  double lo = m[0], hi = m[0];
  for (std::size_t c = 0; c < w.size(); ++c) {
    lo = std::min(lo, m[c] - 40 * s[c]);
    hi = std::max(hi, m[c] + 40 * s[c]);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(w, m, s, mid) < tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

StandardizedMoments mixture_moments(const std::vector<double>& weights,
                                    const std::vector<double>& means,
                                    const std::vector<double>& scales) {
  Innovation{weights, means, scales}.validate();
  const RawMoments raw = central_moments(weights, means, scales);
  if (!(raw.var > 0)) throw SpecError("innovation mixture has zero variance");
  return StandardizedMoments{raw.m3 / std::pow(raw.var, 1.5), raw.m4 / (raw.var * raw.var)};
}

double innovation_cdf(const Innovation& law, double x) {
  std::vector<double> m, s;
  standardized_components(law, m, s);
  return mixture_cdf(law.weights, m, s, x);
}

double innovation_quantile(const Innovation& law, double tau) {
  std::vector<double> m, s;
  standardized_components(law, m, s);
  return mixture_quantile(law.weights, m, s, tau);
}

MeanSignal::Kind parse_signal_kind(const std::string& name) {
  if (name == "none") return MeanSignal::Kind::none;
  if (name == "trend") return MeanSignal::Kind::trend;
  if (name == "magnitude") return MeanSignal::Kind::magnitude;
  throw UsageError("unknown mean signal '" + name + "' (expected none, trend or magnitude)");
}

std::string signal_kind_name(MeanSignal::Kind kind) {
  switch (kind) {
    case MeanSignal::Kind::none: return "none";
    case MeanSignal::Kind::trend: return "trend";
    case MeanSignal::Kind::magnitude: return "magnitude";
  }
  return "none";
}

DgpSpec DgpSpec::standard(Index stocks, Index days, std::uint64_t seed, MeanSignal::Kind kind) {
  DgpSpec spec;
  spec.stocks = stocks;
  spec.factors = 5;
  spec.days = days;
  spec.seed = seed;
  const Index n = stocks;
  spec.mean = Vector::Zero(n);
  spec.loadings = Matrix::Zero(n, spec.factors);
  spec.omega.resize(n);
  spec.a = Vector::Constant(n, 0.1);
  spec.b = Vector::Constant(n, 0.85);
  const double vol = 0.001;
  for (Index i = 0; i < n; ++i) {
    spec.loadings(i, 0) = 0.5;
    spec.loadings(i, 1 + i % 4) = i % 8 < 4 ? 0.5 : -0.5;
    spec.omega(i) = vol * vol * (1 - spec.a(i) - spec.b(i));
  }
  spec.factor_mean = Vector::Zero(spec.factors);
  spec.factor_sd = Vector::Constant(spec.factors, 0.0005);
  spec.signal = MeanSignal{kind, 10, 1.5e-4};
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 4; j < n; j += 4) spec.edges.push_back({i, j, 0});
  spec.relation_names = {"same_sector"};
  return spec;
}

void DgpSpec::validate() const {
  if (stocks < 1 || factors < 1 || days < 2) throw SpecError("DGP needs stocks, factors and days");
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw SpecError("DGP spec: " + what);
  };
  need(mean.size() == stocks, "mean must have one entry per stock");
  need(loadings.rows() == stocks && loadings.cols() == factors, "loadings must be stocks x factors");
  need(omega.size() == stocks && a.size() == stocks && b.size() == stocks,
       "GARCH parameters must have one entry per stock");
  need(factor_mean.size() == factors && factor_sd.size() == factors,
       "factor mean and sd must have one entry per factor");
  for (Index i = 0; i < stocks; ++i) {
    need(omega(i) > 0, "omega must be positive");
    need(a(i) >= 0 && b(i) >= 0, "GARCH a and b must be nonnegative");
    need(a(i) + b(i) < 1, "GARCH a + b must be below 1 for stationarity");
  }
  for (Index f = 0; f < factors; ++f) need(factor_sd(f) >= 0, "factor sd must be nonnegative");
  need(signal.kind == MeanSignal::Kind::none || (signal.window >= 1 && signal.amplitude >= 0),
       "mean signal needs a window >= 1 and a nonnegative amplitude");
  innovation.validate();
  const Index m = static_cast<Index>(relation_names.size());
  for (const auto& e : edges)
    need(e.i >= 0 && e.i < stocks && e.j >= 0 && e.j < stocks && e.i != e.j && e.relation >= 0 &&
             e.relation < m,
         "relation edge out of range");
}

std::vector<std::string> business_days(const std::string& start, Index count) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0;
  if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &mo, &d) != 3)
    throw SpecError("start date '" + start + "' is not YYYY-MM-DD");
  sys_days day{year{y} / month{mo} / std::chrono::day{d}};
  std::vector<std::string> out;
  char buf[16];
  while (static_cast<Index>(out.size()) < count) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                    unsigned(ymd.day()));
      out.emplace_back(buf);
    }
    day += days{1};
  }
  return out;
}

SyntheticDataset generate(const DgpSpec& spec) {
  spec.validate();
  const Index n = spec.stocks, nb = spec.factors, nt = spec.days;
  SyntheticDataset ds;
  ds.spec = spec;
  ds.innovation_moments =
      mixture_moments(spec.innovation.weights, spec.innovation.means, spec.innovation.scales);
  std::vector<double> cm, cs;
  standardized_components(spec.innovation, cm, cs);

  const auto dates = business_days(spec.start_date, nt);
  static const std::vector<std::string> kNames{"mkt_rf", "smb", "hml", "rmw", "cma"};
  ds.factors.dates = dates;
  for (Index f = 0; f < nb; ++f)
    ds.factors.names.push_back(f < 5 ? kNames[f] : "factor_" + std::to_string(f + 1));
  ds.factors.values.resize(nb, nt);
  ds.factors.risk_free = Vector::Constant(nt, spec.risk_free);
  ds.prices.dates = dates;
  const int width = n > 999 ? 5 : 3;
  for (Index i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%0*ld", width, static_cast<long>(i));
    ds.prices.tickers.emplace_back(buf);
  }
  ds.prices.returns.resize(n, nt);
  ds.garch_h.resize(n, nt);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<int> component(spec.innovation.weights.begin(),
                                            spec.innovation.weights.end());
  const bool single = spec.innovation.weights.size() == 1;
  Vector h(n), eps = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) h(i) = spec.omega(i) / (1 - spec.a(i) - spec.b(i));

  // Median of |trailing average| under the unconditional law, for `magnitude`.
  const Index w = spec.signal.window;
  Vector band(n);
  for (Index i = 0; i < n; ++i) {
    const double vf =
        (spec.loadings.row(i).transpose().array() * spec.factor_sd.array()).square().sum();
    band(i) = 0.6744897501960817 * std::sqrt((h(i) + vf) / static_cast<double>(w));
  }
  ds.group = Matrix::Zero(n, nt);
  ds.mu.resize(n, nt);

  for (Index t = 0; t < nt; ++t) {
    for (Index f = 0; f < nb; ++f)
      ds.factors.values(f, t) = spec.factor_mean(f) + spec.factor_sd(f) * normal(rng);
    for (Index i = 0; i < n; ++i) {
      if (t > 0) h(i) = garch_next(spec.omega(i), spec.a(i), spec.b(i), eps(i), h(i));
      double g = 0;
      if (spec.signal.kind != MeanSignal::Kind::none && t >= w) {
        const double avg = ds.prices.returns.row(i).segment(t - w, w).mean();
        g = spec.signal.kind == MeanSignal::Kind::trend ? (avg > 0 ? 1.0 : -1.0)
                                                        : (std::abs(avg) > band(i) ? 1.0 : -1.0);
      }
      ds.group(i, t) = g;
      ds.mu(i, t) = spec.mean(i) + spec.signal.amplitude * g +
                    spec.loadings.row(i).dot(spec.factor_mean);
      const int c = single ? 0 : component(rng);
      const double eta = cm[c] + cs[c] * normal(rng);
      eps(i) = std::sqrt(h(i)) * eta;
      ds.garch_h(i, t) = h(i);
      ds.prices.returns(i, t) = spec.mean(i) + spec.signal.amplitude * g +
                                spec.loadings.row(i).dot(ds.factors.values.col(t)) + eps(i);
    }
  }

  // Conditional on day t-1 the factor term is an independent normal.
  ds.h.resize(n, nt);
  ds.s.resize(n, nt);
  ds.k.resize(n, nt);
  const double s_eta = ds.innovation_moments.skewness;
  const double k_eta = ds.innovation_moments.kurtosis;
  for (Index i = 0; i < n; ++i) {
    const double vf = (spec.loadings.row(i).transpose().array() * spec.factor_sd.array()).square().sum();
    for (Index t = 0; t < nt; ++t) {
      const double hg = ds.garch_h(i, t);
      const double total = hg + vf;
      ds.h(i, t) = total;
      ds.s(i, t) = s_eta * std::pow(hg, 1.5) / std::pow(total, 1.5);
      ds.k(i, t) = (k_eta * hg * hg + 6 * hg * vf + 3 * vf * vf) / (total * total);
    }
  }
  return ds;
}

namespace {

// Components of r_{i,t}: the scaled innovation mixture plus the factor normal.
void conditional_components(const SyntheticDataset& ds, Index i, Index t, std::vector<double>& m,
                            std::vector<double>& s) {
  std::vector<double> cm, cs;
  standardized_components(ds.spec.innovation, cm, cs);
  const double root = std::sqrt(ds.garch_h(i, t));
  const double vf =
      (ds.spec.loadings.row(i).transpose().array() * ds.spec.factor_sd.array()).square().sum();
  m.resize(cm.size());
  s.resize(cm.size());
  for (std::size_t c = 0; c < cm.size(); ++c) {
    m[c] = ds.mu(i, t) + root * cm[c];
    s[c] = std::sqrt(ds.garch_h(i, t) * cs[c] * cs[c] + vf);
  }
}

}  // namespace

double SyntheticDataset::true_quantile(Index stock, Index day, double tau) const {
  std::vector<double> m, s;
  conditional_components(*this, stock, day, m, s);
  return mixture_quantile(spec.innovation.weights, m, s, tau);
}

double SyntheticDataset::true_cdf(Index stock, Index day, double x) const {
  std::vector<double> m, s;
  conditional_components(*this, stock, day, m, s);
  return mixture_cdf(spec.innovation.weights, m, s, x);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  if (!header.empty()) out << "# " << header << '\n';
  return out;
}

}  // namespace

void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir,
                   const std::string& header) {
  std::filesystem::create_directories(dir);
  const auto& p = ds.prices;
  {
    auto out = open_out(dir / "prices.csv", header);
    out << "date,ticker,return\n";
    for (Index t = 0; t < p.days(); ++t)
      for (Index i = 0; i < p.stocks(); ++i)
        out << p.dates[t] << ',' << p.tickers[i] << ',' << csv::format_double(p.returns(i, t)) << '\n';
  }
  {
    auto out = open_out(dir / "factors.csv", header);
    out << "date";
    for (const auto& name : ds.factors.names) out << ',' << name;
    out << ",rf\n";
    for (Index t = 0; t < ds.factors.days(); ++t) {
      out << ds.factors.dates[t];
      for (Index f = 0; f < ds.factors.factors(); ++f)
        out << ',' << csv::format_double(ds.factors.values(f, t));
      out << ',' << csv::format_double(ds.factors.risk_free(t)) << '\n';
    }
  }
  {
    auto out = open_out(dir / "relations.csv", header);
    out << "i,j,relation_id\n";
    for (const auto& e : ds.spec.edges) out << e.i << ',' << e.j << ',' << e.relation << '\n';
  }
  {
    auto out = open_out(dir / "relations_meta.csv", header);
    out << "relation_id,name\n";
    for (std::size_t m = 0; m < ds.spec.relation_names.size(); ++m)
      out << m << ',' << ds.spec.relation_names[m] << '\n';
  }
  {
    auto out = open_out(dir / "truth_moments.csv", header);
    out << "date,ticker,mu,h,s,k\n";
    for (Index t = 0; t < p.days(); ++t)
      for (Index i = 0; i < p.stocks(); ++i)
        out << p.dates[t] << ',' << p.tickers[i] << ',' << csv::format_double(ds.mu(i, t)) << ','
            << csv::format_double(ds.h(i, t)) << ',' << csv::format_double(ds.s(i, t)) << ','
            << csv::format_double(ds.k(i, t)) << '\n';
  }
}

}  // namespace grace::synth
