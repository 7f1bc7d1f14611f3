#include "grace/baseline/linear.hpp"

#include <cmath>
#include <fstream>

#include "grace/core/adam.hpp"
#include "grace/data/csv.hpp"
#include "grace/model/checkpoint.hpp"
#include "grace/train/losses.hpp"

namespace grace::baseline {

Vector LinearParams::flat() const {
  Vector v(width());
  v << alpha, gamma, zeta, varsigma;
  return v;
}

LinearParams LinearParams::from_flat(const Vector& v, Index features, Index factors) {
  require_shape(v.size() == 2 + features + factors, "linear parameters: wrong length");
  LinearParams p;
  p.alpha = v(0);
  p.gamma = v(1);
  p.zeta = v.segment(2, features);
  p.varsigma = v.tail(factors);
  return p;
}

LinearData linear_design(const data::FeaturePanel& features, const Matrix& returns,
                         const Matrix& factor_values, const Matrix& w, const std::vector<Index>& days) {
  const Index n = features.stocks;
  const Index p = features.features();
  const Index b = factor_values.rows();
  require_shape(returns.rows() == n && w.rows() == n && w.cols() == n,
                "linear_design: returns or adjacency do not match the stock count");
  LinearData out;
  out.features = p;
  out.factors = b;
  out.design.resize(n * static_cast<Index>(days.size()), 2 + p + b);
  out.response.resize(out.design.rows());
  Index row = 0;
  for (Index t : days) {
    if (t < 1 || t - 1 < features.first_valid)
      throw HistoryError("linear_design: day " + std::to_string(t) + " has no lag-1 features");
    const Vector network = w * returns.col(t - 1);
    for (Index i = 0; i < n; ++i, ++row) {
      out.design(row, 0) = 1.0;
      out.design(row, 1) = network(i);
      out.design.row(row).segment(2, p) = features.frames[t - 1].row(i);
      out.design.row(row).tail(b) = factor_values.col(t - 1).transpose();
      out.response(row) = returns(i, t);
    }
  }
  return out;
}

namespace {

double objective(const train::Target& target, const Vector& residual) {
  const double n = static_cast<double>(residual.size());
  if (target.is_mean()) return residual.squaredNorm() / n;
  double total = 0;
  for (Index k = 0; k < residual.size(); ++k) total += train::pinball(residual(k), target.tau);
  return total / n;
}

}  // namespace

LinearFit fit_linear(const train::Target& target, const LinearData& data, const LinearFitConfig& cfg) {
  const Index width = data.design.cols();
  const Index rows = data.design.rows();
  if (rows == 0) throw UsageError("fit_linear: no observations");
  if (!target.is_mean()) train::require_level(target.tau);
  LinearFit fit;

  static const auto column_name = [](Index c, Index p) {
    if (c == 1) return std::string("network");
    if (c < 2 + p) return "feature_" + std::to_string(c - 2);
    return "factor_" + std::to_string(c - 2 - p);
  };
  Eigen::Array<bool, Eigen::Dynamic, 1> free(width);
  free(0) = true;
  for (Index c = 1; c < width; ++c) {
    const auto col = data.design.col(c);
    free(c) = col.maxCoeff() > col.minCoeff();
    if (!free(c))
      fit.warnings.push_back("regressor " + column_name(c, data.features) +
                             " has zero variance; coefficient unidentified and fixed at 0");
  }

  Vector theta = Vector::Zero(width);
  AdamState<double> adam;
  const double n = static_cast<double>(rows);
  Vector residual = data.response;
  Vector grad(width);
  for (fit.steps = 0; fit.steps < cfg.max_steps; ++fit.steps) {
    residual = data.response - data.design * theta;
    if (target.is_mean()) {
      grad = (-2.0 / n) * (data.design.transpose() * residual);
    } else {
      Vector slope(rows);
      for (Index k = 0; k < rows; ++k) slope(k) = -(target.tau - (residual(k) < 0 ? 1.0 : 0.0)) / n;
      grad = data.design.transpose() * slope;
    }
    for (Index c = 0; c < width; ++c)
      if (!free(c)) grad(c) = 0;
    fit.gradient_norm = grad.norm();
    if (!std::isfinite(fit.gradient_norm))
      throw NumericError("baseline fit " + target.label() + " diverged at step " +
                         std::to_string(fit.steps));
    if (fit.gradient_norm < cfg.gradient_tolerance) break;
    theta += adam_step(adam, grad, cfg.learning_rate);
  }
  residual = data.response - data.design * theta;
  fit.loss = objective(target, residual);
  fit.params = LinearParams::from_flat(theta, data.features, data.factors);
  return fit;
}

Matrix linear_predict(const LinearParams& p, const data::FeaturePanel& features,
                      const Matrix& returns, const Matrix& factor_values, const Matrix& w,
                      const std::vector<Index>& days) {
  Matrix out(features.stocks, static_cast<Index>(days.size()));
  for (std::size_t d = 0; d < days.size(); ++d) {
    const Index t = days[d];
    const Matrix x = features.frames[t - 1].topRows(features.stocks);
    out.col(static_cast<Index>(d)) =
        linear_forward<double>(p, w, returns.col(t - 1), x, factor_values.col(t - 1));
  }
  return out;
}

void save_linear(const std::filesystem::path& path, const LinearParams& p,
                 const train::Target& target, std::uint64_t seed, const std::string& provenance) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << model::kCheckpointMagic << '\n';
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "method grace2\n";
  out << "target " << (target.is_mean() ? "mean" : "tau") << ' ' << csv::format_double(target.tau)
      << '\n';
  out << "seed " << seed << '\n';
  out << "linear " << p.zeta.size() << ' ' << p.varsigma.size() << '\n';
  const Vector v = p.flat();
  for (Index k = 0; k < v.size(); ++k) out << (k ? " " : "") << csv::format_double(v(k));
  out << "\nend\n";
}

LinearCheckpoint load_linear(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const std::string source = path.string();
  std::string line, word, kind, level, method;
  std::getline(in, line);
  if (line != model::kCheckpointMagic) throw LoadError(source + ": bad magic header");
  while ((in >> std::ws).peek() == '#') std::getline(in, line);
  std::uint64_t seed = 0;
  Index p = 0, b = 0;
  in >> word >> method >> word >> kind >> level >> word >> seed >> word >> p >> b;
  if (!in || method != "grace2" || word != "linear")
    throw LoadError(source + ": not a linear baseline checkpoint");
  Vector v(2 + p + b);
  for (Index k = 0; k < v.size(); ++k) {
    if (!(in >> word)) throw LoadError(source + ": truncated coefficients");
    v(k) = csv::parse_double(word, source);
  }
  LinearCheckpoint ck;
  ck.params = LinearParams::from_flat(v, p, b);
  ck.target = kind == "mean" ? train::Target::mean()
                             : train::Target::quantile(csv::parse_double(level, source));
  return ck;
}

}  // namespace grace::baseline
