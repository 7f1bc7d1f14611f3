#include "grace/model/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "grace/data/csv.hpp"

namespace grace::model {

void write_checkpoint(std::ostream& out, const ModelTheta& theta, const CheckpointMeta& meta) {
  theta.validate();
  const ModelDims& d = theta.dims;
  out << kCheckpointMagic << '\n';
  if (!meta.provenance.empty()) out << "# " << meta.provenance << '\n';
  out << "method " << meta.method << '\n';
  out << "target " << meta.target << ' ' << csv::format_double(meta.level) << '\n';
  out << "seed " << meta.seed << '\n';
  out << "dims " << d.stocks << ' ' << d.factors << ' ' << d.relations << ' ' << d.features << ' '
      << d.lags << ' ' << d.hidden << ' ' << (d.include_factors ? 1 : 0) << '\n';
  const auto arrays = theta.arrays();
  const auto& names = ModelTheta::array_names();
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    const Matrix& m = *arrays[k];
    out << "array " << names[k] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << csv::format_double(m(r, c));
      out << '\n';
    }
  }
  out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const ModelTheta& theta,
                     const CheckpointMeta& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  write_checkpoint(out, theta, meta);
  if (!out) throw LoadError("write failed for " + path.string());
}

namespace {

std::string expect_word(std::istream& in, const std::string& word, const std::string& source) {
  std::string got;
  if (!(in >> got) || got != word)
    throw LoadError(source + ": expected '" + word + "', found '" + got + "'");
  return got;
}

}  // namespace

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic)
    throw LoadError(source + ": not a checkpoint (bad magic header '" + magic + "')");
  Checkpoint ck;
  while ((in >> std::ws).peek() == '#') {
    std::string comment;
    std::getline(in, comment);
    if (ck.meta.provenance.empty())
      ck.meta.provenance = comment.substr(std::min<std::size_t>(2, comment.size()));
  }
  std::string level_text;
  expect_word(in, "method", source);
  in >> ck.meta.method;
  expect_word(in, "target", source);
  in >> ck.meta.target >> level_text;
  ck.meta.level = csv::parse_double(level_text, source);
  expect_word(in, "seed", source);
  in >> ck.meta.seed;
  expect_word(in, "dims", source);
  ModelDims& d = ck.theta.dims;
  int include = 1;
  in >> d.stocks >> d.factors >> d.relations >> d.features >> d.lags >> d.hidden >> include;
  d.include_factors = include != 0;
  if (!in) throw LoadError(source + ": truncated header");

  auto arrays = ck.theta.arrays();
  const auto& names = ModelTheta::array_names();
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    expect_word(in, "array", source);
    std::string name;
    Index rows = 0, cols = 0;
    in >> name >> rows >> cols;
    if (name != names[k])
      throw LoadError(source + ": expected array " + names[k] + ", found " + name);
    if (!in || rows < 0 || cols < 0) throw LoadError(source + ": bad array header for " + name);
    Matrix m(rows, cols);
    std::string cell;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        if (!(in >> cell)) throw LoadError(source + ": truncated array " + name);
        m(r, c) = csv::parse_double(cell, source + " array " + name);
      }
    *arrays[k] = std::move(m);
  }
  expect_word(in, "end", source);
  try {
    ck.theta.validate();
  } catch (const Error& e) {
    throw LoadError(source + ": " + e.what());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

std::string level_tag(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", level);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string checkpoint_name(const std::string& target, double level) {
  if (target == "mean") return "model_mean.ckpt";
  return "model_tau_" + level_tag(level) + ".ckpt";
}

}  // namespace grace::model
