#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "grace/model/ftgcn.hpp"

namespace grace::model {

inline constexpr const char* kCheckpointMagic = "GRACE-CHECKPOINT v1";

struct CheckpointMeta {
  std::string method = "grace";  // grace | grace1 | grace2
  std::string target = "tau";    // tau | mean
  double level = 0.5;            // quantile level; ignored for the mean
  std::uint64_t seed = 0;
  std::string provenance;  // written as a comment line after the magic
};

// Text format: magic line, metadata lines, then each named array as
// `array <name> <rows> <cols>` followed by one line per row.
void write_checkpoint(std::ostream& out, const ModelTheta& theta, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& path, const ModelTheta& theta,
                     const CheckpointMeta& meta);

struct Checkpoint {
  ModelTheta theta;
  CheckpointMeta meta;
};
Checkpoint read_checkpoint(std::istream& in, const std::string& source);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// `model_tau_<level>.ckpt` or `model_mean.ckpt`.
std::string checkpoint_name(const std::string& target, double level);
std::string level_tag(double level);

}  // namespace grace::model
