#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssd/lanczos.h"
#include "ssd/process.h"
#include "ssd/routing.h"
#include "ssd/schedules.h"

namespace ssd {

struct DataConfig {
  /// STF file holding one image; empty means synthetic blobs.
  std::string path;
  int count = 64;
  std::uint64_t seed = 1;
};

struct TrainConfig {
  int iters = 2000;
  int batch = 16;
  int hidden = 128;
  double lr = 1e-4;
  double weight_decay = 0.01;
  int eval_every = 50;
  int eval_size = 256;
};

struct SampleConfig {
  int n = 4;
  std::string mode = "exact";  // exact | isotropic
  int threads = 1;
  int step_stride = 1;
  bool record = false;
  int record_stride = 50;
};

/// Everything a CLI run depends on. Precedence: flag > JSON file > these defaults.
struct RunConfig {
  std::string schedule = "equal";
  std::vector<int> levels = {8};
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int channels = 1;
  LanczosConfig lanczos;
  std::uint64_t seed = 0;
  DataConfig data;
  TrainConfig train;
  SampleConfig sample;
  int unet_levels = 4;
  std::vector<int> channel_profile = kDefaultChannelProfile;
  std::string output_dir = "out";

  /// ParameterError on inconsistent values.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ParameterError.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

ResolutionSchedule build_schedule(const RunConfig& cfg);
NoiseSchedule build_noise(const RunConfig& cfg);
SampleMode parse_sample_mode(const std::string& s);

}  // namespace ssd
