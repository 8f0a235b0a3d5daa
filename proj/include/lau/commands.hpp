#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lau/train.hpp"

namespace lau {

struct GradcheckCommand {
  std::uint64_t seed = 0;
  double h = 1e-6;
  int cases = 100;
  std::filesystem::path out = "gradcheck.csv";
};

/// Runs the gradient-check suite and writes
/// `subject,cases,max_rel_err,failures`. Returns 0 iff nothing failed.
int cmd_gradcheck(const GradcheckCommand& cmd, std::ostream& log);

struct DemoCommand {
  std::string upsampler = "bilinear";  // bilinear | lau | pixelshuffle | corner-XX
  int ratio = 2;
  std::optional<std::filesystem::path> input;    // Tensor4 dump; synthetic sample if absent
  std::optional<std::filesystem::path> offsets;  // interleaved (n, 2M, kh, kw) dump for lau
  std::optional<std::filesystem::path> tensor_out;
  std::filesystem::path out = "demo.ppm";
  std::uint64_t seed = 0;
};

/// Writes the argmax label map of the input to `<out stem>_input.ppm` and of
/// the upsampled scores to `out`.
int cmd_demo(const DemoCommand& cmd, std::ostream& log);

/// Trains one config into `out_dir`: metrics.csv, checkpoint.bin,
/// config.json and validation prediction PPMs. Returns the history.
TrainResult run_training(const TrainConfig& config, const std::filesystem::path& out_dir);

int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
              std::ostream& log);

struct SweepCommand {
  std::string param;  // lambda | ratio
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;  // defaults to the config seed
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = "sweep";
};

/// One training run per (value, seed); writes sweep.csv
/// (`param,value,seed,final_miou,final_pixacc`) and sweep_errors.csv for runs
/// that failed. Returns nonzero if any run failed.
int cmd_sweep(const SweepCommand& cmd, std::ostream& log);

inline constexpr const char* kMetricsHeader = "epoch,split,loss,pixacc,miou,speckle";
inline constexpr const char* kSweepHeader = "param,value,seed,final_miou,final_pixacc";
inline constexpr const char* kGradcheckHeader = "subject,cases,max_rel_err,failures";

}  // namespace lau
