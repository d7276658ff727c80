#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dimtool {

// Input/usage problems exit with code 2; other failures with 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreprocessOpts {
  std::string bvh_dir, wav_dir, out_dir;
  double clip_seconds = 20.0;
  double stride_seconds = 0;  // 0: non-overlapping windows
  double fps = 20.0;
  double audio_rate = 16000.0;
};

struct TrainOpts {
  std::string store_dir, config_path, out_dir, resume_prefix;
  int64_t steps = 200;
  int64_t batch = 4;
  double lr = 1e-4;
  uint64_t seed = 0;
  bool seed_given = false;
};

struct GenerateOpts {
  std::string checkpoint_prefix, wav_path, out_bvh;
  uint64_t seed = 0;
};

struct EvaluateOpts {
  std::string generated_dir, reference_dir, embedder_path, out_path;
  double sigma = 0.1;
  int64_t embedder_steps = 300;
  uint64_t seed = 0;
};

struct BenchOpts {
  std::string config_path, out_dir;
  std::vector<int64_t> lengths;  // empty: 400..2000
  uint64_t seed = 0;
};

void run_preprocess(const PreprocessOpts& opts);
void run_train(const TrainOpts& opts);
void run_generate(const GenerateOpts& opts);
void run_evaluate(const EvaluateOpts& opts);
void run_bench(const BenchOpts& opts);

}  // namespace dimtool
