#pragma once

#include <memory>
#include <string>

#include "dim/dataio.hpp"
#include "dim/nn.hpp"
#include "dim/ssd.hpp"

namespace dim {

// Frame-level speech features at a declared rate.
struct LocalFeatureSequence {
  Tensor features;  // T_a × d_a
  double rate_hz = 0;

  int64_t frame_count() const { return features.dim(0); }
  int64_t feature_dim() const { return features.dim(1); }
};

// Global style: the final output token of a sequence scan over the local
// features.
struct StyleToken {
  Tensor z;  // 1 × d_a
  int64_t dims() const { return z.numel(); }
};

// Front-end contract: raw 16 kHz mono audio to frame-level features. The
// default is a log-mel bank; a file-backed provider loads precomputed
// features with a declared rate.
class LocalFeatureProvider {
 public:
  virtual ~LocalFeatureProvider() = default;
  virtual LocalFeatureSequence features(const AudioClip& audio) const = 0;
  virtual int64_t feature_dim() const = 0;
  virtual std::string id() const = 0;
};

class LogMelProvider final : public LocalFeatureProvider {
 public:
  LogMelProvider(int64_t n_mels = 80, int64_t win_samples = 400,
                 int64_t hop_samples = 320, double sample_rate = 16000.0);
  LocalFeatureSequence features(const AudioClip& audio) const override;
  int64_t feature_dim() const override { return n_mels_; }
  std::string id() const override;
  double rate_hz() const { return sample_rate_ / static_cast<double>(hop_); }

 private:
  int64_t n_mels_, win_, hop_, n_fft_;
  double sample_rate_;
  std::vector<std::vector<std::pair<int64_t, double>>> mel_weights_;  // per band
};

class FeatureFileProvider final : public LocalFeatureProvider {
 public:
  explicit FeatureFileProvider(const std::string& tensor_path);
  LocalFeatureSequence features(const AudioClip& audio) const override;
  int64_t feature_dim() const override { return cached_.feature_dim(); }
  std::string id() const override { return "file:" + source_; }

 private:
  LocalFeatureSequence cached_;
  std::string source_;
};

// Writes features + a JSON sidecar {rate_hz, d_a, source} next to the tensor.
void save_features(const std::string& tensor_path, const LocalFeatureSequence& f,
                   const std::string& source);

struct ConditionConfig {
  int64_t d_audio = 80;
  int64_t d_cond = 1280;
  int64_t smooth_kernel = 201;  // same-padded, ±5 s of context at 20 fps
  int64_t n_steps = 1000;       // valid diffusion step range for fusion
  Mamba2Config style_block;     // d_model forced to d_audio

  void validate() const;
};

// Sinusoidal embedding of an integer step, shaped 1 × dim.
Tensor timestep_embedding(int64_t n, int64_t dim);

// The dual-component conditioning pathway: a depth-1 scan summarizes global
// style, the style token is broadcast and fused with the local features,
// the fused stream is resampled to the gesture rate and smoothed with a
// wide kernel, and the diffusion step embedding is added to every row.
class ConditionExtractor {
 public:
  ConditionExtractor() = default;
  ConditionExtractor(const ConditionConfig& cfg, Rng& rng);

  StyleToken global_style(const LocalFeatureSequence& zx, Tape* tape = nullptr) const;
  Tensor broadcast_and_fuse(const LocalFeatureSequence& zx, const StyleToken& zs,
                            Tape* tape = nullptr) const;
  Tensor downsample_to_gesture_rate(const Tensor& fused, int64_t frames,
                                    Tape* tape = nullptr) const;
  Tensor fuse_timestep(const Tensor& c, int64_t n, Tape* tape = nullptr) const;

  // Audio-dependent part, reusable across diffusion steps.
  Tensor condition_base(const LocalFeatureSequence& zx, int64_t frames,
                        Tape* tape = nullptr) const;
  // Full pipeline: condition_base then fuse_timestep.
  Tensor condition(const LocalFeatureSequence& zx, int64_t frames, int64_t n,
                   Tape* tape = nullptr) const;

  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const ConditionConfig& cfg);
  const ConditionConfig& config() const { return cfg_; }
  const Mamba2Block& style_block() const { return style_; }
  const Linear& fuse_layer() const { return fuse_; }

 private:
  ConditionConfig cfg_;
  Mamba2Block style_;
  Linear fuse_;       // 2 d_audio -> d_cond
  Tensor smooth_w_;   // smooth_kernel × d_cond depthwise, delta-initialized
  Mlp step_mlp_;      // d_cond -> d_cond -> d_cond
};

}  // namespace dim
