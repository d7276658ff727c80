#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dim/adaln.hpp"
#include "dim/codec.hpp"
#include "dim/condition.hpp"
#include "dim/gesture.hpp"

namespace dim {

// Linear variance schedule with derived per-step quantities:
//   alpha = 1 - beta, alpha_bar = cumulative product,
//   beta_tilde[n] = (1 - alpha_bar[n-1]) / (1 - alpha_bar[n]) * beta[n].
// Vectors are indexed 0-based; step n in [1, N] reads index n-1.
struct DiffusionSchedule {
  int64_t n_steps = 0;
  std::vector<double> beta, alpha, alpha_bar, beta_tilde;

  double beta_at(int64_t n) const { return beta[static_cast<size_t>(n - 1)]; }
  double alpha_at(int64_t n) const { return alpha[static_cast<size_t>(n - 1)]; }
  double alpha_bar_at(int64_t n) const { return alpha_bar[static_cast<size_t>(n - 1)]; }
  double beta_tilde_at(int64_t n) const { return beta_tilde[static_cast<size_t>(n - 1)]; }
};

DiffusionSchedule build_schedule(int64_t n_steps, double beta1, double betaN);

// Closed-form forward noising: sqrt(alpha_bar^n) y0 + sqrt(1 - alpha_bar^n) eps.
Tensor forward_noise(const Tensor& y0, const DiffusionSchedule& sched, int64_t n,
                     const Tensor& eps);

// Noise predictor contract for the reverse chain: given the noisy sequence at
// step n, produce the estimated noise.
using NoisePredictor = std::function<Tensor(const Tensor& y_n, int64_t n)>;

// Ancestral sampling from Y^N ~ N(0, I) down to Y^0. Posterior std is
// sqrt(beta_tilde); the final step adds no noise. Aborts with diagnostics if
// the state leaves the finite range.
Tensor ancestral_sample(const NoisePredictor& predict, const DiffusionSchedule& sched,
                        const std::vector<int64_t>& shape, Rng& rng);

struct ModelConfig {
  int64_t n_steps = 1000;  // N
  double beta1 = 1e-4;
  double betaN = 8e-2;
  int64_t n_blocks = 6;  // M
  int64_t d_model = 1280;
  int64_t d_state = 256;
  int64_t conv_width = 4;
  int64_t expand = 2;
  int64_t n_heads = 0;
  int64_t d_cond = 0;  // 0 means d_model
  int64_t ff_mult = 4;
  int64_t joint_channels = 183;  // D+6
  int64_t d_audio = 80;
  int64_t style_d_state = 64;
  int64_t smooth_kernel = 201;
  uint64_t seed = 0;

  int64_t cond_dim() const { return d_cond > 0 ? d_cond : d_model; }
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  void validate() const;
};

// The full speech-to-gesture denoiser: gesture codec framing an AdaLN
// state-space stack, conditioned by the speech pathway.
class GestureDiffusionModel {
 public:
  explicit GestureDiffusionModel(const ModelConfig& cfg);

  // eps_hat = decode(stack(encode(y_n), C))
  Tensor predict_noise(const Tensor& y_n, const Tensor& cond_seq,
                       Tape* tape = nullptr) const;

  // Samples a step and a noise draw, builds the condition, returns the MSE
  // between drawn and predicted noise. y0 must be normalized gesture data.
  Tensor training_loss(const Tensor& y0, const LocalFeatureSequence& speech,
                       Rng& rng, Tape* tape);

  // Reverse chain over the whole sequence at once (non-autoregressive).
  Tensor sample(const LocalFeatureSequence& speech, int64_t frames, Rng& rng) const;

  ParamRegistry& params() { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const DiffusionSchedule& schedule() const { return sched_; }
  ConditionExtractor& condition_extractor() { return cond_; }
  const ConditionExtractor& condition_extractor() const { return cond_; }
  AdaLNStack& stack() { return stack_; }
  GestureCodec& codec() { return codec_; }

  void save_params(const std::string& path) const;
  void load_params(const std::string& path);
  static int64_t param_count(const ModelConfig& cfg);

 private:
  ModelConfig cfg_;
  DiffusionSchedule sched_;
  GestureCodec codec_;
  ConditionExtractor cond_;
  AdaLNStack stack_;
  ParamRegistry params_;
};

}  // namespace dim
