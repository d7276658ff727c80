#pragma once

#include <string>
#include <vector>

#include "dim/adaln.hpp"
#include "dim/nn.hpp"

namespace dim {

// Pre-norm causal softmax-attention stack with the same AdaLN modulation as
// the state-space stack. Benchmark comparator only (typically run at twice
// the depth); forward pass only, no gradient support.
struct AttentionStackConfig {
  int64_t n_blocks = 12;
  int64_t d_model = 1280;
  int64_t d_cond = 0;  // 0 means d_model
  int64_t n_heads = 0;  // 0: d_model / 64, or 1 head if narrower
  int64_t ff_mult = 4;
  double ln_eps = 1e-5;

  int64_t cond_dim() const { return d_cond > 0 ? d_cond : d_model; }
  int64_t heads() const;
  void validate() const;
};

class AdaLNAttentionBlock {
 public:
  AdaLNAttentionBlock() = default;
  AdaLNAttentionBlock(const AttentionStackConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond) const;
  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const AttentionStackConfig& cfg);

 private:
  Tensor attention(const Tensor& x) const;  // causal multi-head softmax
  AttentionStackConfig cfg_;
  Linear q_, k_, v_, o_;
  Mlp ff_, mod_;
};

class AdaLNAttentionStack {
 public:
  AdaLNAttentionStack() = default;
  AdaLNAttentionStack(const AttentionStackConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond) const;
  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const AttentionStackConfig& cfg);
  const AttentionStackConfig& config() const { return cfg_; }

 private:
  AttentionStackConfig cfg_;
  std::vector<AdaLNAttentionBlock> blocks_;
  AdaLNFinalLayer final_;
};

}  // namespace dim
