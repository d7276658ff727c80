#pragma once

#include <string>
#include <vector>

#include "dim/nn.hpp"
#include "dim/ssd.hpp"

namespace dim {

struct AdaLNStackConfig {
  int64_t n_blocks = 6;  // M
  int64_t d_model = 1280;
  int64_t d_cond = 0;  // conditioning width; 0 means d_model
  int64_t ff_mult = 4;
  double ln_eps = 1e-5;
  Mamba2Config block;  // block.d_model is forced to d_model

  int64_t cond_dim() const { return d_cond > 0 ? d_cond : d_model; }
  void validate() const;
};

// Scale/shift/gate tensors regressed from the condition, one set per sublayer.
struct AdaLNModulation {
  Tensor gamma1, beta1, alpha1, gamma2, beta2, alpha2;  // each T×d_model
};

// One conditioned block: two gated residual sublayers,
//   x <- x + alpha1 ⊙ Mamba2(LN(x) ⊙ (1+gamma1) + beta1)
//   x <- x + alpha2 ⊙ MLP(LN(x) ⊙ (1+gamma2) + beta2)
// The modulation MLP output layer starts at zero, so an untrained block is
// the identity map regardless of the condition.
class AdaLNBlock {
 public:
  AdaLNBlock() = default;
  AdaLNBlock(const AdaLNStackConfig& cfg, Rng& rng);

  AdaLNModulation modulation(const Tensor& cond, Tape* tape = nullptr) const;
  Tensor forward(const Tensor& x, const Tensor& cond, Tape* tape = nullptr,
                 ScanForm form = ScanForm::kLinear) const;

  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const AdaLNStackConfig& cfg);
  Mamba2Block& mamba() { return mamba_; }
  Mlp& modulation_mlp() { return mod_; }

 private:
  double ln_eps_ = 1e-5;
  int64_t d_model_ = 0;
  Mamba2Block mamba_;
  Mlp ff_;
  Mlp mod_;
};

// Modulated output layer: LN(x) ⊙ (1+gamma3) + beta3, no residual, no gate.
class AdaLNFinalLayer {
 public:
  AdaLNFinalLayer() = default;
  AdaLNFinalLayer(const AdaLNStackConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond, Tape* tape = nullptr) const;
  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const AdaLNStackConfig& cfg);
  Mlp& modulation_mlp() { return mod_; }

 private:
  double ln_eps_ = 1e-5;
  int64_t d_model_ = 0;
  Mlp mod_;
};

// M conditioned blocks followed by the modulated final layer. With all
// modulation MLPs zero-initialized this reduces to plain layer norm.
class AdaLNStack {
 public:
  AdaLNStack() = default;
  AdaLNStack(const AdaLNStackConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond, Tape* tape = nullptr,
                 ScanForm form = ScanForm::kLinear) const;
  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const AdaLNStackConfig& cfg);

  const AdaLNStackConfig& config() const { return cfg_; }
  std::vector<AdaLNBlock>& blocks() { return blocks_; }
  AdaLNFinalLayer& final_layer() { return final_; }

 private:
  AdaLNStackConfig cfg_;
  std::vector<AdaLNBlock> blocks_;
  AdaLNFinalLayer final_;
};

// Applies (1+gamma) scale then shift to an already-normalized tensor.
Tensor modulate(const Tensor& x_norm, const Tensor& gamma, const Tensor& beta,
                Tape* tape = nullptr);

}  // namespace dim
