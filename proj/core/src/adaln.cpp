#include "dim/adaln.hpp"

#include <stdexcept>

namespace dim {

void AdaLNStackConfig::validate() const {
  if (n_blocks < 1) throw std::invalid_argument("AdaLNStackConfig: M must be >= 1");
  if (d_model < 1) throw std::invalid_argument("AdaLNStackConfig: d_model must be >= 1");
  if (ff_mult < 1) throw std::invalid_argument("AdaLNStackConfig: ff_mult must be >= 1");
}

Tensor modulate(const Tensor& x_norm, const Tensor& gamma, const Tensor& beta,
                Tape* tape) {
  Tensor ones = Tensor::full(gamma.shape(), 1.0);
  return add(mul(x_norm, add(gamma, ones, tape), tape), beta, tape);
}

AdaLNBlock::AdaLNBlock(const AdaLNStackConfig& cfg, Rng& rng)
    : ln_eps_(cfg.ln_eps), d_model_(cfg.d_model) {
  Mamba2Config mc = cfg.block;
  mc.d_model = cfg.d_model;
  mamba_ = Mamba2Block(mc, rng);
  ff_ = Mlp(cfg.d_model, cfg.ff_mult * cfg.d_model, cfg.d_model, rng);
  mod_ = Mlp(cfg.cond_dim(), cfg.d_model, 6 * cfg.d_model, rng);
  mod_.zero_output_layer();
}

AdaLNModulation AdaLNBlock::modulation(const Tensor& cond, Tape* tape) const {
  Tensor m = mod_.forward(cond, tape);
  int64_t d = d_model_;
  AdaLNModulation out;
  out.gamma1 = slice_cols(m, 0, d, tape);
  out.beta1 = slice_cols(m, d, 2 * d, tape);
  out.alpha1 = slice_cols(m, 2 * d, 3 * d, tape);
  out.gamma2 = slice_cols(m, 3 * d, 4 * d, tape);
  out.beta2 = slice_cols(m, 4 * d, 5 * d, tape);
  out.alpha2 = slice_cols(m, 5 * d, 6 * d, tape);
  return out;
}

Tensor AdaLNBlock::forward(const Tensor& x, const Tensor& cond, Tape* tape,
                           ScanForm form) const {
  if (x.dim(0) != cond.dim(0))
    throw std::invalid_argument("AdaLNBlock: x and condition row counts differ");
  AdaLNModulation m = modulation(cond, tape);
  Tensor h = modulate(layer_norm(x, ln_eps_, tape), m.gamma1, m.beta1, tape);
  Tensor y = add(x, mul(m.alpha1, mamba_.forward(h, tape, form), tape), tape);
  Tensor h2 = modulate(layer_norm(y, ln_eps_, tape), m.gamma2, m.beta2, tape);
  return add(y, mul(m.alpha2, ff_.forward(h2, tape), tape), tape);
}

void AdaLNBlock::collect_params(const std::string& prefix, ParamRegistry& reg) {
  mamba_.collect_params(prefix + ".mamba", reg);
  reg.add(prefix + ".ff.l1.w", ff_.l1.w);
  reg.add(prefix + ".ff.l1.b", ff_.l1.b);
  reg.add(prefix + ".ff.l2.w", ff_.l2.w);
  reg.add(prefix + ".ff.l2.b", ff_.l2.b);
  reg.add(prefix + ".mod.l1.w", mod_.l1.w);
  reg.add(prefix + ".mod.l1.b", mod_.l1.b);
  reg.add(prefix + ".mod.l2.w", mod_.l2.w);
  reg.add(prefix + ".mod.l2.b", mod_.l2.b);
}

int64_t AdaLNBlock::param_count(const AdaLNStackConfig& cfg) {
  Mamba2Config mc = cfg.block;
  mc.d_model = cfg.d_model;
  int64_t d = cfg.d_model, dc = cfg.cond_dim(), ff = cfg.ff_mult * d;
  int64_t n = Mamba2Block::param_count(mc);
  n += d * ff + ff + ff * d + d;          // feedforward
  n += dc * d + d + d * 6 * d + 6 * d;    // modulation MLP
  return n;
}

AdaLNFinalLayer::AdaLNFinalLayer(const AdaLNStackConfig& cfg, Rng& rng)
    : ln_eps_(cfg.ln_eps), d_model_(cfg.d_model) {
  mod_ = Mlp(cfg.cond_dim(), cfg.d_model, 2 * cfg.d_model, rng);
  mod_.zero_output_layer();
}

Tensor AdaLNFinalLayer::forward(const Tensor& x, const Tensor& cond,
                                Tape* tape) const {
  if (x.dim(0) != cond.dim(0))
    throw std::invalid_argument("AdaLNFinalLayer: x and condition row counts differ");
  Tensor m = mod_.forward(cond, tape);
  Tensor gamma3 = slice_cols(m, 0, d_model_, tape);
  Tensor beta3 = slice_cols(m, d_model_, 2 * d_model_, tape);
  return modulate(layer_norm(x, ln_eps_, tape), gamma3, beta3, tape);
}

void AdaLNFinalLayer::collect_params(const std::string& prefix, ParamRegistry& reg) {
  reg.add(prefix + ".mod.l1.w", mod_.l1.w);
  reg.add(prefix + ".mod.l1.b", mod_.l1.b);
  reg.add(prefix + ".mod.l2.w", mod_.l2.w);
  reg.add(prefix + ".mod.l2.b", mod_.l2.b);
}

int64_t AdaLNFinalLayer::param_count(const AdaLNStackConfig& cfg) {
  int64_t d = cfg.d_model, dc = cfg.cond_dim();
  return dc * d + d + d * 2 * d + 2 * d;
}

AdaLNStack::AdaLNStack(const AdaLNStackConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  blocks_.reserve(static_cast<size_t>(cfg.n_blocks));
  for (int64_t i = 0; i < cfg.n_blocks; ++i) blocks_.emplace_back(cfg, rng);
  final_ = AdaLNFinalLayer(cfg, rng);
}

Tensor AdaLNStack::forward(const Tensor& x, const Tensor& cond, Tape* tape,
                           ScanForm form) const {
  Tensor h = x;
  for (const AdaLNBlock& b : blocks_) h = b.forward(h, cond, tape, form);
  return final_.forward(h, cond, tape);
}

void AdaLNStack::collect_params(const std::string& prefix, ParamRegistry& reg) {
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_params(prefix + ".block" + std::to_string(i), reg);
  final_.collect_params(prefix + ".final", reg);
}

int64_t AdaLNStack::param_count(const AdaLNStackConfig& cfg) {
  return cfg.n_blocks * AdaLNBlock::param_count(cfg) +
         AdaLNFinalLayer::param_count(cfg);
}

}  // namespace dim
