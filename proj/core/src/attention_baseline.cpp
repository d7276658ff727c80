#include "dim/attention_baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

int64_t AttentionStackConfig::heads() const {
  if (n_heads > 0) return n_heads;
  if (d_model >= 64 && d_model % 64 == 0) return d_model / 64;
  return 1;
}

void AttentionStackConfig::validate() const {
  if (n_blocks < 1 || d_model < 1)
    throw std::invalid_argument("AttentionStackConfig: bad dimensions");
  if (d_model % heads() != 0)
    throw std::invalid_argument("AttentionStackConfig: d_model not divisible by heads");
}

AdaLNAttentionBlock::AdaLNAttentionBlock(const AttentionStackConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  int64_t d = cfg.d_model;
  q_ = Linear(d, d, rng);
  k_ = Linear(d, d, rng);
  v_ = Linear(d, d, rng);
  o_ = Linear(d, d, rng);
  ff_ = Mlp(d, cfg.ff_mult * d, d, rng);
  mod_ = Mlp(cfg.cond_dim(), d, 6 * d, rng);
  mod_.zero_output_layer();
}

Tensor AdaLNAttentionBlock::attention(const Tensor& x) const {
  int64_t T = x.dim(0), d = cfg_.d_model;
  int64_t H = cfg_.heads(), dh = d / H;
  Tensor q = q_.forward(x), k = k_.forward(x), v = v_.forward(x);
  Tensor y({T, d});
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> scores;
  for (int64_t h = 0; h < H; ++h) {
    int64_t off = h * dh;
    for (int64_t i = 0; i < T; ++i) {
      scores.assign(static_cast<size_t>(i + 1), 0.0);
      double max_s = -1e300;
      for (int64_t j = 0; j <= i; ++j) {
        double s = 0;
        for (int64_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
        s *= inv_sqrt;
        scores[static_cast<size_t>(j)] = s;
        if (s > max_s) max_s = s;
      }
      double z = 0;
      for (int64_t j = 0; j <= i; ++j) {
        double e = std::exp(scores[static_cast<size_t>(j)] - max_s);
        scores[static_cast<size_t>(j)] = e;
        z += e;
      }
      for (int64_t j = 0; j <= i; ++j) {
        double wgt = scores[static_cast<size_t>(j)] / z;
        if (wgt == 0.0) continue;
        for (int64_t c = 0; c < dh; ++c) y(i, off + c) += wgt * v(j, off + c);
      }
    }
  }
  return o_.forward(y);
}

Tensor AdaLNAttentionBlock::forward(const Tensor& x, const Tensor& cond) const {
  if (x.dim(0) != cond.dim(0))
    throw std::invalid_argument("AdaLNAttentionBlock: row count mismatch");
  int64_t d = cfg_.d_model;
  Tensor m = mod_.forward(cond);
  Tensor gamma1 = slice_cols(m, 0, d), beta1 = slice_cols(m, d, 2 * d),
         alpha1 = slice_cols(m, 2 * d, 3 * d), gamma2 = slice_cols(m, 3 * d, 4 * d),
         beta2 = slice_cols(m, 4 * d, 5 * d), alpha2 = slice_cols(m, 5 * d, 6 * d);
  Tensor h = modulate(layer_norm(x, cfg_.ln_eps), gamma1, beta1);
  Tensor y = add(x, mul(alpha1, attention(h)));
  Tensor h2 = modulate(layer_norm(y, cfg_.ln_eps), gamma2, beta2);
  return add(y, mul(alpha2, ff_.forward(h2)));
}

void AdaLNAttentionBlock::collect_params(const std::string& prefix,
                                         ParamRegistry& reg) {
  reg.add(prefix + ".q.w", q_.w);
  reg.add(prefix + ".q.b", q_.b);
  reg.add(prefix + ".k.w", k_.w);
  reg.add(prefix + ".k.b", k_.b);
  reg.add(prefix + ".v.w", v_.w);
  reg.add(prefix + ".v.b", v_.b);
  reg.add(prefix + ".o.w", o_.w);
  reg.add(prefix + ".o.b", o_.b);
  reg.add(prefix + ".ff.l1.w", ff_.l1.w);
  reg.add(prefix + ".ff.l1.b", ff_.l1.b);
  reg.add(prefix + ".ff.l2.w", ff_.l2.w);
  reg.add(prefix + ".ff.l2.b", ff_.l2.b);
  reg.add(prefix + ".mod.l1.w", mod_.l1.w);
  reg.add(prefix + ".mod.l1.b", mod_.l1.b);
  reg.add(prefix + ".mod.l2.w", mod_.l2.w);
  reg.add(prefix + ".mod.l2.b", mod_.l2.b);
}

int64_t AdaLNAttentionBlock::param_count(const AttentionStackConfig& cfg) {
  int64_t d = cfg.d_model, dc = cfg.cond_dim(), ff = cfg.ff_mult * d;
  int64_t n = 4 * (d * d + d);            // q, k, v, o
  n += d * ff + ff + ff * d + d;          // feedforward
  n += dc * d + d + d * 6 * d + 6 * d;    // modulation MLP
  return n;
}

AdaLNAttentionStack::AdaLNAttentionStack(const AttentionStackConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  blocks_.reserve(static_cast<size_t>(cfg.n_blocks));
  for (int64_t i = 0; i < cfg.n_blocks; ++i) blocks_.emplace_back(cfg, rng);
  AdaLNStackConfig fc;
  fc.d_model = cfg.d_model;
  fc.d_cond = cfg.d_cond;
  fc.ln_eps = cfg.ln_eps;
  final_ = AdaLNFinalLayer(fc, rng);
}

Tensor AdaLNAttentionStack::forward(const Tensor& x, const Tensor& cond) const {
  Tensor h = x;
  for (const AdaLNAttentionBlock& b : blocks_) h = b.forward(h, cond);
  return final_.forward(h, cond);
}

void AdaLNAttentionStack::collect_params(const std::string& prefix,
                                         ParamRegistry& reg) {
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_params(prefix + ".block" + std::to_string(i), reg);
  final_.collect_params(prefix + ".final", reg);
}

int64_t AdaLNAttentionStack::param_count(const AttentionStackConfig& cfg) {
  AdaLNStackConfig fc;
  fc.d_model = cfg.d_model;
  fc.d_cond = cfg.d_cond;
  return cfg.n_blocks * AdaLNAttentionBlock::param_count(cfg) +
         AdaLNFinalLayer::param_count(fc);
}

}  // namespace dim
