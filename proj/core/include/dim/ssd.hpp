#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dim/nn.hpp"
#include "dim/ops.hpp"
#include "dim/rng.hpp"
#include "dim/tensor.hpp"

namespace dim {

// Parameters of one 1-semiseparable sequence transform: per-token decay
// scalars in [0,1] plus input/output state projections.
struct SSDParams {
  Tensor a;  // T×1, each in [0,1]
  Tensor B;  // T×S
  Tensor C;  // T×S

  int64_t seq_len() const { return B.dim(0); }
  int64_t state_size() const { return B.dim(1); }
  void validate() const;
};

// Lower-triangular decay mask: L_ii = 1, L_ij = a_{j+1} * ... * a_i for i > j,
// zero above the diagonal. Accepts a as [T] or T×1; throws if any a_t is
// outside [0,1].
Tensor build_1ss_mask(const Tensor& a);

// Dual (quadratic) form: (L ∘ (C B^T)) V with the T×T masked score matrix
// materialized. No softmax. Used as the brute-force oracle and in benchmarks.
Tensor smasked_attention_quadratic(const SSDParams& p, const Tensor& V);

// Recurrent form: h_t = a_t h_{t-1} + b_t v_t^T, y_t = c_t^T h_t. Linear in T
// and mathematically identical to the quadratic form. Differentiable.
Tensor ssm_scan_linear(const SSDParams& p, const Tensor& V, Tape* tape = nullptr);

// Block form: quadratic inside chunks, recurrent state carried between them.
// Matches the linear scan up to float reassociation.
Tensor ssm_scan_chunked(const SSDParams& p, const Tensor& V, int64_t chunk = 64);

// Raw kernels behind the benchmark path. Real is float or double; internal
// accumulation is always double. Each returns the freshly allocated T×P
// output so the allocation-counting harness sees exactly the working set:
// O(T) for the scans, one T×T score buffer for the quadratic form.
namespace raw {

template <class Real>
std::vector<Real> scan_linear(const Real* a, const Real* B, const Real* C,
                              const Real* V, int64_t T, int64_t S, int64_t P);

template <class Real>
std::vector<Real> attention_quadratic(const Real* a, const Real* B, const Real* C,
                                      const Real* V, int64_t T, int64_t S,
                                      int64_t P);

template <class Real>
std::vector<Real> scan_chunked(const Real* a, const Real* B, const Real* C,
                               const Real* V, int64_t T, int64_t S, int64_t P,
                               int64_t chunk);

}  // namespace raw

// Which algebraic form the block uses for its sequence transform. All three
// compute the same map; they differ in time and memory profile.
enum class ScanForm { kLinear, kQuadratic, kChunked };

struct Mamba2Config {
  int64_t d_model = 0;
  int64_t expand = 2;
  int64_t d_state = 256;
  int64_t conv_width = 4;
  int64_t n_heads = 0;  // 0: pick so that d_head = 64 (or 1 head if narrower)

  int64_t d_inner() const { return expand * d_model; }
  int64_t heads() const;
  int64_t d_head() const { return d_inner() / heads(); }
  void validate() const;
};

// Gated selective state-space block: expansion, short causal depthwise
// convolution, data-dependent per-head decays a_t = exp(-softplus(dt_t) A_h),
// per-head scan, SiLU gate, output projection. Causal in t by construction.
class Mamba2Block {
 public:
  Mamba2Block() = default;
  Mamba2Block(const Mamba2Config& cfg, Rng& rng);

  Tensor forward(const Tensor& x, Tape* tape = nullptr,
                 ScanForm form = ScanForm::kLinear) const;
  // Decay scalars the block derives for input x (T×n_heads, all in (0,1]).
  Tensor decays(const Tensor& x) const;

  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(const Mamba2Config& cfg);
  const Mamba2Config& config() const { return cfg_; }

 private:
  Mamba2Config cfg_;
  Linear in_proj_, gate_proj_, b_proj_, c_proj_, dt_proj_, out_proj_;
  Tensor conv_w_;  // conv_width × d_inner (depthwise)
  Tensor conv_b_;  // [d_inner]
  Tensor a_log_;   // [n_heads], A_h = exp(a_log_h) > 0
};

}  // namespace dim
