#include "dim/ssd.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

void SSDParams::validate() const {
  if (a.rank() != 2 || a.dim(1) != 1 || a.dim(0) != B.dim(0))
    throw std::invalid_argument("SSDParams: a must be T×1");
  if (B.shape() != C.shape())
    throw std::invalid_argument("SSDParams: B and C shapes differ");
  for (int64_t t = 0; t < a.numel(); ++t)
    if (!(a.data()[t] >= 0.0 && a.data()[t] <= 1.0))
      throw std::invalid_argument("SSDParams: decay outside [0,1]");
}

Tensor build_1ss_mask(const Tensor& a) {
  if (!(a.rank() == 1 || (a.rank() == 2 && a.dim(1) == 1)))
    throw std::invalid_argument("build_1ss_mask: a must be [T] or T×1");
  int64_t T = a.dim(0);
  const double* av = a.data();
  for (int64_t t = 0; t < T; ++t)
    if (!(av[t] >= 0.0 && av[t] <= 1.0))
      throw std::invalid_argument("build_1ss_mask: decay outside [0,1]");
  Tensor L({T, T});
  for (int64_t i = 0; i < T; ++i) {
    L(i, i) = 1.0;
    for (int64_t j = i - 1; j >= 0; --j) L(i, j) = L(i, j + 1) * av[j + 1];
  }
  return L;
}

Tensor smasked_attention_quadratic(const SSDParams& p, const Tensor& V) {
  if (V.rank() != 2 || V.dim(0) != p.seq_len())
    throw std::invalid_argument("smasked_attention_quadratic: V row count mismatch");
  Tensor mask = build_1ss_mask(p.a);
  Tensor scores = matmul(p.C, transpose(p.B));
  return matmul(mul(mask, scores), V);
}

Tensor ssm_scan_linear(const SSDParams& p, const Tensor& V, Tape* tape) {
  return ssd_scan(p.a, p.B, p.C, V, tape);
}

Tensor ssm_scan_chunked(const SSDParams& p, const Tensor& V, int64_t chunk) {
  if (chunk < 1) throw std::invalid_argument("ssm_scan_chunked: chunk must be >= 1");
  int64_t T = p.seq_len(), S = p.state_size(), P = V.dim(1);
  if (V.dim(0) != T)
    throw std::invalid_argument("ssm_scan_chunked: V row count mismatch");
  std::vector<double> y =
      raw::scan_chunked(p.a.data(), p.B.data(), p.C.data(), V.data(), T, S, P, chunk);
  return Tensor({T, P}, std::move(y));
}

namespace raw {

namespace {

// Accumulates the masked quadratic form restricted to rows/cols [t0, t1) into
// y. Row decay products are rebuilt per row from the diagonal outward, so
// zero decays are exact and no log-space tricks are needed.
template <class Real>
void masked_block_accumulate(const Real* a, const Real* B, const Real* C,
                             const Real* V, int64_t S, int64_t P, int64_t t0,
                             int64_t t1, std::vector<double>& lrow, Real* y) {
  for (int64_t i = t0; i < t1; ++i) {
    lrow[static_cast<size_t>(i - t0)] = 1.0;  // L_ii
    for (int64_t j = i - 1; j >= t0; --j)
      lrow[static_cast<size_t>(j - t0)] =
          lrow[static_cast<size_t>(j - t0 + 1)] * static_cast<double>(a[j + 1]);
    Real* yrow = y + i * P;
    for (int64_t j = t0; j <= i; ++j) {
      double dot = 0.0;
      const Real* ci = C + i * S;
      const Real* bj = B + j * S;
      for (int64_t s = 0; s < S; ++s)
        dot += static_cast<double>(ci[s]) * static_cast<double>(bj[s]);
      double coeff = lrow[static_cast<size_t>(j - t0)] * dot;
      if (coeff == 0.0) continue;
      const Real* vj = V + j * P;
      for (int64_t p = 0; p < P; ++p)
        yrow[p] = static_cast<Real>(static_cast<double>(yrow[p]) +
                                    coeff * static_cast<double>(vj[p]));
    }
  }
}

}  // namespace

template <class Real>
std::vector<Real> scan_linear(const Real* a, const Real* B, const Real* C,
                              const Real* V, int64_t T, int64_t S, int64_t P) {
  std::vector<Real> y(static_cast<size_t>(T * P), Real(0));
  std::vector<double> h(static_cast<size_t>(S * P), 0.0);
  for (int64_t t = 0; t < T; ++t) {
    double at = static_cast<double>(a[t]);
    const Real* vt = V + t * P;
    for (int64_t s = 0; s < S; ++s) {
      double bs = static_cast<double>(B[t * S + s]);
      double* hrow = h.data() + s * P;
      for (int64_t p = 0; p < P; ++p)
        hrow[p] = at * hrow[p] + bs * static_cast<double>(vt[p]);
    }
    Real* yrow = y.data() + t * P;
    for (int64_t p = 0; p < P; ++p) {
      double acc = 0.0;
      for (int64_t s = 0; s < S; ++s)
        acc += static_cast<double>(C[t * S + s]) * h[s * P + p];
      yrow[p] = static_cast<Real>(acc);
    }
  }
  return y;
}

template <class Real>
std::vector<Real> attention_quadratic(const Real* a, const Real* B, const Real* C,
                                      const Real* V, int64_t T, int64_t S,
                                      int64_t P) {
  // Explicit T×T masked score matrix — this buffer is the point of the
  // quadratic form's memory profile.
  std::vector<Real> scores(static_cast<size_t>(T) * static_cast<size_t>(T), Real(0));
  std::vector<double> lrow(static_cast<size_t>(T));
  for (int64_t i = 0; i < T; ++i) {
    lrow[static_cast<size_t>(i)] = 1.0;
    for (int64_t j = i - 1; j >= 0; --j)
      lrow[static_cast<size_t>(j)] =
          lrow[static_cast<size_t>(j + 1)] * static_cast<double>(a[j + 1]);
    Real* srow = scores.data() + static_cast<size_t>(i) * static_cast<size_t>(T);
    const Real* ci = C + i * S;
    for (int64_t j = 0; j <= i; ++j) {
      double dot = 0.0;
      const Real* bj = B + j * S;
      for (int64_t s = 0; s < S; ++s)
        dot += static_cast<double>(ci[s]) * static_cast<double>(bj[s]);
      srow[j] = static_cast<Real>(lrow[static_cast<size_t>(j)] * dot);
    }
  }
  std::vector<Real> y(static_cast<size_t>(T * P), Real(0));
  for (int64_t i = 0; i < T; ++i) {
    const Real* srow = scores.data() + static_cast<size_t>(i) * static_cast<size_t>(T);
    Real* yrow = y.data() + i * P;
    for (int64_t j = 0; j <= i; ++j) {
      double coeff = static_cast<double>(srow[j]);
      if (coeff == 0.0) continue;
      const Real* vj = V + j * P;
      for (int64_t p = 0; p < P; ++p)
        yrow[p] = static_cast<Real>(static_cast<double>(yrow[p]) +
                                    coeff * static_cast<double>(vj[p]));
    }
  }
  return y;
}

template <class Real>
std::vector<Real> scan_chunked(const Real* a, const Real* B, const Real* C,
                               const Real* V, int64_t T, int64_t S, int64_t P,
                               int64_t chunk) {
  std::vector<Real> y(static_cast<size_t>(T * P), Real(0));
  std::vector<double> state(static_cast<size_t>(S * P), 0.0);
  std::vector<double> lrow(static_cast<size_t>(chunk));
  for (int64_t t0 = 0; t0 < T; t0 += chunk) {
    int64_t t1 = std::min(t0 + chunk, T);
    masked_block_accumulate(a, B, C, V, S, P, t0, t1, lrow, y.data());
    if (t0 > 0) {
      // Carried-state contribution: y_t += (a_{t0} ... a_t) * C_t^T H.
      double w = 1.0;
      for (int64_t t = t0; t < t1; ++t) {
        w *= static_cast<double>(a[t]);
        if (w == 0.0) break;
        Real* yrow = y.data() + t * P;
        for (int64_t p = 0; p < P; ++p) {
          double acc = 0.0;
          for (int64_t s = 0; s < S; ++s)
            acc += static_cast<double>(C[t * S + s]) * state[s * P + p];
          yrow[p] = static_cast<Real>(static_cast<double>(yrow[p]) + w * acc);
        }
      }
    }
    // H <- (prod of chunk decays) H + sum_j (decays after j) b_j v_j^T,
    // evaluated as a mini scan restricted to the chunk.
    double decay = 1.0;
    for (int64_t t = t0; t < t1; ++t) decay *= static_cast<double>(a[t]);
    std::vector<double> hb(static_cast<size_t>(S * P), 0.0);
    for (int64_t t = t0; t < t1; ++t) {
      double at = static_cast<double>(a[t]);
      const Real* vt = V + t * P;
      for (int64_t s = 0; s < S; ++s) {
        double bs = static_cast<double>(B[t * S + s]);
        double* hrow = hb.data() + s * P;
        for (int64_t p = 0; p < P; ++p)
          hrow[p] = at * hrow[p] + bs * static_cast<double>(vt[p]);
      }
    }
    for (int64_t i = 0; i < S * P; ++i) state[i] = decay * state[i] + hb[i];
  }
  return y;
}

template std::vector<double> scan_linear<double>(const double*, const double*,
                                                 const double*, const double*,
                                                 int64_t, int64_t, int64_t);
template std::vector<float> scan_linear<float>(const float*, const float*,
                                               const float*, const float*, int64_t,
                                               int64_t, int64_t);
template std::vector<double> attention_quadratic<double>(const double*, const double*,
                                                         const double*, const double*,
                                                         int64_t, int64_t, int64_t);
template std::vector<float> attention_quadratic<float>(const float*, const float*,
                                                       const float*, const float*,
                                                       int64_t, int64_t, int64_t);
template std::vector<double> scan_chunked<double>(const double*, const double*,
                                                  const double*, const double*,
                                                  int64_t, int64_t, int64_t, int64_t);
template std::vector<float> scan_chunked<float>(const float*, const float*,
                                                const float*, const float*, int64_t,
                                                int64_t, int64_t, int64_t);

}  // namespace raw

int64_t Mamba2Config::heads() const {
  if (n_heads > 0) return n_heads;
  int64_t di = d_inner();
  if (di >= 64 && di % 64 == 0) return di / 64;
  return 1;
}

void Mamba2Config::validate() const {
  if (d_model < 1) throw std::invalid_argument("Mamba2Config: d_model must be >= 1");
  if (expand < 1) throw std::invalid_argument("Mamba2Config: expand must be >= 1");
  if (conv_width < 1)
    throw std::invalid_argument("Mamba2Config: conv_width must be >= 1");
  if (d_state < 1) throw std::invalid_argument("Mamba2Config: d_state must be >= 1");
  if (d_inner() % heads() != 0)
    throw std::invalid_argument("Mamba2Config: expand*d_model not divisible by n_heads");
}

Mamba2Block::Mamba2Block(const Mamba2Config& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int64_t d = cfg_.d_model, di = cfg_.d_inner(), S = cfg_.d_state, H = cfg_.heads();
  in_proj_ = Linear(d, di, rng);
  gate_proj_ = Linear(d, di, rng);
  b_proj_ = Linear(d, S, rng);
  c_proj_ = Linear(d, S, rng);
  dt_proj_ = Linear(d, H, rng);
  out_proj_ = Linear(di, d, rng);
  conv_w_ = uniform_init({cfg_.conv_width, di}, cfg_.conv_width, rng);
  conv_b_ = uniform_init({di}, cfg_.conv_width, rng);
  // Step-size bias so initial dt = softplus(bias) lands in [1e-3, 1e-1];
  // decay A_h uniform in [1, 16].
  for (int64_t h = 0; h < H; ++h) {
    double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    dt_proj_.b.data()[h] = std::log(std::expm1(dt));
  }
  a_log_ = Tensor({H});
  for (int64_t h = 0; h < H; ++h) a_log_.data()[h] = std::log(rng.uniform(1.0, 16.0));
}

Tensor Mamba2Block::forward(const Tensor& x, Tape* tape, ScanForm form) const {
  if (x.rank() != 2 || x.dim(1) != cfg_.d_model)
    throw std::invalid_argument("Mamba2Block: input must be T×d_model");
  if (tape && form != ScanForm::kLinear)
    throw std::invalid_argument("Mamba2Block: only the linear scan is differentiable");
  x.require_finite("Mamba2Block input");
  int64_t H = cfg_.heads(), P = cfg_.d_head();

  Tensor u = conv1d_depthwise_causal(in_proj_.forward(x, tape), conv_w_, tape);
  u = add_rowvec(u, conv_b_, tape);
  u = silu(u, tape);
  Tensor dt = softplus(dt_proj_.forward(x, tape), tape);      // T×H, >= 0
  Tensor a_head = exp(a_log_, tape);                          // [H], > 0
  Tensor decay = exp(scale(mul_rowvec(dt, a_head, tape), -1.0, tape), tape);
  Tensor bm = b_proj_.forward(x, tape);
  Tensor cm = c_proj_.forward(x, tape);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<size_t>(H));
  for (int64_t h = 0; h < H; ++h) {
    Tensor vh = slice_cols(u, h * P, (h + 1) * P, tape);
    Tensor ah = slice_cols(decay, h, h + 1, tape);
    if (form == ScanForm::kLinear) {
      head_outputs.push_back(ssd_scan(ah, bm, cm, vh, tape));
    } else {
      SSDParams p{ah, bm, cm};
      head_outputs.push_back(form == ScanForm::kQuadratic
                                 ? smasked_attention_quadratic(p, vh)
                                 : ssm_scan_chunked(p, vh));
    }
  }
  Tensor y = H == 1 ? head_outputs[0] : concat_cols(head_outputs, tape);
  y = mul(y, silu(gate_proj_.forward(x, tape), tape), tape);
  Tensor out = out_proj_.forward(y, tape);
  out.require_finite("Mamba2Block output");
  return out;
}

Tensor Mamba2Block::decays(const Tensor& x) const {
  Tensor dt = softplus(dt_proj_.forward(x));
  Tensor a_head = exp(a_log_);
  return exp(scale(mul_rowvec(dt, a_head), -1.0));
}

void Mamba2Block::collect_params(const std::string& prefix, ParamRegistry& reg) {
  reg.add(prefix + ".in_proj.w", in_proj_.w);
  reg.add(prefix + ".in_proj.b", in_proj_.b);
  reg.add(prefix + ".gate_proj.w", gate_proj_.w);
  reg.add(prefix + ".gate_proj.b", gate_proj_.b);
  reg.add(prefix + ".conv.w", conv_w_);
  reg.add(prefix + ".conv.b", conv_b_);
  reg.add(prefix + ".b_proj.w", b_proj_.w);
  reg.add(prefix + ".b_proj.b", b_proj_.b);
  reg.add(prefix + ".c_proj.w", c_proj_.w);
  reg.add(prefix + ".c_proj.b", c_proj_.b);
  reg.add(prefix + ".dt_proj.w", dt_proj_.w);
  reg.add(prefix + ".dt_proj.b", dt_proj_.b);
  reg.add(prefix + ".a_log", a_log_);
  reg.add(prefix + ".out_proj.w", out_proj_.w);
  reg.add(prefix + ".out_proj.b", out_proj_.b);
}

int64_t Mamba2Block::param_count(const Mamba2Config& cfg) {
  int64_t d = cfg.d_model, di = cfg.d_inner(), S = cfg.d_state, H = cfg.heads();
  int64_t n = 0;
  n += d * di + di;              // in_proj
  n += d * di + di;              // gate_proj
  n += cfg.conv_width * di + di; // depthwise conv + bias
  n += 2 * (d * S + S);          // b_proj, c_proj
  n += d * H + H;                // dt_proj
  n += H;                        // a_log
  n += di * d + d;               // out_proj
  return n;
}

}  // namespace dim
