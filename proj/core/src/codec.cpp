#include "dim/codec.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

GestureCodec::GestureCodec(int64_t channels, int64_t d_model, Rng& rng,
                           bool decoder_bias) {
  if (channels < 1 || d_model < 1)
    throw std::invalid_argument("GestureCodec: bad dimensions");
  enc_w_ = uniform_init({3, channels, d_model}, 3 * channels, rng);
  enc_b_ = uniform_init({d_model}, 3 * channels, rng);
  dec_ = Linear(d_model, channels, rng, decoder_bias);
}

Tensor GestureCodec::encode(const Tensor& y, Tape* tape) const {
  if (y.rank() != 2 || y.dim(1) != channels())
    throw std::invalid_argument("GestureCodec::encode: channel count mismatch");
  y.require_finite("gesture encoder input");
  Tensor h = conv1d(y, enc_w_, 1, 1, PadMode::kReflect, tape);
  return add_rowvec(h, enc_b_, tape);
}

Tensor GestureCodec::decode(const Tensor& h, Tape* tape) const {
  if (h.rank() != 2 || h.dim(1) != d_model())
    throw std::invalid_argument("GestureCodec::decode: width mismatch");
  return dec_.forward(h, tape);
}

void GestureCodec::collect_params(const std::string& prefix, ParamRegistry& reg) {
  reg.add(prefix + ".enc.w", enc_w_);
  reg.add(prefix + ".enc.b", enc_b_);
  reg.add(prefix + ".dec.w", dec_.w);
  reg.add(prefix + ".dec.b", dec_.b);
}

int64_t GestureCodec::param_count(int64_t channels, int64_t d_model,
                                  bool decoder_bias) {
  int64_t n = 3 * channels * d_model + d_model + d_model * channels;
  if (decoder_bias) n += channels;
  return n;
}

ChannelStats ChannelStats::fit(const std::vector<GestureSequence>& clips) {
  if (clips.empty()) throw std::invalid_argument("ChannelStats: no clips");
  int64_t C = clips[0].channels();
  ChannelStats st;
  st.mean.assign(static_cast<size_t>(C), 0.0);
  st.stddev.assign(static_cast<size_t>(C), 0.0);
  int64_t total = 0;
  for (const auto& c : clips) {
    if (c.channels() != C)
      throw std::invalid_argument("ChannelStats: channel counts differ");
    total += c.frames();
    for (int64_t t = 0; t < c.frames(); ++t)
      for (int64_t j = 0; j < C; ++j) st.mean[static_cast<size_t>(j)] += c.values(t, j);
  }
  for (auto& m : st.mean) m /= static_cast<double>(total);
  for (const auto& c : clips)
    for (int64_t t = 0; t < c.frames(); ++t)
      for (int64_t j = 0; j < C; ++j) {
        double d = c.values(t, j) - st.mean[static_cast<size_t>(j)];
        st.stddev[static_cast<size_t>(j)] += d * d;
      }
  for (auto& s : st.stddev) s = std::max(std::sqrt(s / static_cast<double>(total)), 1e-8);
  return st;
}

Tensor ChannelStats::normalize(const Tensor& y) const {
  int64_t T = y.dim(0), C = y.dim(1);
  if (C != static_cast<int64_t>(mean.size()))
    throw std::invalid_argument("ChannelStats::normalize: channel mismatch");
  Tensor out({T, C});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = 0; j < C; ++j)
      out(t, j) = (y(t, j) - mean[static_cast<size_t>(j)]) / stddev[static_cast<size_t>(j)];
  return out;
}

Tensor ChannelStats::denormalize(const Tensor& y) const {
  int64_t T = y.dim(0), C = y.dim(1);
  if (C != static_cast<int64_t>(mean.size()))
    throw std::invalid_argument("ChannelStats::denormalize: channel mismatch");
  Tensor out({T, C});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t j = 0; j < C; ++j)
      out(t, j) = y(t, j) * stddev[static_cast<size_t>(j)] + mean[static_cast<size_t>(j)];
  return out;
}

}  // namespace dim
