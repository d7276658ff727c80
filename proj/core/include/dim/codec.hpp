#pragma once

#include <string>

#include "dim/gesture.hpp"
#include "dim/nn.hpp"

namespace dim {

// Gesture encoder/decoder framing the sequence stack. The encoder is a
// same-padded width-3 convolution (reflect padding, so clip edges see no
// artificial zero-velocity frames); the decoder is a pointwise linear map
// producing the predicted noise, bias disabled by default.
class GestureCodec {
 public:
  GestureCodec() = default;
  GestureCodec(int64_t channels, int64_t d_model, Rng& rng, bool decoder_bias = false);

  Tensor encode(const Tensor& y, Tape* tape = nullptr) const;  // T×C -> T×d_model
  Tensor decode(const Tensor& h, Tape* tape = nullptr) const;  // T×d_model -> T×C

  int64_t channels() const { return enc_w_.dim(1); }
  int64_t d_model() const { return enc_w_.dim(2); }
  void collect_params(const std::string& prefix, ParamRegistry& reg);
  static int64_t param_count(int64_t channels, int64_t d_model, bool decoder_bias = false);

 private:
  Tensor enc_w_;  // 3 × channels × d_model
  Tensor enc_b_;  // [d_model]
  Linear dec_;    // d_model -> channels
};

}  // namespace dim
