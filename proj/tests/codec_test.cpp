#include <cmath>

#include "dim/codec.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace dim;
using dimtest::max_abs_diff;
using dimtest::random_tensor;

TEST_CASE("encoder with a center-tap kernel is a per-frame projection") {
  Rng rng(41);
  GestureCodec codec(5, 8, rng);
  ParamRegistry reg;
  codec.collect_params("c", reg);
  Tensor& enc_w = reg.find("c.enc.w");
  Tensor& enc_b = reg.find("c.enc.b");
  Tensor proj = random_tensor({5, 8}, rng);
  for (int64_t k = 0; k < 3; ++k)
    for (int64_t ci = 0; ci < 5; ++ci)
      for (int64_t co = 0; co < 8; ++co)
        enc_w(k, ci, co) = k == 1 ? proj(ci, co) : 0.0;

  Tensor y = random_tensor({9, 5}, rng);
  Tensor h = codec.encode(y);
  Tensor expected = add_rowvec(matmul(y, proj), enc_b);
  CHECK(max_abs_diff(h, expected) < 1e-12);
  CHECK(h.dim(0) == 9);  // same padding keeps T
}

TEST_CASE("encoder locality is exactly one frame each way") {
  Rng rng(42);
  GestureCodec codec(4, 6, rng);
  Tensor y = random_tensor({12, 4}, rng);
  Tensor h = codec.encode(y);
  Tensor y2 = y.clone();
  y2(6, 2) += 1.0;
  Tensor h2 = codec.encode(y2);
  for (int64_t t = 0; t < 12; ++t) {
    bool may_change = t >= 5 && t <= 7;
    bool changed = false;
    for (int64_t c = 0; c < 6; ++c) changed |= h(t, c) != h2(t, c);
    if (!may_change) CHECK_FALSE(changed);
  }
}

TEST_CASE("decoder is pointwise, bias-free by default") {
  Rng rng(43);
  GestureCodec codec(4, 6, rng);
  Tensor zero_h = Tensor::zeros({7, 6});
  Tensor eps = codec.decode(zero_h);
  CHECK(eps.dim(1) == 4);
  for (int64_t i = 0; i < eps.numel(); ++i) CHECK(eps.data()[i] == 0.0);

  Tensor h = random_tensor({7, 6}, rng);
  Tensor d1 = codec.decode(h);
  Tensor h2 = h.clone();
  h2(3, 1) += 0.7;
  Tensor d2 = codec.decode(h2);
  for (int64_t t = 0; t < 7; ++t) {
    bool changed = false;
    for (int64_t c = 0; c < 4; ++c) changed |= d1(t, c) != d2(t, c);
    CHECK(changed == (t == 3));
  }
}

TEST_CASE("channel count round trip and frame locality of the composition") {
  Rng rng(44);
  for (int64_t joints : {3, 11}) {
    int64_t channels = 3 * joints + 6;
    GestureCodec codec(channels, 10, rng);
    Tensor y = random_tensor({8, channels}, rng);
    Tensor out = codec.decode(codec.encode(y));
    CHECK(out.dim(1) == channels);
    Tensor y2 = y.clone();
    y2(4, 0) += 1.0;
    Tensor out2 = codec.decode(codec.encode(y2));
    for (int64_t t = 0; t < 8; ++t) {
      bool may_change = t >= 3 && t <= 5;
      if (may_change) continue;
      for (int64_t c = 0; c < channels; ++c) CHECK(out(t, c) == out2(t, c));
    }
  }
}

TEST_CASE("the paper-scale layout: 59 joints give 183 channels, 20 s gives 400 frames") {
  CHECK(59 * 3 + 6 == 183);
  CHECK(static_cast<int64_t>(20.0 * 20.0) == 400);
  Rng rng(45);
  GestureCodec codec(183, 16, rng);
  Tensor y = random_tensor({400, 183}, rng);
  Tensor h = codec.encode(y);
  CHECK(h.dim(0) == 400);
  CHECK(codec.decode(h).dim(1) == 183);
}

TEST_CASE("encoder gradients pass finite differences") {
  Rng rng(46);
  GestureCodec codec(3, 4, rng);
  Tensor y = random_tensor({6, 3}, rng);
  Tensor w = random_tensor({6, 3}, rng);
  auto rep = dimtest::fd_check(
      [&](Tape* t) {
        return sum(mul(codec.decode(codec.encode(y, t), t), w, t), t);
      },
      {y});
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("channel statistics normalize and invert") {
  Rng rng(47);
  std::vector<GestureSequence> clips;
  for (int i = 0; i < 3; ++i) {
    GestureSequence g;
    g.values = random_tensor({20, 9}, rng, -3, 7);
    clips.push_back(g);
  }
  ChannelStats st = ChannelStats::fit(clips);
  Tensor z = st.normalize(clips[0].values);
  CHECK(max_abs_diff(st.denormalize(z), clips[0].values) < 1e-10);

  // Pooled statistics: normalized pooled mean ~0, std ~1 per channel.
  for (int64_t c = 0; c < 9; ++c) {
    double mean = 0;
    int64_t n = 0;
    for (const auto& g : clips) {
      Tensor zn = st.normalize(g.values);
      for (int64_t t = 0; t < zn.dim(0); ++t, ++n) mean += zn(t, c);
    }
    CHECK(std::abs(mean / static_cast<double>(n)) < 1e-10);
  }
}
