#include <algorithm>
#include <cmath>
#include <cstring>

#include "dim/condition.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace dim;
using dimtest::max_abs_diff;
using dimtest::random_tensor;
using dimtest::sine_audio;

namespace {

ConditionConfig small_condition_config() {
  ConditionConfig cfg;
  cfg.d_audio = 6;
  cfg.d_cond = 8;
  cfg.smooth_kernel = 9;
  cfg.n_steps = 50;
  cfg.style_block.d_state = 4;
  cfg.style_block.n_heads = 2;
  cfg.style_block.conv_width = 2;
  return cfg;
}

LocalFeatureSequence random_features(int64_t frames, int64_t d, Rng& rng,
                                     double rate = 50.0) {
  LocalFeatureSequence f;
  f.features = random_tensor({frames, d}, rng);
  f.rate_hz = rate;
  return f;
}

}  // namespace

TEST_CASE("log-mel frame arithmetic and silence floor") {
  LogMelProvider mel;  // 80 bands, 25 ms window, 20 ms hop at 16 kHz
  CHECK(mel.rate_hz() == doctest::Approx(50.0));

  AudioClip one_second = sine_audio(1.0, 440.0);
  LocalFeatureSequence f = mel.features(one_second);
  CHECK(f.feature_dim() == 80);
  CHECK(std::abs(f.frame_count() - 50) <= 1);

  AudioClip silence;
  silence.rate = 16000;
  silence.samples.assign(16000, 0.0);
  LocalFeatureSequence fs = mel.features(silence);
  double floor_val = std::log(1e-10);
  for (int64_t t = 0; t < fs.frame_count(); ++t)
    for (int64_t m = 0; m < fs.feature_dim(); ++m)
      CHECK(fs.features(t, m) == doctest::Approx(floor_val));

  AudioClip empty;
  empty.rate = 16000;
  CHECK_THROWS(mel.features(empty));
  AudioClip wrong_rate = sine_audio(1.0, 440.0, 22050.0);
  CHECK_THROWS(mel.features(wrong_rate));
}

TEST_CASE("file-backed features round trip bit-exactly") {
  Rng rng(51);
  LocalFeatureSequence f = random_features(37, 12, rng, 50.0);
  std::string path = "/tmp/dim_feats_test.dimt";
  save_features(path, f, "unit-test");
  FeatureFileProvider provider(path);
  AudioClip ignored;
  ignored.rate = 16000;
  ignored.samples.assign(100, 0.0);
  LocalFeatureSequence back = provider.features(ignored);
  CHECK(back.rate_hz == doctest::Approx(50.0));
  REQUIRE(back.features.shape() == f.features.shape());
  CHECK(std::memcmp(back.features.data(), f.features.data(),
                    sizeof(double) * static_cast<size_t>(f.features.numel())) == 0);
}

TEST_CASE("global style token: degenerate scan and history dependence") {
  Rng rng(52);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);

  LocalFeatureSequence one = random_features(1, cfg.d_audio, rng);
  StyleToken tok = ex.global_style(one);
  CHECK(tok.dims() == cfg.d_audio);
  Tensor direct = ex.style_block().forward(one.features);
  CHECK(max_abs_diff(tok.z, direct) == 0.0);

  LocalFeatureSequence seq = random_features(20, cfg.d_audio, rng);
  StyleToken base = ex.global_style(seq);
  LocalFeatureSequence seq2 = seq;
  seq2.features = seq.features.clone();
  seq2.features(0, 3) += 1.0;  // first frame reaches the last token
  StyleToken moved = ex.global_style(seq2);
  CHECK(max_abs_diff(base.z, moved.z) > 0);

  LocalFeatureSequence empty;
  empty.features = Tensor({1, cfg.d_audio});
  empty.rate_hz = 50;
  CHECK_NOTHROW(ex.global_style(empty));
}

TEST_CASE("time-reversed audio changes the style token") {
  Rng rng(53);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);
  LocalFeatureSequence seq = random_features(24, cfg.d_audio, rng);
  LocalFeatureSequence rev = seq;
  rev.features = Tensor({24, cfg.d_audio});
  for (int64_t t = 0; t < 24; ++t)
    for (int64_t c = 0; c < cfg.d_audio; ++c)
      rev.features(t, c) = seq.features(23 - t, c);
  CHECK(max_abs_diff(ex.global_style(seq).z, ex.global_style(rev).z) > 1e-12);
}

TEST_CASE("broadcast and fuse") {
  Rng rng(54);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);
  LocalFeatureSequence zx = random_features(10, cfg.d_audio, rng);

  // Zero style token: output equals the projection of [Z_x || 0].
  StyleToken zero;
  zero.z = Tensor::zeros({1, cfg.d_audio});
  Tensor fused = ex.broadcast_and_fuse(zx, zero);
  Tensor cat = concat_cols({zx.features, Tensor::zeros({10, cfg.d_audio})});
  CHECK(max_abs_diff(fused, ex.fuse_layer().forward(cat)) < 1e-14);
  CHECK(fused.dim(1) == cfg.d_cond);

  // Identical local rows and one style token give identical fused rows.
  LocalFeatureSequence flat = zx;
  flat.features = Tensor::full({10, cfg.d_audio}, 0.3);
  StyleToken tok = ex.global_style(zx);
  Tensor fused2 = ex.broadcast_and_fuse(flat, tok);
  for (int64_t t = 1; t < 10; ++t)
    for (int64_t c = 0; c < cfg.d_cond; ++c)
      CHECK(fused2(t, c) == doctest::Approx(fused2(0, c)));

  // Projection gradient.
  Tensor w = random_tensor({10, cfg.d_cond}, rng);
  Tensor feats = zx.features;
  auto rep = dimtest::fd_check(
      [&](Tape* t) {
        LocalFeatureSequence z;
        z.features = feats;
        z.rate_hz = 50;
        StyleToken tok2;
        tok2.z = slice_rows(feats, 9, 10, t);
        return sum(mul(ex.broadcast_and_fuse(z, tok2, t), w, t), t);
      },
      {feats});
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("downsample to gesture rate: identity, constants, lengths") {
  Rng rng(55);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);

  // Equal lengths with the delta-initialized kernel: exact identity.
  Tensor same = random_tensor({40, cfg.d_cond}, rng);
  CHECK(max_abs_diff(ex.downsample_to_gesture_rate(same, 40), same) == 0.0);

  // Constant input stays constant (unit kernel mass, reflect padding).
  Tensor constant = Tensor::full({100, cfg.d_cond}, 1.7);
  Tensor down = ex.downsample_to_gesture_rate(constant, 40);
  CHECK(down.dim(0) == 40);
  for (int64_t i = 0; i < down.numel(); ++i)
    CHECK(down.data()[i] == doctest::Approx(1.7));

  for (auto [ta, t_out] : std::vector<std::pair<int64_t, int64_t>>{
           {1000, 400}, {500, 400}, {400, 400}})
    CHECK(ex.downsample_to_gesture_rate(random_tensor({ta, cfg.d_cond}, rng), t_out)
              .dim(0) == t_out);
}

TEST_CASE("timestep fusion: constants, injectivity, range checks") {
  Rng rng(56);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);

  Tensor zero_c = Tensor::zeros({12, cfg.d_cond});
  Tensor fused = ex.fuse_timestep(zero_c, 7);
  for (int64_t t = 1; t < 12; ++t)
    for (int64_t c = 0; c < cfg.d_cond; ++c)
      CHECK(fused(t, c) == doctest::Approx(fused(0, c)));
  CHECK(fused.dim(0) == 12);
  CHECK(fused.dim(1) == cfg.d_cond);

  CHECK_THROWS(ex.fuse_timestep(zero_c, 0));
  CHECK_THROWS(ex.fuse_timestep(zero_c, cfg.n_steps + 1));

  // The raw sinusoidal embedding separates every step in 1..1000.
  int64_t dim_emb = 16;
  std::vector<Tensor> embs;
  for (int64_t n = 1; n <= 1000; ++n) embs.push_back(timestep_embedding(n, dim_emb));
  double min_gap = 1e300;
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      double d = max_abs_diff(embs[i], embs[j]);
      min_gap = std::min(min_gap, d);
    }
  CHECK(min_gap > 1e-9);
}

TEST_CASE("condition pipeline end to end") {
  Rng rng(57);
  ConditionConfig cfg = small_condition_config();
  cfg.d_audio = 80;
  ConditionExtractor ex(cfg, rng);
  LogMelProvider mel;

  double seconds = 2.0;
  AudioClip audio = sine_audio(seconds, 220.0);
  LocalFeatureSequence zx = mel.features(audio);
  int64_t frames = static_cast<int64_t>(std::llround(20.0 * seconds));
  Tensor c1 = ex.condition(zx, frames, 3);
  CHECK(c1.dim(0) == 40);
  CHECK(c1.dim(1) == cfg.d_cond);

  // Timestep sensitivity across a grid of steps.
  for (int64_t n2 : {1, 2, 10, 50}) {
    if (n2 == 3) continue;
    CHECK(max_abs_diff(c1, ex.condition(zx, frames, n2)) > 0);
  }

  // Determinism: rebuild with the same seed, same audio.
  Rng rng2(57);
  ConditionExtractor ex2(cfg, rng2);
  Tensor c2 = ex2.condition(zx, frames, 3);
  CHECK(std::memcmp(c1.data(), c2.data(),
                    sizeof(double) * static_cast<size_t>(c1.numel())) == 0);
}

TEST_CASE("condition parameter count matches registry") {
  Rng rng(58);
  ConditionConfig cfg = small_condition_config();
  ConditionExtractor ex(cfg, rng);
  ParamRegistry reg;
  ex.collect_params("cond", reg);
  CHECK(reg.count() == ConditionExtractor::param_count(cfg));
}
