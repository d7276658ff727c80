#include <cmath>

#include "dim/metrics.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace dim;
using dimtest::random_tensor;

namespace {

GaussianSummary gaussian_1d(double mean, double var) {
  GaussianSummary g;
  g.mean = {mean};
  g.cov = {var};
  g.count = 1000;
  return g;
}

std::vector<GestureSequence> synthetic_set(int64_t clips, int64_t frames,
                                           int64_t channels, Rng& rng,
                                           double jitter = 0.0) {
  // Correlated sinusoid family plus optional additive noise.
  std::vector<GestureSequence> out;
  for (int64_t k = 0; k < clips; ++k) {
    GestureSequence g;
    g.fps = 20;
    g.values = Tensor({frames, channels});
    double phase = rng.uniform(0, 2 * M_PI);
    for (int64_t t = 0; t < frames; ++t)
      for (int64_t c = 0; c < channels; ++c) {
        double base = std::sin(2 * M_PI * 0.8 * static_cast<double>(t) / 20.0 +
                               phase + 0.3 * static_cast<double>(c));
        g.values(t, c) = base + jitter * rng.normal();
      }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

TEST_CASE("frechet distance closed forms") {
  CHECK(frechet_distance(gaussian_1d(0, 1), gaussian_1d(0, 1)) ==
        doctest::Approx(0.0).epsilon(1e-8));
  CHECK(frechet_distance(gaussian_1d(0, 1), gaussian_1d(1, 1)) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(frechet_distance(gaussian_1d(0, 1), gaussian_1d(0, 4)) ==
        doctest::Approx(1.0).epsilon(1e-8));
  GaussianSummary a = gaussian_1d(0, 1);
  GaussianSummary b;
  b.mean = {0, 0};
  b.cov = {1, 0, 0, 1};
  CHECK_THROWS(frechet_distance(a, b));
}

TEST_CASE("frechet distance symmetry and non-negativity") {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianSummary p = GaussianSummary::fit(random_tensor({30, 4}, rng), 1e-8);
    GaussianSummary q = GaussianSummary::fit(random_tensor({25, 4}, rng, 0, 2), 1e-8);
    double pq = frechet_distance(p, q);
    double qp = frechet_distance(q, p);
    CHECK(pq >= -1e-10);
    CHECK(std::abs(pq - qp) < 1e-8 * std::max(1.0, pq));
    CHECK(frechet_distance(p, p) < 1e-8);
  }
}

TEST_CASE("raw-space gesture distance: identity, ordering, permutation invariance") {
  Rng rng(82);
  std::vector<GestureSequence> ref = synthetic_set(6, 40, 9, rng);
  CHECK(fgd_raw(ref, ref) == doctest::Approx(0.0).epsilon(1e-8));

  std::vector<GestureSequence> half_a(ref.begin(), ref.begin() + 3);
  std::vector<GestureSequence> half_b(ref.begin() + 3, ref.end());
  std::vector<GestureSequence> noise;
  for (int k = 0; k < 3; ++k) {
    GestureSequence g;
    g.fps = 20;
    g.values = random_tensor({40, 9}, rng, -3, 3);
    noise.push_back(std::move(g));
  }
  double self_split = fgd_raw(half_a, half_b);
  double vs_noise = fgd_raw(noise, half_b);
  CHECK(self_split < vs_noise);

  std::vector<GestureSequence> shuffled = {ref[4], ref[0], ref[5],
                                           ref[2], ref[1], ref[3]};
  CHECK(std::abs(fgd_raw(shuffled, ref) - fgd_raw(ref, ref)) < 1e-8);

  std::vector<GestureSequence> one(ref.begin(), ref.begin() + 1);
  CHECK_THROWS(fgd_raw(one, ref));
}

TEST_CASE("feature-space distance with a trained embedder") {
  Rng rng(83);
  std::vector<GestureSequence> ref = synthetic_set(6, 40, 9, rng, 0.05);
  MotionEmbedder emb(9, 6, rng);
  CHECK_THROWS(fgd_feature(ref, ref, emb));  // untrained rejected

  emb.train(ref, 60, 1e-2, rng);
  CHECK(emb.trained());
  CHECK(fgd_feature(ref, ref, emb) == doctest::Approx(0.0).epsilon(1e-8));

  // Monotone with raw-space corruption level.
  double prev = 0.0;
  for (double sigma : {0.2, 0.8, 2.0}) {
    Rng nrng(99);
    std::vector<GestureSequence> noisy;
    for (const auto& g : ref) {
      GestureSequence c;
      c.fps = g.fps;
      c.values = g.values.clone();
      for (int64_t i = 0; i < c.values.numel(); ++i)
        c.values.data()[i] += sigma * nrng.normal();
      noisy.push_back(std::move(c));
    }
    double score = fgd_feature(noisy, ref, emb);
    CHECK(score > prev);
    prev = score;
  }

  // Deterministic given the checkpoint.
  std::string path = "/tmp/dim_embedder_test.params";
  emb.save(path);
  MotionEmbedder emb2 = MotionEmbedder::load(path);
  CHECK(emb2.trained());
  CHECK(emb2.id() == emb.id());
  CHECK(fgd_feature(ref, ref, emb2) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("audio beat detection on a metronome") {
  // Clicks at 1, 2, 3, 4 s in 5 s of audio.
  AudioClip a;
  a.rate = 16000;
  a.samples.assign(5 * 16000, 0.0);
  Rng rng(84);
  for (int click = 1; click <= 4; ++click) {
    size_t start = static_cast<size_t>(click * 16000);
    for (size_t i = 0; i < 160; ++i)
      a.samples[start + i] = 0.8 * std::sin(2 * M_PI * 2000.0 *
                                            static_cast<double>(i) / 16000.0);
  }
  BeatSet beats = detect_audio_beats(a);
  REQUIRE(beats.times.size() == 4);
  for (size_t i = 0; i < beats.times.size(); ++i)
    CHECK(std::abs(beats.times[i] - static_cast<double>(i + 1)) <= 0.02);

  // Doubling the amplitude moves nothing: the threshold is adaptive.
  AudioClip loud = a;
  for (auto& s : loud.samples) s = std::min(1.0, 2.0 * s);
  BeatSet beats2 = detect_audio_beats(loud);
  REQUIRE(beats2.times.size() == beats.times.size());
  for (size_t i = 0; i < beats.times.size(); ++i)
    CHECK(beats2.times[i] == doctest::Approx(beats.times[i]));

  AudioClip silence;
  silence.rate = 16000;
  silence.samples.assign(16000, 0.0);
  CHECK(detect_audio_beats(silence).times.empty());
}

TEST_CASE("gesture beat detection on synthetic motion") {
  // Constant-velocity ramp: no speed minima, no beats.
  GestureSequence ramp;
  ramp.fps = 20;
  ramp.values = Tensor({80, 9});
  for (int64_t t = 0; t < 80; ++t)
    for (int64_t c = 0; c < 9; ++c)
      ramp.values(t, c) = 0.1 * static_cast<double>(t);
  CHECK(detect_gesture_beats(ramp).times.empty());

  // A 1 Hz oscillation has two velocity minima per period.
  GestureSequence wave;
  wave.fps = 20;
  wave.values = Tensor({120, 9});
  for (int64_t t = 0; t < 120; ++t)
    wave.values(t, 0) = std::sin(2 * M_PI * 1.0 * static_cast<double>(t) / 20.0);
  BeatSet wb = detect_gesture_beats(wave);
  double seconds = 120.0 / 20.0;
  double rate = static_cast<double>(wb.times.size()) / seconds;
  CHECK(rate == doctest::Approx(2.0).epsilon(0.5));

  // Time-shifting the motion shifts the beats by the same offset.
  double shift = 0.35;
  GestureSequence shifted;
  shifted.fps = 20;
  shifted.values = Tensor({120, 9});
  for (int64_t t = 0; t < 120; ++t)
    shifted.values(t, 0) =
        std::sin(2 * M_PI * (static_cast<double>(t) / 20.0 - shift));
  BeatSet sb = detect_gesture_beats(shifted);
  int matched = 0;
  for (double b : wb.times) {
    for (double s : sb.times)
      if (std::abs(s - (b + shift)) < 0.051) {
        ++matched;
        break;
      }
  }
  CHECK(matched >= static_cast<int>(wb.times.size()) - 2);

  GestureSequence tiny;
  tiny.fps = 20;
  tiny.values = Tensor({2, 9});
  CHECK_THROWS(detect_gesture_beats(tiny));
}

TEST_CASE("beat alignment closed forms and jitter response") {
  BeatSet a;
  a.times = {0.5, 1.5, 2.5, 3.5};
  CHECK(beat_align(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  BeatSet off;
  for (double t : a.times) off.times.push_back(t + 0.1);
  CHECK(beat_align(off, a, 0.1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));

  BeatSet empty;
  CHECK(beat_align(empty, a) == 0.0);
  CHECK(beat_align(a, empty) == 0.0);
  CHECK_THROWS(beat_align(a, a, 0.0));

  // Score degrades monotonically as jitter grows.
  Rng rng(85);
  BeatSet audio;
  for (int i = 0; i < 200; ++i) audio.times.push_back(0.5 * (i + 1));
  double prev = 1.1;
  for (double jitter : {0.0, 0.05, 0.15, 0.4}) {
    BeatSet g;
    for (double t : audio.times) g.times.push_back(t + jitter * rng.uniform(-1, 1));
    std::sort(g.times.begin(), g.times.end());
    double score = beat_align(g, audio);
    CHECK(score <= prev + 1e-12);
    CHECK(score >= 0.0);
    CHECK(score <= 1.0);
    prev = score;
  }
}
