#include <cmath>
#include <cstring>

#include "dim/diffusion.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace dim;
using dimtest::max_abs_diff;
using dimtest::random_tensor;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.n_steps = 40;
  cfg.beta1 = 1e-4;
  cfg.betaN = 8e-2;
  cfg.n_blocks = 1;
  cfg.d_model = 8;
  cfg.d_state = 4;
  cfg.conv_width = 2;
  cfg.expand = 2;
  cfg.n_heads = 2;
  cfg.joint_channels = 9;  // one joint + root velocities
  cfg.d_audio = 6;
  cfg.style_d_state = 4;
  cfg.smooth_kernel = 5;
  cfg.seed = 7;
  return cfg;
}

LocalFeatureSequence tiny_features(int64_t frames, Rng& rng) {
  LocalFeatureSequence f;
  f.features = random_tensor({frames, 6}, rng);
  f.rate_hz = 50.0;
  return f;
}

}  // namespace

TEST_CASE("schedule defaults and identities") {
  DiffusionSchedule s = build_schedule(1000, 1e-4, 8e-2);
  CHECK(s.beta.front() == doctest::Approx(1e-4));
  CHECK(s.beta.back() == doctest::Approx(8e-2));
  CHECK(s.alpha_bar.front() == doctest::Approx(0.9999));
  CHECK(s.alpha_bar.back() < 1e-15);

  for (int64_t n = 1; n <= 1000; ++n) {
    CHECK(s.alpha_at(n) == 1.0 - s.beta_at(n));
    if (n > 1)
      CHECK(s.beta[static_cast<size_t>(n - 1)] > s.beta[static_cast<size_t>(n - 2)]);
    double prev_abar = n == 1 ? 1.0 : s.alpha_bar_at(n - 1);
    CHECK(std::abs(s.alpha_bar_at(n) - prev_abar * s.alpha_at(n)) < 1e-12);
    double tilde = (1.0 - prev_abar) / (1.0 - s.alpha_bar_at(n)) * s.beta_at(n);
    CHECK(std::abs(s.beta_tilde_at(n) - tilde) < 1e-12);
    CHECK(s.alpha_bar_at(n) > 0.0);
    CHECK(s.alpha_bar_at(n) < 1.0);
  }

  CHECK_THROWS(build_schedule(1, 1e-4, 8e-2));
  CHECK_THROWS(build_schedule(100, 0.0, 8e-2));
  CHECK_THROWS(build_schedule(100, 0.5, 0.1));
  CHECK_THROWS(build_schedule(100, 1e-4, 1.5));
}

TEST_CASE("forward noising closed form") {
  DiffusionSchedule s = build_schedule(1000, 1e-4, 8e-2);
  Rng rng(61);
  Tensor y0 = random_tensor({5, 4}, rng);

  Tensor zero = Tensor::zeros({5, 4});
  Tensor yn = forward_noise(y0, s, 100, zero);
  double sa = std::sqrt(s.alpha_bar_at(100));
  for (int64_t i = 0; i < y0.numel(); ++i)
    CHECK(yn.data()[i] == doctest::Approx(sa * y0.data()[i]));

  Tensor eps = random_tensor({5, 4}, rng);
  Tensor yN = forward_noise(y0, s, 1000, eps);
  for (int64_t i = 0; i < y0.numel(); ++i)
    CHECK(std::abs(yN.data()[i] - eps.data()[i]) <
          1e-7 * std::max(1.0, std::abs(eps.data()[i])));

  Tensor bad({2, 2}, {0, 0, 0, 0});
  CHECK_THROWS(forward_noise(y0, s, 100, bad));
  CHECK_THROWS(forward_noise(y0, s, 0, zero));
  CHECK_THROWS(forward_noise(y0, s, 1001, zero));
}

TEST_CASE("forward noising marginal variance matches Monte Carlo") {
  DiffusionSchedule s = build_schedule(50, 1e-3, 0.05);
  Rng rng(62);
  Tensor y0({1, 2}, {0.3, -0.7});
  int64_t n = 20;
  double expect_var = 1.0 - s.alpha_bar_at(n);
  double mean0 = std::sqrt(s.alpha_bar_at(n)) * y0(0, 0);
  int64_t draws = 10000;
  double acc = 0, acc2 = 0;
  for (int64_t d = 0; d < draws; ++d) {
    Tensor eps({1, 2}, {rng.normal(), rng.normal()});
    Tensor yn = forward_noise(y0, s, n, eps);
    acc += yn(0, 0);
    acc2 += yn(0, 0) * yn(0, 0);
  }
  double mean = acc / static_cast<double>(draws);
  double var = acc2 / static_cast<double>(draws) - mean * mean;
  CHECK(std::abs(var - expect_var) / expect_var < 0.05);
  CHECK(std::abs(mean - mean0) < 0.05);
}

TEST_CASE("stepwise kernels compose to the closed-form marginal") {
  DiffusionSchedule s = build_schedule(30, 1e-3, 0.08);
  Rng rng(63);
  Tensor y0({1, 2}, {1.1, -0.4});
  int64_t draws = 10000;
  int64_t n = 30;
  double acc = 0, acc2 = 0;
  for (int64_t d = 0; d < draws; ++d) {
    double y = y0(0, 0);
    for (int64_t k = 1; k <= n; ++k)
      y = std::sqrt(s.alpha_at(k)) * y + std::sqrt(s.beta_at(k)) * rng.normal();
    acc += y;
    acc2 += y * y;
  }
  double mean = acc / static_cast<double>(draws);
  double var = acc2 / static_cast<double>(draws) - mean * mean;
  double expect_mean = std::sqrt(s.alpha_bar_at(n)) * y0(0, 0);
  double expect_var = 1.0 - s.alpha_bar_at(n);
  CHECK(std::abs(mean - expect_mean) < 0.02 * std::max(1.0, std::abs(expect_mean)));
  CHECK(std::abs(var - expect_var) / expect_var < 0.02);
}

TEST_CASE("oracle noise predictor reconstructs the clean signal") {
  DiffusionSchedule s = build_schedule(60, 1e-4, 8e-2);
  Rng rng(64);
  Tensor y0 = random_tensor({20, 6}, rng, -1, 1);
  // Closed-loop oracle: the exact noise that connects y0 to the current state.
  NoisePredictor oracle = [&](const Tensor& yn, int64_t n) {
    double sa = std::sqrt(s.alpha_bar_at(n));
    double sn = std::sqrt(1.0 - s.alpha_bar_at(n));
    Tensor eps(yn.shape());
    for (int64_t i = 0; i < yn.numel(); ++i)
      eps.data()[i] = (yn.data()[i] - sa * y0.data()[i]) / sn;
    return eps;
  };
  Tensor out = ancestral_sample(oracle, s, {20, 6}, rng);
  double rms = 0;
  for (int64_t i = 0; i < out.numel(); ++i) {
    double d = out.data()[i] - y0.data()[i];
    rms += d * d;
  }
  rms = std::sqrt(rms / static_cast<double>(out.numel()));
  CHECK(rms < 1e-5);
}

TEST_CASE("sampler determinism, diversity, and shape contract") {
  ModelConfig cfg = tiny_model_config();
  GestureDiffusionModel model(cfg);
  Rng frng(65);
  LocalFeatureSequence speech = tiny_features(30, frng);

  Rng s1(100), s2(100), s3(101);
  Tensor a = model.sample(speech, 24, s1);
  Tensor b = model.sample(speech, 24, s2);
  Tensor c = model.sample(speech, 24, s3);
  CHECK(a.dim(0) == 24);
  CHECK(a.dim(1) == cfg.joint_channels);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.numel()) == 0);
  CHECK(max_abs_diff(a, c) > 0);
}

TEST_CASE("non-finite predictor aborts with diagnostics") {
  DiffusionSchedule s = build_schedule(10, 1e-3, 0.05);
  NoisePredictor broken = [&](const Tensor& yn, int64_t n) {
    Tensor eps(yn.shape());
    if (n < 5)
      for (int64_t i = 0; i < eps.numel(); ++i) eps.data()[i] = std::nan("");
    return eps;
  };
  Rng rng(66);
  CHECK_THROWS_WITH_AS(ancestral_sample(broken, s, {4, 3}, rng),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("training loss: seeded reproducibility and finiteness") {
  ModelConfig cfg = tiny_model_config();
  Rng frng(67);
  LocalFeatureSequence speech = tiny_features(30, frng);
  Tensor y0 = random_tensor({24, cfg.joint_channels}, frng);

  GestureDiffusionModel m1(cfg);
  GestureDiffusionModel m2(cfg);
  Rng r1(5), r2(5);
  Tape t1, t2;
  Tensor l1 = m1.training_loss(y0, speech, r1, &t1);
  Tensor l2 = m2.training_loss(y0, speech, r2, &t2);
  CHECK(l1(0) == l2(0));
  CHECK(std::isfinite(l1(0)));
  CHECK(l1(0) > 0);
}

TEST_CASE("a short optimization run reduces the loss trend") {
  ModelConfig cfg = tiny_model_config();
  GestureDiffusionModel model(cfg);
  Rng rng(68);
  LocalFeatureSequence speech = tiny_features(20, rng);
  Tensor y0 = random_tensor({16, cfg.joint_channels}, rng);

  Adam opt(model.params(), 3e-3);
  double first_avg = 0, last_avg = 0;
  int64_t steps = 60, window = 15;
  for (int64_t s = 0; s < steps; ++s) {
    Tape tape;
    model.params().zero_grads();
    Tensor loss = model.training_loss(y0, speech, rng, &tape);
    tape.backward(loss);
    opt.step();
    if (s < window) first_avg += loss(0);
    if (s >= steps - window) last_avg += loss(0);
  }
  CHECK(last_avg < first_avg);
}

TEST_CASE("model parameter table round trips through a checkpoint") {
  ModelConfig cfg = tiny_model_config();
  GestureDiffusionModel m1(cfg);
  cfg.seed = 99;  // different init
  GestureDiffusionModel m2(cfg);
  Rng frng(69);
  LocalFeatureSequence speech = tiny_features(20, frng);
  Tensor y0 = random_tensor({16, cfg.joint_channels}, frng);

  std::string path = "/tmp/dim_ckpt_test.params";
  m1.save_params(path);
  m2.load_params(path);
  Rng r1(3), r2(3);
  Tape t1, t2;
  CHECK(m1.training_loss(y0, speech, r1, &t1)(0) ==
        m2.training_loss(y0, speech, r2, &t2)(0));
  CHECK(GestureDiffusionModel::param_count(cfg) == m1.params().count());
}

TEST_CASE("model config JSON round trip") {
  ModelConfig cfg = tiny_model_config();
  std::string text = cfg.to_json();
  ModelConfig back = ModelConfig::from_json(text);
  CHECK(back.n_steps == cfg.n_steps);
  CHECK(back.beta1 == cfg.beta1);
  CHECK(back.betaN == cfg.betaN);
  CHECK(back.n_blocks == cfg.n_blocks);
  CHECK(back.d_model == cfg.d_model);
  CHECK(back.d_state == cfg.d_state);
  CHECK(back.conv_width == cfg.conv_width);
  CHECK(back.expand == cfg.expand);
  CHECK(back.seed == cfg.seed);
  CHECK(ModelConfig::from_json("{}").n_steps == 1000);  // defaults
  CHECK_THROWS(ModelConfig::from_json("{\"N\": 1}"));
}
