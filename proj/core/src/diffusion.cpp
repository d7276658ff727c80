#include "dim/diffusion.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dim {

DiffusionSchedule build_schedule(int64_t n_steps, double beta1, double betaN) {
  if (n_steps < 2) throw std::invalid_argument("build_schedule: need N >= 2");
  if (!(0.0 < beta1 && beta1 < betaN && betaN < 1.0))
    throw std::invalid_argument("build_schedule: need 0 < beta1 < betaN < 1");
  DiffusionSchedule s;
  s.n_steps = n_steps;
  s.beta.resize(static_cast<size_t>(n_steps));
  s.alpha.resize(static_cast<size_t>(n_steps));
  s.alpha_bar.resize(static_cast<size_t>(n_steps));
  s.beta_tilde.resize(static_cast<size_t>(n_steps));
  double abar = 1.0;
  for (int64_t i = 0; i < n_steps; ++i) {
    double b = beta1 + (betaN - beta1) * static_cast<double>(i) /
                           static_cast<double>(n_steps - 1);
    double prev_abar = abar;
    s.beta[static_cast<size_t>(i)] = b;
    s.alpha[static_cast<size_t>(i)] = 1.0 - b;
    abar *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(i)] = abar;
    s.beta_tilde[static_cast<size_t>(i)] = (1.0 - prev_abar) / (1.0 - abar) * b;
  }
  return s;
}

Tensor forward_noise(const Tensor& y0, const DiffusionSchedule& sched, int64_t n,
                     const Tensor& eps) {
  if (n < 1 || n > sched.n_steps)
    throw std::invalid_argument("forward_noise: step out of range");
  if (y0.shape() != eps.shape())
    throw std::invalid_argument("forward_noise: noise shape mismatch");
  double abar = sched.alpha_bar_at(n);
  double sa = std::sqrt(abar), sn = std::sqrt(1.0 - abar);
  Tensor out(y0.shape());
  for (int64_t i = 0; i < y0.numel(); ++i)
    out.data()[i] = sa * y0.data()[i] + sn * eps.data()[i];
  return out;
}

Tensor ancestral_sample(const NoisePredictor& predict, const DiffusionSchedule& sched,
                        const std::vector<int64_t>& shape, Rng& rng) {
  Tensor y(shape);
  for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] = rng.normal();
  for (int64_t n = sched.n_steps; n >= 1; --n) {
    Tensor eps_hat = predict(y, n);
    if (eps_hat.shape() != y.shape())
      throw std::runtime_error("ancestral_sample: predictor shape mismatch");
    double alpha = sched.alpha_at(n);
    double beta = sched.beta_at(n);
    double abar = sched.alpha_bar_at(n);
    double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    double noise_coeff = beta / std::sqrt(1.0 - abar);
    double sigma = n > 1 ? std::sqrt(sched.beta_tilde_at(n)) : 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
      double mu = inv_sqrt_alpha * (y.data()[i] - noise_coeff * eps_hat.data()[i]);
      y.data()[i] = sigma > 0 ? mu + sigma * rng.normal() : mu;
    }
    if (!y.all_finite()) {
      double mn = 0, mx = 0;
      int64_t bad = 0;
      for (int64_t i = 0; i < y.numel(); ++i) {
        double v = y.data()[i];
        if (!std::isfinite(v)) {
          ++bad;
          continue;
        }
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      std::ostringstream msg;
      msg << "ancestral_sample: non-finite state at step " << n << " (" << bad
          << " bad values, finite range [" << mn << ", " << mx << "])";
      throw std::runtime_error(msg.str());
    }
  }
  return y;
}

void ModelConfig::validate() const {
  if (n_steps < 2) throw std::invalid_argument("ModelConfig: N must be >= 2");
  if (!(0.0 < beta1 && beta1 < betaN && betaN < 1.0))
    throw std::invalid_argument("ModelConfig: bad beta range");
  if (n_blocks < 1 || d_model < 1 || joint_channels < 7 || d_audio < 1)
    throw std::invalid_argument("ModelConfig: bad dimensions");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"N", n_steps},
                   {"beta1", beta1},
                   {"betaN", betaN},
                   {"M", n_blocks},
                   {"d_model", d_model},
                   {"d_state", d_state},
                   {"conv_width", conv_width},
                   {"expand", expand},
                   {"n_heads", n_heads},
                   {"d_cond", d_cond},
                   {"ff_mult", ff_mult},
                   {"joint_channels", joint_channels},
                   {"d_audio", d_audio},
                   {"style_d_state", style_d_state},
                   {"smooth_kernel", smooth_kernel},
                   {"seed", seed}};
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.n_steps = j.value("N", c.n_steps);
  c.beta1 = j.value("beta1", c.beta1);
  c.betaN = j.value("betaN", c.betaN);
  c.n_blocks = j.value("M", c.n_blocks);
  c.d_model = j.value("d_model", c.d_model);
  c.d_state = j.value("d_state", c.d_state);
  c.conv_width = j.value("conv_width", c.conv_width);
  c.expand = j.value("expand", c.expand);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_cond = j.value("d_cond", c.d_cond);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.joint_channels = j.value("joint_channels", c.joint_channels);
  c.d_audio = j.value("d_audio", c.d_audio);
  c.style_d_state = j.value("style_d_state", c.style_d_state);
  c.smooth_kernel = j.value("smooth_kernel", c.smooth_kernel);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

AdaLNStackConfig stack_config(const ModelConfig& cfg) {
  AdaLNStackConfig sc;
  sc.n_blocks = cfg.n_blocks;
  sc.d_model = cfg.d_model;
  sc.d_cond = cfg.cond_dim();
  sc.ff_mult = cfg.ff_mult;
  sc.block.d_state = cfg.d_state;
  sc.block.conv_width = cfg.conv_width;
  sc.block.expand = cfg.expand;
  sc.block.n_heads = cfg.n_heads;
  return sc;
}

ConditionConfig condition_config(const ModelConfig& cfg) {
  ConditionConfig cc;
  cc.d_audio = cfg.d_audio;
  cc.d_cond = cfg.cond_dim();
  cc.smooth_kernel = cfg.smooth_kernel;
  cc.n_steps = cfg.n_steps;
  cc.style_block.d_state = cfg.style_d_state;
  cc.style_block.conv_width = cfg.conv_width;
  cc.style_block.expand = cfg.expand;
  return cc;
}

}  // namespace

GestureDiffusionModel::GestureDiffusionModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  sched_ = build_schedule(cfg.n_steps, cfg.beta1, cfg.betaN);
  Rng rng(cfg.seed);
  codec_ = GestureCodec(cfg.joint_channels, cfg.d_model, rng);
  cond_ = ConditionExtractor(condition_config(cfg), rng);
  stack_ = AdaLNStack(stack_config(cfg), rng);
  codec_.collect_params("codec", params_);
  cond_.collect_params("cond", params_);
  stack_.collect_params("stack", params_);
}

Tensor GestureDiffusionModel::predict_noise(const Tensor& y_n, const Tensor& cond_seq,
                                            Tape* tape) const {
  return codec_.decode(stack_.forward(codec_.encode(y_n, tape), cond_seq, tape), tape);
}

Tensor GestureDiffusionModel::training_loss(const Tensor& y0,
                                            const LocalFeatureSequence& speech,
                                            Rng& rng, Tape* tape) {
  int64_t n = rng.uniform_int(cfg_.n_steps);
  Tensor eps(y0.shape());
  for (int64_t i = 0; i < eps.numel(); ++i) eps.data()[i] = rng.normal();
  Tensor y_n = forward_noise(y0, sched_, n, eps);
  Tensor cond_seq = cond_.condition(speech, y0.dim(0), n, tape);
  Tensor eps_hat = predict_noise(y_n, cond_seq, tape);
  Tensor loss = mean_squared_error(eps, eps_hat, tape);
  loss.require_finite("training loss");
  return loss;
}

Tensor GestureDiffusionModel::sample(const LocalFeatureSequence& speech,
                                     int64_t frames, Rng& rng) const {
  Tensor base = cond_.condition_base(speech, frames);
  NoisePredictor predict = [&](const Tensor& y_n, int64_t n) {
    return predict_noise(y_n, cond_.fuse_timestep(base, n));
  };
  return ancestral_sample(predict, sched_, {frames, cfg_.joint_channels}, rng);
}

void GestureDiffusionModel::save_params(const std::string& path) const {
  save_named_tensors(path, params_.items());
}

void GestureDiffusionModel::load_params(const std::string& path) {
  load_into_registry(path, params_);
}

int64_t GestureDiffusionModel::param_count(const ModelConfig& cfg) {
  return GestureCodec::param_count(cfg.joint_channels, cfg.d_model) +
         ConditionExtractor::param_count(condition_config(cfg)) +
         AdaLNStack::param_count(stack_config(cfg));
}

}  // namespace dim
