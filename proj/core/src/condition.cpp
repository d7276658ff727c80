#include "dim/condition.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dim/fft.hpp"
#include "json.hpp"

namespace dim {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

LogMelProvider::LogMelProvider(int64_t n_mels, int64_t win_samples,
                               int64_t hop_samples, double sample_rate)
    : n_mels_(n_mels),
      win_(win_samples),
      hop_(hop_samples),
      n_fft_(next_pow2(win_samples)),
      sample_rate_(sample_rate) {
  if (n_mels < 1 || win_samples < 2 || hop_samples < 1)
    throw std::invalid_argument("LogMelProvider: bad frame parameters");
  // Triangular filters, equally spaced on the mel scale up to Nyquist.
  int64_t n_bins = n_fft_ / 2 + 1;
  double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(static_cast<size_t>(n_mels + 2));
  for (int64_t i = 0; i < n_mels + 2; ++i)
    centers[static_cast<size_t>(i)] =
        mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  mel_weights_.resize(static_cast<size_t>(n_mels));
  for (int64_t m = 0; m < n_mels; ++m) {
    double lo = centers[static_cast<size_t>(m)];
    double mid = centers[static_cast<size_t>(m + 1)];
    double hi = centers[static_cast<size_t>(m + 2)];
    for (int64_t b = 0; b < n_bins; ++b) {
      double hz = static_cast<double>(b) * sample_rate / static_cast<double>(n_fft_);
      double w = 0;
      if (hz > lo && hz < mid)
        w = (hz - lo) / (mid - lo);
      else if (hz >= mid && hz < hi)
        w = (hi - hz) / (hi - mid);
      if (w > 0) mel_weights_[static_cast<size_t>(m)].emplace_back(b, w);
    }
  }
}

LocalFeatureSequence LogMelProvider::features(const AudioClip& audio) const {
  if (audio.samples.empty())
    throw std::invalid_argument("log-mel: empty audio");
  if (std::abs(audio.rate - sample_rate_) > 1e-6)
    throw std::invalid_argument("log-mel: expected sample rate " +
                                std::to_string(sample_rate_) + " Hz");
  int64_t n = static_cast<int64_t>(audio.samples.size());
  if (n < win_) throw std::invalid_argument("log-mel: audio shorter than one window");
  int64_t frames = 1 + (n - win_) / hop_;
  Tensor feats({frames, n_mels_});
  std::vector<double> window(static_cast<size_t>(win_));
  for (int64_t i = 0; i < win_; ++i)
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                             static_cast<double>(win_ - 1));
  std::vector<double> frame(static_cast<size_t>(win_));
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = audio.samples.data() + f * hop_;
    for (int64_t i = 0; i < win_; ++i)
      frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
    std::vector<double> mag =
        real_fft_magnitude(frame.data(), static_cast<size_t>(win_),
                           static_cast<size_t>(n_fft_));
    for (int64_t m = 0; m < n_mels_; ++m) {
      double acc = 0;
      for (const auto& [bin, w] : mel_weights_[static_cast<size_t>(m)]) {
        double a = mag[static_cast<size_t>(bin)];
        acc += w * a * a;
      }
      feats(f, m) = std::log(std::max(acc, 1e-10));
    }
  }
  LocalFeatureSequence out;
  out.features = feats;
  out.rate_hz = rate_hz();
  return out;
}

std::string LogMelProvider::id() const {
  return "logmel" + std::to_string(n_mels_) + "_w" + std::to_string(win_) + "_h" +
         std::to_string(hop_);
}

FeatureFileProvider::FeatureFileProvider(const std::string& tensor_path) {
  cached_.features = load_tensor_file(tensor_path);
  if (cached_.features.rank() != 2)
    throw std::runtime_error("feature file must hold a rank-2 tensor");
  std::ifstream in(tensor_path + ".json");
  if (!in) throw std::runtime_error("missing feature sidecar: " + tensor_path + ".json");
  nlohmann::json j = nlohmann::json::parse(in);
  cached_.rate_hz = j.at("rate_hz").get<double>();
  source_ = j.value("source", tensor_path);
  if (j.at("d_a").get<int64_t>() != cached_.features.dim(1))
    throw std::runtime_error("feature sidecar d_a disagrees with tensor shape");
}

LocalFeatureSequence FeatureFileProvider::features(const AudioClip&) const {
  return cached_;
}

void save_features(const std::string& tensor_path, const LocalFeatureSequence& f,
                   const std::string& source) {
  save_tensor_file(tensor_path, f.features);
  nlohmann::json j{{"rate_hz", f.rate_hz}, {"d_a", f.feature_dim()}, {"source", source}};
  std::ofstream out(tensor_path + ".json");
  if (!out) throw std::runtime_error("cannot write sidecar for " + tensor_path);
  out << j.dump(2) << "\n";
}

void ConditionConfig::validate() const {
  if (d_audio < 1 || d_cond < 1)
    throw std::invalid_argument("ConditionConfig: bad dimensions");
  if (smooth_kernel < 1 || smooth_kernel % 2 == 0)
    throw std::invalid_argument("ConditionConfig: smoothing kernel must be odd");
  if (n_steps < 1) throw std::invalid_argument("ConditionConfig: n_steps must be >= 1");
}

Tensor timestep_embedding(int64_t n, int64_t dim) {
  Tensor e({1, dim});
  int64_t half = dim / 2;
  for (int64_t i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, -static_cast<double>(i) /
                                        std::max<double>(1.0, static_cast<double>(half)));
    e(0, 2 * i) = std::sin(static_cast<double>(n) * freq);
    e(0, 2 * i + 1) = std::cos(static_cast<double>(n) * freq);
  }
  if (dim % 2 == 1) e(0, dim - 1) = std::sin(static_cast<double>(n) * 1e-4);
  return e;
}

ConditionExtractor::ConditionExtractor(const ConditionConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  Mamba2Config sc = cfg.style_block;
  sc.d_model = cfg.d_audio;
  style_ = Mamba2Block(sc, rng);
  fuse_ = Linear(2 * cfg.d_audio, cfg.d_cond, rng);
  // Delta-initialized smoothing kernel: identity map with unit weight sum, so
  // constants pass through unchanged until training moves the taps.
  smooth_w_ = Tensor({cfg.smooth_kernel, cfg.d_cond});
  int64_t center = cfg.smooth_kernel / 2;
  for (int64_t c = 0; c < cfg.d_cond; ++c) smooth_w_(center, c) = 1.0;
  step_mlp_ = Mlp(cfg.d_cond, cfg.d_cond, cfg.d_cond, rng);
}

StyleToken ConditionExtractor::global_style(const LocalFeatureSequence& zx,
                                            Tape* tape) const {
  if (zx.frame_count() < 1)
    throw std::invalid_argument("global_style: empty feature sequence");
  if (zx.feature_dim() != cfg_.d_audio)
    throw std::invalid_argument("global_style: feature width mismatch");
  Tensor scanned = style_.forward(zx.features, tape);
  StyleToken tok;
  tok.z = slice_rows(scanned, zx.frame_count() - 1, zx.frame_count(), tape);
  return tok;
}

Tensor ConditionExtractor::broadcast_and_fuse(const LocalFeatureSequence& zx,
                                              const StyleToken& zs,
                                              Tape* tape) const {
  int64_t ta = zx.frame_count();
  Tensor ones = Tensor::full({ta, 1}, 1.0);
  Tensor style_rows = matmul(ones, zs.z, tape);
  Tensor cat = concat_cols({zx.features, style_rows}, tape);
  return fuse_.forward(cat, tape);
}

Tensor ConditionExtractor::downsample_to_gesture_rate(const Tensor& fused,
                                                      int64_t frames,
                                                      Tape* tape) const {
  if (frames < 1)
    throw std::invalid_argument("downsample_to_gesture_rate: frames must be >= 1");
  if (fused.dim(0) < 1)
    throw std::invalid_argument("downsample_to_gesture_rate: empty input");
  Tensor resampled = interp_rows(fused, frames, tape);
  return conv1d_depthwise(resampled, smooth_w_, cfg_.smooth_kernel / 2,
                          PadMode::kReflect, tape);
}

Tensor ConditionExtractor::fuse_timestep(const Tensor& c, int64_t n,
                                         Tape* tape) const {
  if (n < 1 || n > cfg_.n_steps)
    throw std::invalid_argument("fuse_timestep: diffusion step out of range");
  Tensor emb = step_mlp_.forward(timestep_embedding(n, cfg_.d_cond), tape);
  Tensor ones = Tensor::full({c.dim(0), 1}, 1.0);
  return add(c, matmul(ones, emb, tape), tape);
}

Tensor ConditionExtractor::condition_base(const LocalFeatureSequence& zx,
                                          int64_t frames, Tape* tape) const {
  StyleToken zs = global_style(zx, tape);
  Tensor fused = broadcast_and_fuse(zx, zs, tape);
  return downsample_to_gesture_rate(fused, frames, tape);
}

Tensor ConditionExtractor::condition(const LocalFeatureSequence& zx, int64_t frames,
                                     int64_t n, Tape* tape) const {
  Tensor c = fuse_timestep(condition_base(zx, frames, tape), n, tape);
  c.require_finite("condition sequence");
  return c;
}

void ConditionExtractor::collect_params(const std::string& prefix,
                                        ParamRegistry& reg) {
  style_.collect_params(prefix + ".style", reg);
  reg.add(prefix + ".fuse.w", fuse_.w);
  reg.add(prefix + ".fuse.b", fuse_.b);
  reg.add(prefix + ".smooth.w", smooth_w_);
  reg.add(prefix + ".step.l1.w", step_mlp_.l1.w);
  reg.add(prefix + ".step.l1.b", step_mlp_.l1.b);
  reg.add(prefix + ".step.l2.w", step_mlp_.l2.w);
  reg.add(prefix + ".step.l2.b", step_mlp_.l2.b);
}

int64_t ConditionExtractor::param_count(const ConditionConfig& cfg) {
  Mamba2Config sc = cfg.style_block;
  sc.d_model = cfg.d_audio;
  int64_t n = Mamba2Block::param_count(sc);
  n += 2 * cfg.d_audio * cfg.d_cond + cfg.d_cond;       // fuse
  n += cfg.smooth_kernel * cfg.d_cond;                  // smoothing kernel
  n += 2 * (cfg.d_cond * cfg.d_cond + cfg.d_cond);      // step MLP
  return n;
}

}  // namespace dim
