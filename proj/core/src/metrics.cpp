#include "dim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dim/fft.hpp"
#include "dim/ops.hpp"
#include "json.hpp"

namespace dim {

GaussianSummary GaussianSummary::fit(const Tensor& rows, double diag_load) {
  if (rows.rank() != 2 || rows.dim(0) < 2)
    throw std::invalid_argument("GaussianSummary: need >= 2 rows");
  int64_t n = rows.dim(0), d = rows.dim(1);
  GaussianSummary g;
  g.count = n;
  g.mean.assign(static_cast<size_t>(d), 0.0);
  g.cov.assign(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) g.mean[static_cast<size_t>(j)] += rows(i, j);
  for (auto& m : g.mean) m /= static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t r = 0; r < d; ++r) {
      double cr = rows(i, r) - g.mean[static_cast<size_t>(r)];
      for (int64_t c = r; c < d; ++c)
        g.cov[static_cast<size_t>(r * d + c)] +=
            cr * (rows(i, c) - g.mean[static_cast<size_t>(c)]);
    }
  for (int64_t r = 0; r < d; ++r)
    for (int64_t c = r; c < d; ++c) {
      double v = g.cov[static_cast<size_t>(r * d + c)] / static_cast<double>(n - 1);
      if (r == c) v += diag_load;
      g.cov[static_cast<size_t>(r * d + c)] = v;
      g.cov[static_cast<size_t>(c * d + r)] = v;
    }
  return g;
}

std::vector<double> symmetric_eigenvalues(const std::vector<double>& matrix,
                                          int64_t d, std::vector<double>* vectors) {
  if (static_cast<int64_t>(matrix.size()) != d * d)
    throw std::invalid_argument("symmetric_eigenvalues: bad matrix size");
  std::vector<double> a = matrix;
  std::vector<double> v;
  if (vectors) {
    v.assign(static_cast<size_t>(d * d), 0.0);
    for (int64_t i = 0; i < d; ++i) v[static_cast<size_t>(i * d + i)] = 1.0;
  }
  auto at = [&](int64_t r, int64_t c) -> double& {
    return a[static_cast<size_t>(r * d + c)];
  };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int64_t r = 0; r < d; ++r)
      for (int64_t c = r + 1; c < d; ++c) off += at(r, c) * at(r, c);
    if (off < 1e-24) break;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) {
        double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int64_t k = 0; k < d; ++k) {
          double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < d; ++k) {
          double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        if (vectors)
          for (int64_t k = 0; k < d; ++k) {
            double vkp = v[static_cast<size_t>(k * d + p)];
            double vkq = v[static_cast<size_t>(k * d + q)];
            v[static_cast<size_t>(k * d + p)] = c * vkp - s * vkq;
            v[static_cast<size_t>(k * d + q)] = s * vkp + c * vkq;
          }
      }
  }
  std::vector<double> eig(static_cast<size_t>(d));
  for (int64_t i = 0; i < d; ++i) eig[static_cast<size_t>(i)] = at(i, i);
  if (vectors) *vectors = std::move(v);
  return eig;
}

namespace {

// B = M^{1/2} for symmetric PSD M (negative eigenvalues clamped).
std::vector<double> symmetric_sqrt(const std::vector<double>& m, int64_t d) {
  std::vector<double> vecs;
  std::vector<double> eig = symmetric_eigenvalues(m, d, &vecs);
  std::vector<double> out(static_cast<size_t>(d * d), 0.0);
  for (int64_t k = 0; k < d; ++k) {
    double lam = eig[static_cast<size_t>(k)];
    double s = lam > 0 ? std::sqrt(lam) : 0.0;
    if (s == 0) continue;
    for (int64_t r = 0; r < d; ++r) {
      double vr = vecs[static_cast<size_t>(r * d + k)] * s;
      if (vr == 0) continue;
      for (int64_t c = 0; c < d; ++c)
        out[static_cast<size_t>(r * d + c)] += vr * vecs[static_cast<size_t>(c * d + k)];
    }
  }
  return out;
}

std::vector<double> matmul_sq(const std::vector<double>& a,
                              const std::vector<double>& b, int64_t d) {
  std::vector<double> out(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t k = 0; k < d; ++k) {
      double av = a[static_cast<size_t>(i * d + k)];
      if (av == 0) continue;
      for (int64_t j = 0; j < d; ++j)
        out[static_cast<size_t>(i * d + j)] += av * b[static_cast<size_t>(k * d + j)];
    }
  return out;
}

}  // namespace

double frechet_distance(const GaussianSummary& p, const GaussianSummary& q) {
  int64_t d = p.dims();
  if (q.dims() != d)
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  double mean_term = 0;
  for (int64_t i = 0; i < d; ++i) {
    double diff = p.mean[static_cast<size_t>(i)] - q.mean[static_cast<size_t>(i)];
    mean_term += diff * diff;
  }
  // Tr((Sp Sq)^{1/2}) via the symmetric form (Sq^{1/2} Sp Sq^{1/2})^{1/2}.
  std::vector<double> rq = symmetric_sqrt(q.cov, d);
  std::vector<double> inner = matmul_sq(matmul_sq(rq, p.cov, d), rq, d);
  for (int64_t r = 0; r < d; ++r)
    for (int64_t c = r + 1; c < d; ++c) {
      double v = 0.5 * (inner[static_cast<size_t>(r * d + c)] +
                        inner[static_cast<size_t>(c * d + r)]);
      inner[static_cast<size_t>(r * d + c)] = v;
      inner[static_cast<size_t>(c * d + r)] = v;
    }
  std::vector<double> eig = symmetric_eigenvalues(inner, d);
  double trace_sqrt = 0;
  for (double lam : eig) {
    if (lam < -1e-6)
      throw std::runtime_error("frechet_distance: covariance product not PSD");
    if (lam > 0) trace_sqrt += std::sqrt(lam);
  }
  double trace_term = 0;
  for (int64_t i = 0; i < d; ++i)
    trace_term += p.cov[static_cast<size_t>(i * d + i)] +
                  q.cov[static_cast<size_t>(i * d + i)];
  return std::max(0.0, mean_term + trace_term - 2.0 * trace_sqrt);
}

namespace {

Tensor pooled_frames(const std::vector<GestureSequence>& clips) {
  if (clips.size() < 1) throw std::invalid_argument("fgd: empty clip set");
  int64_t C = clips[0].channels();
  int64_t total = 0;
  for (const auto& g : clips) {
    if (g.channels() != C) throw std::invalid_argument("fgd: channel counts differ");
    total += g.frames();
  }
  if (total < 2) throw std::invalid_argument("fgd: need >= 2 pose frames");
  Tensor rows({total, C});
  int64_t r = 0;
  for (const auto& g : clips)
    for (int64_t t = 0; t < g.frames(); ++t, ++r)
      for (int64_t c = 0; c < C; ++c) rows(r, c) = g.values(t, c);
  return rows;
}

}  // namespace

double fgd_raw(const std::vector<GestureSequence>& generated,
               const std::vector<GestureSequence>& reference) {
  if (generated.size() < 2 || reference.size() < 2)
    throw std::invalid_argument("fgd_raw: need >= 2 clips per side");
  GaussianSummary p = GaussianSummary::fit(pooled_frames(generated), 1e-6);
  GaussianSummary q = GaussianSummary::fit(pooled_frames(reference), 1e-6);
  return frechet_distance(p, q);
}

MotionEmbedder::MotionEmbedder(int64_t channels, int64_t latent, Rng& rng) {
  int64_t hidden = 64;
  enc1_ = uniform_init({5, channels, hidden}, 5 * channels, rng);
  enc1_b_ = uniform_init({hidden}, 5 * channels, rng);
  enc2_ = uniform_init({5, hidden, latent}, 5 * hidden, rng);
  enc2_b_ = uniform_init({latent}, 5 * hidden, rng);
  dec1_ = uniform_init({5, latent, hidden}, 5 * latent, rng);
  dec1_b_ = uniform_init({hidden}, 5 * latent, rng);
  dec2_ = uniform_init({5, hidden, channels}, 5 * hidden, rng);
  dec2_b_ = uniform_init({channels}, 5 * hidden, rng);
}

Tensor MotionEmbedder::embed(const Tensor& y) const {
  Tensor h = silu(add_rowvec(conv1d(y, enc1_, 2, 1, PadMode::kReflect), enc1_b_));
  return add_rowvec(conv1d(h, enc2_, 2, 1, PadMode::kReflect), enc2_b_);
}

Tensor MotionEmbedder::reconstruct(const Tensor& y, Tape* tape) const {
  Tensor h = silu(add_rowvec(conv1d(y, enc1_, 2, 1, PadMode::kReflect, tape),
                             enc1_b_, tape), tape);
  Tensor z = add_rowvec(conv1d(h, enc2_, 2, 1, PadMode::kReflect, tape), enc2_b_, tape);
  Tensor g = silu(add_rowvec(conv1d(z, dec1_, 2, 1, PadMode::kReflect, tape),
                             dec1_b_, tape), tape);
  return add_rowvec(conv1d(g, dec2_, 2, 1, PadMode::kReflect, tape), dec2_b_, tape);
}

void MotionEmbedder::collect(ParamRegistry& reg) const {
  reg.add("enc1.w", enc1_);
  reg.add("enc1.b", enc1_b_);
  reg.add("enc2.w", enc2_);
  reg.add("enc2.b", enc2_b_);
  reg.add("dec1.w", dec1_);
  reg.add("dec1.b", dec1_b_);
  reg.add("dec2.w", dec2_);
  reg.add("dec2.b", dec2_b_);
}

void MotionEmbedder::train(const std::vector<GestureSequence>& reference,
                           int64_t steps, double lr, Rng& rng) {
  if (reference.empty()) throw std::invalid_argument("embedder: empty training set");
  ParamRegistry reg;
  collect(reg);
  Adam opt(reg, lr);
  for (int64_t s = 0; s < steps; ++s) {
    const GestureSequence& clip =
        reference[static_cast<size_t>(rng.uniform_int(
            static_cast<int64_t>(reference.size()))) - 1];
    Tape tape;
    reg.zero_grads();
    Tensor loss = mean_squared_error(reconstruct(clip.values, &tape), clip.values,
                                     &tape);
    tape.backward(loss);
    opt.step();
  }
  trained_ = true;
}

std::string MotionEmbedder::id() const {
  // FNV-1a over the parameter bytes.
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](const Tensor& t) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
    for (int64_t i = 0; i < t.numel() * 8; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(enc1_);
  mix(enc2_);
  mix(dec1_);
  mix(dec2_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "emb-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void MotionEmbedder::save(const std::string& path) const {
  ParamRegistry reg;
  collect(reg);
  save_named_tensors(path, reg.items());
  nlohmann::json j{{"trained", trained_},
                   {"channels", channels()},
                   {"latent", latent()},
                   {"id", id()}};
  std::ofstream out(path + ".json");
  if (!out) throw std::runtime_error("cannot write embedder manifest");
  out << j.dump(2) << "\n";
}

MotionEmbedder MotionEmbedder::load(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw std::runtime_error("missing embedder manifest: " + path + ".json");
  nlohmann::json j = nlohmann::json::parse(in);
  Rng rng(0);
  MotionEmbedder e(j.at("channels").get<int64_t>(), j.at("latent").get<int64_t>(), rng);
  ParamRegistry reg;
  e.collect(reg);
  load_into_registry(path, reg);
  e.trained_ = j.at("trained").get<bool>();
  return e;
}

double fgd_feature(const std::vector<GestureSequence>& generated,
                   const std::vector<GestureSequence>& reference,
                   const MotionEmbedder& embedder) {
  if (!embedder.trained())
    throw std::invalid_argument("fgd_feature: embedder is not trained");
  if (generated.size() < 2 || reference.size() < 2)
    throw std::invalid_argument("fgd_feature: need >= 2 clips per side");
  auto embed_all = [&](const std::vector<GestureSequence>& clips) {
    std::vector<GestureSequence> out;
    for (const auto& g : clips) {
      GestureSequence e;
      e.values = embedder.embed(g.values);
      e.fps = g.fps;
      out.push_back(std::move(e));
    }
    return out;
  };
  GaussianSummary p = GaussianSummary::fit(pooled_frames(embed_all(generated)), 1e-6);
  GaussianSummary q = GaussianSummary::fit(pooled_frames(embed_all(reference)), 1e-6);
  return frechet_distance(p, q);
}

BeatSet detect_audio_beats(const AudioClip& audio) {
  if (audio.rate <= 0) throw std::invalid_argument("detect_audio_beats: bad rate");
  int64_t hop = static_cast<int64_t>(std::llround(audio.rate * 0.010));
  int64_t win = 512;
  int64_t n = static_cast<int64_t>(audio.samples.size());
  BeatSet beats;
  if (n < win) return beats;
  int64_t frames = 1 + (n - win) / hop;
  std::vector<double> hann(static_cast<size_t>(win));
  for (int64_t i = 0; i < win; ++i)
    hann[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                             static_cast<double>(win - 1));
  std::vector<double> prev_mag, flux(static_cast<size_t>(frames), 0.0);
  std::vector<double> frame(static_cast<size_t>(win));
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = audio.samples.data() + f * hop;
    for (int64_t i = 0; i < win; ++i)
      frame[static_cast<size_t>(i)] = src[i] * hann[static_cast<size_t>(i)];
    std::vector<double> mag = real_fft_magnitude(frame.data(),
                                                 static_cast<size_t>(win),
                                                 static_cast<size_t>(win));
    if (!prev_mag.empty()) {
      double acc = 0;
      for (size_t b = 0; b < mag.size(); ++b) {
        double d = mag[b] - prev_mag[b];
        if (d > 0) acc += d;
      }
      flux[static_cast<size_t>(f)] = acc;
    }
    prev_mag = std::move(mag);
  }
  // Adaptive threshold: local mean + 1.5 * local std over ±0.5 s. Both terms
  // scale with amplitude, so doubling the signal moves no beat.
  int64_t half_w = static_cast<int64_t>(std::llround(0.5 / 0.010));
  double hop_seconds = static_cast<double>(hop) / audio.rate;
  double min_sep = 0.05;
  double last = -1e9;
  for (int64_t f = 1; f + 1 < frames; ++f) {
    int64_t lo = std::max<int64_t>(0, f - half_w);
    int64_t hi = std::min<int64_t>(frames - 1, f + half_w);
    double mean = 0;
    for (int64_t k = lo; k <= hi; ++k) mean += flux[static_cast<size_t>(k)];
    mean /= static_cast<double>(hi - lo + 1);
    double var = 0;
    for (int64_t k = lo; k <= hi; ++k) {
      double d = flux[static_cast<size_t>(k)] - mean;
      var += d * d;
    }
    double stddev = std::sqrt(var / static_cast<double>(hi - lo + 1));
    double thr = mean + 1.5 * stddev;
    double v = flux[static_cast<size_t>(f)];
    if (v > thr && v >= flux[static_cast<size_t>(f - 1)] &&
        v >= flux[static_cast<size_t>(f + 1)]) {
      double t = static_cast<double>(f) * hop_seconds +
                 static_cast<double>(win) / (2.0 * audio.rate);
      if (t - last >= min_sep) {
        beats.times.push_back(t);
        last = t;
      }
    }
  }
  return beats;
}

BeatSet detect_gesture_beats(const GestureSequence& gesture) {
  int64_t T = gesture.frames();
  if (T < 3) throw std::invalid_argument("detect_gesture_beats: need >= 3 frames");
  int64_t C = gesture.channels();
  int64_t joint_ch = C > 6 ? C - 6 : C;  // exclude the root velocity block
  std::vector<double> speed(static_cast<size_t>(T - 1), 0.0);
  for (int64_t t = 1; t < T; ++t) {
    double acc = 0;
    for (int64_t c = 0; c < joint_ch; ++c) {
      double d = gesture.values(t, c) - gesture.values(t - 1, c);
      acc += d * d;
    }
    speed[static_cast<size_t>(t - 1)] = std::sqrt(acc) * gesture.fps;
  }
  // Light smoothing (3-tap box) before minima picking.
  std::vector<double> smooth(speed.size());
  for (size_t i = 0; i < speed.size(); ++i) {
    double acc = speed[i];
    int k = 1;
    if (i > 0) {
      acc += speed[i - 1];
      ++k;
    }
    if (i + 1 < speed.size()) {
      acc += speed[i + 1];
      ++k;
    }
    smooth[i] = acc / static_cast<double>(k);
  }
  BeatSet beats;
  double min_sep = 0.1;
  double last = -1e9;
  for (size_t i = 1; i + 1 < smooth.size(); ++i) {
    double tol = 1e-9 * (1.0 + std::abs(smooth[i]));
    if (smooth[i] + tol < smooth[i - 1] && smooth[i] < smooth[i + 1] + tol) {
      double t = (static_cast<double>(i) + 1.0) / gesture.fps;
      if (t - last >= min_sep) {
        beats.times.push_back(t);
        last = t;
      }
    }
  }
  return beats;
}

double beat_align(const BeatSet& gesture_beats, const BeatSet& audio_beats,
                  double sigma) {
  if (sigma <= 0) throw std::invalid_argument("beat_align: sigma must be positive");
  if (gesture_beats.times.empty() || audio_beats.times.empty()) return 0.0;
  double acc = 0;
  for (double g : gesture_beats.times) {
    auto it = std::lower_bound(audio_beats.times.begin(), audio_beats.times.end(), g);
    double best = 1e300;
    if (it != audio_beats.times.end()) best = std::min(best, std::abs(*it - g));
    if (it != audio_beats.times.begin()) best = std::min(best, std::abs(*(it - 1) - g));
    acc += std::exp(-best * best / (2.0 * sigma * sigma));
  }
  return acc / static_cast<double>(gesture_beats.times.size());
}

}  // namespace dim
