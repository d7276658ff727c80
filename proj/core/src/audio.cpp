#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dim/dataio.hpp"

namespace dim {

namespace {

uint32_t le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t le16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    uint32_t chunk_len = le32(bytes.data() + pos + 4);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (pos + 8 + 16 > bytes.size()) throw std::runtime_error("truncated fmt chunk");
      const unsigned char* f = bytes.data() + pos + 8;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (rate == 0 || channels == 0) throw std::runtime_error("missing fmt chunk in " + path);
  if (data_off == 0) throw std::runtime_error("missing data chunk in " + path);
  if (data_off + data_len > bytes.size()) data_len = bytes.size() - data_off;

  size_t bytes_per_sample = bits / 8;
  if (bytes_per_sample == 0) throw std::runtime_error("bad bit depth in " + path);
  size_t n_frames = data_len / (bytes_per_sample * channels);
  AudioClip clip;
  clip.rate = static_cast<double>(rate);
  clip.samples.resize(n_frames);
  const unsigned char* d = bytes.data() + data_off;
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0;
    for (uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = d + (i * channels + c) * bytes_per_sample;
      double v;
      if (format == 3 && bits == 32) {
        float f;
        uint32_t u = le32(s);
        std::memcpy(&f, &u, 4);
        v = static_cast<double>(f);
      } else if (format == 1 && bits == 16) {
        int16_t iv = static_cast<int16_t>(le16(s));
        v = static_cast<double>(iv) / 32768.0;
      } else if (format == 1 && bits == 24) {
        int32_t iv = static_cast<int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
        if (iv & 0x800000) iv |= static_cast<int32_t>(0xff000000u);
        v = static_cast<double>(iv) / 8388608.0;
      } else {
        throw std::runtime_error("unsupported WAV encoding (want PCM16/24 or float32)");
      }
      acc += v;
    }
    double v = acc / static_cast<double>(channels);
    clip.samples[i] = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
  }
  return clip;
}

void write_wav_file(const std::string& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  auto w16 = [&](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };
  auto w32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  uint32_t n = static_cast<uint32_t>(clip.samples.size());
  out.write("RIFF", 4);
  w32(36 + n * 2);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(static_cast<uint32_t>(clip.rate));
  w32(static_cast<uint32_t>(clip.rate) * 2);
  w16(2);
  w16(16);
  out.write("data", 4);
  w32(n * 2);
  for (double s : clip.samples) {
    double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    int16_t v = static_cast<int16_t>(std::lrint(c * 32767.0));
    w16(static_cast<uint16_t>(v));
  }
}

AudioClip resample_audio(const AudioClip& a, double target_rate) {
  if (a.rate <= 0 || a.samples.empty())
    throw std::invalid_argument("resample_audio: empty input");
  if (target_rate > a.rate + 1e-9)
    throw std::invalid_argument("resample_audio: upsampling requested");
  if (std::abs(target_rate - a.rate) < 1e-9) return a;

  double ratio = target_rate / a.rate;      // < 1
  double cutoff = ratio;                    // anti-alias at the new Nyquist
  int64_t zero_crossings = 16;
  double half_width = static_cast<double>(zero_crossings) / cutoff;
  int64_t n_in = static_cast<int64_t>(a.samples.size());
  int64_t n_out = static_cast<int64_t>(std::llround(
      static_cast<double>(n_in) * target_rate / a.rate));

  AudioClip out;
  out.rate = target_rate;
  out.samples.resize(static_cast<size_t>(n_out));
  for (int64_t i = 0; i < n_out; ++i) {
    double center = static_cast<double>(i) / ratio;
    int64_t j0 = static_cast<int64_t>(std::ceil(center - half_width));
    int64_t j1 = static_cast<int64_t>(std::floor(center + half_width));
    if (j0 < 0) j0 = 0;
    if (j1 > n_in - 1) j1 = n_in - 1;
    double acc = 0, norm = 0;
    for (int64_t j = j0; j <= j1; ++j) {
      double x = (static_cast<double>(j) - center) * cutoff;
      double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
      double hann = 0.5 + 0.5 * std::cos(M_PI * (static_cast<double>(j) - center) /
                                         half_width);
      double wgt = sinc * hann;
      acc += wgt * a.samples[static_cast<size_t>(j)];
      norm += wgt;
    }
    out.samples[static_cast<size_t>(i)] = norm != 0.0 ? acc / norm : 0.0;
  }
  return out;
}

}  // namespace dim
