#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dimtool {

// --- SHA-1 (for git-blob-style content hashes of run inputs) ----------------

class Sha1 {
 public:
  void update(const unsigned char* data, size_t len) {
    for (size_t i = 0; i < len; ++i) {
      buf_[buf_len_++] = data[i];
      ++total_;
      if (buf_len_ == 64) {
        process_block();
        buf_len_ = 0;
      }
    }
  }

  std::string hex_digest() {
    uint64_t bits = total_ * 8;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (buf_len_ != 56) update(&zero, 1);
    for (int i = 7; i >= 0; --i) {
      unsigned char b = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      update(&b, 1);
    }
    char out[41];
    for (int i = 0; i < 5; ++i)
      std::snprintf(out + 8 * i, 9, "%08x", h_[i]);
    return std::string(out, 40);
  }

 private:
  static uint32_t rol(uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

  void process_block() {
    uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (static_cast<uint32_t>(buf_[4 * i]) << 24) |
             (static_cast<uint32_t>(buf_[4 * i + 1]) << 16) |
             (static_cast<uint32_t>(buf_[4 * i + 2]) << 8) |
             static_cast<uint32_t>(buf_[4 * i + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      uint32_t f, k;
      if (i < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5a827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdc;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6;
      }
      uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  uint32_t h_[5] = {0x67452301, 0xefcdab89, 0x98badcfe, 0x10325476, 0xc3d2e1f0};
  unsigned char buf_[64];
  size_t buf_len_ = 0;
  uint64_t total_ = 0;
};

inline std::string git_blob_hash(const std::string& bytes) {
  Sha1 s;
  std::string header = "blob " + std::to_string(bytes.size());
  s.update(reinterpret_cast<const unsigned char*>(header.data()), header.size() + 1);
  s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return s.hex_digest();
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_blob_hash(const std::string& path) {
  return git_blob_hash(read_file_bytes(path));
}

// --- static SVG line charts ---------------------------------------------------

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Minimal offline plot: one polyline per series, optional log-log axes.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<ChartSeries>& series, bool log_x = false,
                     bool log_y = false);

}  // namespace dimtool
