#include "dim/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<double> real_fft_magnitude(const double* frame, size_t frame_len,
                                       size_t n_fft) {
  std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
  size_t n = frame_len < n_fft ? frame_len : n_fft;
  for (size_t i = 0; i < n; ++i) buf[i] = frame[i];
  fft_inplace(buf);
  std::vector<double> mag(n_fft / 2 + 1);
  for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(buf[i]);
  return mag;
}

}  // namespace dim
