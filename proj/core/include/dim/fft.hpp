#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace dim {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

// Magnitude spectrum of a real frame zero-padded to n_fft (power of two).
// Returns n_fft/2 + 1 bins.
std::vector<double> real_fft_magnitude(const double* frame, size_t frame_len,
                                       size_t n_fft);

}  // namespace dim
