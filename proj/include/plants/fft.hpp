#pragma once

#include <complex>
#include <vector>

namespace plants {

// In-place forward/inverse FFT. Radix-2 Cooley-Tukey when the length is a
// power of two, Bluestein's chirp-z otherwise, so any length gets exact DFT
// bin semantics (no zero-pad rebinning).
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Full complex DFT of a real signal.
std::vector<std::complex<double>> dft_real(const std::vector<double>& x);

}  // namespace plants
