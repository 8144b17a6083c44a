#include "plants/fft.hpp"

#include <cmath>
#include <cstdint>

namespace plants {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Bluestein: X_k = b*_k (a ⊛ b)_k with a_m = x_m b*_m, b_m = exp(iπ m²/n),
// convolution done with power-of-two FFTs of size >= 2n-1.
void fft_bluestein(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> chirp(n);
  for (size_t m = 0; m < n; ++m) {
    // m² mod 2n keeps the trig argument small and exact.
    uint64_t mm = (static_cast<uint64_t>(m) * m) % (2 * n);
    double angle = sign * M_PI * static_cast<double>(mm) / static_cast<double>(n);
    chirp[m] = {std::cos(angle), std::sin(angle)};
  }
  size_t conv_n = next_pow2(2 * n - 1);
  std::vector<std::complex<double>> a(conv_n), b(conv_n);
  for (size_t m = 0; m < n; ++m) a[m] = x[m] * chirp[m];
  b[0] = std::conj(chirp[0]);
  for (size_t m = 1; m < n; ++m) b[m] = b[conv_n - m] = std::conj(chirp[m]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (size_t i = 0; i < conv_n; ++i) a[i] *= b[i];
  fft_pow2(a, true);
  for (size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  if (inverse)
    for (auto& v : x) v /= static_cast<double>(n);
}

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    fft_pow2(a, inverse);
  else
    fft_bluestein(a, inverse);
}

std::vector<std::complex<double>> dft_real(const std::vector<double>& x) {
  std::vector<std::complex<double>> a(x.size());
  for (size_t i = 0; i < x.size(); ++i) a[i] = {x[i], 0.0};
  fft(a, false);
  return a;
}

}  // namespace plants
