#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace avi::spectral {

using Spectrum = std::vector<std::complex<double>>;

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

// Real forward transform, n/2+1 bins. Backed by FFTW.
Spectrum rfft(std::span<const float> x);
// Inverse of rfft for a length-n signal (scaled so irfft(rfft(x)) == x).
std::vector<float> irfft(const Spectrum& bins, std::size_t n);
// O(n^2) reference of rfft, used as a test oracle.
Spectrum naive_dft(std::span<const float> x);

double bin_frequency(std::size_t bin, std::size_t n, int sample_rate);

// Sum of |X_k|^2 / N over bins whose frequency lies in [lo, hi).
double band_energy(std::span<const float> x, int sample_rate, double lo_hz, double hi_hz);
double band_energy(const Spectrum& bins, std::size_t n, int sample_rate, const std::vector<Band>& bands);
double total_energy(std::span<const float> x);

// Frequency of the largest-magnitude bin at or above min_hz.
double dominant_frequency(std::span<const float> x, int sample_rate, double min_hz = 0.0);

// Zero-phase spectral gate: keeps bins inside any band (or outside all bands
// when `stop` is set). Output has the input length.
std::vector<float> band_filter(std::span<const float> x, int sample_rate,
                               const std::vector<Band>& bands, bool stop = false);

// bands+1 geometric edges from lo_hz to hi_hz.
std::vector<double> log_band_edges(int bands, double lo_hz, double hi_hz);

double rms(std::span<const float> x);
// Per-frame RMS over consecutive windows of `window` samples.
std::vector<double> frame_rms(std::span<const float> x, int frames, std::size_t window);

namespace serial {
// frames x (edges.size()-1) energies of consecutive windows via the naive DFT.
std::vector<float> frame_band_energies(std::span<const float> x, int frames, std::size_t window,
                                       int sample_rate, const std::vector<double>& edges);
}  // namespace serial

namespace parallel {
std::vector<float> frame_band_energies(std::span<const float> x, int frames, std::size_t window,
                                       int sample_rate, const std::vector<double>& edges);
}  // namespace parallel

}  // namespace avi::spectral
