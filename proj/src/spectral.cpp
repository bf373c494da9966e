#include "avi/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "avi/error.hpp"

namespace avi::spectral {

namespace {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans are created once per size and never destroyed; execution with new
// arrays is thread-safe.
const Plans& plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  return cache.emplace(n, p).first->second;
}

struct FftwBuffers {
  explicit FftwBuffers(std::size_t n) : real(fftw_alloc_real(n)), cplx(fftw_alloc_complex(n / 2 + 1)) {}
  ~FftwBuffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;
  double* real;
  fftw_complex* cplx;
};

bool in_any(double f, const std::vector<Band>& bands) {
  for (const auto& b : bands)
    if (f >= b.lo_hz && f < b.hi_hz) return true;
  return false;
}

std::vector<float> pool_bands(const Spectrum& bins, std::size_t n, int sample_rate,
                              const std::vector<double>& edges) {
  const std::size_t nb = edges.size() - 1;
  std::vector<float> out(nb, 0.0f);
  for (std::size_t k = 1; k < bins.size(); ++k) {
    const double f = bin_frequency(k, n, sample_rate);
    if (f < edges.front() || f >= edges.back()) continue;
    const auto it = std::upper_bound(edges.begin(), edges.end(), f);
    const auto b = static_cast<std::size_t>(it - edges.begin()) - 1;
    out[b] += static_cast<float>(std::norm(bins[k]) / static_cast<double>(n));
  }
  return out;
}

}  // namespace

Spectrum rfft(std::span<const float> x) {
  const std::size_t n = x.size();
  require(n > 0, "rfft: empty signal");
  const Plans& p = plans_for(n);
  FftwBuffers buf(n);
  for (std::size_t i = 0; i < n; ++i) buf.real[i] = x[i];
  fftw_execute_dft_r2c(p.forward, buf.real, buf.cplx);
  Spectrum out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {buf.cplx[k][0], buf.cplx[k][1]};
  return out;
}

std::vector<float> irfft(const Spectrum& bins, std::size_t n) {
  require(bins.size() == n / 2 + 1, "irfft: bin count does not match length");
  const Plans& p = plans_for(n);
  FftwBuffers buf(n);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    buf.cplx[k][0] = bins[k].real();
    buf.cplx[k][1] = bins[k].imag();
  }
  fftw_execute_dft_c2r(p.inverse, buf.cplx, buf.real);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(buf.real[i] / static_cast<double>(n));
  return out;
}

Spectrum naive_dft(std::span<const float> x) {
  const std::size_t n = x.size();
  Spectrum out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      acc += static_cast<double>(x[i]) * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

double bin_frequency(std::size_t bin, std::size_t n, int sample_rate) {
  return static_cast<double>(bin) * sample_rate / static_cast<double>(n);
}

double band_energy(const Spectrum& bins, std::size_t n, int sample_rate, const std::vector<Band>& bands) {
  double e = 0.0;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double f = bin_frequency(k, n, sample_rate);
    if (!in_any(f, bands)) continue;
    // Interior bins stand for both the positive and negative frequency.
    const double w = (k == 0 || (n % 2 == 0 && k == n / 2)) ? 1.0 : 2.0;
    e += w * std::norm(bins[k]);
  }
  return e / static_cast<double>(n);
}

double band_energy(std::span<const float> x, int sample_rate, double lo_hz, double hi_hz) {
  return band_energy(rfft(x), x.size(), sample_rate, {Band{lo_hz, hi_hz}});
}

double total_energy(std::span<const float> x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

double dominant_frequency(std::span<const float> x, int sample_rate, double min_hz) {
  const Spectrum bins = rfft(x);
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 1; k < bins.size(); ++k) {
    if (bin_frequency(k, x.size(), sample_rate) < min_hz) continue;
    const double m = std::abs(bins[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  return bin_frequency(best, x.size(), sample_rate);
}

std::vector<float> band_filter(std::span<const float> x, int sample_rate,
                               const std::vector<Band>& bands, bool stop) {
  if (x.empty()) return {};
  Spectrum bins = rfft(x);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const bool inside = in_any(bin_frequency(k, x.size(), sample_rate), bands);
    if (inside == stop) bins[k] = {0.0, 0.0};
  }
  return irfft(bins, x.size());
}

std::vector<double> log_band_edges(int bands, double lo_hz, double hi_hz) {
  require(bands >= 1, "log_band_edges: need at least one band");
  require(lo_hz > 0.0 && hi_hz > lo_hz, "log_band_edges: invalid frequency range");
  std::vector<double> edges(static_cast<std::size_t>(bands) + 1);
  for (int i = 0; i <= bands; ++i)
    edges[static_cast<std::size_t>(i)] = lo_hz * std::pow(hi_hz / lo_hz, static_cast<double>(i) / bands);
  return edges;
}

double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  return std::sqrt(total_energy(x) / static_cast<double>(x.size()));
}

std::vector<double> frame_rms(std::span<const float> x, int frames, std::size_t window) {
  std::vector<double> out(static_cast<std::size_t>(frames), 0.0);
  for (int f = 0; f < frames; ++f) {
    const std::size_t a = static_cast<std::size_t>(f) * window;
    if (a >= x.size()) break;
    const std::size_t len = std::min(window, x.size() - a);
    out[static_cast<std::size_t>(f)] = rms(x.subspan(a, len));
  }
  return out;
}

namespace serial {

std::vector<float> frame_band_energies(std::span<const float> x, int frames, std::size_t window,
                                       int sample_rate, const std::vector<double>& edges) {
  require(x.size() >= static_cast<std::size_t>(frames) * window, "frame_band_energies: signal too short");
  const std::size_t nb = edges.size() - 1;
  std::vector<float> out(static_cast<std::size_t>(frames) * nb);
  for (int f = 0; f < frames; ++f) {
    const auto bins = naive_dft(x.subspan(static_cast<std::size_t>(f) * window, window));
    const auto e = pool_bands(bins, window, sample_rate, edges);
    std::copy(e.begin(), e.end(), out.begin() + static_cast<std::ptrdiff_t>(f * nb));
  }
  return out;
}

}  // namespace serial

namespace parallel {

std::vector<float> frame_band_energies(std::span<const float> x, int frames, std::size_t window,
                                       int sample_rate, const std::vector<double>& edges) {
  require(x.size() >= static_cast<std::size_t>(frames) * window, "frame_band_energies: signal too short");
  const std::size_t nb = edges.size() - 1;
  std::vector<float> out(static_cast<std::size_t>(frames) * nb);
  plans_for(window);
#pragma omp parallel for schedule(static)
  for (int f = 0; f < frames; ++f) {
    const auto bins = rfft(x.subspan(static_cast<std::size_t>(f) * window, window));
    const auto e = pool_bands(bins, window, sample_rate, edges);
    std::copy(e.begin(), e.end(), out.begin() + static_cast<std::ptrdiff_t>(f * nb));
  }
  return out;
}

}  // namespace parallel

}  // namespace avi::spectral
