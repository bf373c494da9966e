#include "avi/codec.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "avi/kernels.hpp"

namespace avi::codec {

std::vector<double> dct_matrix(int n) {
  std::vector<double> m(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i)
      m[static_cast<std::size_t>(k) * n + i] = scale * std::cos(std::numbers::pi * (i + 0.5) * k / n);
  }
  return m;
}

std::vector<float> patch_basis(int s, int channels) {
  require(s >= 1 && channels >= 1, "patch basis needs positive sizes");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<float>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({s, channels});
  if (it != cache.end()) return it->second;
  const auto ds = dct_matrix(s);
  const auto dc = dct_matrix(channels);
  const int d = channels * s * s;
  std::vector<float> b(static_cast<std::size_t>(d) * d);
  for (int ky = 0; ky < s; ++ky)
    for (int kx = 0; kx < s; ++kx)
      for (int kc = 0; kc < channels; ++kc) {
        const int row = (ky * s + kx) * channels + kc;
        for (int y = 0; y < s; ++y)
          for (int x = 0; x < s; ++x)
            for (int c = 0; c < channels; ++c) {
              const int col = (y * s + x) * channels + c;
              b[static_cast<std::size_t>(row) * d + col] = static_cast<float>(
                  ds[static_cast<std::size_t>(ky) * s + y] * ds[static_cast<std::size_t>(kx) * s + x] *
                  dc[static_cast<std::size_t>(kc) * channels + c]);
            }
      }
  cache.emplace(std::make_pair(s, channels), b);
  return b;
}

LatentGrid encode(const VideoClip& video, int s) {
  require(s >= 1, "patch size must be positive");
  if (video.height % s != 0 || video.width % s != 0)
    fail("frame size ", std::to_string(video.height), "x", std::to_string(video.width),
         " is not divisible by patch size s=", std::to_string(s));
  const int h = video.height / s, w = video.width / s, C = video.channels, d = C * s * s;
  LatentGrid g(video.frames, h, w, d, s, {video.frames, video.height, video.width, C});
  std::vector<float> patches(g.data.size());
  for (int f = 0; f < video.frames; ++f)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float* dst = patches.data() + g.index(f, y, x, 0);
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            for (int c = 0; c < C; ++c) dst[(dy * s + dx) * C + c] = video.at(f, y * s + dy, x * s + dx, c);
      }
  const auto basis = patch_basis(s, C);
  kernels::parallel::patch_apply(patches.data(), g.data.data(), g.cells(), d, basis.data(), false);
  return g;
}

VideoClip decode(const LatentGrid& latent, bool clamp) {
  const auto [T, H, W, C] = latent.origin_shape;
  const int s = latent.patch;
  if (T != latent.frames || H != latent.h * s || W != latent.w * s || latent.dim != C * s * s)
    fail("latent grid ", shape_str(latent), " does not match its origin shape");
  VideoClip v(T, H, W, C, 8.0);
  std::vector<float> patches(latent.data.size());
  const auto basis = patch_basis(s, C);
  kernels::parallel::patch_apply(latent.data.data(), patches.data(), latent.cells(), latent.dim, basis.data(), true);
  for (int f = 0; f < T; ++f)
    for (int y = 0; y < latent.h; ++y)
      for (int x = 0; x < latent.w; ++x) {
        const float* src = patches.data() + latent.index(f, y, x, 0);
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            for (int c = 0; c < C; ++c) {
              float val = src[(dy * s + dx) * C + c];
              if (clamp) val = std::clamp(val, 0.0f, 1.0f);
              v.at(f, y * s + dy, x * s + dx, c) = val;
            }
      }
  return v;
}

LatentMask downsample_mask(const InstanceMask& mask, int s) {
  if (mask.height % s != 0 || mask.width % s != 0)
    fail("mask size is not divisible by patch size s=", std::to_string(s));
  LatentMask out(mask.frames, mask.height / s, mask.width / s, 0.0f);
  for (int f = 0; f < mask.frames; ++f)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        float m = 0.0f;
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx) m = std::max(m, mask.at(f, y * s + dy, x * s + dx));
        out.at(f, y, x) = m;
      }
  return out;
}

InstanceMask upsample_mask(const LatentMask& lmask, int s) {
  InstanceMask out(lmask.frames, lmask.h * s, lmask.w * s, 0.0f);
  for (int f = 0; f < out.frames; ++f)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(f, y, x) = lmask.at(f, y / s, x / s);
  return out;
}

}  // namespace avi::codec
