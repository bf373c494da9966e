#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "avi/error.hpp"

namespace avi {

// frames x height x width x channels, row-major, values in [0,1].
struct VideoClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 3;
  double fps = 8.0;
  std::vector<float> data;

  VideoClip() = default;
  VideoClip(int t, int h, int w, int c, double rate)
      : frames(t), height(h), width(w), channels(c), fps(rate),
        data(static_cast<std::size_t>(t) * h * w * c, 0.0f) {}

  std::size_t index(int f, int y, int x, int c) const {
    return ((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c;
  }
  float& at(int f, int y, int x, int c) { return data[index(f, y, x, c)]; }
  float at(int f, int y, int x, int c) const { return data[index(f, y, x, c)]; }
  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * channels; }
  bool same_shape(const VideoClip& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }
};

// Mono PCM samples in [-1,1].
struct AudioTrack {
  int sample_rate = 8000;
  std::vector<float> samples;

  AudioTrack() = default;
  AudioTrack(int rate, std::size_t n) : sample_rate(rate), samples(n, 0.0f) {}
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  std::size_t size() const { return samples.size(); }
};

// frames x height x width; binary at generation, soft after refinement.
struct InstanceMask {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  InstanceMask() = default;
  InstanceMask(int t, int h, int w, float fill = 0.0f)
      : frames(t), height(h), width(w), data(static_cast<std::size_t>(t) * h * w, fill) {}

  std::size_t index(int f, int y, int x) const {
    return (static_cast<std::size_t>(f) * height + y) * width + x;
  }
  float& at(int f, int y, int x) { return data[index(f, y, x)]; }
  float at(int f, int y, int x) const { return data[index(f, y, x)]; }
  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const InstanceMask& o) const {
    return frames == o.frames && height == o.height && width == o.width;
  }
};

// frames x h x w x dim latent tokens produced by the patch codec.
struct LatentGrid {
  int frames = 0;
  int h = 0;
  int w = 0;
  int dim = 0;
  int patch = 2;
  std::array<int, 4> origin_shape{0, 0, 0, 0};  // T,H,W,C
  std::vector<float> data;

  LatentGrid() = default;
  LatentGrid(int t, int hh, int ww, int d, int s, std::array<int, 4> origin)
      : frames(t), h(hh), w(ww), dim(d), patch(s), origin_shape(origin),
        data(static_cast<std::size_t>(t) * hh * ww * d, 0.0f) {}

  std::size_t cells() const { return static_cast<std::size_t>(frames) * h * w; }
  std::size_t index(int f, int y, int x, int k) const {
    return ((static_cast<std::size_t>(f) * h + y) * w + x) * dim + k;
  }
  float& at(int f, int y, int x, int k) { return data[index(f, y, x, k)]; }
  float at(int f, int y, int x, int k) const { return data[index(f, y, x, k)]; }
  bool same_shape(const LatentGrid& o) const {
    return frames == o.frames && h == o.h && w == o.w && dim == o.dim;
  }
  LatentGrid zeros_like() const {
    LatentGrid g = *this;
    std::fill(g.data.begin(), g.data.end(), 0.0f);
    return g;
  }
};

// frames x h x w companion mask at latent resolution.
struct LatentMask {
  int frames = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  LatentMask() = default;
  LatentMask(int t, int hh, int ww, float fill = 0.0f)
      : frames(t), h(hh), w(ww), data(static_cast<std::size_t>(t) * hh * ww, fill) {}

  std::size_t cells() const { return data.size(); }
  std::size_t index(int f, int y, int x) const {
    return (static_cast<std::size_t>(f) * h + y) * w + x;
  }
  float& at(int f, int y, int x) { return data[index(f, y, x)]; }
  float at(int f, int y, int x) const { return data[index(f, y, x)]; }
  bool matches(const LatentGrid& g) const { return frames == g.frames && h == g.h && w == g.w; }
  bool same_shape(const LatentMask& o) const {
    return frames == o.frames && h == o.h && w == o.w;
  }
};

inline std::string shape_str(const LatentGrid& g) {
  return std::to_string(g.frames) + "x" + std::to_string(g.h) + "x" + std::to_string(g.w) + "x" +
         std::to_string(g.dim);
}

}  // namespace avi
