#pragma once

#include <optional>
#include <set>
#include <vector>

#include "avi/types.hpp"
#include "avi/world.hpp"

namespace avi {

// frames x bands log band energies.
struct AudioTokens {
  int frames = 0;
  int bands = 0;
  std::vector<float> data;

  AudioTokens() = default;
  AudioTokens(int t, int b) : frames(t), bands(b), data(static_cast<std::size_t>(t) * b, 0.0f) {}
  float at(int f, int b) const { return data[static_cast<std::size_t>(f) * bands + b]; }
  float& at(int f, int b) { return data[static_cast<std::size_t>(f) * bands + b]; }
};

struct ControlContexts {
  std::optional<VideoClip> scribble;
  std::optional<VideoClip> pose;
  std::optional<VideoClip> reference;  // one frame
};

struct ConditionBundle {
  world::TokenDescriptor text;
  AudioTokens audio;
  ControlContexts contexts;
  std::set<int> unmasked_frames;
};

}  // namespace avi
