#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avi/types.hpp"

namespace avi::world {

enum class Shape { circle, square, triangle };
enum class TrajectoryKind { bounce, orbit, drift };
enum class Voice { tone, chirp, noise_burst };
enum class EventRuleKind { on_bounce, on_flash, periodic };

using Rgb = std::array<float, 3>;

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::drift;
  // bounce / drift: start position and per-frame velocity (pixels).
  double x0 = 0.0, y0 = 0.0, vx = 0.0, vy = 0.0;
  // orbit: centre, radius (pixels), angular speed (rad/frame), phase (rad).
  double cx = 0.0, cy = 0.0, orbit_radius = 0.0, omega = 0.0, phase = 0.0;
};

struct EventRule {
  EventRuleKind kind = EventRuleKind::periodic;
  int period = 8;  // frames, for periodic
};

struct InstanceSpec {
  Shape shape = Shape::circle;
  Rgb color{0.85f, 0.15f, 0.15f};
  double radius = 4.0;      // circumradius in pixels
  double angle_deg = 45.0;  // rotation for square and triangle
  Trajectory trajectory;
  bool sounding = false;
  bool hidden = false;  // removal targets keep the geometry but draw nothing
  Voice voice = Voice::tone;
  double base_freq = 440.0;
  EventRule event_rule;
  std::uint64_t voice_seed = 0;
};

struct BackgroundSpec {
  Rgb base{0.3f, 0.3f, 0.3f};
  float texture_amplitude = 0.03f;
  double hum_freq = 60.0;
  float hum_gain = 0.12f;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int frames = 16;
  int height = 32;
  int width = 32;
  double fps = 8.0;
  int sample_rate = 8000;
  std::vector<InstanceSpec> instances;
  BackgroundSpec background;

  std::size_t samples() const;
  int sounding_index() const;
  const InstanceSpec& sounding() const { return instances[static_cast<std::size_t>(sounding_index())]; }
};

// Closed attribute vocabulary. Tokens are "category:value".
const std::vector<std::string>& vocabulary();
int vocab_id(const std::string& token);  // -1 when unknown
bool in_vocabulary(const std::string& token);

struct TokenDescriptor {
  std::vector<std::string> tokens;
  static constexpr std::size_t max_length = 8;

  std::string serialize() const;
  static TokenDescriptor parse(const std::string& text);
  std::vector<int> ids() const;
  std::optional<std::string> value_of(const std::string& category) const;
  bool empty() const { return tokens.empty(); }
  bool operator==(const TokenDescriptor&) const = default;
};

struct Stems {
  AudioTrack background;  // hum
  AudioTrack instance;    // event bursts of the sounding instance
};

struct SceneSample {
  SceneSpec spec;
  VideoClip video;
  AudioTrack audio;
  InstanceMask mask;
  TokenDescriptor descriptor;
  std::vector<int> event_times;
  Stems stems;
};

struct EditPair {
  SceneSample source;
  SceneSample target;
  TokenDescriptor edited_descriptor;
};

// Burst length in seconds and the time-constant of the visual flash.
inline constexpr double kBurstSeconds = 0.08;
inline constexpr double kBurstAttack = 0.1;  // fraction of the burst spent rising
inline constexpr float kBurstGain = 0.7f;
inline constexpr float kFlashGain = 0.7f;
inline constexpr float kFlashDecay = 0.5f;
inline constexpr float kPeakLimit = 0.9f;

// Per-frame centre positions of an instance.
std::vector<std::array<double, 2>> simulate_trajectory(const Trajectory& tr, int frames, double radius,
                                                       int height, int width);
std::vector<int> event_frames(const SceneSpec& spec, int instance_index);
bool occupies(const InstanceSpec& inst, double cx, double cy, double px, double py);

// One burst of the given voice starting at sample 0, enveloped, unit gain.
std::vector<float> voice_burst(Voice voice, double freq, int sample_rate, std::uint64_t voice_seed);
// Bursts at round(frame * S / fps) for each event frame, summed at kBurstGain.
AudioTrack render_bursts(Voice voice, double freq, const std::vector<int>& frames, int sample_rate,
                         double fps, std::size_t length, std::uint64_t voice_seed, float gain = kBurstGain);
AudioTrack render_hum(const SceneSpec& spec);

SceneSample generate_scene(const SceneSpec& spec);
EditPair generate_edit_pair(const SceneSpec& spec, const TokenDescriptor& edit, std::uint64_t seed);
// Applies edit tokens to the sounding instance; throws on unknown or non-editable tokens.
SceneSpec apply_edit(const SceneSpec& spec, const TokenDescriptor& edit, std::uint64_t seed);
TokenDescriptor describe(const SceneSpec& spec);

enum class CoarseMode { bbox, blur };
InstanceMask coarse_mask(const InstanceMask& mask, CoarseMode mode, double p = 0.0);

struct WorldScale {
  int frames = 16;
  int height = 32;
  int width = 32;
  double fps = 8.0;
  int sample_rate = 8000;
};

// Seeded random scene in the given scale, always valid.
SceneSpec sample_scene_spec(std::uint64_t seed, const WorldScale& scale);

// Palette used by colour tokens.
const std::vector<std::pair<std::string, Rgb>>& palette();
std::string nearest_color_name(const Rgb& c);

std::string to_string(Shape s);
std::string to_string(TrajectoryKind k);
std::string to_string(Voice v);
std::string timing_token(const EventRule& r);
double frequency_token_value(const std::string& token);

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

}  // namespace avi::world
