#include "avi/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "avi/degrade.hpp"
#include "avi/rng.hpp"

namespace avi::world {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::vector<double>& frequency_values() {
  static const std::vector<double> v{220, 330, 440, 550, 660, 880, 1100, 1320};
  return v;
}

std::string freq_token(double f) {
  double best = frequency_values().front();
  for (double v : frequency_values())
    if (std::abs(v - f) < std::abs(best - f)) best = v;
  return "freq:" + std::to_string(static_cast<int>(best));
}

std::string category_of(const std::string& token) {
  const auto pos = token.find(':');
  return pos == std::string::npos ? std::string{} : token.substr(0, pos);
}

std::string value_part(const std::string& token) {
  const auto pos = token.find(':');
  return pos == std::string::npos ? std::string{} : token.substr(pos + 1);
}

bool valid_center(double cx, double cy, double r, int h, int w) {
  constexpr double eps = 1e-9;
  return cx - r >= -eps && cx + r <= w + eps && cy - r >= -eps && cy + r <= h + eps;
}

Shape parse_shape(const std::string& v) {
  if (v == "circle") return Shape::circle;
  if (v == "square") return Shape::square;
  if (v == "triangle") return Shape::triangle;
  fail("unknown shape '", v, "'");
}

TrajectoryKind parse_traj(const std::string& v) {
  if (v == "bounce") return TrajectoryKind::bounce;
  if (v == "orbit") return TrajectoryKind::orbit;
  if (v == "drift") return TrajectoryKind::drift;
  fail("unknown trajectory '", v, "'");
}

Voice parse_voice(const std::string& v) {
  if (v == "tone") return Voice::tone;
  if (v == "chirp") return Voice::chirp;
  if (v == "noise" || v == "noise_burst") return Voice::noise_burst;
  fail("unknown voice '", v, "'");
}

EventRule parse_timing(const std::string& v) {
  if (v == "on_bounce") return {EventRuleKind::on_bounce, 0};
  if (v == "on_flash") return {EventRuleKind::on_flash, 0};
  if (v.rfind("periodic", 0) == 0) {
    const int k = std::stoi(v.substr(8));
    require(k >= 1, "periodic timing needs a positive period");
    return {EventRuleKind::periodic, k};
  }
  fail("unknown timing '", v, "'");
}

void validate(const SceneSpec& spec) {
  require(spec.frames >= 1 && spec.height >= 1 && spec.width >= 1, "scene dimensions must be positive");
  require(spec.fps > 0.0 && spec.sample_rate > 0, "fps and sample rate must be positive");
  require(!spec.instances.empty() && spec.instances.size() <= 3, "a scene holds 1 to 3 instances");
  int sounding = 0;
  for (const auto& inst : spec.instances) sounding += inst.sounding ? 1 : 0;
  require(sounding == 1, "exactly one instance must be sounding");
  const double n = spec.frames * spec.sample_rate / spec.fps;
  require(std::abs(n - std::round(n)) < 1e-9, "frames * sample_rate / fps must be an integer");
  for (std::size_t i = 0; i < spec.instances.size(); ++i) {
    const auto& inst = spec.instances[i];
    require(inst.radius > 0.0, "instance " + std::to_string(i) + ": radius must be positive");
    if (inst.sounding)
      require(inst.base_freq > 0.0 && inst.base_freq < spec.sample_rate / 2.0,
              "instance " + std::to_string(i) + ": base frequency must be below Nyquist");
    const auto pos = simulate_trajectory(inst.trajectory, spec.frames, inst.radius, spec.height, spec.width);
    for (std::size_t f = 0; f < pos.size(); ++f)
      if (!valid_center(pos[f][0], pos[f][1], inst.radius, spec.height, spec.width))
        fail("instance ", std::to_string(i), " leaves the frame at frame ", std::to_string(f));
  }
}

float flash_level(const std::vector<int>& events, int f) {
  float level = 0.0f;
  for (int e : events)
    if (e <= f) level += kFlashGain * std::pow(kFlashDecay, static_cast<float>(f - e));
  return std::min(level, 1.0f);
}

void normalize_peak(SceneSample& s) {
  float peak = 0.0f;
  for (float v : s.audio.samples) peak = std::max(peak, std::abs(v));
  if (peak <= kPeakLimit) return;
  const float g = kPeakLimit / peak;
  for (auto* track : {&s.audio, &s.stems.background, &s.stems.instance})
    for (auto& v : track->samples) v *= g;
}

}  // namespace

std::size_t SceneSpec::samples() const {
  return static_cast<std::size_t>(std::llround(frames * sample_rate / fps));
}

int SceneSpec::sounding_index() const {
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (instances[i].sounding) return static_cast<int>(i);
  fail("scene has no sounding instance");
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v{"shape:circle", "shape:square", "shape:triangle"};
    for (const auto& [name, rgb] : palette()) v.push_back("color:" + name);
    for (const char* t : {"bounce", "orbit", "drift"}) v.push_back(std::string("traj:") + t);
    for (const char* t : {"tone", "chirp", "noise"}) v.push_back(std::string("voice:") + t);
    for (double f : frequency_values()) v.push_back("freq:" + std::to_string(static_cast<int>(f)));
    v.push_back("timing:on_bounce");
    v.push_back("timing:on_flash");
    for (int k = 2; k <= 8; ++k) v.push_back("timing:periodic" + std::to_string(k));
    v.push_back("instance:none");
    return v;
  }();
  return vocab;
}

int vocab_id(const std::string& token) {
  const auto& v = vocabulary();
  const auto it = std::find(v.begin(), v.end(), token);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

bool in_vocabulary(const std::string& token) { return vocab_id(token) >= 0; }

std::string TokenDescriptor::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

TokenDescriptor TokenDescriptor::parse(const std::string& text) {
  TokenDescriptor d;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    if (!in_vocabulary(tok)) fail("unknown descriptor token '", tok, "'");
    d.tokens.push_back(tok);
  }
  require(d.tokens.size() <= max_length, "descriptor longer than " + std::to_string(max_length) + " tokens");
  return d;
}

std::vector<int> TokenDescriptor::ids() const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int id = vocab_id(t);
    if (id < 0) fail("unknown descriptor token '", t, "'");
    out.push_back(id);
  }
  return out;
}

std::optional<std::string> TokenDescriptor::value_of(const std::string& category) const {
  for (const auto& t : tokens)
    if (category_of(t) == category) return value_part(t);
  return std::nullopt;
}

const std::vector<std::pair<std::string, Rgb>>& palette() {
  static const std::vector<std::pair<std::string, Rgb>> p{
      {"red", {0.85f, 0.15f, 0.15f}},   {"green", {0.15f, 0.75f, 0.20f}},
      {"blue", {0.15f, 0.25f, 0.85f}},  {"yellow", {0.85f, 0.80f, 0.15f}},
      {"cyan", {0.15f, 0.75f, 0.80f}},  {"magenta", {0.75f, 0.20f, 0.75f}},
      {"orange", {0.90f, 0.50f, 0.10f}}, {"purple", {0.45f, 0.20f, 0.70f}}};
  return p;
}

std::string nearest_color_name(const Rgb& c) {
  std::string best;
  float best_d = 1e9f;
  for (const auto& [name, rgb] : palette()) {
    float d = 0.0f;
    for (int k = 0; k < 3; ++k) d += (rgb[k] - c[k]) * (rgb[k] - c[k]);
    if (d < best_d) {
      best_d = d;
      best = name;
    }
  }
  return best;
}

std::string to_string(Shape s) {
  switch (s) {
    case Shape::circle: return "circle";
    case Shape::square: return "square";
    case Shape::triangle: return "triangle";
  }
  return "circle";
}

std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::bounce: return "bounce";
    case TrajectoryKind::orbit: return "orbit";
    case TrajectoryKind::drift: return "drift";
  }
  return "drift";
}

std::string to_string(Voice v) {
  switch (v) {
    case Voice::tone: return "tone";
    case Voice::chirp: return "chirp";
    case Voice::noise_burst: return "noise";
  }
  return "tone";
}

std::string timing_token(const EventRule& r) {
  switch (r.kind) {
    case EventRuleKind::on_bounce: return "timing:on_bounce";
    case EventRuleKind::on_flash: return "timing:on_flash";
    case EventRuleKind::periodic: return "timing:periodic" + std::to_string(std::clamp(r.period, 2, 8));
  }
  return "timing:on_flash";
}

double frequency_token_value(const std::string& token) {
  require(category_of(token) == "freq", "not a frequency token: " + token);
  return std::stod(value_part(token));
}

std::vector<std::array<double, 2>> simulate_trajectory(const Trajectory& tr, int frames, double radius,
                                                       int height, int width) {
  std::vector<std::array<double, 2>> pos(static_cast<std::size_t>(frames));
  switch (tr.kind) {
    case TrajectoryKind::drift:
      for (int f = 0; f < frames; ++f) pos[static_cast<std::size_t>(f)] = {tr.x0 + tr.vx * f, tr.y0 + tr.vy * f};
      break;
    case TrajectoryKind::orbit:
      for (int f = 0; f < frames; ++f) {
        const double a = tr.phase + tr.omega * f;
        pos[static_cast<std::size_t>(f)] = {tr.cx + tr.orbit_radius * std::cos(a), tr.cy + tr.orbit_radius * std::sin(a)};
      }
      break;
    case TrajectoryKind::bounce: {
      const double lo_x = radius + 0.5, hi_x = width - radius - 0.5;
      const double lo_y = radius + 0.5, hi_y = height - radius - 0.5;
      double x = tr.x0, y = tr.y0, vx = tr.vx, vy = tr.vy;
      for (int f = 0; f < frames; ++f) {
        pos[static_cast<std::size_t>(f)] = {x, y};
        x += vx;
        y += vy;
        if (hi_x > lo_x) {
          if (x > hi_x) { x = 2 * hi_x - x; vx = -vx; }
          if (x < lo_x) { x = 2 * lo_x - x; vx = -vx; }
        }
        if (hi_y > lo_y) {
          if (y > hi_y) { y = 2 * hi_y - y; vy = -vy; }
          if (y < lo_y) { y = 2 * lo_y - y; vy = -vy; }
        }
      }
      break;
    }
  }
  return pos;
}

std::vector<int> event_frames(const SceneSpec& spec, int instance_index) {
  const auto& inst = spec.instances[static_cast<std::size_t>(instance_index)];
  std::vector<int> out;
  if (inst.hidden) return out;
  switch (inst.event_rule.kind) {
    case EventRuleKind::periodic:
      require(inst.event_rule.period >= 1, "periodic rule needs a positive period");
      for (int f = 0; f < spec.frames; f += inst.event_rule.period) out.push_back(f);
      break;
    case EventRuleKind::on_bounce: {
      const auto pos = simulate_trajectory(inst.trajectory, spec.frames, inst.radius, spec.height, spec.width);
      for (int f = 1; f + 1 < spec.frames; ++f) {
        const auto& a = pos[static_cast<std::size_t>(f - 1)];
        const auto& b = pos[static_cast<std::size_t>(f)];
        const auto& c = pos[static_cast<std::size_t>(f + 1)];
        const bool turn_x = (b[0] - a[0]) * (c[0] - b[0]) < 0.0;
        const bool turn_y = (b[1] - a[1]) * (c[1] - b[1]) < 0.0;
        if (turn_x || turn_y) out.push_back(f);
      }
      break;
    }
    case EventRuleKind::on_flash: {
      Rng rng(derive_seed(spec.seed, 0xF1A5, static_cast<std::uint64_t>(instance_index)));
      int last = -10;
      for (int f = 0; f < spec.frames; ++f) {
        const bool pick = rng.bernoulli(0.3);
        if (pick && f - last >= 2) {
          out.push_back(f);
          last = f;
        }
      }
      if (out.empty()) out.push_back(spec.frames / 2);
      break;
    }
  }
  return out;
}

bool occupies(const InstanceSpec& inst, double cx, double cy, double px, double py) {
  const double dx = px - cx, dy = py - cy, r = inst.radius;
  const double th = inst.angle_deg * std::numbers::pi / 180.0;
  switch (inst.shape) {
    case Shape::circle:
      return dx * dx + dy * dy <= r * r;
    case Shape::square: {
      const double u = dx * std::cos(th) + dy * std::sin(th);
      const double v = -dx * std::sin(th) + dy * std::cos(th);
      return std::max(std::abs(u), std::abs(v)) <= r / std::numbers::sqrt2;
    }
    case Shape::triangle: {
      std::array<std::array<double, 2>, 3> v{};
      for (int k = 0; k < 3; ++k) {
        const double a = -std::numbers::pi / 2 + th + k * 2.0 * std::numbers::pi / 3.0;
        v[static_cast<std::size_t>(k)] = {r * std::cos(a), r * std::sin(a)};
      }
      auto side = [&](const auto& a, const auto& b) {
        return (b[0] - a[0]) * (dy - a[1]) - (b[1] - a[1]) * (dx - a[0]);
      };
      const double s1 = side(v[0], v[1]), s2 = side(v[1], v[2]), s3 = side(v[2], v[0]);
      return (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
    }
  }
  return false;
}

std::vector<float> voice_burst(Voice voice, double freq, int sample_rate, std::uint64_t voice_seed) {
  const auto len = static_cast<std::size_t>(std::llround(kBurstSeconds * sample_rate));
  const auto attack = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kBurstAttack * len)));
  std::vector<float> out(len);
  std::vector<double> partial_freq, partial_phase;
  if (voice == Voice::noise_burst) {
    Rng rng(derive_seed(voice_seed, 0x0B5E));
    for (int i = 0; i < 12; ++i) {
      partial_freq.push_back(freq * rng.uniform(0.85, 1.15));
      partial_phase.push_back(rng.uniform(0.0, kTwoPi));
    }
  }
  double peak = 0.0;
  std::vector<double> raw(len);
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    double x = 0.0;
    switch (voice) {
      case Voice::tone: x = std::sin(kTwoPi * freq * t); break;
      case Voice::chirp: x = std::sin(kTwoPi * freq * t) * (1.0 + 0.8 * std::sin(kTwoPi * 40.0 * t)) / 1.8; break;
      case Voice::noise_burst:
        for (std::size_t i = 0; i < partial_freq.size(); ++i) x += std::sin(kTwoPi * partial_freq[i] * t + partial_phase[i]);
        break;
    }
    raw[n] = x;
    peak = std::max(peak, std::abs(x));
  }
  const double norm = (voice == Voice::noise_burst && peak > 0.0) ? 1.0 / peak : 1.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double env = n < attack ? static_cast<double>(n) / attack
                                  : static_cast<double>(len - n) / static_cast<double>(len - attack);
    out[n] = static_cast<float>(raw[n] * norm * env);
  }
  return out;
}

AudioTrack render_bursts(Voice voice, double freq, const std::vector<int>& frames, int sample_rate,
                         double fps, std::size_t length, std::uint64_t voice_seed, float gain) {
  AudioTrack out(sample_rate, length);
  const auto burst = voice_burst(voice, freq, sample_rate, voice_seed);
  for (int e : frames) {
    const auto onset = static_cast<std::size_t>(std::llround(e * sample_rate / fps));
    for (std::size_t n = 0; n < burst.size() && onset + n < length; ++n) out.samples[onset + n] += gain * burst[n];
  }
  return out;
}

AudioTrack render_hum(const SceneSpec& spec) {
  AudioTrack out(spec.sample_rate, spec.samples());
  Rng rng(derive_seed(spec.seed, 0x4D));
  const double phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t n = 0; n < out.size(); ++n)
    out.samples[n] = spec.background.hum_gain *
                     static_cast<float>(std::sin(kTwoPi * spec.background.hum_freq * n / spec.sample_rate + phase));
  return out;
}

SceneSample generate_scene(const SceneSpec& spec) {
  validate(spec);
  SceneSample s;
  s.spec = spec;
  s.video = VideoClip(spec.frames, spec.height, spec.width, 3, spec.fps);
  s.mask = InstanceMask(spec.frames, spec.height, spec.width, 0.0f);
  const int si = spec.sounding_index();
  const auto& sounding = spec.instances[static_cast<std::size_t>(si)];
  s.event_times = event_frames(spec, si);
  if (!sounding.hidden) require(!s.event_times.empty(), "sounding instance produces no audio events");

  // Static textured background.
  Rng tex(derive_seed(spec.seed, 0xB6));
  std::vector<float> background(s.video.frame_size());
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float noise = static_cast<float>(tex.uniform(-1.0, 1.0)) * spec.background.texture_amplitude;
        background[(static_cast<std::size_t>(y) * spec.width + x) * 3 + c] =
            std::clamp(spec.background.base[static_cast<std::size_t>(c)] + noise, 0.0f, 1.0f);
      }

  std::vector<int> order;
  for (std::size_t i = 0; i < spec.instances.size(); ++i)
    if (static_cast<int>(i) != si) order.push_back(static_cast<int>(i));
  order.push_back(si);  // sounding instance drawn on top, so its mask is never occluded

  std::vector<std::vector<std::array<double, 2>>> paths;
  for (const auto& inst : spec.instances)
    paths.push_back(simulate_trajectory(inst.trajectory, spec.frames, inst.radius, spec.height, spec.width));

  for (int f = 0; f < spec.frames; ++f) {
    std::copy(background.begin(), background.end(),
              s.video.data.begin() + static_cast<std::ptrdiff_t>(f * s.video.frame_size()));
    for (int idx : order) {
      const auto& inst = spec.instances[static_cast<std::size_t>(idx)];
      if (inst.hidden) continue;
      const auto [cx, cy] = paths[static_cast<std::size_t>(idx)][static_cast<std::size_t>(f)];
      const float level = idx == si ? flash_level(s.event_times, f) : 0.0f;
      Rgb col;
      for (int c = 0; c < 3; ++c) col[static_cast<std::size_t>(c)] = inst.color[static_cast<std::size_t>(c)] + (1.0f - inst.color[static_cast<std::size_t>(c)]) * level;
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          if (!occupies(inst, cx, cy, x + 0.5, y + 0.5)) continue;
          for (int c = 0; c < 3; ++c) s.video.at(f, y, x, c) = col[static_cast<std::size_t>(c)];
          if (idx == si) s.mask.at(f, y, x) = 1.0f;
        }
    }
  }

  const std::size_t n = spec.samples();
  s.stems.background = render_hum(spec);
  s.stems.instance = sounding.hidden
                         ? AudioTrack(spec.sample_rate, n)
                         : render_bursts(sounding.voice, sounding.base_freq, s.event_times, spec.sample_rate,
                                         spec.fps, n, sounding.voice_seed);
  s.audio = AudioTrack(spec.sample_rate, n);
  for (std::size_t i = 0; i < n; ++i) s.audio.samples[i] = s.stems.background.samples[i] + s.stems.instance.samples[i];
  normalize_peak(s);
  s.descriptor = describe(spec);
  return s;
}

TokenDescriptor describe(const SceneSpec& spec) {
  const auto& inst = spec.sounding();
  if (inst.hidden) return TokenDescriptor{{"instance:none"}};
  TokenDescriptor d;
  d.tokens = {"shape:" + to_string(inst.shape),
              "color:" + nearest_color_name(inst.color),
              "traj:" + to_string(inst.trajectory.kind),
              "voice:" + to_string(inst.voice),
              freq_token(inst.base_freq),
              timing_token(inst.event_rule)};
  return d;
}

SceneSpec apply_edit(const SceneSpec& spec, const TokenDescriptor& edit, std::uint64_t seed) {
  SceneSpec out = spec;
  auto& inst = out.instances[static_cast<std::size_t>(out.sounding_index())];
  for (const auto& tok : edit.tokens) {
    if (!in_vocabulary(tok)) fail("unknown edit token '", tok, "'");
    const std::string cat = category_of(tok), val = value_part(tok);
    if (cat == "shape") {
      inst.shape = parse_shape(val);
    } else if (cat == "color") {
      for (const auto& [name, rgb] : palette())
        if (name == val) inst.color = rgb;
    } else if (cat == "voice") {
      inst.voice = parse_voice(val);
      inst.voice_seed = seed;
    } else if (cat == "freq") {
      inst.base_freq = std::stod(val);
      inst.voice_seed = seed;
    } else if (cat == "timing") {
      inst.event_rule = parse_timing(val);
    } else if (cat == "instance") {
      inst.hidden = true;
    } else {
      fail("edit token '", tok, "' names an attribute shared by source and target");
    }
  }
  return out;
}

EditPair generate_edit_pair(const SceneSpec& spec, const TokenDescriptor& edit, std::uint64_t seed) {
  EditPair pair;
  pair.source = generate_scene(spec);
  pair.target = generate_scene(apply_edit(spec, edit, seed));
  pair.edited_descriptor = pair.target.descriptor;
  return pair;
}

InstanceMask coarse_mask(const InstanceMask& mask, CoarseMode mode, double p) {
  if (mode == CoarseMode::bbox) return refiner::bbox_mask(mask);
  return refiner::degrade_mask(mask, refiner::PrecisionFactor{p});
}

SceneSpec sample_scene_spec(std::uint64_t seed, const WorldScale& scale) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, 0x5CE, attempt));
    SceneSpec spec;
    spec.seed = seed;
    spec.frames = scale.frames;
    spec.height = scale.height;
    spec.width = scale.width;
    spec.fps = scale.fps;
    spec.sample_rate = scale.sample_rate;
    const double gray = rng.uniform(0.15, 0.45);
    for (int c = 0; c < 3; ++c) spec.background.base[static_cast<std::size_t>(c)] = static_cast<float>(gray + rng.uniform(-0.05, 0.05));
    const double side = std::min(scale.height, scale.width);
    const double speed_scale = side / 16.0;
    const auto& pal = palette();
    const auto& freqs = frequency_values();

    const int count = 1 + (rng.bernoulli(0.5) ? 0 : rng.uniform_int(1, 2));
    const int sounding_slot = rng.uniform_int(0, count - 1);
    int sounding_color = 0;
    for (int i = 0; i < count; ++i) {
      InstanceSpec inst;
      inst.sounding = i == sounding_slot;
      inst.shape = static_cast<Shape>(rng.uniform_int(0, 2));
      int color = rng.uniform_int(0, static_cast<int>(pal.size()) - 1);
      if (!inst.sounding && color == sounding_color) color = (color + 1) % static_cast<int>(pal.size());
      if (inst.sounding) sounding_color = color;
      inst.color = pal[static_cast<std::size_t>(color)].second;
      inst.radius = side * (inst.sounding ? rng.uniform(0.22, 0.3) : rng.uniform(0.12, 0.18));
      inst.angle_deg = inst.shape == Shape::square ? rng.uniform(30.0, 60.0) : rng.uniform(-15.0, 15.0);
      const double r = inst.radius;
      const double lo = r + 0.5, hi_x = scale.width - r - 0.5, hi_y = scale.height - r - 0.5;
      auto& tr = inst.trajectory;
      tr.kind = static_cast<TrajectoryKind>(rng.uniform_int(0, 2));
      if (tr.kind == TrajectoryKind::bounce) {
        tr.x0 = rng.uniform(lo, hi_x);
        tr.y0 = rng.uniform(lo, hi_y);
        const double a = rng.uniform(0.0, kTwoPi);
        const double sp = speed_scale * rng.uniform(0.6, 1.1);
        tr.vx = sp * std::cos(a);
        tr.vy = sp * std::sin(a);
      } else if (tr.kind == TrajectoryKind::orbit) {
        tr.orbit_radius = side * rng.uniform(0.06, 0.14);
        tr.cx = rng.uniform(lo + tr.orbit_radius, hi_x - tr.orbit_radius);
        tr.cy = rng.uniform(lo + tr.orbit_radius, hi_y - tr.orbit_radius);
        tr.omega = rng.uniform(0.1, 0.25) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        tr.phase = rng.uniform(0.0, kTwoPi);
      } else {
        tr.x0 = rng.uniform(lo, hi_x);
        tr.y0 = rng.uniform(lo, hi_y);
        const double x1 = rng.uniform(lo, hi_x), y1 = rng.uniform(lo, hi_y);
        const double steps = std::max(1, scale.frames - 1);
        const double max_v = speed_scale * 0.8;
        tr.vx = std::clamp((x1 - tr.x0) / steps, -max_v, max_v);
        tr.vy = std::clamp((y1 - tr.y0) / steps, -max_v, max_v);
      }
      inst.voice = static_cast<Voice>(rng.uniform_int(0, 2));
      std::vector<double> allowed;
      for (double f : freqs)
        if (f < scale.sample_rate / 2.0 * 0.8) allowed.push_back(f);
      inst.base_freq = allowed[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(allowed.size()) - 1))];
      inst.voice_seed = derive_seed(seed, 0x701CE, static_cast<std::uint64_t>(i));
      const double pick = rng.uniform();
      if (tr.kind == TrajectoryKind::bounce && pick < 0.4)
        inst.event_rule = {EventRuleKind::on_bounce, 0};
      else if (pick < 0.7)
        inst.event_rule = {EventRuleKind::periodic, rng.uniform_int(2, 5)};
      else
        inst.event_rule = {EventRuleKind::on_flash, 0};
      spec.instances.push_back(inst);
    }
    try {
      validate(spec);
      if (event_frames(spec, spec.sounding_index()).empty()) continue;
      return spec;
    } catch (const ValidationError&) {
      continue;
    }
  }
}

// --- JSON ---------------------------------------------------------------

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"seed", s.seed}, {"frames", s.frames}, {"height", s.height}, {"width", s.width},
                     {"fps", s.fps},   {"sample_rate", s.sample_rate}};
  j["background"] = {{"base", s.background.base},
                     {"texture_amplitude", s.background.texture_amplitude},
                     {"hum_freq", s.background.hum_freq},
                     {"hum_gain", s.background.hum_gain}};
  auto arr = nlohmann::json::array();
  for (const auto& inst : s.instances) {
    const auto& t = inst.trajectory;
    arr.push_back({{"shape", to_string(inst.shape)},
                   {"color", inst.color},
                   {"radius", inst.radius},
                   {"angle_deg", inst.angle_deg},
                   {"trajectory",
                    {{"kind", to_string(t.kind)}, {"x0", t.x0}, {"y0", t.y0}, {"vx", t.vx}, {"vy", t.vy},
                     {"cx", t.cx}, {"cy", t.cy}, {"orbit_radius", t.orbit_radius}, {"omega", t.omega},
                     {"phase", t.phase}}},
                   {"sounding", inst.sounding},
                   {"hidden", inst.hidden},
                   {"voice", to_string(inst.voice)},
                   {"base_freq", inst.base_freq},
                   {"timing", timing_token(inst.event_rule)},
                   {"period", inst.event_rule.period},
                   {"voice_seed", inst.voice_seed}});
  }
  j["instances"] = arr;
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.seed = j.at("seed").get<std::uint64_t>();
  s.frames = j.at("frames").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.fps = j.at("fps").get<double>();
  s.sample_rate = j.at("sample_rate").get<int>();
  const auto& bg = j.at("background");
  s.background.base = bg.at("base").get<Rgb>();
  s.background.texture_amplitude = bg.at("texture_amplitude").get<float>();
  s.background.hum_freq = bg.at("hum_freq").get<double>();
  s.background.hum_gain = bg.at("hum_gain").get<float>();
  s.instances.clear();
  for (const auto& ji : j.at("instances")) {
    InstanceSpec inst;
    inst.shape = parse_shape(ji.at("shape").get<std::string>());
    inst.color = ji.at("color").get<Rgb>();
    inst.radius = ji.at("radius").get<double>();
    inst.angle_deg = ji.at("angle_deg").get<double>();
    const auto& jt = ji.at("trajectory");
    auto& t = inst.trajectory;
    t.kind = parse_traj(jt.at("kind").get<std::string>());
    t.x0 = jt.at("x0"); t.y0 = jt.at("y0"); t.vx = jt.at("vx"); t.vy = jt.at("vy");
    t.cx = jt.at("cx"); t.cy = jt.at("cy"); t.orbit_radius = jt.at("orbit_radius");
    t.omega = jt.at("omega"); t.phase = jt.at("phase");
    inst.sounding = ji.at("sounding").get<bool>();
    inst.hidden = ji.value("hidden", false);
    inst.voice = parse_voice(ji.at("voice").get<std::string>());
    inst.base_freq = ji.at("base_freq").get<double>();
    const auto timing = ji.at("timing").get<std::string>();
    inst.event_rule = parse_timing(value_part(timing));
    if (inst.event_rule.kind == EventRuleKind::periodic) inst.event_rule.period = ji.at("period").get<int>();
    inst.voice_seed = ji.at("voice_seed").get<std::uint64_t>();
    s.instances.push_back(inst);
  }
}

}  // namespace avi::world
