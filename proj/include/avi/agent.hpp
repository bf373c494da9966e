#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avi/spectral.hpp"
#include "avi/types.hpp"
#include "avi/world.hpp"

namespace avi::agent {

enum class SepDomain { speech, non_speech };
enum class GenTrack { speech, music, sound };
enum class PlanMode { edit, insert, remove };

std::string to_string(SepDomain d);
std::string to_string(GenTrack t);

// One audible component: "all", "hum:60", "tone:440", "chirp:440", "noise:440".
struct Component {
  std::string kind;
  double freq = 0.0;

  std::string token() const;
  static Component parse(const std::string& token);
  bool operator==(const Component&) const = default;
};

struct StructuredDescriptor {
  std::vector<Component> components;
  double gain = world::kBurstGain;
  std::vector<int> event_frames;
  double bandwidth = 1.0;  // multiplier on each component's nominal band
  bool stop_removed = false;
  std::vector<Component> removed;  // explicitly notched when stop_removed is set

  bool empty() const { return components.empty(); }
  bool keeps_all() const;
  std::vector<std::string> tokens() const;
  bool operator==(const StructuredDescriptor&) const = default;
};

// Nominal frequency band of a component, scaled by `bandwidth`.
spectral::Band component_band(const Component& c, double bandwidth, int sample_rate);
std::vector<spectral::Band> descriptor_bands(const StructuredDescriptor& d, int sample_rate);
// Parts of the bands in `a` not covered by any band in `b`.
std::vector<spectral::Band> band_difference(const std::vector<spectral::Band>& a, const std::vector<spectral::Band>& b);

struct AgentPlan {
  StructuredDescriptor c_sep;
  StructuredDescriptor c_gen;
  SepDomain sep_domain = SepDomain::non_speech;
  GenTrack gen_track = GenTrack::sound;
  std::vector<Component> original;  // the instance's own components in a_orig
  std::vector<int> original_events;
};

inline constexpr int kDimensions = 5;
inline const std::array<const char*, kDimensions> kDimensionNames{
    "separation_accuracy", "generation_accuracy", "acoustic_harmony", "instruction_adherence", "audio_fidelity"};

struct Verdict {
  std::array<int, kDimensions> scores{0, 0, 0, 0, 0};
  std::array<double, kDimensions> measures{0, 0, 0, 0, 0};
  int q = 0;
  bool accepted = false;
  std::optional<StructuredDescriptor> feedback_sep;
  std::optional<StructuredDescriptor> feedback_gen;
};

struct Iteration {
  AgentPlan plan;
  AudioTrack a_sep;
  AudioTrack a_gen;
  AudioTrack a_mix;
  Verdict verdict;
};

struct AgentTrace {
  std::vector<Iteration> iterations;
  AudioTrack final;
  int iteration_count = 0;
  int final_index = 0;
  bool accepted = false;
};

// Rubric cut points: a measure at or beyond `two` scores 2, beyond `one` scores 1.
struct JudgeThresholds {
  double removed_db_two = -20.0, removed_db_one = -10.0;  // residual of removed bands
  double level_two = 0.5, level_one = 0.25;               // generated vs original burst level
  double dominance_min = 0.5;                             // in-band share of generated windows
  double clip_two = 0.001, clip_one = 0.01;               // clipped sample fraction
  double crest_max = 12.0;
  double onset_f1_two = 0.9, onset_f1_one = 0.5;
  double snr_two = 15.0, snr_one = 8.0;                   // dB in-band vs out-of-band
  double onset_floor_ratio = 1.6;                         // frame RMS over the quietest frame
};

// Scene summary from the captioner: audible components and event frames.
StructuredDescriptor caption(const world::SceneSample& scene);

AgentPlan plan(const world::SceneSample& scene, const InstanceMask& coarse_mask, const StructuredDescriptor& summary,
               const world::TokenDescriptor& edit, PlanMode mode = PlanMode::edit);

using Separator = std::function<AudioTrack(const AudioTrack&, const StructuredDescriptor&)>;
using Generator = std::function<AudioTrack(const StructuredDescriptor&, double duration, int sample_rate, double fps)>;

class Registry {
 public:
  static Registry desk();  // default deterministic components
  void add_separator(SepDomain d, const std::string& name, Separator s);
  void add_generator(GenTrack t, const std::string& name, Generator g);
  void check_complete() const;
  const Separator& separator(SepDomain d) const;
  const Generator& generator(GenTrack t) const;
  std::map<std::string, std::string> names() const;

 private:
  std::map<SepDomain, std::pair<std::string, Separator>> seps_;
  std::map<GenTrack, std::pair<std::string, Generator>> gens_;
};

AudioTrack separate(const AudioTrack& a_orig, const StructuredDescriptor& c_sep, SepDomain domain,
                    const Registry& registry);
AudioTrack generate(const StructuredDescriptor& c_gen, GenTrack track, double duration, int sample_rate, double fps,
                    const Registry& registry);
AudioTrack remix(const AudioTrack& a_sep, const AudioTrack& a_gen, std::pair<double, double> gains = {1.0, 1.0});

Verdict judge(const AudioTrack& a_mix, const AgentPlan& plan, const world::SceneSample& scene,
              const world::TokenDescriptor& edit, int tau = 7, const JudgeThresholds& th = {});

struct CurateOptions {
  int max_iters = 4;
  int tau = 7;
  JudgeThresholds thresholds;
  PlanMode mode = PlanMode::edit;
  std::optional<double> initial_gain;  // overrides the planner's generation gain
};

AgentTrace curate(const world::SceneSample& scene, const InstanceMask& coarse_mask, const world::TokenDescriptor& edit,
                  const Registry& registry, const CurateOptions& opt = {});

// Frames whose RMS stands out above the quietest frame.
std::vector<int> detect_onsets(const AudioTrack& a, int frames, double floor_ratio);
double onset_f1(const std::vector<int>& expected, const std::vector<int>& detected);

nlohmann::json to_json(const AgentPlan& p);
nlohmann::json to_json(const Verdict& v);
// Audio file names are recorded as iter<k>_{sep,gen,mix}.avk.
nlohmann::json trace_to_json(const AgentTrace& t, const Registry& registry);

}  // namespace avi::agent
