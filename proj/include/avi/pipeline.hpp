#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "avi/agent.hpp"
#include "avi/backbone.hpp"
#include "avi/config.hpp"
#include "avi/degrade.hpp"
#include "avi/metrics.hpp"
#include "avi/refiner.hpp"

namespace avi::pipeline {

struct Models {
  const model::Backbone* backbone = nullptr;
  const refiner::Refiner* gamr = nullptr;  // null disables refinement
};

struct EditRequest {
  InstanceMask coarse_mask;
  double p0 = refiner::kMaxPrecision;
  world::TokenDescriptor edit;
  refiner::Schedule schedule;
  int steps = 16;
  agent::PlanMode mode = agent::PlanMode::edit;
  std::uint64_t seed = 0;
  std::set<int> unmasked_frames;
  std::optional<AudioTrack> audio_override;  // skips the agent when set
  std::optional<InstanceMask> gt_mask;       // for the IoU column
};

struct EditResult {
  VideoClip video;
  AudioTrack audio;
  InstanceMask refined_mask;  // pixel mask used at the last sampler step
  LatentMask final_latent_mask;
  std::optional<agent::AgentTrace> trace;
  std::vector<refiner::ScheduleStep> schedule_log;
  metrics::ClipRow row;
};

// Category-wise merge: edit tokens replace tokens of the same category.
world::TokenDescriptor merge_descriptor(const world::TokenDescriptor& base, const world::TokenDescriptor& edit);

agent::Registry registry_for(const train::TrainConfig& cfg);

// Curate audio, then run the mask-refining sampler and decode. Pixels outside
// the final sampler mask are copied from the input.
EditResult edit(const Models& models, const agent::Registry& registry, const world::SceneSample& scene,
                const EditRequest& req);

struct LongResult {
  std::vector<EditResult> segments;
  VideoClip video;  // k-frame overlaps removed
  AudioTrack audio;
};

// Segment i > 0 has its first k frames replaced by the previous output's last
// k frames and pinned through unmasked_frames. masks[i] is segment i's coarse
// mask; req.coarse_mask is used for every segment when masks is empty.
LongResult edit_long(const Models& models, const agent::Registry& registry,
                     const std::vector<world::SceneSample>& segments, const std::vector<InstanceMask>& masks, int k,
                     const EditRequest& req);

// Masks of a region over empty background, or the instance itself.
EditRequest insert_request(const InstanceMask& region, const world::TokenDescriptor& new_instance);
EditRequest remove_request(const InstanceMask& instance_mask);

struct ScheduleBench {
  std::vector<std::string> names;          // one per schedule
  std::vector<std::vector<double>> iou;    // [schedule][clip] refined IoU
  std::vector<double> input_iou;           // coarse-mask IoU per clip
  std::vector<double> mean() const;
  nlohmann::json to_json() const;
};

// Reconstruction runs on the given scenes with the coarse mask at p0,
// scoring the final refined mask against the downsampled ground truth.
ScheduleBench bench_schedules(const Models& models, const std::vector<world::SceneSample>& scenes, double p0,
                              int steps, const std::vector<refiner::ScheduleKind>& kinds, std::uint64_t seed,
                              int audio_bands, int patch = 2);

// Writes video/audio/mask AVK1 files plus trace.json and report.json.
void write_edit(const std::filesystem::path& dir, const EditResult& r, const agent::Registry& registry);

}  // namespace avi::pipeline
