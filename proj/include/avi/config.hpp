#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "avi/backbone.hpp"
#include "avi/degrade.hpp"
#include "avi/refiner.hpp"
#include "avi/world.hpp"

namespace avi::train {

enum class Objective { joint, fm_only };

struct TrainConfig {
  double lambda = 1.0;
  double lr = 1e-3;
  double paper_lr = 2e-5;  // recorded only; the desk run uses lr
  int steps = 200;
  int batch = 1;
  std::uint64_t seed = 0;
  int sampler_steps = 16;
  refiner::ScheduleKind schedule = refiner::ScheduleKind::instant;
  int dataset_size = 64;
  int train_count = 48;  // scenes [0, train_count) train, the rest are held out
  world::WorldScale scale;
  model::BackboneConfig backbone;
  refiner::RefinerConfig gamr;
  std::string separator_speech = "wide-band-gate";
  std::string separator_non_speech = "band-gate";
  std::string generator_speech = "modulated-tone";
  std::string generator_music = "tone";
  std::string generator_sound = "noise-burst";
  int checkpoint_interval = 0;  // 0 disables periodic checkpoints
  double cond_dropout = 0.1;    // per condition, independent
  double bbox_prob = 0.25;      // chance that p = P during training
  int max_unmasked = 2;         // k in {0..max_unmasked} random frames pinned
  bool fixed_draws = false;     // reuse step 0's t, eps, p and dropout draws every step
  Objective objective = Objective::joint;

  void validate() const;
  int heldout_count() const { return dataset_size - train_count; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Config file merged over defaults; unknown keys are rejected.
TrainConfig load_config(const std::string& path);
TrainConfig config_from_json(const nlohmann::json& j);
std::string to_string(Objective o);
Objective parse_objective(const std::string& s);

}  // namespace avi::train

namespace avi::world {
void to_json(nlohmann::json& j, const WorldScale& s);
void from_json(const nlohmann::json& j, WorldScale& s);
}  // namespace avi::world

namespace avi::model {
void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
}  // namespace avi::model

namespace avi::refiner {
void to_json(nlohmann::json& j, const RefinerConfig& c);
void from_json(const nlohmann::json& j, RefinerConfig& c);
}  // namespace avi::refiner
