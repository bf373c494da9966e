#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "avi/backbone.hpp"
#include "avi/checkpoint.hpp"
#include "avi/config.hpp"
#include "avi/refiner.hpp"

namespace avi::train {

// One training scene in model form.
struct Example {
  LatentGrid z;
  InstanceMask mask;     // pixel ground truth
  LatentMask mask_gt;    // latent ground truth
  AudioTokens audio;
  world::TokenDescriptor text;
};

std::uint64_t scene_seed(const TrainConfig& cfg, int index);
world::SceneSample make_scene(const TrainConfig& cfg, int index);
Example make_example(const world::SceneSample& s, const TrainConfig& cfg);

// Example cache over [0, dataset_size). Generation runs in parallel.
class Dataset {
 public:
  explicit Dataset(const TrainConfig& cfg, bool build_all = true);
  const Example& at(int index) const;
  int size() const { return static_cast<int>(examples_.size()); }

 private:
  std::vector<Example> examples_;
};

// Random draws of one training sample, all from a counter-based stream.
struct Draws {
  int scene = 0;
  double t = 0.0;
  double p = 0.0;
  std::set<int> unmasked;
  bool drop_text = false;
  bool drop_audio = false;
  std::uint64_t noise_seed = 0;
};

Draws draw_sample(const TrainConfig& cfg, long long step, int slot);

struct Losses {
  double total = 0.0;
  double fm = 0.0;
  double mask = 0.0;
};

inline double combine_losses(double fm, double mask, double lambda) { return fm + lambda * mask; }

// Model-side inputs built from an example and its draws.
struct StepInputs {
  LatentGrid z_t;
  LatentGrid target;
  LatentMask m_hat;
  ConditionBundle conds;
};
StepInputs step_inputs(const Example& ex, const Draws& d, const TrainConfig& cfg);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg, std::shared_ptr<const Dataset> data = nullptr);

  // One update at the current step counter; advances it.
  Losses train_step();
  Losses train_step(const std::vector<int>& scenes);  // explicit scene indices
  // Runs until cfg.steps, calling `log` after every step.
  void run(const std::function<void(long long, const Losses&)>& log = {},
           const std::filesystem::path& checkpoint_dir = {});

  std::string save(const std::filesystem::path& dir);
  void load(const std::filesystem::path& dir);

  const TrainConfig& config() const { return cfg_; }
  long long step() const { return step_; }
  model::Backbone& backbone() { return backbone_; }
  refiner::Refiner& gamr() { return gamr_; }
  const model::Backbone& backbone() const { return backbone_; }
  const refiner::Refiner& gamr() const { return gamr_; }
  const Dataset& data() const { return *data_; }

 private:
  Losses step_with(const std::vector<Draws>& draws);
  CheckpointView view();

  TrainConfig cfg_;
  std::shared_ptr<const Dataset> data_;
  model::Backbone backbone_;
  refiner::Refiner gamr_;
  nn::Adam opt_backbone_;
  nn::Adam opt_gamr_;
  long long step_ = 0;
};

// Inference-side load. With no config the checkpoint's own echo is used.
struct ModelBundle {
  TrainConfig cfg;
  std::unique_ptr<model::Backbone> backbone;
  std::unique_ptr<refiner::Refiner> gamr;
  long long step = 0;
};
TrainConfig checkpoint_config(const std::filesystem::path& dir);
ModelBundle load_models(const std::filesystem::path& dir, const TrainConfig* cfg = nullptr);

}  // namespace avi::train
