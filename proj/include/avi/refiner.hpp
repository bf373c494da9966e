#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "avi/conditions.hpp"
#include "avi/degrade.hpp"
#include "avi/flow.hpp"
#include "avi/transformer.hpp"

namespace avi::refiner {

struct RefinerConfig {
  int model_dim = 64;
  int heads = 4;
  int blocks = 2;
  int audio_bands = 16;
  int audio_window = 1;
  int latent_dim = 12;
  double max_precision = kMaxPrecision;
  // Cross-attend to the clean source latent instead of the sampler state.
  bool source_tokens = false;

  model::TransformerConfig transformer() const { return {model_dim, heads, blocks, 4, audio_window}; }
  bool operator==(const RefinerConfig&) const = default;
};

class Refiner {
 public:
  Refiner(const RefinerConfig& cfg, std::uint64_t seed);

  const RefinerConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::size_t count_parameters() const { return params_.count(); }

  // Graph output: cells x 1 logits.
  template <class T>
  typename nn::Graph<T>::Var build(nn::Graph<T>& g, const LatentMask& m_in, double p, double t,
                                   const LatentGrid& video_tokens, const AudioTokens& audio) const;

  // Soft mask in (0,1).
  LatentMask refine(const LatentMask& m_in, const PrecisionFactor& p, double t, const LatentGrid& video_tokens,
                    const AudioTokens& audio) const;

 private:
  RefinerConfig cfg_;
  nn::ParamStore params_;
};

// Focal training with alpha on positives puts posterior 0.5 near an output of
// alpha, so refined masks are cut there rather than at 0.5.
inline constexpr float kRefineThreshold = 0.25f;

LatentMask binarize(const LatentMask& m, float threshold = 0.5f);
// Elementwise minimum: keeps a refined mask inside the user's editable region.
LatentMask intersect(const LatentMask& a, const LatentMask& b);

struct ScheduleStep {
  int k = 0;
  double p = 0.0;
  LatentMask input;
  LatentMask soft;     // refiner output
  LatentMask handed;   // binary mask given to the sampler
};

// Builds the sampler hook that runs the refiner once per step. Steps are
// appended to `log` in order. `source` is the clean input latent, required
// when the refiner uses source tokens.
flow::MaskHook schedule_hook(const Refiner& refiner, const LatentMask& user_mask, const Schedule& schedule,
                             int steps, const AudioTokens& audio, std::vector<ScheduleStep>* log,
                             const LatentGrid* source = nullptr);

// Runs the schedule with an external sampler hook supplying (k, t_k, z_tk).
using StepSource = std::function<void(int k, double& t_k, LatentGrid& z_tk)>;
std::vector<LatentMask> refine_schedule(const Refiner& refiner, const InstanceMask& m_user, double p0,
                                        const Schedule& schedule, int steps, const AudioTokens& audio,
                                        const StepSource& source, int patch = 2);

}  // namespace avi::refiner
