#pragma once

#include <cstdint>

#include "avi/conditions.hpp"
#include "avi/flow.hpp"
#include "avi/transformer.hpp"

namespace avi::model {

struct BackboneConfig {
  int model_dim = 64;
  int heads = 4;
  int blocks = 4;
  int text_vocab = 0;  // 0 means the world vocabulary size
  int audio_bands = 16;
  int max_tokens = 4096;
  int audio_window = 1;
  int latent_dim = 12;
  int patch = 2;

  TransformerConfig transformer() const { return {model_dim, heads, blocks, 4, audio_window}; }
  int vocab() const;
  bool operator==(const BackboneConfig&) const = default;
};

inline constexpr double kAudioLowHz = 40.0;
inline constexpr double kAudioHighHz = 4000.0;

// log(1 + band energy) per frame window.
AudioTokens encode_audio(const AudioTrack& audio, int frames, double fps, int bands);

class Backbone final : public flow::VelocityField {
 public:
  Backbone(const BackboneConfig& cfg, std::uint64_t seed);

  const BackboneConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::size_t count_parameters() const { return params_.count(); }

  // Graph output: cells x latent_dim velocity rows.
  template <class T>
  typename nn::Graph<T>::Var build(nn::Graph<T>& g, const LatentGrid& z_t, double t, const LatentMask& m_hat,
                                   const ConditionBundle& conds) const;

  LatentGrid velocity(const LatentGrid& z_t, double t, const LatentMask& m_hat,
                      const ConditionBundle& conds) const override;

  // Closed-form parameter total for a config.
  static std::size_t expected_count(const BackboneConfig& cfg);

 private:
  BackboneConfig cfg_;
  nn::ParamStore params_;
};

std::vector<int> text_ids(const world::TokenDescriptor& d, int vocab);

// Rows of `grid` cells as a matrix, optionally with the mask appended as a column.
nn::Mat<float> latent_rows(const LatentGrid& grid, const LatentMask* mask = nullptr);
LatentGrid rows_to_latent(const nn::Mat<float>& rows, const LatentGrid& like);

}  // namespace avi::model
