#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avi/conditions.hpp"
#include "avi/nn/graph.hpp"

namespace avi::model {

struct TransformerConfig {
  int dim = 64;
  int heads = 4;
  int blocks = 4;
  int ffn_mult = 4;
  int audio_window = 1;
};

// Sublayers inside one block, in execution order.
inline constexpr int kSublayers = 4;  // self-attn, cross-attn, audio-attn, ffn

void validate(const TransformerConfig& cfg);

void add_block_params(nn::ParamStore& store, const std::string& prefix, const TransformerConfig& cfg,
                      std::uint64_t seed);
std::size_t block_param_count(const TransformerConfig& cfg);

void add_timestep_params(nn::ParamStore& store, const std::string& prefix, int dim, std::uint64_t seed);
void add_final_params(nn::ParamStore& store, const std::string& prefix, int dim, int out_dim, std::uint64_t seed);
void add_linear(nn::ParamStore& store, const std::string& name, int in, int out, std::uint64_t seed, double gain = 1.0);

// Sinusoidal features of a scalar, 1 x dim.
nn::Mat<float> sinusoid(double value, int dim);
// Fixed (frame, row, col) encoding, (T*h*w) x dim.
nn::Mat<float> positional_encoding(int frames, int h, int w, int dim);

template <class T>
nn::Mat<T> cast(const nn::Mat<float>& m) {
  return m.template cast<T>();
}

// Audio memory for frame-wise cross-attention: for each frame f the keys
// f-w..f+w are laid out contiguously, so a query of frame f sees one range.
struct AudioLayout {
  std::vector<int> frame_ids;   // audio frame behind each memory row (clamped)
  std::vector<int> offset_ids;  // 0..2w
  std::vector<kernels::KeyRange> frame_ranges;  // per frame
};
AudioLayout audio_layout(int frames, int window);
// Per-query ranges for `rows_per_frame` tokens per frame plus `extra` tokens with no audio.
std::vector<kernels::KeyRange> audio_ranges(const AudioLayout& layout, int frames, int rows_per_frame, int extra);

template <class T>
struct BlockIO {
  using Var = typename nn::Graph<T>::Var;
  Var cond;        // 1 x d
  Var context;     // m x d cross-attention memory
  Var audio;       // (T*(2w+1)) x d gathered audio rows
  const AudioLayout* layout = nullptr;
  const std::vector<kernels::KeyRange>* ranges = nullptr;
};

template <class T>
typename nn::Graph<T>::Var linear(nn::Graph<T>& g, const std::string& name, typename nn::Graph<T>::Var x);

template <class T>
typename nn::Graph<T>::Var block_forward(nn::Graph<T>& g, const std::string& prefix, const TransformerConfig& cfg,
                                         typename nn::Graph<T>::Var h, const BlockIO<T>& io);

template <class T>
typename nn::Graph<T>::Var timestep_embedding(nn::Graph<T>& g, const std::string& prefix, double t, int dim);

template <class T>
typename nn::Graph<T>::Var final_layer(nn::Graph<T>& g, const std::string& prefix, typename nn::Graph<T>::Var h,
                                       typename nn::Graph<T>::Var cond);

// Finite check used after each block.
template <class T>
void check_finite(const nn::Graph<T>& g, typename nn::Graph<T>::Var v, const std::string& where);

}  // namespace avi::model
