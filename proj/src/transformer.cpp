#include "avi/transformer.hpp"

#include <cmath>

#include "avi/rng.hpp"

namespace avi::model {

using nn::Mat;

void validate(const TransformerConfig& cfg) {
  require(cfg.dim > 0 && cfg.heads > 0 && cfg.dim % cfg.heads == 0, "model dim must be divisible by heads");
  require(cfg.blocks >= 1, "at least one block is required");
  require(cfg.ffn_mult >= 1, "ffn multiplier must be positive");
  require(cfg.audio_window >= 0, "audio window must be non-negative");
}

void add_linear(nn::ParamStore& store, const std::string& name, int in, int out, std::uint64_t seed, double gain) {
  store.add_normal(name + ".w", in, out, gain / std::sqrt(static_cast<double>(in)), seed);
  store.add_zeros(name + ".b", 1, out);
}

void add_block_params(nn::ParamStore& store, const std::string& prefix, const TransformerConfig& cfg,
                      std::uint64_t seed) {
  const int d = cfg.dim;
  std::uint64_t c = 0;
  auto next = [&] { return derive_seed(seed, 0xB10C, c++); };
  for (const char* att : {"self", "cross", "audio"})
    for (const char* m : {"q", "k", "v", "o"}) add_linear(store, prefix + "." + att + "." + m, d, d, next());
  store.add_normal(prefix + ".audio.offset", 2 * cfg.audio_window + 1, d, 0.02, next());
  add_linear(store, prefix + ".ffn.1", d, cfg.ffn_mult * d, next());
  add_linear(store, prefix + ".ffn.2", cfg.ffn_mult * d, d, next());
  // Modulation starts at zero so every block is an identity map at init.
  store.add_zeros(prefix + ".mod.w", d, 3 * kSublayers * d);
  store.add_zeros(prefix + ".mod.b", 1, 3 * kSublayers * d);
}

std::size_t block_param_count(const TransformerConfig& cfg) {
  const std::size_t d = static_cast<std::size_t>(cfg.dim), f = static_cast<std::size_t>(cfg.ffn_mult);
  const std::size_t attn = 3 * 4 * (d * d + d);
  const std::size_t offset = (2 * static_cast<std::size_t>(cfg.audio_window) + 1) * d;
  const std::size_t ffn = d * f * d + f * d + f * d * d + d;
  const std::size_t mod = d * 3 * kSublayers * d + 3 * kSublayers * d;
  return attn + offset + ffn + mod;
}

void add_timestep_params(nn::ParamStore& store, const std::string& prefix, int dim, std::uint64_t seed) {
  add_linear(store, prefix + ".t1", dim, dim, derive_seed(seed, 0x7E, 1));
  add_linear(store, prefix + ".t2", dim, dim, derive_seed(seed, 0x7E, 2));
}

void add_final_params(nn::ParamStore& store, const std::string& prefix, int dim, int out_dim, std::uint64_t seed) {
  store.add_zeros(prefix + ".mod.w", dim, 2 * dim);
  store.add_zeros(prefix + ".mod.b", 1, 2 * dim);
  add_linear(store, prefix + ".out", dim, out_dim, derive_seed(seed, 0xF1, 0), 0.5);
}

Mat<float> sinusoid(double value, int dim) {
  Mat<float> m(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half));
    m(0, i) = static_cast<float>(std::sin(value * freq));
    m(0, half + i) = static_cast<float>(std::cos(value * freq));
  }
  if (dim % 2) m(0, dim - 1) = 0.0f;
  return m;
}

Mat<float> positional_encoding(int frames, int h, int w, int dim) {
  // Half the channels for time, a quarter each for rows and columns.
  const int dt = dim / 2, dy = dim / 4, dx = dim - dt - dy;
  Mat<float> pe(static_cast<Eigen::Index>(frames) * h * w, dim);
  Eigen::Index r = 0;
  for (int f = 0; f < frames; ++f)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x, ++r) {
        pe.block(r, 0, 1, dt) = sinusoid(f, dt);
        pe.block(r, dt, 1, dy) = sinusoid(y, dy);
        pe.block(r, dt + dy, 1, dx) = sinusoid(x, dx);
      }
  return pe;
}

AudioLayout audio_layout(int frames, int window) {
  AudioLayout l;
  const int span = 2 * window + 1;
  for (int f = 0; f < frames; ++f) {
    int lo = -1, hi = -1;
    for (int o = -window; o <= window; ++o) {
      const int row = f * span + (o + window);
      const int src = f + o;
      l.frame_ids.push_back(std::clamp(src, 0, frames - 1));
      l.offset_ids.push_back(o + window);
      if (src >= 0 && src < frames) {
        if (lo < 0) lo = row;
        hi = row + 1;
      }
    }
    l.frame_ranges.push_back({lo, hi});
  }
  return l;
}

std::vector<kernels::KeyRange> audio_ranges(const AudioLayout& layout, int frames, int rows_per_frame, int extra) {
  std::vector<kernels::KeyRange> r;
  r.reserve(static_cast<std::size_t>(frames) * rows_per_frame + extra);
  for (int f = 0; f < frames; ++f)
    for (int i = 0; i < rows_per_frame; ++i) r.push_back(layout.frame_ranges[static_cast<std::size_t>(f)]);
  for (int i = 0; i < extra; ++i) r.push_back({0, 0});
  return r;
}

template <class T>
typename nn::Graph<T>::Var linear(nn::Graph<T>& g, const std::string& name, typename nn::Graph<T>::Var x) {
  return g.linear(x, g.param(name + ".w"), g.param(name + ".b"));
}

template <class T>
void check_finite(const nn::Graph<T>& g, typename nn::Graph<T>::Var v, const std::string& where) {
  if (!g.value(v).allFinite()) throw NumericalError("non-finite activations in " + where);
}

template <class T>
typename nn::Graph<T>::Var block_forward(nn::Graph<T>& g, const std::string& prefix, const TransformerConfig& cfg,
                                         typename nn::Graph<T>::Var h, const BlockIO<T>& io) {
  using Var = typename nn::Graph<T>::Var;
  const int d = cfg.dim;
  const Var mod = g.linear(g.silu(io.cond), g.param(prefix + ".mod.w"), g.param(prefix + ".mod.b"));
  auto chunk = [&](int sub, int which) { return g.slice_cols(mod, (sub * 3 + which) * d, d); };

  auto attend = [&](const std::string& name, Var x, Var mem, const std::vector<kernels::KeyRange>& ranges) {
    const Var q = linear(g, name + ".q", x);
    const Var k = linear(g, name + ".k", mem);
    const Var v = linear(g, name + ".v", mem);
    return linear(g, name + ".o", g.attention(q, k, v, cfg.heads, ranges));
  };
  static const std::vector<kernels::KeyRange> full;

  // self-attention
  Var x = g.modulate(g.layernorm(h), chunk(0, 0), chunk(0, 1));
  h = g.gated_add(h, chunk(0, 2), attend(prefix + ".self", x, x, full));
  // cross-attention to text (backbone) or video tokens (refiner)
  x = g.modulate(g.layernorm(h), chunk(1, 0), chunk(1, 1));
  h = g.gated_add(h, chunk(1, 2), attend(prefix + ".cross", x, io.context, full));
  // frame-wise audio attention
  x = g.modulate(g.layernorm(h), chunk(2, 0), chunk(2, 1));
  const Var mem = g.add(io.audio, g.gather_rows(g.param(prefix + ".audio.offset"), io.layout->offset_ids));
  h = g.gated_add(h, chunk(2, 2), attend(prefix + ".audio", x, mem, *io.ranges));
  // feed-forward
  x = g.modulate(g.layernorm(h), chunk(3, 0), chunk(3, 1));
  const Var ff = linear(g, prefix + ".ffn.2", g.gelu(linear(g, prefix + ".ffn.1", x)));
  h = g.gated_add(h, chunk(3, 2), ff);
  check_finite(g, h, prefix);
  return h;
}

template <class T>
typename nn::Graph<T>::Var timestep_embedding(nn::Graph<T>& g, const std::string& prefix, double t, int dim) {
  const auto e = g.constant(cast<T>(sinusoid(1000.0 * t, dim)));
  return linear(g, prefix + ".t2", g.silu(linear(g, prefix + ".t1", e)));
}

template <class T>
typename nn::Graph<T>::Var final_layer(nn::Graph<T>& g, const std::string& prefix, typename nn::Graph<T>::Var h,
                                       typename nn::Graph<T>::Var cond) {
  const int d = static_cast<int>(g.value(h).cols());
  const auto mod = g.linear(g.silu(cond), g.param(prefix + ".mod.w"), g.param(prefix + ".mod.b"));
  const auto x = g.modulate(g.layernorm(h), g.slice_cols(mod, 0, d), g.slice_cols(mod, d, d));
  return linear(g, prefix + ".out", x);
}

#define AVI_INSTANTIATE(T)                                                                                      \
  template nn::Graph<T>::Var linear<T>(nn::Graph<T>&, const std::string&, nn::Graph<T>::Var);                   \
  template void check_finite<T>(const nn::Graph<T>&, nn::Graph<T>::Var, const std::string&);                    \
  template nn::Graph<T>::Var block_forward<T>(nn::Graph<T>&, const std::string&, const TransformerConfig&,        \
                                              nn::Graph<T>::Var, const BlockIO<T>&);                              \
  template nn::Graph<T>::Var timestep_embedding<T>(nn::Graph<T>&, const std::string&, double, int);             \
  template nn::Graph<T>::Var final_layer<T>(nn::Graph<T>&, const std::string&, nn::Graph<T>::Var,              \
                                            nn::Graph<T>::Var);

AVI_INSTANTIATE(float)
AVI_INSTANTIATE(double)

}  // namespace avi::model
