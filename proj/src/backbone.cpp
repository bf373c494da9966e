#include "avi/backbone.hpp"

#include <cmath>

#include "avi/codec.hpp"
#include "avi/rng.hpp"
#include "avi/spectral.hpp"

namespace avi::model {

using nn::Mat;

int BackboneConfig::vocab() const {
  return text_vocab > 0 ? text_vocab : static_cast<int>(world::vocabulary().size());
}

AudioTokens encode_audio(const AudioTrack& audio, int frames, double fps, int bands) {
  require(frames >= 1 && bands >= 1, "audio tokens need positive frames and bands");
  const double expected = frames / fps * audio.sample_rate;
  if (std::abs(expected - static_cast<double>(audio.size())) > 0.5)
    fail("audio has ", std::to_string(audio.size()), " samples, expected ",
         std::to_string(static_cast<long long>(std::llround(expected))), " for ", std::to_string(frames), " frames");
  const std::size_t window = audio.size() / static_cast<std::size_t>(frames);
  const auto edges = spectral::log_band_edges(bands, kAudioLowHz, std::min(kAudioHighHz, audio.sample_rate / 2.0));
  const auto energies = spectral::parallel::frame_band_energies(audio.samples, frames, window, audio.sample_rate, edges);
  AudioTokens tok(frames, bands);
  for (std::size_t i = 0; i < energies.size(); ++i) tok.data[i] = std::log1p(energies[i]);
  return tok;
}

std::vector<int> text_ids(const world::TokenDescriptor& d, int vocab) {
  std::vector<int> ids;
  for (const auto& t : d.tokens) {
    const int id = world::vocab_id(t);
    require(id >= 0 && id < vocab, "text token '" + t + "' outside the model vocabulary");
    ids.push_back(id);
  }
  if (ids.empty()) ids.push_back(vocab);  // null token
  return ids;
}

Mat<float> latent_rows(const LatentGrid& grid, const LatentMask* mask) {
  const int extra = mask ? 1 : 0;
  Mat<float> m(static_cast<Eigen::Index>(grid.cells()), grid.dim + extra);
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    for (int k = 0; k < grid.dim; ++k) m(static_cast<Eigen::Index>(c), k) = grid.data[c * grid.dim + k];
    if (mask) m(static_cast<Eigen::Index>(c), grid.dim) = mask->data[c];
  }
  return m;
}

LatentGrid rows_to_latent(const Mat<float>& rows, const LatentGrid& like) {
  require(rows.rows() == static_cast<Eigen::Index>(like.cells()) && rows.cols() == like.dim,
          "output rows do not match latent " + shape_str(like));
  LatentGrid out = like;
  std::copy(rows.data(), rows.data() + rows.size(), out.data.begin());
  return out;
}

std::size_t Backbone::expected_count(const BackboneConfig& cfg) {
  const std::size_t d = static_cast<std::size_t>(cfg.model_dim), L = static_cast<std::size_t>(cfg.latent_dim);
  const std::size_t in = (L + 1) * d + d;
  const std::size_t text = (static_cast<std::size_t>(cfg.vocab()) + 1) * d;
  const std::size_t audio = static_cast<std::size_t>(cfg.audio_bands) * d + d;
  const std::size_t temb = 2 * (d * d + d);
  const std::size_t ctx = 3 * (L * d + d) + d;
  const std::size_t fin = d * 2 * d + 2 * d + d * L + L;
  return in + text + audio + temb + ctx + fin + static_cast<std::size_t>(cfg.blocks) * block_param_count(cfg.transformer());
}

Backbone::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg.transformer());
  require(cfg.vocab() > 0, "text vocabulary must be non-empty");
  require(cfg.audio_bands > 0 && cfg.latent_dim > 0, "audio bands and latent dim must be positive");
  const int d = cfg.model_dim, L = cfg.latent_dim;
  add_linear(params_, "in", L + 1, d, derive_seed(seed, 1));
  params_.add_normal("text.emb", cfg.vocab() + 1, d, 0.5, derive_seed(seed, 2));
  add_linear(params_, "audio.in", cfg.audio_bands, d, derive_seed(seed, 3));
  add_timestep_params(params_, "time", d, derive_seed(seed, 4));
  add_linear(params_, "ctx.scribble", L, d, derive_seed(seed, 5), 0.5);
  add_linear(params_, "ctx.pose", L, d, derive_seed(seed, 6), 0.5);
  add_linear(params_, "ctx.reference", L, d, derive_seed(seed, 7), 0.5);
  params_.add_normal("ctx.reference.type", 1, d, 0.5, derive_seed(seed, 8));
  for (int b = 0; b < cfg.blocks; ++b)
    add_block_params(params_, "blk" + std::to_string(b), cfg.transformer(), derive_seed(seed, 100, static_cast<std::uint64_t>(b)));
  add_final_params(params_, "final", d, L, derive_seed(seed, 9));
}

template <class T>
typename nn::Graph<T>::Var Backbone::build(nn::Graph<T>& g, const LatentGrid& z_t, double t, const LatentMask& m_hat,
                                           const ConditionBundle& conds) const {
  using Var = typename nn::Graph<T>::Var;
  require(z_t.dim == cfg_.latent_dim, "latent dim " + std::to_string(z_t.dim) + " does not match the backbone");
  require(m_hat.matches(z_t), "mask does not match latent " + shape_str(z_t));
  require(conds.audio.frames == z_t.frames, "audio token count must equal latent frame count");
  require(conds.audio.bands == cfg_.audio_bands, "audio band count mismatch");
  const int cells = static_cast<int>(z_t.cells());
  const int per_frame = z_t.h * z_t.w;
  require(cells <= cfg_.max_tokens, "token count exceeds max_tokens");
  const int d = cfg_.model_dim;

  const LatentMask mask = flow::unmask_frames(m_hat, conds.unmasked_frames);
  const Mat<float> pe = positional_encoding(z_t.frames, z_t.h, z_t.w, d);
  Var h = g.add(linear(g, "in", g.constant(cast<T>(latent_rows(z_t, &mask)))), g.constant(cast<T>(pe)));

  auto context_rows = [&](const VideoClip& clip, const char* name) {
    const LatentGrid enc = codec::encode(clip, cfg_.patch);
    require(enc.frames == z_t.frames && enc.h == z_t.h && enc.w == z_t.w, std::string(name) + " context shape mismatch");
    return linear(g, std::string("ctx.") + name, g.constant(cast<T>(latent_rows(enc))));
  };
  if (conds.contexts.scribble) h = g.add(h, context_rows(*conds.contexts.scribble, "scribble"));
  if (conds.contexts.pose) h = g.add(h, context_rows(*conds.contexts.pose, "pose"));

  int extra = 0;
  if (conds.contexts.reference) {
    const LatentGrid ref = codec::encode(*conds.contexts.reference, cfg_.patch);
    require(ref.frames == 1 && ref.h == z_t.h && ref.w == z_t.w, "reference image shape mismatch");
    Var r = linear(g, "ctx.reference", g.constant(cast<T>(latent_rows(ref))));
    r = g.add(r, g.constant(cast<T>(positional_encoding(1, ref.h, ref.w, d))));
    r = g.add_row(r, g.param("ctx.reference.type"));
    extra = static_cast<int>(ref.cells());
    h = g.concat_rows({h, r});
  }

  const Var cond = timestep_embedding(g, "time", t, d);
  const Var text = g.gather_rows(g.param("text.emb"), text_ids(conds.text, cfg_.vocab()));

  Mat<float> audio_in(conds.audio.frames, conds.audio.bands);
  std::copy(conds.audio.data.begin(), conds.audio.data.end(), audio_in.data());
  const AudioLayout layout = audio_layout(z_t.frames, cfg_.audio_window);
  const Var audio = g.gather_rows(linear(g, "audio.in", g.constant(cast<T>(audio_in))), layout.frame_ids);
  const auto ranges = audio_ranges(layout, z_t.frames, per_frame, extra);

  BlockIO<T> io{cond, text, audio, &layout, &ranges};
  for (int b = 0; b < cfg_.blocks; ++b) h = block_forward(g, "blk" + std::to_string(b), cfg_.transformer(), h, io);
  if (extra) h = g.slice_rows(h, 0, cells);
  const Var out = final_layer(g, "final", h, cond);
  check_finite(g, out, "backbone output");
  return out;
}

LatentGrid Backbone::velocity(const LatentGrid& z_t, double t, const LatentMask& m_hat,
                              const ConditionBundle& conds) const {
  nn::Graph<float> g(const_cast<nn::ParamStore*>(&params_));
  const auto out = build(g, z_t, t, m_hat, conds);
  return rows_to_latent(g.value(out), z_t);
}

template nn::Graph<float>::Var Backbone::build<float>(nn::Graph<float>&, const LatentGrid&, double, const LatentMask&,
                                                      const ConditionBundle&) const;
template nn::Graph<double>::Var Backbone::build<double>(nn::Graph<double>&, const LatentGrid&, double,
                                                        const LatentMask&, const ConditionBundle&) const;

}  // namespace avi::model
