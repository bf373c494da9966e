#include "avi/refiner.hpp"

#include <cmath>

#include "avi/backbone.hpp"
#include "avi/codec.hpp"
#include "avi/rng.hpp"

namespace avi::refiner {

using nn::Mat;

Refiner::Refiner(const RefinerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  model::validate(cfg.transformer());
  require(cfg.max_precision > 0.0, "max precision must be positive");
  const int d = cfg.model_dim, L = cfg.latent_dim;
  model::add_linear(params_, "in", L + 1, d, derive_seed(seed, 1));
  model::add_linear(params_, "video", L, d, derive_seed(seed, 2));
  model::add_linear(params_, "audio.in", cfg.audio_bands, d, derive_seed(seed, 3));
  model::add_timestep_params(params_, "time", d, derive_seed(seed, 4));
  model::add_linear(params_, "pf", 1, d, derive_seed(seed, 5));
  model::add_linear(params_, "tproj", d, d, derive_seed(seed, 6));
  for (int b = 0; b < cfg.blocks; ++b)
    model::add_block_params(params_, "blk" + std::to_string(b), cfg.transformer(),
                            derive_seed(seed, 100, static_cast<std::uint64_t>(b)));
  model::add_final_params(params_, "final", d, 1, derive_seed(seed, 9));
}

template <class T>
typename nn::Graph<T>::Var Refiner::build(nn::Graph<T>& g, const LatentMask& m_in, double p, double t,
                                          const LatentGrid& video_tokens, const AudioTokens& audio) const {
  using Var = typename nn::Graph<T>::Var;
  require(m_in.matches(video_tokens), "refiner mask does not match video tokens " + shape_str(video_tokens));
  require(video_tokens.dim == cfg_.latent_dim, "refiner latent dim mismatch");
  require(audio.frames == video_tokens.frames && audio.bands == cfg_.audio_bands, "refiner audio token shape mismatch");
  require(p >= 0.0 && p <= cfg_.max_precision, "precision factor outside [0, P]");
  const int d = cfg_.model_dim;
  const Mat<float> pe = model::positional_encoding(video_tokens.frames, video_tokens.h, video_tokens.w, d);
  const Var pos = g.constant(model::cast<T>(pe));
  // Mask tokens carry the co-located video latent alongside the mask value.
  Var h = g.add(model::linear(g, "in", g.constant(model::cast<T>(model::latent_rows(video_tokens, &m_in)))), pos);
  const Var video = g.add(model::linear(g, "video", g.constant(model::cast<T>(model::latent_rows(video_tokens)))), pos);

  Mat<T> pin(1, 1);
  pin(0, 0) = static_cast<T>(p / cfg_.max_precision);
  const Var temb = model::timestep_embedding(g, "time", t, d);
  const Var cond = g.add(model::linear(g, "pf", g.constant(pin)), model::linear(g, "tproj", temb));

  Mat<float> audio_in(audio.frames, audio.bands);
  std::copy(audio.data.begin(), audio.data.end(), audio_in.data());
  const model::AudioLayout layout = model::audio_layout(video_tokens.frames, cfg_.audio_window);
  const Var amem = g.gather_rows(model::linear(g, "audio.in", g.constant(model::cast<T>(audio_in))), layout.frame_ids);
  const auto ranges = model::audio_ranges(layout, video_tokens.frames, video_tokens.h * video_tokens.w, 0);

  model::BlockIO<T> io{cond, video, amem, &layout, &ranges};
  for (int b = 0; b < cfg_.blocks; ++b) h = model::block_forward(g, "blk" + std::to_string(b), cfg_.transformer(), h, io);
  const Var out = model::final_layer(g, "final", h, cond);
  model::check_finite(g, out, "refiner output");
  return out;
}

LatentMask Refiner::refine(const LatentMask& m_in, const PrecisionFactor& p, double t, const LatentGrid& video_tokens,
                           const AudioTokens& audio) const {
  nn::Graph<float> g(const_cast<nn::ParamStore*>(&params_));
  const auto logits = build(g, m_in, p.p, t, video_tokens, audio);
  LatentMask out = m_in;
  const auto& v = g.value(logits);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = 1.0f / (1.0f + std::exp(-v(static_cast<Eigen::Index>(i), 0)));
  return out;
}

template nn::Graph<float>::Var Refiner::build<float>(nn::Graph<float>&, const LatentMask&, double, double,
                                                     const LatentGrid&, const AudioTokens&) const;
template nn::Graph<double>::Var Refiner::build<double>(nn::Graph<double>&, const LatentMask&, double, double,
                                                       const LatentGrid&, const AudioTokens&) const;

LatentMask binarize(const LatentMask& m, float threshold) {
  LatentMask out = m;
  for (auto& v : out.data) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

LatentMask intersect(const LatentMask& a, const LatentMask& b) {
  require(a.same_shape(b), "mask shapes differ");
  LatentMask out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::min(a.data[i], b.data[i]);
  return out;
}

flow::MaskHook schedule_hook(const Refiner& refiner, const LatentMask& user_mask, const Schedule& schedule,
                             int steps, const AudioTokens& audio, std::vector<ScheduleStep>* log,
                             const LatentGrid* source) {
  require(!refiner.config().source_tokens || source, "refiner with source tokens needs the source latent");
  auto previous = std::make_shared<LatentMask>(user_mask);
  const double P = refiner.config().max_precision;
  std::shared_ptr<const LatentGrid> src;
  if (refiner.config().source_tokens) src = std::make_shared<const LatentGrid>(*source);
  return [&refiner, user_mask, schedule, steps, audio, log, previous, P, src](int k, double t, const LatentGrid& z_tk,
                                                                               LatentMask& m_hat) {
    ScheduleStep st;
    st.k = k;
    st.p = std::clamp(schedule_p(schedule, k, steps), 0.0, P);
    st.input = k == 0 ? user_mask : *previous;
    st.soft = refiner.refine(st.input, PrecisionFactor{st.p, P}, t, src ? *src : z_tk, audio);
    st.handed = intersect(binarize(st.soft, kRefineThreshold), user_mask);
    *previous = st.handed;
    m_hat = st.handed;
    if (log) log->push_back(std::move(st));
  };
}

std::vector<LatentMask> refine_schedule(const Refiner& refiner, const InstanceMask& m_user, double p0,
                                        const Schedule& schedule, int steps, const AudioTokens& audio,
                                        const StepSource& source, int patch) {
  require(steps >= 1, "schedule needs at least one step");
  const LatentMask user = codec::downsample_mask(m_user, patch);
  Schedule s = schedule;
  s.p0 = p0;
  std::vector<ScheduleStep> log;
  auto hook = schedule_hook(refiner, user, s, steps, audio, &log);
  std::vector<LatentMask> out;
  LatentMask m = user;
  for (int k = 0; k < steps; ++k) {
    double t = static_cast<double>(k) / steps;
    LatentGrid z;
    source(k, t, z);
    hook(k, t, z, m);
    out.push_back(m);
  }
  return out;
}

}  // namespace avi::refiner
