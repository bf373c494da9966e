#include "avi/trainer.hpp"

#include <cmath>
#include <sstream>

#include "avi/codec.hpp"
#include "avi/flow.hpp"
#include "avi/io.hpp"
#include "avi/nn/graph.hpp"
#include "avi/rng.hpp"

namespace avi::train {

std::uint64_t scene_seed(const TrainConfig& cfg, int index) {
  return derive_seed(cfg.seed, 0xDA7A, static_cast<std::uint64_t>(index));
}

world::SceneSample make_scene(const TrainConfig& cfg, int index) {
  return world::generate_scene(world::sample_scene_spec(scene_seed(cfg, index), cfg.scale));
}

Example make_example(const world::SceneSample& s, const TrainConfig& cfg) {
  Example ex;
  ex.z = codec::encode(s.video, cfg.backbone.patch);
  ex.mask = s.mask;
  ex.mask_gt = codec::downsample_mask(s.mask, cfg.backbone.patch);
  ex.audio = model::encode_audio(s.audio, s.video.frames, s.video.fps, cfg.backbone.audio_bands);
  ex.text = s.descriptor;
  return ex;
}

Dataset::Dataset(const TrainConfig& cfg, bool build_all) {
  examples_.resize(static_cast<std::size_t>(build_all ? cfg.dataset_size : 0));
  const int n = static_cast<int>(examples_.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) examples_[static_cast<std::size_t>(i)] = make_example(make_scene(cfg, i), cfg);
}

const Example& Dataset::at(int index) const {
  require(index >= 0 && index < size(), "dataset index out of range");
  return examples_[static_cast<std::size_t>(index)];
}

Draws draw_sample(const TrainConfig& cfg, long long step, int slot) {
  const long long counter = cfg.fixed_draws ? slot : step * cfg.batch + slot;
  Rng r(derive_seed(cfg.seed, 0x57E9, static_cast<std::uint64_t>(counter)));
  Draws d;
  d.scene = r.uniform_int(0, cfg.train_count - 1);
  d.t = r.uniform();
  d.p = r.bernoulli(cfg.bbox_prob) ? cfg.gamr.max_precision : r.uniform(0.0, cfg.gamr.max_precision);
  const int k = r.uniform_int(0, cfg.max_unmasked);
  while (static_cast<int>(d.unmasked.size()) < k) d.unmasked.insert(r.uniform_int(0, cfg.scale.frames - 1));
  d.drop_text = r.bernoulli(cfg.cond_dropout);
  d.drop_audio = r.bernoulli(cfg.cond_dropout);
  d.noise_seed = r.next();
  return d;
}

StepInputs step_inputs(const Example& ex, const Draws& d, const TrainConfig& cfg) {
  StepInputs in;
  const InstanceMask degraded =
      refiner::degrade_mask(ex.mask, {d.p, cfg.gamr.max_precision});
  in.m_hat = flow::unmask_frames(codec::downsample_mask(degraded, cfg.backbone.patch), d.unmasked);
  const LatentGrid eps = flow::gaussian_like(ex.z, d.noise_seed);
  in.z_t = flow::compose(flow::interpolate(ex.z, eps, d.t), ex.z, in.m_hat);
  in.target = flow::fm_target(ex.z, eps);
  if (!d.drop_text) in.conds.text = ex.text;
  in.conds.audio = ex.audio;
  if (d.drop_audio) std::fill(in.conds.audio.data.begin(), in.conds.audio.data.end(), 0.0f);
  in.conds.unmasked_frames = d.unmasked;
  return in;
}

Trainer::Trainer(TrainConfig cfg, std::shared_ptr<const Dataset> data)
    : cfg_(std::move(cfg)),
      data_(data ? std::move(data) : std::make_shared<Dataset>(cfg_)),
      backbone_(cfg_.backbone, derive_seed(cfg_.seed, 0xBB)),
      gamr_(cfg_.gamr, derive_seed(cfg_.seed, 0x6A)),
      opt_backbone_(nn::AdamConfig{cfg_.lr}),
      opt_gamr_(nn::AdamConfig{cfg_.lr}) {
  cfg_.validate();
  require(data_->size() >= cfg_.train_count, "dataset is smaller than the training split");
}

Losses Trainer::train_step() {
  std::vector<Draws> draws;
  for (int b = 0; b < cfg_.batch; ++b) draws.push_back(draw_sample(cfg_, step_, b));
  return step_with(draws);
}

Losses Trainer::train_step(const std::vector<int>& scenes) {
  require(!scenes.empty(), "batch is empty");
  std::vector<Draws> draws;
  for (std::size_t b = 0; b < scenes.size(); ++b) {
    Draws d = draw_sample(cfg_, step_, static_cast<int>(b));
    d.scene = scenes[b];
    draws.push_back(d);
  }
  return step_with(draws);
}

Losses Trainer::step_with(const std::vector<Draws>& draws) {
  backbone_.params().zero_grad();
  gamr_.params().zero_grad();
  const bool joint = cfg_.objective == Objective::joint;
  const double n = static_cast<double>(draws.size());
  const std::array<int, 4> shape0 = data_->at(draws[0].scene).z.origin_shape;
  Losses out;
  try {
    for (const auto& d : draws) {
      const Example& ex = data_->at(d.scene);
      require(ex.z.origin_shape == shape0, "batch samples must share shapes");
      const StepInputs in = step_inputs(ex, d, cfg_);

      nn::Graph<float> gb(&backbone_.params());
      const auto v = backbone_.build(gb, in.z_t, d.t, in.m_hat, in.conds);
      const auto fm = gb.mse(v, model::latent_rows(in.target));
      gb.backward({{fm, static_cast<float>(1.0 / n)}});
      out.fm += static_cast<double>(gb.scalar(fm)) / n;

      if (joint) {
        // GAMR sees the degraded mask itself; frame pinning only affects the sampler.
        const LatentMask m_in =
            codec::downsample_mask(refiner::degrade_mask(ex.mask, {d.p, cfg_.gamr.max_precision}), cfg_.backbone.patch);
        nn::Graph<float> gr(&gamr_.params());
        const auto logits = gamr_.build(gr, m_in, d.p, d.t, cfg_.gamr.source_tokens ? ex.z : in.z_t, in.conds.audio);
        nn::Mat<float> gt(static_cast<Eigen::Index>(ex.mask_gt.cells()), 1);
        std::copy(ex.mask_gt.data.begin(), ex.mask_gt.data.end(), gt.data());
        const refiner::FocalParams fp;
        const auto mask = gr.focal_from_logits(logits, gt, fp.alpha, fp.gamma, refiner::kFocalClamp);
        gr.backward({{mask, static_cast<float>(cfg_.lambda / n)}});
        out.mask += static_cast<double>(gr.scalar(mask)) / n;
      }
    }
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << e.what() << " at step " << step_ << " (seed=" << cfg_.seed << ")";
    throw NumericalError(msg.str());
  }
  out.total = combine_losses(out.fm, out.mask, cfg_.lambda);
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << step_ << ": total=" << out.total << " fm=" << out.fm << " mask=" << out.mask
        << " seed=" << cfg_.seed << " draw counter=" << step_ * cfg_.batch;
    throw NumericalError(msg.str());
  }
  opt_backbone_.step(backbone_.params());
  if (joint) opt_gamr_.step(gamr_.params());
  ++step_;
  return out;
}

CheckpointView Trainer::view() {
  return {&cfg_, &step_, &backbone_.params(), &gamr_.params(), &opt_backbone_, &opt_gamr_};
}

std::string Trainer::save(const std::filesystem::path& dir) { return save_checkpoint(dir, view()); }

void Trainer::load(const std::filesystem::path& dir) {
  CheckpointView v = view();
  load_checkpoint(dir, v);
}

void Trainer::run(const std::function<void(long long, const Losses&)>& log, const std::filesystem::path& checkpoint_dir) {
  while (step_ < cfg_.steps) {
    const Losses l = train_step();
    if (log) log(step_, l);
    if (!checkpoint_dir.empty() && cfg_.checkpoint_interval > 0 && step_ % cfg_.checkpoint_interval == 0)
      save(checkpoint_dir / ("step_" + std::to_string(step_)));
  }
  if (!checkpoint_dir.empty()) save(checkpoint_dir / "final");
}

TrainConfig checkpoint_config(const std::filesystem::path& dir) {
  const auto j = nlohmann::json::parse(io::read_text(dir / "params.json"));
  return config_from_json(j.at("config"));
}

ModelBundle load_models(const std::filesystem::path& dir, const TrainConfig* cfg) {
  ModelBundle b;
  b.cfg = cfg ? *cfg : checkpoint_config(dir);
  b.backbone = std::make_unique<model::Backbone>(b.cfg.backbone, derive_seed(b.cfg.seed, 0xBB));
  b.gamr = std::make_unique<refiner::Refiner>(b.cfg.gamr, derive_seed(b.cfg.seed, 0x6A));
  CheckpointView v{&b.cfg, &b.step, &b.backbone->params(), &b.gamr->params(), nullptr, nullptr};
  load_checkpoint(dir, v);
  return b;
}

}  // namespace avi::train
