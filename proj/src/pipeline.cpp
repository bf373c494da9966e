#include "avi/pipeline.hpp"

#include "avi/codec.hpp"
#include "avi/flow.hpp"
#include "avi/io.hpp"
#include "avi/rng.hpp"

namespace avi::pipeline {

namespace {

std::string category(const std::string& token) { return token.substr(0, token.find(':')); }

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  }
}

VideoClip slice_frames(const VideoClip& v, int begin, int count) {
  VideoClip out(count, v.height, v.width, v.channels, v.fps);
  std::copy(v.data.begin() + static_cast<std::ptrdiff_t>(begin * v.frame_size()),
            v.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * v.frame_size()), out.data.begin());
  return out;
}

}  // namespace

world::TokenDescriptor merge_descriptor(const world::TokenDescriptor& base, const world::TokenDescriptor& edit) {
  world::TokenDescriptor out;
  std::set<std::string> edited;
  for (const auto& t : edit.tokens) edited.insert(category(t));
  if (edited.count("instance")) return edit;
  for (const auto& t : base.tokens)
    if (!edited.count(category(t))) out.tokens.push_back(t);
  for (const auto& t : edit.tokens) out.tokens.push_back(t);
  return out;
}

agent::Registry registry_for(const train::TrainConfig& cfg) {
  agent::Registry r = agent::Registry::desk();
  const auto names = r.names();
  const std::map<std::string, std::string> want{{"separate.speech", cfg.separator_speech},
                                                {"separate.non-speech", cfg.separator_non_speech},
                                                {"generate.speech", cfg.generator_speech},
                                                {"generate.music", cfg.generator_music},
                                                {"generate.sound", cfg.generator_sound}};
  for (const auto& [slot, name] : want) {
    auto it = names.find(slot);
    if (it == names.end() || it->second != name)
      fail("agent registry has no component '", name, "' for ", slot);
  }
  return r;
}

EditResult edit(const Models& models, const agent::Registry& registry, const world::SceneSample& scene,
                const EditRequest& req) {
  require(models.backbone != nullptr, "edit needs a backbone");
  const auto& bcfg = models.backbone->config();
  require(req.coarse_mask.frames == scene.video.frames && req.coarse_mask.height == scene.video.height &&
              req.coarse_mask.width == scene.video.width,
          "coarse mask shape does not match the clip");
  EditResult out;

  if (req.audio_override) {
    out.audio = *req.audio_override;
  } else {
    agent::CurateOptions opt;
    opt.mode = req.mode;
    out.trace = stage("audio agent", [&] { return agent::curate(scene, req.coarse_mask, req.edit, registry, opt); });
    out.audio = out.trace->final;
  }

  ConditionBundle conds;
  conds.audio = stage("audio encoder", [&] {
    return model::encode_audio(out.audio, scene.video.frames, scene.video.fps, bcfg.audio_bands);
  });
  conds.text = merge_descriptor(scene.descriptor, req.edit);
  conds.unmasked_frames = req.unmasked_frames;

  const LatentGrid z = stage("codec", [&] { return codec::encode(scene.video, bcfg.patch); });
  const LatentMask user = codec::downsample_mask(req.coarse_mask, bcfg.patch);
  const LatentGrid eps = flow::gaussian_like(z, derive_seed(req.seed, 0xE95));
  flow::MaskHook hook;
  if (models.gamr) {
    refiner::Schedule s = req.schedule;
    s.p0 = req.p0;
    hook = refiner::schedule_hook(*models.gamr, user, s, req.steps, conds.audio, &out.schedule_log, &z);
  }
  const flow::SampleResult res = stage("sampler", [&] {
    return flow::sample(*models.backbone, z, user, conds, flow::SamplerConfig::uniform(req.steps), eps, hook);
  });
  out.final_latent_mask = res.masks.back();
  out.refined_mask = codec::upsample_mask(out.final_latent_mask, bcfg.patch);

  out.video = stage("decoder", [&] { return codec::decode(res.z, true); });
  // Cells the sampler pinned hold the clean latent; copy the exact input pixels there.
  for (int f = 0; f < out.video.frames; ++f)
    for (int y = 0; y < out.video.height; ++y)
      for (int x = 0; x < out.video.width; ++x)
        if (out.refined_mask.at(f, y, x) <= 0.0f)
          for (int c = 0; c < out.video.channels; ++c) out.video.at(f, y, x, c) = scene.video.at(f, y, x, c);

  out.row.clip = "seed" + std::to_string(scene.spec.seed);
  out.row.iou = req.gt_mask ? metrics::iou(out.refined_mask, *req.gt_mask) : 0.0;
  out.row.fc = metrics::frame_consistency(out.video);
  out.row.bg_err = metrics::background_error(out.video, scene.video, out.refined_mask, bcfg.patch);
  out.row.sync_proxy = metrics::sync_proxy(out.video, out.audio, out.refined_mask);
  return out;
}

LongResult edit_long(const Models& models, const agent::Registry& registry,
                     const std::vector<world::SceneSample>& segments, const std::vector<InstanceMask>& masks, int k,
                     const EditRequest& req) {
  require(!segments.empty(), "edit-long needs at least one segment");
  require(masks.empty() || masks.size() == segments.size(), "edit-long needs one mask per segment");
  const int T = segments[0].video.frames;
  require(k >= 0 && k < T, "overlap k must satisfy 0 <= k < T");
  LongResult out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    world::SceneSample seg = segments[i];
    require(seg.video.same_shape(segments[0].video), "segments must share shapes");
    EditRequest r = req;
    r.seed = derive_seed(req.seed, 0x5E6, i);
    if (i > 0 && k > 0) {
      const VideoClip& prev = out.segments.back().video;
      for (int f = 0; f < k; ++f)
        std::copy(prev.data.begin() + static_cast<std::ptrdiff_t>((T - k + f) * prev.frame_size()),
                  prev.data.begin() + static_cast<std::ptrdiff_t>((T - k + f + 1) * prev.frame_size()),
                  seg.video.data.begin() + static_cast<std::ptrdiff_t>(f * seg.video.frame_size()));
      for (int f = 0; f < k; ++f) r.unmasked_frames.insert(f);
    }
    if (!masks.empty()) r.coarse_mask = masks[i];
    out.segments.push_back(edit(models, registry, seg, r));
    const EditResult& e = out.segments.back();
    const int skip = i == 0 ? 0 : k;
    const VideoClip part = slice_frames(e.video, skip, T - skip);
    if (i == 0) {
      out.video = part;
      out.audio = e.audio;
    } else {
      out.video.data.insert(out.video.data.end(), part.data.begin(), part.data.end());
      out.video.frames += part.frames;
      const auto per_frame = static_cast<std::size_t>(std::llround(e.audio.sample_rate / seg.video.fps));
      out.audio.samples.insert(out.audio.samples.end(),
                               e.audio.samples.begin() + static_cast<std::ptrdiff_t>(skip * per_frame),
                               e.audio.samples.end());
    }
  }
  return out;
}

EditRequest insert_request(const InstanceMask& region, const world::TokenDescriptor& new_instance) {
  EditRequest r;
  r.coarse_mask = region;
  r.edit = new_instance;
  r.mode = agent::PlanMode::insert;
  return r;
}

EditRequest remove_request(const InstanceMask& instance_mask) {
  EditRequest r;
  r.coarse_mask = instance_mask;
  r.edit = world::TokenDescriptor::parse("instance:none");
  r.mode = agent::PlanMode::remove;
  r.p0 = 0.0;
  return r;
}

std::vector<double> ScheduleBench::mean() const {
  std::vector<double> out;
  for (const auto& v : iou) {
    double s = 0.0;
    for (double x : v) s += x;
    out.push_back(v.empty() ? 0.0 : s / static_cast<double>(v.size()));
  }
  return out;
}

nlohmann::json ScheduleBench::to_json() const {
  nlohmann::json j;
  const auto m = mean();
  double in = 0.0;
  for (double x : input_iou) in += x;
  j["clips"] = input_iou.size();
  j["input_iou_mean"] = input_iou.empty() ? 0.0 : in / static_cast<double>(input_iou.size());
  j["input_iou"] = input_iou;
  for (std::size_t i = 0; i < names.size(); ++i) {
    j["schedules"][names[i]]["mean_iou"] = m[i];
    j["schedules"][names[i]]["iou"] = iou[i];
  }
  return j;
}

ScheduleBench bench_schedules(const Models& models, const std::vector<world::SceneSample>& scenes, double p0,
                              int steps, const std::vector<refiner::ScheduleKind>& kinds, std::uint64_t seed,
                              int audio_bands, int patch) {
  require(models.backbone && models.gamr, "schedule bench needs a backbone and a refiner");
  ScheduleBench b;
  for (auto k : kinds) b.names.push_back(refiner::to_string(k));
  const int n = static_cast<int>(scenes.size());
  b.iou.assign(kinds.size(), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  b.input_iou.assign(static_cast<std::size_t>(n), 0.0);
  const double P = models.gamr->config().max_precision;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& sc = scenes[static_cast<std::size_t>(i)];
    const InstanceMask coarse = refiner::degrade_mask(sc.mask, {p0, P});
    // scored on the latent grid, where the refiner works
    const LatentMask gt = codec::downsample_mask(sc.mask, patch);
    const LatentMask user = codec::downsample_mask(coarse, patch);
    b.input_iou[static_cast<std::size_t>(i)] = metrics::iou(user, gt);
    ConditionBundle conds;
    conds.text = sc.descriptor;
    conds.audio = model::encode_audio(sc.audio, sc.video.frames, sc.video.fps, audio_bands);
    const LatentGrid z = codec::encode(sc.video, patch);
    const LatentGrid eps = flow::gaussian_like(z, derive_seed(seed, 0xBE, static_cast<std::uint64_t>(i)));
    for (std::size_t s = 0; s < kinds.size(); ++s) {
      refiner::Schedule sch{kinds[s], p0};
      auto hook = refiner::schedule_hook(*models.gamr, user, sch, steps, conds.audio, nullptr, &z);
      const auto res = flow::sample(*models.backbone, z, user, conds, flow::SamplerConfig::uniform(steps), eps, hook);
      b.iou[s][static_cast<std::size_t>(i)] = metrics::iou(res.masks.back(), gt);
    }
  }
  return b;
}

void write_edit(const std::filesystem::path& dir, const EditResult& r, const agent::Registry& registry) {
  std::filesystem::create_directories(dir);
  io::save_avk(dir / "video.avk", io::from_video(r.video));
  io::save_avk(dir / "final_audio.avk", io::from_audio(r.audio));
  io::save_avk(dir / "refined_mask.avk", io::from_mask(r.refined_mask));
  io::save_wav(dir / "final_audio.wav", r.audio);
  if (r.trace) {
    for (std::size_t i = 0; i < r.trace->iterations.size(); ++i) {
      const auto& it = r.trace->iterations[i];
      const std::string k = "iter" + std::to_string(i + 1);
      io::save_avk(dir / (k + "_sep.avk"), io::from_audio(it.a_sep));
      io::save_avk(dir / (k + "_gen.avk"), io::from_audio(it.a_gen));
      io::save_avk(dir / (k + "_mix.avk"), io::from_audio(it.a_mix));
    }
    io::write_text(dir / "trace.json", agent::trace_to_json(*r.trace, registry).dump(2) + "\n");
  }
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& st : r.schedule_log) {
    double area = 0.0;
    for (float v : st.handed.data) area += v;
    sched.push_back({{"k", st.k}, {"p", st.p}, {"mask_cells", area}});
  }
  metrics::MetricReport rep;
  rep.add(r.row);
  nlohmann::json j = rep.to_json();
  j["schedule"] = sched;
  io::write_text(dir / "report.json", j.dump(2) + "\n");
  io::write_text(dir / "report.csv", rep.to_csv());
}

}  // namespace avi::pipeline
