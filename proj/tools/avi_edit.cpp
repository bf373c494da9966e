#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "avi/codec.hpp"
#include "avi/io.hpp"
#include "avi/pipeline.hpp"
#include "avi/trainer.hpp"

using namespace avi;
namespace fs = std::filesystem;

namespace {

// Flags that mirror TrainConfig keys; unset flags leave the config alone.
struct Overrides {
  std::optional<double> lambda, lr;
  std::optional<int> steps, batch, sampler_steps, dataset_size, train_count, checkpoint_interval;
  std::optional<std::string> schedule, objective;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--lambda", lambda, "mask loss weight");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--steps", steps, "training steps");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--sampler-steps", sampler_steps, "ODE steps K");
    app->add_option("--dataset-size", dataset_size, "number of scenes");
    app->add_option("--train-count", train_count, "scenes in the training split");
    app->add_option("--checkpoint-interval", checkpoint_interval, "steps between checkpoints");
    app->add_option("--schedule", schedule, "instant, linear or constant");
    app->add_option("--objective", objective, "joint or fm_only");
  }

  void apply(train::TrainConfig& c) const {
    if (lambda) c.lambda = *lambda;
    if (lr) c.lr = *lr;
    if (steps) c.steps = *steps;
    if (batch) c.batch = *batch;
    if (sampler_steps) c.sampler_steps = *sampler_steps;
    if (dataset_size) c.dataset_size = *dataset_size;
    if (train_count) c.train_count = *train_count;
    if (checkpoint_interval) c.checkpoint_interval = *checkpoint_interval;
    if (schedule) c.schedule = refiner::parse_schedule(*schedule);
    if (objective) c.objective = train::parse_objective(*objective);
    if (seed) c.seed = *seed;
    c.validate();
  }
};

train::TrainConfig base_config(const std::string& path) {
  return path.empty() ? train::TrainConfig{} : train::load_config(path);
}

InstanceMask coarse_from(const world::SceneSample& s, const std::string& mask_file, double p0) {
  if (!mask_file.empty()) return io::to_mask(io::load_avk(mask_file));
  return refiner::degrade_mask(s.mask, {p0, refiner::kMaxPrecision});
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-guided audio-visual editing on procedural scenes"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write the procedural dataset");
  std::string gen_out;
  bool gen_wav = false;
  std::uint64_t gen_seed = 0;
  int gen_count = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--count", gen_count, "scene count, defaults to dataset_size");
  gen->add_flag("--wav", gen_wav, "also write audio.wav");

  // train
  auto* tr = app.add_subcommand("train", "train the backbone and GAMR jointly");
  Overrides tr_ov;
  std::uint64_t tr_seed = 0;
  std::string tr_out, tr_resume, tr_log;
  tr->add_option("--seed", tr_seed, "run seed")->required();
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--log", tr_log, "JSON-lines loss log");
  tr_ov.attach(tr);

  // edit / refine-mask / agent share clip options
  auto* ed = app.add_subcommand("edit", "edit a clip");
  std::string ed_clip, ed_mask, ed_ckpt, ed_out, ed_desc, ed_mode = "edit", ed_sched = "instant";
  double ed_p0 = refiner::kMaxPrecision;
  int ed_steps = 16;
  std::uint64_t ed_seed = 0;
  bool ed_norefine = false;
  ed->add_option("--clip", ed_clip, "scene directory")->required();
  ed->add_option("--mask", ed_mask, "coarse mask (AVK1); default degrades the clip mask at p0");
  ed->add_option("--p0", ed_p0, "precision factor of the coarse mask");
  ed->add_option("--edit", ed_desc, "edit descriptor tokens");
  ed->add_option("--checkpoint", ed_ckpt, "checkpoint directory")->required();
  ed->add_option("--out", ed_out, "output directory")->required();
  ed->add_option("--mode", ed_mode, "edit, insert or remove");
  ed->add_option("--schedule", ed_sched, "degradation schedule");
  ed->add_option("--sampler-steps", ed_steps, "ODE steps K");
  ed->add_option("--seed", ed_seed, "noise seed");
  ed->add_flag("--no-refine", ed_norefine, "use the coarse mask as is");

  auto* el = app.add_subcommand("edit-long", "edit chained segments");
  std::vector<std::string> el_clips;
  int el_k = 4;
  std::string el_ckpt, el_out, el_desc, el_sched = "instant";
  double el_p0 = refiner::kMaxPrecision;
  std::uint64_t el_seed = 0;
  el->add_option("--clips", el_clips, "segment scene directories in order")->required();
  el->add_option("--k", el_k, "overlap frames");
  el->add_option("--checkpoint", el_ckpt, "checkpoint directory")->required();
  el->add_option("--out", el_out, "output directory")->required();
  el->add_option("--edit", el_desc, "edit descriptor tokens");
  el->add_option("--p0", el_p0, "precision factor of the coarse mask");
  el->add_option("--schedule", el_sched, "degradation schedule");
  el->add_option("--seed", el_seed, "noise seed");

  auto* rm = app.add_subcommand("refine-mask", "refine a coarse mask through a reconstruction run");
  std::string rm_clip, rm_mask, rm_ckpt, rm_out, rm_sched = "instant";
  double rm_p0 = refiner::kMaxPrecision;
  int rm_steps = 16;
  std::uint64_t rm_seed = 0;
  rm->add_option("--clip", rm_clip, "scene directory")->required();
  rm->add_option("--mask", rm_mask, "coarse mask (AVK1)");
  rm->add_option("--p0", rm_p0, "precision factor");
  rm->add_option("--checkpoint", rm_ckpt, "checkpoint directory")->required();
  rm->add_option("--out", rm_out, "output mask file (AVK1)")->required();
  rm->add_option("--schedule", rm_sched, "degradation schedule");
  rm->add_option("--sampler-steps", rm_steps, "ODE steps K");
  rm->add_option("--seed", rm_seed, "noise seed");

  auto* ag = app.add_subcommand("agent", "curate the edited audio track only");
  std::string ag_clip, ag_desc, ag_out, ag_mode = "edit";
  ag->add_option("--clip", ag_clip, "scene directory")->required();
  ag->add_option("--edit", ag_desc, "edit descriptor tokens");
  ag->add_option("--out", ag_out, "output directory")->required();
  ag->add_option("--mode", ag_mode, "edit, insert or remove");

  auto* ev = app.add_subcommand("eval", "score edited clips against their sources");
  std::vector<std::string> ev_edited, ev_source;
  std::string ev_out;
  ev->add_option("--edited", ev_edited, "edit output directories")->required();
  ev->add_option("--source", ev_source, "matching source scene directories")->required();
  ev->add_option("--out", ev_out, "report directory")->required();

  auto* bs = app.add_subcommand("bench-schedules", "held-out IoU for each degradation schedule");
  std::string bs_ckpt, bs_out;
  int bs_clips = 40, bs_steps = 16;
  double bs_p0 = refiner::kMaxPrecision;
  std::uint64_t bs_seed = 0;
  bs->add_option("--checkpoint", bs_ckpt, "checkpoint directory")->required();
  bs->add_option("--clips", bs_clips, "held-out clips to score");
  bs->add_option("--p0", bs_p0, "precision factor of the coarse mask");
  bs->add_option("--sampler-steps", bs_steps, "ODE steps K");
  bs->add_option("--seed", bs_seed, "noise seed");
  bs->add_option("--out", bs_out, "JSON output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto mode_of = [](const std::string& m) {
    if (m == "edit") return agent::PlanMode::edit;
    if (m == "insert") return agent::PlanMode::insert;
    if (m == "remove") return agent::PlanMode::remove;
    fail("unknown mode '", m, "'");
  };

  try {
    if (*gen) {
      train::TrainConfig c = base_config(config_path);
      if (gen->count("--seed")) c.seed = gen_seed;
      const int n = gen_count > 0 ? gen_count : c.dataset_size;
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%05d", i);
        const fs::path split = i < c.train_count ? "train" : "heldout";
        io::save_scene(fs::path(gen_out) / split / name, train::make_scene(c, i), gen_wav);
      }
      nlohmann::json j = c;
      io::write_text(fs::path(gen_out) / "config.json", j.dump(2) + "\n");
      std::cout << "wrote " << n << " scenes to " << gen_out << "\n";
    } else if (*tr) {
      train::TrainConfig c = base_config(config_path);
      tr_ov.seed = tr_seed;
      tr_ov.apply(c);
      train::Trainer trainer(c);
      if (!tr_resume.empty()) trainer.load(tr_resume);
      std::ofstream log;
      if (!tr_log.empty()) log.open(tr_log, std::ios::app);
      trainer.run(
          [&](long long step, const train::Losses& l) {
            nlohmann::json j{{"step", step}, {"total", l.total}, {"fm", l.fm}, {"mask", l.mask}};
            if (log) log << j.dump() << "\n";
            if (step % 50 == 0 || step == c.steps) std::cout << j.dump() << std::endl;
          },
          tr_out);
      std::cout << "checksum " << train::checkpoint_checksum(fs::path(tr_out) / "final") << "\n";
    } else if (*ed) {
      train::TrainConfig c = config_path.empty() ? train::checkpoint_config(ed_ckpt) : base_config(config_path);
      auto models = train::load_models(ed_ckpt, &c);
      const auto scene = io::load_scene(ed_clip);
      pipeline::EditRequest req;
      req.mode = mode_of(ed_mode);
      req.edit = world::TokenDescriptor::parse(ed_desc);
      req.coarse_mask = coarse_from(scene, ed_mask, ed_p0);
      req.p0 = ed_p0;
      req.schedule = {refiner::parse_schedule(ed_sched), ed_p0};
      req.steps = ed_steps;
      req.seed = ed_seed;
      req.gt_mask = scene.mask;
      const auto registry = pipeline::registry_for(c);
      const auto res = pipeline::edit({models.backbone.get(), ed_norefine ? nullptr : models.gamr.get()}, registry,
                                      scene, req);
      pipeline::write_edit(ed_out, res, registry);
      print_json(nlohmann::json{{"iou", res.row.iou},
                                {"bg_err", res.row.bg_err},
                                {"sync_proxy", res.row.sync_proxy},
                                {"accepted", res.trace ? res.trace->accepted : true}});
    } else if (*el) {
      train::TrainConfig c = config_path.empty() ? train::checkpoint_config(el_ckpt) : base_config(config_path);
      auto models = train::load_models(el_ckpt, &c);
      std::vector<world::SceneSample> segs;
      std::vector<InstanceMask> masks;
      for (const auto& d : el_clips) {
        segs.push_back(io::load_scene(d));
        masks.push_back(refiner::degrade_mask(segs.back().mask, {el_p0, refiner::kMaxPrecision}));
      }
      pipeline::EditRequest req;
      req.edit = world::TokenDescriptor::parse(el_desc);
      req.p0 = el_p0;
      req.schedule = {refiner::parse_schedule(el_sched), el_p0};
      req.steps = c.sampler_steps;
      req.seed = el_seed;
      const auto registry = pipeline::registry_for(c);
      const auto res = pipeline::edit_long({models.backbone.get(), models.gamr.get()}, registry, segs, masks, el_k, req);
      fs::create_directories(el_out);
      io::save_avk(fs::path(el_out) / "video.avk", io::from_video(res.video));
      io::save_avk(fs::path(el_out) / "final_audio.avk", io::from_audio(res.audio));
      for (std::size_t i = 0; i < res.segments.size(); ++i)
        pipeline::write_edit(fs::path(el_out) / ("segment_" + std::to_string(i)), res.segments[i], registry);
      std::cout << "frames " << res.video.frames << "\n";
    } else if (*rm) {
      train::TrainConfig c = config_path.empty() ? train::checkpoint_config(rm_ckpt) : base_config(config_path);
      auto models = train::load_models(rm_ckpt, &c);
      const auto scene = io::load_scene(rm_clip);
      pipeline::EditRequest req;
      req.coarse_mask = coarse_from(scene, rm_mask, rm_p0);
      req.p0 = rm_p0;
      req.schedule = {refiner::parse_schedule(rm_sched), rm_p0};
      req.steps = rm_steps;
      req.seed = rm_seed;
      req.audio_override = scene.audio;
      req.gt_mask = scene.mask;
      const auto registry = pipeline::registry_for(c);
      const auto res = pipeline::edit({models.backbone.get(), models.gamr.get()}, registry, scene, req);
      io::save_avk(rm_out, io::from_mask(res.refined_mask));
      print_json({{"input_iou", metrics::iou(req.coarse_mask, scene.mask)}, {"refined_iou", res.row.iou}});
    } else if (*ag) {
      train::TrainConfig c = base_config(config_path);
      const auto scene = io::load_scene(ag_clip);
      const auto registry = pipeline::registry_for(c);
      agent::CurateOptions opt;
      opt.mode = mode_of(ag_mode);
      const auto trace = agent::curate(scene, scene.mask, world::TokenDescriptor::parse(ag_desc), registry, opt);
      pipeline::EditResult r;
      r.trace = trace;
      fs::create_directories(ag_out);
      io::save_avk(fs::path(ag_out) / "final_audio.avk", io::from_audio(trace.final));
      io::save_wav(fs::path(ag_out) / "final_audio.wav", trace.final);
      for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
        const std::string k = "iter" + std::to_string(i);
        io::save_avk(fs::path(ag_out) / (k + "_sep.avk"), io::from_audio(trace.iterations[i].a_sep));
        io::save_avk(fs::path(ag_out) / (k + "_gen.avk"), io::from_audio(trace.iterations[i].a_gen));
        io::save_avk(fs::path(ag_out) / (k + "_mix.avk"), io::from_audio(trace.iterations[i].a_mix));
      }
      const auto j = agent::trace_to_json(trace, registry);
      io::write_text(fs::path(ag_out) / "trace.json", j.dump(2) + "\n");
      std::cout << "accepted " << trace.accepted << " after " << trace.iteration_count << " iterations\n";
    } else if (*ev) {
      require(ev_edited.size() == ev_source.size(), "--edited and --source need the same count");
      metrics::MetricReport rep;
      for (std::size_t i = 0; i < ev_edited.size(); ++i) {
        const auto src = io::load_scene(ev_source[i]);
        const fs::path e = ev_edited[i];
        const VideoClip v = io::to_video(io::load_avk(e / "video.avk"), src.video.fps);
        const AudioTrack a = io::to_audio(io::load_avk(e / "final_audio.avk"), src.audio.sample_rate);
        const InstanceMask m = io::to_mask(io::load_avk(e / "refined_mask.avk"));
        metrics::ClipRow row;
        row.clip = e.filename().string();
        row.iou = metrics::iou(m, src.mask);
        row.fc = metrics::frame_consistency(v);
        row.bg_err = metrics::background_error(v, src.video, m);
        row.sync_proxy = metrics::sync_proxy(v, a, m);
        rep.add(row);
      }
      fs::create_directories(ev_out);
      io::write_text(fs::path(ev_out) / "report.json", rep.to_json().dump(2) + "\n");
      io::write_text(fs::path(ev_out) / "report.csv", rep.to_csv());
      std::cout << rep.to_csv();
    } else if (*bs) {
      train::TrainConfig c = config_path.empty() ? train::checkpoint_config(bs_ckpt) : base_config(config_path);
      auto models = train::load_models(bs_ckpt, &c);
      require(bs_clips <= c.heldout_count(), "not enough held-out scenes");
      std::vector<world::SceneSample> scenes;
      for (int i = 0; i < bs_clips; ++i) scenes.push_back(train::make_scene(c, c.train_count + i));
      const auto b = pipeline::bench_schedules(
          {models.backbone.get(), models.gamr.get()}, scenes, bs_p0, bs_steps,
          {refiner::ScheduleKind::instant, refiner::ScheduleKind::linear, refiner::ScheduleKind::constant}, bs_seed,
          c.backbone.audio_bands, c.backbone.patch);
      const auto j = b.to_json();
      if (!bs_out.empty()) io::write_text(bs_out, j.dump(2) + "\n");
      std::cout << "input " << j["input_iou_mean"] << "\n";
      for (const auto& n : b.names) std::cout << n << " " << j["schedules"][n]["mean_iou"] << "\n";
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
