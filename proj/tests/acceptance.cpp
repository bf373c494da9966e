// End-to-end acceptance run. Trains the desk model once, then checks every
// criterion and prints one PASS/FAIL line each. Exit status is the number of
// failed criteria not listed with --known-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avi/agent.hpp"
#include "avi/checkpoint.hpp"
#include "avi/codec.hpp"
#include "avi/error.hpp"
#include "avi/flow.hpp"
#include "avi/io.hpp"
#include "avi/metrics.hpp"
#include "avi/pipeline.hpp"
#include "avi/rng.hpp"
#include "avi/spectral.hpp"
#include "avi/trainer.hpp"

using namespace avi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[128];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LatentGrid random_grid(int frames, int hw, std::uint64_t seed) {
  VideoClip v(frames, hw, hw, 3, 8.0);
  Rng r(seed);
  for (auto& x : v.data) x = static_cast<float>(r.uniform());
  return codec::encode(v, 2);
}

float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

train::TrainConfig desk_config() {
  train::TrainConfig c;
  c.seed = 1;
  c.steps = 5000;
  c.dataset_size = 2000;
  c.train_count = 1960;
  c.scale.frames = 8;
  c.scale.height = 16;
  c.scale.width = 16;
  return c;
}

// Frame-block permutation of a track; one block per video frame.
AudioTrack shuffle_frames(const AudioTrack& a, int frames, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(frames));
  std::iota(perm.begin(), perm.end(), 0);
  Rng r(seed);
  for (int j = frames - 1; j > 0; --j) std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(r.uniform_int(0, j))]);
  const std::size_t per = a.size() / static_cast<std::size_t>(frames);
  AudioTrack out = a;
  for (int f = 0; f < frames; ++f)
    std::copy_n(a.samples.begin() + static_cast<std::ptrdiff_t>(perm[static_cast<std::size_t>(f)] * per), per,
                out.samples.begin() + static_cast<std::ptrdiff_t>(f * per));
  return out;
}

// An audio-only edit: move the instance to a frequency well away from its own.
world::TokenDescriptor far_freq_edit(const world::SceneSample& s, std::uint64_t seed, bool change_voice) {
  const double f0 = std::stod(*s.descriptor.value_of("freq"));
  std::vector<int> far;
  for (int f : {220, 330, 440, 550, 660, 880, 1100, 1320})
    if (std::max<double>(f, f0) >= 1.6 * std::min<double>(f, f0) && f < 0.8 * s.audio.sample_rate / 2) far.push_back(f);
  Rng r(seed);
  std::string tok = "freq:" + std::to_string(far[static_cast<std::size_t>(r.uniform_int(0, static_cast<int>(far.size()) - 1))]);
  if (change_voice) {
    const char* voices[] = {"tone", "chirp", "noise"};
    tok += std::string(" voice:") + voices[r.uniform_int(0, 2)];
  }
  return world::TokenDescriptor::parse(tok);
}

// --- 1
Outcome flow_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const LatentGrid z = random_grid(4, 8, 1);
  const LatentGrid eps = flow::gaussian_like(z, 2);
  const bool ends = flow::interpolate(z, eps, 1.0).data == z.data && flow::interpolate(z, eps, 0.0).data == eps.data;
  LatentMask ones(z.frames, z.h, z.w, 1.0f), zeros(z.frames, z.h, z.w, 0.0f);
  const LatentGrid other = random_grid(4, 8, 3);
  const bool comp = flow::compose(other, z, ones).data == other.data && flow::compose(other, z, zeros).data == z.data;
  float worst = 0.0f;
  for (int k : {1, 4, 16}) {
    const flow::OracleField oracle(z, eps);
    const auto r = flow::sample(oracle, z, ones, {}, flow::SamplerConfig::uniform(k), eps);
    worst = std::max(worst, max_abs_diff(r.z.data, z.data));
  }
  const double secs = seconds_since(t0);
  o.pass = ends && comp && worst <= 1e-5f && secs < 5.0;
  o.detail = std::string("endpoints ") + (ends ? "exact" : "off") + ", compose " + (comp ? "exact" : "off") +
             ", oracle err " + fmt("%.2e", worst) + ", " + fmt("%.2fs", secs);
  return o;
}

// --- 2
Outcome background(const pipeline::Models& trained, const train::TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const model::Backbone fresh_b(cfg.backbone, 77);
  const refiner::Refiner fresh_g(cfg.gamr, 78);
  const auto registry = pipeline::registry_for(cfg);
  double worst = 0.0;
  int runs = 0;
  for (const pipeline::Models& m : {pipeline::Models{&fresh_b, &fresh_g}, trained}) {
    for (int i = 0; i < 3; ++i) {
      const auto s = train::make_scene(cfg, cfg.train_count + i);
      pipeline::EditRequest req;
      req.coarse_mask = refiner::bbox_mask(s.mask);
      req.edit = world::TokenDescriptor::parse(i % 2 ? "color:blue" : "color:green");
      req.steps = 8;
      req.seed = static_cast<std::uint64_t>(i);
      req.audio_override = s.audio;
      const auto r = pipeline::edit(m, registry, s, req);
      worst = std::max(worst, metrics::background_error(r.video, s.video, req.coarse_mask, cfg.backbone.patch));
      ++runs;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-4 && secs < 30.0;
  o.detail = "max bg err " + fmt("%.2e", worst) + " over " + std::to_string(runs) + " edits, " + fmt("%.1fs", secs);
  return o;
}

// --- 3
double rel_err(double fd, double an) { return std::abs(fd - an) / std::max(1e-12, std::max(std::abs(fd), std::abs(an))); }

template <class Loss>
double check_params(nn::ParamStore& store, const Loss& loss, std::uint64_t seed, int count) {
  store.zero_grad();
  loss(true);
  Rng pick(seed);
  auto& all = store.all();
  double worst = 0.0;
  for (int n = 0, tries = 0; n < count && tries < 50 * count; ++tries) {
    auto& p = all[static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(all.size()) - 1))];
    const std::size_t i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(p.size()) - 1));
    const float keep = p.value[i];
    p.value[i] = keep + 1e-2f;
    const double hi = p.value[i], lp = loss(false);
    p.value[i] = keep - 1e-2f;
    const double lo = p.value[i], lm = loss(false);
    p.value[i] = keep;
    const double fd = (lp - lm) / (hi - lo);
    if (std::abs(fd) < 1e-7 && std::abs(p.grad[i]) < 1e-7) continue;  // parameter with no effect here
    worst = std::max(worst, rel_err(fd, p.grad[i]));
    ++n;
  }
  return worst;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  // scalar focal and fm cases
  double scalar = 0.0;
  for (double gt : {0.0, 1.0})
    for (double m : {0.1, 0.3, 0.5, 0.8}) {
      const double h = 1e-5;
      const double fd = (refiner::focal_term(m + h, gt) - refiner::focal_term(m - h, gt)) / (2 * h);
      scalar = std::max(scalar, rel_err(fd, refiner::focal_term_grad(m, gt)));
    }
  {
    LatentGrid pred = random_grid(1, 4, 5), tgt = random_grid(1, 4, 6);
    const auto g = flow::fm_loss_grad(pred, tgt);
    for (std::size_t i = 0; i < pred.data.size(); i += 5) {
      LatentGrid a = pred, b = pred;
      a.data[i] += 1e-2f;
      b.data[i] -= 1e-2f;
      const double fd = (flow::fm_loss(a, tgt) - flow::fm_loss(b, tgt)) / (static_cast<double>(a.data[i]) - b.data[i]);
      scalar = std::max(scalar, rel_err(fd, g[i]));
    }
  }

  // 2-frame 8x8 instance
  model::BackboneConfig bc;
  bc.model_dim = 16;
  bc.heads = 2;
  bc.blocks = 2;
  bc.audio_bands = 4;
  refiner::RefinerConfig gc;
  gc.model_dim = 16;
  gc.heads = 2;
  gc.blocks = 2;
  gc.audio_bands = 4;
  model::Backbone b(bc, 8);
  refiner::Refiner gm(gc, 9);
  Rng wake(13);
  for (auto* store : {&b.params(), &gm.params()})
    for (auto& p : store->all())
      if (p.name.find(".mod.") != std::string::npos)
        for (auto& x : p.value) x = static_cast<float>(0.3 * wake.normal());
  const LatentGrid z = random_grid(2, 8, 3);
  LatentMask m(z.frames, z.h, z.w, 0.0f);
  for (std::size_t i = 0; i < m.data.size(); i += 2) m.data[i] = 1.0f;
  ConditionBundle conds;
  conds.text = world::TokenDescriptor::parse("color:red shape:circle traj:bounce");
  conds.audio = AudioTokens(2, 4);
  Rng r(4);
  for (auto& x : conds.audio.data) x = static_cast<float>(r.uniform());
  LatentGrid target = z;
  for (auto& x : target.data) x = static_cast<float>(r.normal());
  auto bb_loss = [&](bool grad) {
    nn::Graph<double> g(&b.params());
    const auto out = b.build(g, z, 0.4, m, conds);
    const auto l = g.mse(out, model::latent_rows(target).template cast<double>());
    if (grad) g.backward(l);
    return g.scalar(l);
  };
  nn::Mat<double> gt(static_cast<Eigen::Index>(m.data.size()), 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) gt(static_cast<Eigen::Index>(i), 0) = (i % 3 == 0) ? 1.0 : 0.0;
  auto gm_loss = [&](bool grad) {
    nn::Graph<double> g(&gm.params());
    const auto out = gm.build(g, m, 3.0, 0.4, z, conds.audio);
    const auto l = g.focal_from_logits(out, gt, 0.25, 2.0, refiner::kFocalClamp);
    if (grad) g.backward(l);
    return g.scalar(l);
  };
  const double wb = check_params(b.params(), bb_loss, 99, 5);
  const double wg = check_params(gm.params(), gm_loss, 98, 5);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = scalar < 1e-4 && wb < 1e-3 && wg < 1e-3 && secs < 120.0;
  o.detail = "scalar rel " + fmt("%.1e", scalar) + ", backbone rel " + fmt("%.1e", wb) + ", gamr rel " +
             fmt("%.1e", wg) + ", " + fmt("%.1fs", secs);
  return o;
}

// --- 4
Outcome focal_values() {
  const double a = refiner::focal_loss(std::vector<float>{0.5f}, std::vector<float>{1.0f});
  const double b = refiner::focal_loss(std::vector<float>{0.5f}, std::vector<float>{0.0f});
  Outcome o;
  o.pass = std::abs(a - 0.0433217) <= 1e-6 && std::abs(b - 0.1299648) <= 1e-6;
  o.detail = fmt("fg %.7f", a) + fmt(", bg %.7f", b);
  return o;
}

// --- 5
InstanceMask shape_mask(int kind) {
  InstanceMask m(2, 32, 32, 0.0f);
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double cx = 15.5 + 2 * f, cy = 15.5, dx = x - cx, dy = y - cy;
        bool in = false;
        if (kind == 0) in = dx * dx + dy * dy <= 81.0;
        if (kind == 1) in = std::abs(dx) <= 8 && std::abs(dy) <= 8;
        if (kind == 2) in = dy <= 8 && dy >= -10 + 2 * std::abs(dx);
        m.at(f, y, x) = in ? 1.0f : 0.0f;
      }
  return m;
}

InstanceMask bbox_oracle(const InstanceMask& m) {
  InstanceMask out(m.frames, m.height, m.width, 0.0f);
  for (int f = 0; f < m.frames; ++f) {
    int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(f, y, x) > 0.0f) y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) out.at(f, y, x) = 1.0f;
  }
  return out;
}

Outcome degradation() {
  Outcome o;
  bool ident = true, boxes = true, mono = true;
  for (int kind = 0; kind < 3; ++kind) {
    const InstanceMask m = shape_mask(kind);
    ident = ident && refiner::degrade_mask(m, {0.0}).data == m.data;
    boxes = boxes && refiner::degrade_mask(m, {refiner::kMaxPrecision}).data == bbox_oracle(m).data;
    double prev = 2.0;
    for (double p : {0.0, 1.0, 2.0, 4.0, 8.0, 10.0}) {
      const double v = metrics::iou(refiner::degrade_mask(m, {p}), m);
      mono = mono && v <= prev + 1e-12;
      prev = v;
    }
  }
  o.pass = ident && boxes && mono;
  o.detail = std::string("identity ") + (ident ? "ok" : "off") + ", bbox " + (boxes ? "ok" : "off") + ", monotone " +
             (mono ? "ok" : "off");
  return o;
}

// --- 6, 7
struct BenchOutcomes {
  Outcome order;
  Outcome gain;
};

BenchOutcomes schedule_bench(const pipeline::Models& m, const train::TrainConfig& cfg) {
  std::vector<world::SceneSample> scenes;
  for (int i = 0; i < 40; ++i) scenes.push_back(train::make_scene(cfg, cfg.train_count + i));
  const auto b = pipeline::bench_schedules(
      m, scenes, refiner::kMaxPrecision, cfg.sampler_steps,
      {refiner::ScheduleKind::instant, refiner::ScheduleKind::linear, refiner::ScheduleKind::constant}, 0,
      cfg.backbone.audio_bands, cfg.backbone.patch);
  const auto mean = b.mean();
  const double input = std::accumulate(b.input_iou.begin(), b.input_iou.end(), 0.0) / b.input_iou.size();
  BenchOutcomes r;
  const double g1 = 100 * (mean[0] - mean[1]), g2 = 100 * (mean[1] - mean[2]);
  r.order.pass = g1 >= 2.0 && g2 >= 2.0;
  r.order.detail = fmt("instant %.2f", 100 * mean[0]) + fmt(" linear %.2f", 100 * mean[1]) +
                   fmt(" constant %.2f", 100 * mean[2]) + fmt(" (input %.2f)", 100 * input) +
                   fmt(", gaps %.2f", g1) + fmt(" / %.2f", g2);
  int wins = 0;
  for (std::size_t i = 0; i < b.input_iou.size(); ++i) wins += b.iou[0][i] > b.input_iou[i];
  r.gain.pass = wins >= 36;
  r.gain.detail = std::to_string(wins) + "/40 clips improve on the bounding box";
  return r;
}

// --- 8
Outcome agent_run(const train::TrainConfig& cfg) {
  const auto registry = pipeline::registry_for(cfg);
  int accepted = 0, bounded = 0, good = 0, identical = 0;
  double worst_rho = 1.0, worst_db = -1e9;
  const int sr = cfg.scale.sample_rate;
  for (int i = 0; i < 50; ++i) {
    const auto s = train::make_scene(cfg, 1000 + i);
    const auto edit = far_freq_edit(s, derive_seed(7, 0xA9, static_cast<std::uint64_t>(i)), i % 2 == 1);
    agent::CurateOptions opt;
    opt.max_iters = 4;
    const auto t = agent::curate(s, s.mask, edit, registry, opt);
    const auto again = agent::curate(s, s.mask, edit, registry, opt);
    identical += io::encode_avk(io::from_audio(t.final)) == io::encode_avk(io::from_audio(again.final));
    bounded += t.iteration_count >= 1 && t.iteration_count <= 4;
    if (!t.accepted) continue;
    ++accepted;
    // removed: the instance's own band less whatever the new sound occupies;
    // retained: the hum
    const agent::Component orig{*s.descriptor.value_of("voice"), std::stod(*s.descriptor.value_of("freq"))};
    const agent::Component added{edit.value_of("voice").value_or(orig.kind), std::stod(*edit.value_of("freq"))};
    const auto ob = agent::component_band(orig, 1.0, sr), gb = agent::component_band(added, 1.0, sr);
    std::vector<std::pair<double, double>> pieces;
    if (gb.hi_hz <= ob.lo_hz || gb.lo_hz >= ob.hi_hz) {
      pieces.push_back({ob.lo_hz, ob.hi_hz});
    } else {
      if (gb.lo_hz > ob.lo_hz) pieces.push_back({ob.lo_hz, gb.lo_hz});
      if (gb.hi_hz < ob.hi_hz) pieces.push_back({gb.hi_hz, ob.hi_hz});
    }
    double e_mix = 0.0, e_orig = 0.0;
    for (auto [lo, hi] : pieces) {
      e_mix += spectral::band_energy(t.final.samples, sr, lo, hi);
      e_orig += spectral::band_energy(s.audio.samples, sr, lo, hi);
    }
    const double db = 10 * std::log10(e_mix / e_orig);
    const auto hb = agent::component_band(agent::caption(s).components.at(0), 1.0, sr);
    const auto x = spectral::band_filter(t.final.samples, sr, {hb});
    const auto y = spectral::band_filter(s.audio.samples, sr, {hb});
    const double rho = metrics::pearson(std::vector<double>(x.begin(), x.end()), std::vector<double>(y.begin(), y.end()));
    worst_rho = std::min(worst_rho, rho);
    worst_db = std::max(worst_db, db);
    good += rho > 0.9 && db <= -20.0;
  }
  Outcome o;
  o.pass = bounded == 50 && accepted >= 48 && good == accepted && identical == 50;
  o.detail = std::to_string(accepted) + "/50 accepted, " + std::to_string(good) + " meet bands" +
             fmt(" (min rho %.3f", worst_rho) + fmt(", max removed %.1f dB)", worst_db) + ", " +
             std::to_string(identical) + "/50 reruns identical";
  return o;
}

// --- 9
Outcome sync(const pipeline::Models& m, const train::TrainConfig& cfg) {
  double gt = 0.0;
  for (int i = 0; i < 40; ++i) {
    const auto s = train::make_scene(cfg, 1200 + i);
    gt += metrics::sync_proxy(s.video, s.audio, s.mask) / 40;
  }
  const auto registry = pipeline::registry_for(cfg);
  double edited = 0.0, shuffled = 0.0;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    const auto s = train::make_scene(cfg, cfg.train_count + i);
    pipeline::EditRequest req;
    req.coarse_mask = refiner::bbox_mask(s.mask);
    req.edit = far_freq_edit(s, derive_seed(3, 0x5C, static_cast<std::uint64_t>(i)), false);
    req.steps = cfg.sampler_steps;
    req.seed = static_cast<std::uint64_t>(i);
    const auto r = pipeline::edit(m, registry, s, req);
    edited += metrics::sync_proxy(r.video, r.audio, s.mask) / n;
    for (int k = 0; k < 20; ++k)
      shuffled += metrics::sync_proxy(r.video, shuffle_frames(r.audio, r.video.frames, derive_seed(5, i, k)), s.mask) /
                  (20.0 * n);
  }
  Outcome o;
  o.pass = gt > 0.5 && edited - shuffled >= 0.3;
  o.detail = fmt("ground truth %.3f", gt) + fmt(", edits %.3f", edited) + fmt(" vs shuffled %.3f", shuffled);
  return o;
}

// --- 10
// desk_worst is null when the desk run was loaded rather than trained here.
Outcome joint_objective(const double* desk_worst) {
  train::TrainConfig c;
  c.seed = 3;
  c.steps = 20;
  c.dataset_size = 8;
  c.train_count = 6;
  c.scale.frames = 4;
  c.scale.height = c.scale.width = 16;
  c.backbone.model_dim = c.gamr.model_dim = 16;
  c.backbone.blocks = c.gamr.blocks = 1;
  c.lambda = 0.0;
  auto cf = c;
  cf.objective = train::Objective::fm_only;
  auto data = std::make_shared<const train::Dataset>(c);
  train::Trainer a(c, data), b(cf, data);
  bool equal = true;
  for (int i = 0; i < c.steps; ++i) equal = equal && a.train_step().total == b.train_step().total;
  Outcome o;
  double worst = desk_worst ? *desk_worst : 0.0;
  if (!desk_worst) {
    // without the desk log, check the sum on a short lambda = 0.5 run
    auto cj = c;
    cj.lambda = 0.5;
    train::Trainer j(cj, data);
    for (int i = 0; i < c.steps; ++i) {
      const auto l = j.train_step();
      worst = std::max(worst, std::abs(l.total - (l.fm + 0.5 * l.mask)));
    }
  }
  o.pass = worst <= 1e-7 && equal;
  o.detail = fmt("max |total - fm - lambda mask| %.1e", worst) + (desk_worst ? " over the desk run" : " over a short run") +
             ", lambda 0 vs fm-only " +
             (equal ? "bit-equal" : "differs");
  return o;
}

// --- 11
Outcome chaining(const pipeline::Models& m, const train::TrainConfig& cfg) {
  std::vector<world::SceneSample> segs;
  std::vector<InstanceMask> masks;
  for (int i = 0; i < 3; ++i) {
    segs.push_back(train::make_scene(cfg, cfg.train_count + 30));
    masks.push_back(refiner::bbox_mask(segs.back().mask));
  }
  const int k = 4, T = cfg.scale.frames;
  pipeline::EditRequest req;
  req.edit = world::TokenDescriptor::parse("color:blue");
  req.steps = 8;
  req.seed = 4;
  const auto r = pipeline::edit_long(m, pipeline::registry_for(cfg), segs, masks, k, req);
  const std::size_t fsz = segs[0].video.frame_size();
  bool seams = r.segments.size() == 3;
  for (int i = 1; seams && i < 3; ++i)
    for (int f = 0; f < k; ++f)
      for (std::size_t j = 0; j < fsz; ++j)
        seams = seams && r.segments[i].video.data[f * fsz + j] == r.segments[i - 1].video.data[(T - k + f) * fsz + j];
  const int expect = T + 2 * (T - k);
  const bool len = r.video.frames == expect &&
                   r.audio.size() == static_cast<std::size_t>(expect) * cfg.scale.sample_rate /
                                         static_cast<std::size_t>(cfg.scale.fps);
  Outcome o;
  o.pass = seams && len;
  o.detail = std::string("seams ") + (seams ? "bit-identical" : "differ") + ", " + std::to_string(r.video.frames) +
             " frames (expected " + std::to_string(expect) + ")";
  return o;
}

// --- 12
Outcome persistence(train::Trainer& desk, const fs::path& work) {
  Outcome o;
  io::Tensor t;
  t.dims = {3, 5, 7};
  Rng r(11);
  for (int i = 0; i < 105; ++i) t.f32.push_back(static_cast<float>(r.normal()));
  const auto bytes = io::encode_avk(t);
  const bool avk = io::encode_avk(io::decode_avk(bytes)) == bytes && io::decode_avk(bytes).f32 == t.f32;

  int rejected = 0;
  for (std::size_t at : {std::size_t{0}, std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[at] ^= 0x40;
    try {
      io::decode_avk(bad);
    } catch (const ValidationError&) {
      ++rejected;
    }
  }
  try {
    io::decode_avk(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 12));
  } catch (const ValidationError&) {
    ++rejected;
  }

  const fs::path ck = work / "roundtrip";
  const std::string sum = desk.save(ck);
  train::Trainer back(desk.config());
  back.load(ck);
  bool same = back.step() == desk.step();
  for (auto [x, y] : {std::pair{&desk.backbone().params(), &back.backbone().params()},
                      std::pair{&desk.gamr().params(), &back.gamr().params()}})
    for (std::size_t i = 0; i < x->all().size(); ++i) same = same && x->all()[i].value == y->all()[i].value;
  same = same && back.save(work / "roundtrip2") == sum;
  // flip one byte of a stored tensor
  const fs::path victim = ck / "backbone.in.w.avk";
  auto vb = io::read_bytes(victim);
  vb[vb.size() / 2] ^= 0x01;
  io::write_bytes(victim, vb);
  bool ck_rejected = false;
  try {
    train::Trainer probe(desk.config());
    probe.load(ck);
  } catch (const ValidationError&) {
    ck_rejected = true;
  }

  train::TrainConfig c;
  c.seed = 21;
  c.steps = 30;
  c.dataset_size = 8;
  c.train_count = 6;
  c.scale.frames = 4;
  c.scale.height = c.scale.width = 16;
  c.backbone.model_dim = c.gamr.model_dim = 16;
  c.backbone.blocks = c.gamr.blocks = 1;
  train::Trainer a(c), b(c);
  a.run({}, work / "seed_a");
  b.run({}, work / "seed_b");
  const std::string ca = train::checkpoint_checksum(work / "seed_a" / "final");
  const bool seeded = ca == train::checkpoint_checksum(work / "seed_b" / "final");

  o.pass = avk && rejected == 5 && same && ck_rejected && seeded;
  o.detail = std::string("avk ") + (avk ? "bit-exact" : "differs") + ", " + std::to_string(rejected) +
             "/5 corruptions rejected, checkpoint " + (same ? "bit-exact" : "differs") + ", tampered checkpoint " +
             (ck_rejected ? "rejected" : "accepted") + ", same-seed checksum " + (seeded ? ca : "differs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::string work_arg = (fs::temp_directory_path() / "avi_acceptance").string(), checkpoint;
  std::vector<int> only, known;
  app.add_option("workdir", work_arg, "scratch directory, wiped first");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--known-fail", known, "criteria whose failure does not count in the exit status")->delimiter(',');
  app.add_option("--checkpoint", checkpoint, "reuse a desk checkpoint instead of training");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = work_arg;
  fs::remove_all(work);
  fs::create_directories(work);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  auto is_known = [&](int id) { return std::find(known.begin(), known.end(), id) != known.end(); };

  int failed = 0, ran = 0, passed = 0;
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    ++ran;
    passed += o.pass;
    if (!o.pass && !is_known(id)) ++failed;
    std::printf("%-2d %s  %-22s %s\n", id, o.pass ? "PASS" : (is_known(id) ? "FAIL (known)" : "FAIL"), name.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  };

  run(1, "flow identities", flow_identities);

  const auto cfg = checkpoint.empty() ? desk_config() : train::checkpoint_config(checkpoint);
  std::unique_ptr<train::Trainer> desk;
  double desk_worst = 0.0;
  bool trained_here = false;
  const int needs_model[] = {2, 6, 7, 9, 10, 11, 12};
  if (std::any_of(std::begin(needs_model), std::end(needs_model), wanted)) {
    desk = std::make_unique<train::Trainer>(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    if (checkpoint.empty()) {
      std::printf("   training desk model: %d scenes, %d steps\n", cfg.dataset_size, cfg.steps);
      std::fflush(stdout);
      desk->run([&](long long, const train::Losses& l) {
        desk_worst = std::max(desk_worst, std::abs(l.total - (l.fm + cfg.lambda * l.mask)));
      });
      trained_here = true;
    } else {
      desk->load(checkpoint);
    }
    std::printf("   desk model %s in %.0fs, checksum %s\n", trained_here ? "trained" : "loaded", seconds_since(t0),
                desk->save(work / "desk").c_str());
    std::fflush(stdout);
  }
  const pipeline::Models models = desk ? pipeline::Models{&desk->backbone(), &desk->gamr()} : pipeline::Models{};

  run(2, "background", [&] { return background(models, cfg); });
  run(3, "gradient checks", gradients);
  run(4, "focal values", focal_values);
  run(5, "degradation", degradation);
  BenchOutcomes bench;
  if (wanted(6) || wanted(7)) {
    try {
      bench = schedule_bench(models, cfg);
    } catch (const std::exception& e) {
      bench.order = bench.gain = {false, std::string("threw: ") + e.what()};
    }
  }
  run(6, "schedule ordering", [&] { return bench.order; });
  run(7, "refinement gain", [&] { return bench.gain; });
  run(8, "audio agent", [&] { return agent_run(cfg); });
  run(9, "sync", [&] { return sync(models, cfg); });
  run(10, "joint objective", [&] { return joint_objective(trained_here ? &desk_worst : nullptr); });
  run(11, "long chaining", [&] { return chaining(models, cfg); });
  run(12, "persistence", [&] { return persistence(*desk, work); });

  std::printf("%d/%d criteria pass\n", passed, ran);
  return failed;
}
