#include "avi/agent.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avi/rng.hpp"

namespace avi::agent {

namespace {

double energy(const std::vector<float>& x, const std::vector<std::pair<std::size_t, std::size_t>>* spans = nullptr) {
  double e = 0.0;
  if (!spans) {
    for (float v : x) e += static_cast<double>(v) * v;
    return e;
  }
  for (const auto& [a, b] : *spans)
    for (std::size_t i = a; i < std::min(b, x.size()); ++i) e += static_cast<double>(x[i]) * x[i];
  return e;
}

// Sample spans covered by bursts starting at the given frames.
std::vector<std::pair<std::size_t, std::size_t>> burst_spans(const std::vector<int>& frames, int sample_rate,
                                                             double fps, std::size_t n) {
  const auto len = static_cast<std::size_t>(std::llround(world::kBurstSeconds * sample_rate));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (int f : frames) {
    const auto on = static_cast<std::size_t>(std::llround(f * sample_rate / fps));
    if (on < n) out.emplace_back(on, std::min(n, on + len));
  }
  return out;
}

// Complement of `spans` in [0, n).
std::vector<std::pair<std::size_t, std::size_t>> complement(std::vector<std::pair<std::size_t, std::size_t>> spans,
                                                            std::size_t n) {
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t cur = 0;
  for (const auto& [a, b] : spans) {
    if (a > cur) out.emplace_back(cur, a);
    cur = std::max(cur, b);
  }
  if (cur < n) out.emplace_back(cur, n);
  return out;
}

world::Voice voice_of(const std::string& kind) {
  if (kind == "tone") return world::Voice::tone;
  if (kind == "chirp") return world::Voice::chirp;
  if (kind == "noise") return world::Voice::noise_burst;
  fail("component '", kind, "' has no voice");
}

std::string kind_of(world::Voice v) { return world::to_string(v); }

GenTrack track_for(const std::string& kind) {
  if (kind == "chirp") return GenTrack::speech;
  if (kind == "tone") return GenTrack::music;
  return GenTrack::sound;
}

std::uint64_t descriptor_seed(const StructuredDescriptor& d) {
  std::uint64_t h = 0xA6E27;
  for (const auto& c : d.components) {
    for (char ch : c.kind) h = splitmix64(h ^ static_cast<std::uint64_t>(ch));
    h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(c.freq * 16)));
  }
  for (int f : d.event_frames) h = splitmix64(h ^ static_cast<std::uint64_t>(f));
  return h;
}

AudioTrack burst_generator(world::Voice voice, const StructuredDescriptor& d, double duration, int sample_rate,
                           double fps) {
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  AudioTrack out(sample_rate, n);
  for (const auto& c : d.components) {
    const auto part = world::render_bursts(voice, c.freq, d.event_frames, sample_rate, fps, n, descriptor_seed(d),
                                           static_cast<float>(d.gain));
    for (std::size_t i = 0; i < n; ++i) out.samples[i] += part.samples[i];
  }
  float peak = 0.0f;
  for (float v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > world::kPeakLimit)
    for (auto& v : out.samples) v *= world::kPeakLimit / peak;
  return out;
}

AudioTrack band_separator(const AudioTrack& a, const StructuredDescriptor& c_sep, double widen) {
  if (c_sep.keeps_all()) return a;
  AudioTrack out(a.sample_rate, a.size());
  if (c_sep.empty()) return out;
  StructuredDescriptor d = c_sep;
  d.bandwidth *= widen;
  out.samples = spectral::band_filter(a.samples, a.sample_rate, descriptor_bands(d, a.sample_rate));
  if (c_sep.stop_removed && !c_sep.removed.empty()) {
    StructuredDescriptor r;
    r.components = c_sep.removed;
    out.samples = spectral::band_filter(out.samples, a.sample_rate, descriptor_bands(r, a.sample_rate), true);
  }
  return out;
}

int score3(bool two, bool one) { return two ? 2 : (one ? 1 : 0); }

double db(double ratio) { return 10.0 * std::log10(std::max(ratio, 1e-30)); }

}  // namespace

std::string to_string(SepDomain d) { return d == SepDomain::speech ? "speech" : "non-speech"; }

std::string to_string(GenTrack t) {
  switch (t) {
    case GenTrack::speech: return "speech";
    case GenTrack::music: return "music";
    case GenTrack::sound: return "sound";
  }
  return "sound";
}

std::string Component::token() const {
  if (kind == "all") return "all";
  return kind + ":" + std::to_string(static_cast<int>(std::llround(freq)));
}

Component Component::parse(const std::string& token) {
  if (token == "all") return {"all", 0.0};
  const auto pos = token.find(':');
  if (pos == std::string::npos) fail("malformed component token '", token, "'");
  Component c{token.substr(0, pos), std::stod(token.substr(pos + 1))};
  if (c.kind != "hum" && c.kind != "tone" && c.kind != "chirp" && c.kind != "noise")
    fail("unknown component class '", c.kind, "'");
  return c;
}

bool StructuredDescriptor::keeps_all() const {
  return std::any_of(components.begin(), components.end(), [](const Component& c) { return c.kind == "all"; });
}

std::vector<std::string> StructuredDescriptor::tokens() const {
  std::vector<std::string> t;
  for (const auto& c : components) t.push_back(c.token());
  return t;
}

spectral::Band component_band(const Component& c, double bw, int sample_rate) {
  const double nyq = sample_rate / 2.0;
  double half = 0.0;
  if (c.kind == "all") return {0.0, nyq + 1.0};
  if (c.kind == "hum") half = 0.25 * c.freq;
  else if (c.kind == "tone") half = std::max(40.0, 0.1 * c.freq);
  else if (c.kind == "chirp") half = 70.0 + 0.05 * c.freq;
  else if (c.kind == "noise") half = 30.0 + 0.25 * c.freq;
  else fail("unknown component class '", c.kind, "'");
  half *= bw;
  return {std::max(0.0, c.freq - half), std::min(nyq, c.freq + half)};
}

std::vector<spectral::Band> descriptor_bands(const StructuredDescriptor& d, int sample_rate) {
  std::vector<spectral::Band> b;
  for (const auto& c : d.components) b.push_back(component_band(c, d.bandwidth, sample_rate));
  return b;
}

std::vector<spectral::Band> band_difference(const std::vector<spectral::Band>& a, const std::vector<spectral::Band>& b) {
  std::vector<spectral::Band> out = a;
  for (const auto& cut : b) {
    std::vector<spectral::Band> next;
    for (const auto& x : out) {
      if (cut.hi_hz <= x.lo_hz || cut.lo_hz >= x.hi_hz) {
        next.push_back(x);
        continue;
      }
      if (cut.lo_hz > x.lo_hz) next.push_back({x.lo_hz, cut.lo_hz});
      if (cut.hi_hz < x.hi_hz) next.push_back({cut.hi_hz, x.hi_hz});
    }
    out = std::move(next);
  }
  return out;
}

StructuredDescriptor caption(const world::SceneSample& scene) {
  StructuredDescriptor s;
  // Hum frequency from the low end of the mixture.
  std::vector<float> low = spectral::band_filter(scene.audio.samples, scene.audio.sample_rate, {{20.0, 150.0}});
  s.components.push_back({"hum", std::round(spectral::dominant_frequency(low, scene.audio.sample_rate, 20.0))});
  const auto& d = scene.descriptor;
  if (auto voice = d.value_of("voice"); voice && d.value_of("freq"))
    s.components.push_back({*voice, std::stod(*d.value_of("freq"))});
  s.event_frames = scene.event_times;
  return s;
}

AgentPlan plan(const world::SceneSample& scene, const InstanceMask& coarse_mask, const StructuredDescriptor& summary,
               const world::TokenDescriptor& edit, PlanMode mode) {
  require(coarse_mask.frames == scene.video.frames, "coarse mask does not match the scene");
  AgentPlan p;
  for (const auto& c : summary.components)
    if (c.kind != "hum") p.original.push_back(c);
  p.original_events = summary.event_frames;
  std::vector<Component> background;
  for (const auto& c : summary.components)
    if (c.kind == "hum") background.push_back(c);

  bool audio_edit = false, removal = mode == PlanMode::remove;
  for (const auto& t : edit.tokens) {
    const std::string cat = t.substr(0, t.find(':'));
    if (cat == "voice" || cat == "freq" || cat == "timing") audio_edit = true;
    if (cat == "instance") removal = true;
  }

  if (removal) {
    p.c_sep.components = background;
  } else if (mode == PlanMode::insert) {
    p.c_sep.components = {{"all", 0.0}};
    const auto voice = edit.value_of("voice").value_or("tone");
    const double f = edit.value_of("freq") ? std::stod(*edit.value_of("freq")) : 440.0;
    p.c_gen.components = {{voice, f}};
    world::SceneSpec spec = world::apply_edit(scene.spec, edit, scene.spec.seed);
    auto& inst = spec.instances[static_cast<std::size_t>(spec.sounding_index())];
    inst.hidden = false;
    p.c_gen.event_frames = world::event_frames(spec, spec.sounding_index());
  } else if (!audio_edit) {
    p.c_sep.components = {{"all", 0.0}};
  } else {
    p.c_sep.components = background;
    const world::SceneSpec target = world::apply_edit(scene.spec, edit, scene.spec.seed);
    const auto& inst = target.sounding();
    p.c_gen.components = {{kind_of(inst.voice), inst.base_freq}};
    p.c_gen.event_frames = world::event_frames(target, target.sounding_index());
  }
  if (!p.c_sep.keeps_all()) p.c_sep.removed = p.original;

  bool speech = false;
  if (p.c_sep.keeps_all())
    speech = std::any_of(p.original.begin(), p.original.end(), [](const Component& c) { return c.kind == "chirp"; });
  else
    speech = std::any_of(p.c_sep.components.begin(), p.c_sep.components.end(),
                         [](const Component& c) { return c.kind == "chirp"; });
  p.sep_domain = speech ? SepDomain::speech : SepDomain::non_speech;
  p.gen_track = p.c_gen.empty() ? GenTrack::sound : track_for(p.c_gen.components.front().kind);
  return p;
}

Registry Registry::desk() {
  Registry r;
  r.add_separator(SepDomain::non_speech, "band-gate",
                  [](const AudioTrack& a, const StructuredDescriptor& d) { return band_separator(a, d, 1.0); });
  // Speech keeps modulation sidebands, so its gate is wider.
  r.add_separator(SepDomain::speech, "wide-band-gate",
                  [](const AudioTrack& a, const StructuredDescriptor& d) { return band_separator(a, d, 1.5); });
  r.add_generator(GenTrack::speech, "modulated-tone", [](const StructuredDescriptor& d, double dur, int S, double fps) {
    return burst_generator(world::Voice::chirp, d, dur, S, fps);
  });
  r.add_generator(GenTrack::music, "tone", [](const StructuredDescriptor& d, double dur, int S, double fps) {
    return burst_generator(world::Voice::tone, d, dur, S, fps);
  });
  r.add_generator(GenTrack::sound, "noise-burst", [](const StructuredDescriptor& d, double dur, int S, double fps) {
    return burst_generator(world::Voice::noise_burst, d, dur, S, fps);
  });
  return r;
}

void Registry::add_separator(SepDomain d, const std::string& name, Separator s) {
  require(!seps_.count(d), "separator for domain " + to_string(d) + " registered twice");
  seps_[d] = {name, std::move(s)};
}

void Registry::add_generator(GenTrack t, const std::string& name, Generator g) {
  require(!gens_.count(t), "generator for track " + to_string(t) + " registered twice");
  gens_[t] = {name, std::move(g)};
}

void Registry::check_complete() const {
  for (auto d : {SepDomain::speech, SepDomain::non_speech})
    if (!seps_.count(d)) fail("no separator registered for domain ", to_string(d));
  for (auto t : {GenTrack::speech, GenTrack::music, GenTrack::sound})
    if (!gens_.count(t)) fail("no generator registered for track ", to_string(t));
}

const Separator& Registry::separator(SepDomain d) const {
  auto it = seps_.find(d);
  if (it == seps_.end()) fail("no separator registered for domain ", to_string(d));
  return it->second.second;
}

const Generator& Registry::generator(GenTrack t) const {
  auto it = gens_.find(t);
  if (it == gens_.end()) fail("no generator registered for track ", to_string(t));
  return it->second.second;
}

std::map<std::string, std::string> Registry::names() const {
  std::map<std::string, std::string> out;
  for (const auto& [d, v] : seps_) out["separate." + to_string(d)] = v.first;
  for (const auto& [t, v] : gens_) out["generate." + to_string(t)] = v.first;
  return out;
}

AudioTrack separate(const AudioTrack& a_orig, const StructuredDescriptor& c_sep, SepDomain domain,
                    const Registry& registry) {
  AudioTrack out = registry.separator(domain)(a_orig, c_sep);
  require(out.size() == a_orig.size(), "separator changed the track length");
  return out;
}

AudioTrack generate(const StructuredDescriptor& c_gen, GenTrack track, double duration, int sample_rate, double fps,
                    const Registry& registry) {
  if (c_gen.empty()) return AudioTrack(sample_rate, static_cast<std::size_t>(std::llround(duration * sample_rate)));
  return registry.generator(track)(c_gen, duration, sample_rate, fps);
}

AudioTrack remix(const AudioTrack& a_sep, const AudioTrack& a_gen, std::pair<double, double> gains) {
  require(a_sep.size() == a_gen.size(), "remix: track lengths differ");
  require(a_sep.sample_rate == a_gen.sample_rate, "remix: sample rates differ");
  AudioTrack out(a_sep.sample_rate, a_sep.size());
  float peak = 0.0f;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples[i] = static_cast<float>(gains.first * a_sep.samples[i] + gains.second * a_gen.samples[i]);
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  if (peak > 1.0f)
    for (auto& v : out.samples) v /= peak;
  return out;
}

std::vector<int> detect_onsets(const AudioTrack& a, int frames, double floor_ratio) {
  const std::size_t window = a.size() / static_cast<std::size_t>(frames);
  const auto r = spectral::frame_rms(a.samples, frames, window);
  const double floor = std::max(*std::min_element(r.begin(), r.end()), 1e-4);
  std::vector<int> out;
  for (int f = 0; f < frames; ++f)
    if (r[static_cast<std::size_t>(f)] > floor * floor_ratio) out.push_back(f);
  return out;
}

double onset_f1(const std::vector<int>& expected, const std::vector<int>& detected) {
  if (expected.empty() && detected.empty()) return 1.0;
  const std::set<int> e(expected.begin(), expected.end());
  int hit = 0;
  for (int d : detected) hit += e.count(d) ? 1 : 0;
  const double denom = static_cast<double>(expected.size() + detected.size());
  return denom > 0 ? 2.0 * hit / denom : 0.0;
}

Verdict judge(const AudioTrack& a_mix, const AgentPlan& plan, const world::SceneSample& scene,
              const world::TokenDescriptor& edit, int tau, const JudgeThresholds& th) {
  (void)edit;
  Verdict v;
  const int S = a_mix.sample_rate;
  const double fps = scene.spec.fps;
  const std::size_t n = a_mix.size();
  const int T = scene.spec.frames;
  require(n == scene.audio.size(), "judge: mix length differs from the scene audio");

  // separation accuracy
  std::vector<Component> removed;
  if (!plan.c_sep.keeps_all())
    for (const auto& c : plan.original)
      if (std::find(plan.c_gen.components.begin(), plan.c_gen.components.end(), c) == plan.c_gen.components.end() ||
          plan.c_gen.event_frames != plan.original_events)
        removed.push_back(c);
  const auto gen_spans = burst_spans(plan.c_gen.event_frames, S, fps, n);
  if (removed.empty()) {
    v.measures[0] = -200.0;
    v.scores[0] = 2;
  } else {
    StructuredDescriptor r;
    r.components = removed;
    // Generated content may share part of a removed band; only the rest is
    // scored. A removed band entirely under the generated one is scored
    // outside the generated windows instead.
    auto bands = band_difference(descriptor_bands(r, S), descriptor_bands(plan.c_gen, S));
    std::vector<std::pair<std::size_t, std::size_t>> span{{0, n}};
    if (bands.empty()) {
      bands = descriptor_bands(r, S);
      span = complement(gen_spans, n);
    }
    const double e_mix = energy(spectral::band_filter(a_mix.samples, S, bands), &span);
    const double e_orig = energy(spectral::band_filter(scene.audio.samples, S, bands), &span);
    v.measures[0] = e_orig > 1e-12 ? db(e_mix / e_orig) : -200.0;
    v.scores[0] = score3(v.measures[0] <= th.removed_db_two, v.measures[0] <= th.removed_db_one);
  }

  // generation accuracy: in-band dominance and level inside generated windows
  if (plan.c_gen.empty()) {
    v.measures[1] = 1.0;
    v.scores[1] = 2;
  } else {
    const auto in_band = spectral::band_filter(a_mix.samples, S, descriptor_bands(plan.c_gen, S));
    const double e_band = energy(in_band, &gen_spans);
    const double e_all = energy(a_mix.samples, &gen_spans);
    const double dominance = e_all > 0 ? e_band / e_all : 0.0;
    double ref = 0.0;
    for (const auto& c : plan.c_gen.components) {
      const auto burst = world::voice_burst(voice_of(c.kind), c.freq, S, 0);
      ref += world::kBurstGain * world::kBurstGain * energy(burst);
    }
    const std::size_t count = std::max<std::size_t>(1, gen_spans.size());
    const double level = ref > 0 ? std::sqrt(e_band / static_cast<double>(count) / ref) : 0.0;
    v.measures[1] = level;
    v.scores[1] = score3(dominance >= th.dominance_min && level >= th.level_two,
                         dominance >= th.dominance_min / 2 && level >= th.level_one);
  }

  // acoustic harmony
  std::size_t clipped = 0;
  float peak = 0.0f;
  for (float x : a_mix.samples) {
    clipped += std::abs(x) >= 0.999f ? 1 : 0;
    peak = std::max(peak, std::abs(x));
  }
  const double clip_frac = static_cast<double>(clipped) / static_cast<double>(std::max<std::size_t>(1, n));
  const double r = spectral::rms(a_mix.samples);
  const double crest = r > 0 ? peak / r : 0.0;
  v.measures[2] = clip_frac;
  v.scores[2] = score3(clip_frac <= th.clip_two && crest <= th.crest_max, clip_frac <= th.clip_one);

  // instruction adherence
  std::vector<int> expected = plan.c_gen.event_frames;
  if (plan.c_gen.empty() && plan.c_sep.keeps_all()) expected = plan.original_events;
  const double f1 = onset_f1(expected, detect_onsets(a_mix, T, th.onset_floor_ratio));
  v.measures[3] = f1;
  v.scores[3] = score3(f1 >= th.onset_f1_two, f1 >= th.onset_f1_one);

  // audio fidelity: declared bands vs everything else
  if (plan.c_sep.keeps_all()) {
    v.measures[4] = 200.0;
    v.scores[4] = 2;
  } else {
    auto bands = descriptor_bands(plan.c_sep, S);
    for (const auto& b : descriptor_bands(plan.c_gen, S)) bands.push_back(b);
    const double e_in = energy(spectral::band_filter(a_mix.samples, S, bands));
    const double e_out = std::max(0.0, energy(a_mix.samples) - e_in);
    v.measures[4] = e_out > 0 ? db(e_in / e_out) : 200.0;
    v.scores[4] = score3(v.measures[4] >= th.snr_two, v.measures[4] >= th.snr_one);
  }

  v.q = 0;
  for (int s : v.scores) v.q += s;
  v.accepted = v.q > tau;
  if (!v.accepted) {
    StructuredDescriptor sep = plan.c_sep, gen = plan.c_gen;
    if (v.scores[0] < 2 || v.scores[4] < 2) {
      sep.bandwidth *= 0.7;
      sep.stop_removed = true;
      sep.removed = removed;
    }
    if (!gen.empty() && (v.scores[1] < 2 || v.scores[3] < 2) && v.measures[1] < th.level_two)
      gen.gain = std::min(1.0, gen.gain * 2.0);
    if (v.scores[2] < 2) gen.gain *= 0.7;
    if (!gen.empty() && v.scores[3] < 2 && v.measures[1] >= th.level_two) {
      // Timing drifted: re-derive from the requested rule.
      gen.event_frames = expected;
    }
    v.feedback_sep = sep;
    v.feedback_gen = gen;
  }
  return v;
}

AgentTrace curate(const world::SceneSample& scene, const InstanceMask& coarse_mask, const world::TokenDescriptor& edit,
                  const Registry& registry, const CurateOptions& opt) {
  registry.check_complete();
  require(opt.max_iters >= 1, "max_iters must be at least 1");
  const StructuredDescriptor summary = caption(scene);
  AgentPlan current = plan(scene, coarse_mask, summary, edit, opt.mode);
  if (opt.initial_gain) current.c_gen.gain = *opt.initial_gain;
  const double duration = scene.audio.duration();
  AgentTrace trace;
  int best = -1, best_q = -1;
  for (int it = 0; it < opt.max_iters; ++it) {
    Iteration step;
    step.plan = current;
    try {
      step.a_sep = separate(scene.audio, current.c_sep, current.sep_domain, registry);
      step.a_gen = generate(current.c_gen, current.gen_track, duration, scene.audio.sample_rate, scene.spec.fps, registry);
      step.a_mix = remix(step.a_sep, step.a_gen);
      step.verdict = judge(step.a_mix, current, scene, edit, opt.tau, opt.thresholds);
    } catch (const ValidationError& e) {
      fail("agent iteration ", std::to_string(it + 1), ": ", e.what());
    }
    if (step.verdict.q > best_q) {
      best_q = step.verdict.q;
      best = it;
    }
    const bool accepted = step.verdict.accepted;
    if (!accepted) {
      current.c_sep = *step.verdict.feedback_sep;
      current.c_gen = *step.verdict.feedback_gen;
    }
    trace.iterations.push_back(std::move(step));
    if (accepted) {
      trace.accepted = true;
      best = it;
      break;
    }
  }
  trace.iteration_count = static_cast<int>(trace.iterations.size());
  trace.final_index = best;
  trace.final = trace.iterations[static_cast<std::size_t>(best)].a_mix;
  return trace;
}

nlohmann::json to_json_desc(const StructuredDescriptor& d) {
  nlohmann::json j;
  j["components"] = d.tokens();
  j["gain"] = d.gain;
  j["event_frames"] = d.event_frames;
  j["bandwidth"] = d.bandwidth;
  j["stop_removed"] = d.stop_removed;
  std::vector<std::string> removed;
  for (const auto& c : d.removed) removed.push_back(c.token());
  j["removed"] = removed;
  return j;
}

nlohmann::json to_json(const AgentPlan& p) {
  nlohmann::json j;
  j["c_sep"] = to_json_desc(p.c_sep);
  j["c_gen"] = to_json_desc(p.c_gen);
  j["sep_domain"] = to_string(p.sep_domain);
  j["gen_track"] = to_string(p.gen_track);
  std::vector<std::string> orig;
  for (const auto& c : p.original) orig.push_back(c.token());
  j["original"] = orig;
  j["original_events"] = p.original_events;
  return j;
}

nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j;
  for (int i = 0; i < kDimensions; ++i) {
    j["scores"][kDimensionNames[static_cast<std::size_t>(i)]] = v.scores[static_cast<std::size_t>(i)];
    j["measures"][kDimensionNames[static_cast<std::size_t>(i)]] = v.measures[static_cast<std::size_t>(i)];
  }
  j["q"] = v.q;
  j["accepted"] = v.accepted;
  if (v.feedback_sep) j["feedback"]["c_sep"] = to_json_desc(*v.feedback_sep);
  if (v.feedback_gen) j["feedback"]["c_gen"] = to_json_desc(*v.feedback_gen);
  return j;
}

nlohmann::json trace_to_json(const AgentTrace& t, const Registry& registry) {
  nlohmann::json j;
  j["registry"] = registry.names();
  j["iteration_count"] = t.iteration_count;
  j["final_index"] = t.final_index;
  j["accepted"] = t.accepted;
  j["iterations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.iterations.size(); ++i) {
    const auto& it = t.iterations[i];
    nlohmann::json e;
    e["plan"] = to_json(it.plan);
    e["verdict"] = to_json(it.verdict);
    const std::string base = "iter" + std::to_string(i + 1) + "_";
    e["audio"] = {{"sep", base + "sep.avk"}, {"gen", base + "gen.avk"}, {"mix", base + "mix.avk"}};
    j["iterations"].push_back(e);
  }
  j["final_audio"] = "final_audio.avk";
  return j;
}

}  // namespace avi::agent
