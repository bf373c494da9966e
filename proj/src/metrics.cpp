#include "avi/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "avi/codec.hpp"
#include "avi/spectral.hpp"

namespace avi::metrics {

namespace {

double iou_values(const std::vector<float>& a, const std::vector<float>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] >= 0.5f, y = b[i] >= 0.5f;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Stats {
  double mean = 0.0, stddev = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
  return s;
}

}  // namespace

double iou(const InstanceMask& a, const InstanceMask& b) {
  require(a.same_shape(b), "iou: mask shapes differ");
  return iou_values(a.data, b.data);
}

double iou(const LatentMask& a, const LatentMask& b) {
  require(a.same_shape(b), "iou: mask shapes differ");
  return iou_values(a.data, b.data);
}

std::vector<double> pooled_embedding(const VideoClip& v, int frame, bool centered) {
  constexpr int G = 8;
  std::vector<double> e(static_cast<std::size_t>(G * G * v.channels), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(G * G), 0);
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      const int cell = (y * G / v.height) * G + (x * G / v.width);
      counts[static_cast<std::size_t>(cell)] += 1;
      for (int c = 0; c < v.channels; ++c) e[static_cast<std::size_t>(cell * v.channels + c)] += v.at(frame, y, x, c);
    }
  for (int cell = 0; cell < G * G; ++cell)
    for (int c = 0; c < v.channels; ++c) {
      auto& val = e[static_cast<std::size_t>(cell * v.channels + c)];
      const int n = counts[static_cast<std::size_t>(cell)];
      val = n ? val / n : 0.0;
      if (centered) val -= 0.5;
    }
  return e;
}

Embedder pooled_embedder(bool centered) {
  return [centered](const VideoClip& v, int f) { return pooled_embedding(v, f, centered); };
}

ConsistencyResult frame_consistency_detail(const VideoClip& video, const Embedder& embedder) {
  require(video.frames >= 2, "frame consistency needs at least two frames");
  ConsistencyResult r;
  double total = 0.0;
  int pairs = 0;
  std::vector<double> prev = embedder(video, 0);
  for (int f = 1; f < video.frames; ++f) {
    std::vector<double> cur = embedder(video, f);
    require(cur.size() == prev.size(), "embedder returned vectors of different sizes");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      dot += prev[i] * cur[i];
      na += prev[i] * prev[i];
      nb += cur[i] * cur[i];
    }
    if (na == 0.0 || nb == 0.0) {
      ++r.skipped;
      std::cerr << "warning: frame consistency skipped zero-norm pair " << f - 1 << "," << f << "\n";
    } else {
      total += dot / std::sqrt(na * nb);
      ++pairs;
    }
    prev = std::move(cur);
  }
  r.value = pairs ? total / pairs : 0.0;
  return r;
}

double frame_consistency(const VideoClip& video, const Embedder& embedder) {
  return frame_consistency_detail(video, embedder).value;
}

double background_error(const VideoClip& edited, const VideoClip& original, const InstanceMask& mask, int patch) {
  require(edited.same_shape(original), "background error: video shapes differ");
  require(mask.frames == edited.frames && mask.height == edited.height && mask.width == edited.width,
          "background error: mask shape differs from video");
  const InstanceMask region = codec::upsample_mask(codec::downsample_mask(mask, patch), patch);
  double err = 0.0;
  for (int f = 0; f < edited.frames; ++f)
    for (int y = 0; y < edited.height; ++y)
      for (int x = 0; x < edited.width; ++x) {
        if (region.at(f, y, x) != 0.0f) continue;
        for (int c = 0; c < edited.channels; ++c)
          err = std::max(err, static_cast<double>(std::abs(edited.at(f, y, x, c) - original.at(f, y, x, c))));
      }
  return err;
}

std::vector<double> audio_envelope(const AudioTrack& audio, int frames) {
  return spectral::frame_rms(audio.samples, frames, audio.size() / static_cast<std::size_t>(frames));
}

std::vector<double> motion_energy(const VideoClip& video, const InstanceMask& mask) {
  // Frame f holds the change from f-1 to f, so a flash at f lands on f.
  std::vector<double> e(static_cast<std::size_t>(video.frames), 0.0);
  for (int f = 1; f < video.frames; ++f) {
    double acc = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < video.height; ++y)
      for (int x = 0; x < video.width; ++x) {
        if (mask.at(f, y, x) < 0.5f && mask.at(f - 1, y, x) < 0.5f) continue;
        for (int c = 0; c < video.channels; ++c) acc += std::abs(video.at(f, y, x, c) - video.at(f - 1, y, x, c));
        n += static_cast<std::size_t>(video.channels);
      }
    e[static_cast<std::size_t>(f)] = n ? acc / static_cast<double>(n) : 0.0;
  }
  return e;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b, bool* degenerate) {
  require(a.size() == b.size() && !a.empty(), "pearson: series lengths differ");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  const double tiny = 1e-12;
  if (saa <= tiny * n || sbb <= tiny * n) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  return sab / std::sqrt(saa * sbb);
}

SyncResult sync_proxy_detail(const VideoClip& video, const AudioTrack& audio, const InstanceMask& mask) {
  const double vid = video.frames / video.fps, aud = audio.duration();
  require(std::abs(vid - aud) < 1e-6, "sync proxy: audio and video durations differ");
  SyncResult r;
  // Frame 0 has no predecessor, so both series start at frame 1.
  auto motion = motion_energy(video, mask);
  auto env = audio_envelope(audio, video.frames);
  require(video.frames >= 3, "sync proxy needs at least 3 frames");
  motion.erase(motion.begin());
  env.erase(env.begin());
  r.value = pearson(motion, env, &r.degenerate);
  return r;
}

double sync_proxy(const VideoClip& video, const AudioTrack& audio, const InstanceMask& mask) {
  return sync_proxy_detail(video, audio, mask).value;
}

nlohmann::json MetricReport::to_json() const {
  require(!rows.empty(), "metric report needs at least one clip");
  nlohmann::json j;
  j["clips"] = nlohmann::json::array();
  std::vector<double> iou_v, fc_v, bg_v, sync_v;
  for (const auto& r : rows) {
    for (double x : {r.iou, r.fc, r.bg_err, r.sync_proxy})
      if (!std::isfinite(x)) fail("metric report: non-finite value for clip ", r.clip);
    j["clips"].push_back({{"clip", r.clip}, {"iou", r.iou}, {"fc", r.fc}, {"bg_err", r.bg_err}, {"sync_proxy", r.sync_proxy}});
    iou_v.push_back(r.iou);
    fc_v.push_back(r.fc);
    bg_v.push_back(r.bg_err);
    sync_v.push_back(r.sync_proxy);
  }
  auto agg = [](const std::vector<double>& v) {
    const auto s = stats(v);
    return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}};
  };
  j["aggregate"] = {{"iou", agg(iou_v)}, {"fc", agg(fc_v)}, {"bg_err", agg(bg_v)}, {"sync_proxy", agg(sync_v)},
                    {"clips", rows.size()}};
  const char* reason = "requires a pretrained network that is not available at desk scale";
  for (const char* k : {"fvd", "is", "tc", "ac", "sync_c", "sync_d"}) {
    j["reserved"][k] = nullptr;
  }
  j["reserved_reason"] = reason;
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%.9g\n", r.clip.c_str(), r.iou, r.fc, r.bg_err, r.sync_proxy);
    out << buf;
  }
  return out.str();
}

}  // namespace avi::metrics
