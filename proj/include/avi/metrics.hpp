#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avi/types.hpp"

namespace avi::metrics {

double iou(const InstanceMask& a, const InstanceMask& b);
double iou(const LatentMask& a, const LatentMask& b);

using Embedder = std::function<std::vector<double>(const VideoClip&, int frame)>;
// 8 x 8 mean-pooled pixels (per channel), flattened.
std::vector<double> pooled_embedding(const VideoClip& v, int frame, bool centered);
Embedder pooled_embedder(bool centered = false);

struct ConsistencyResult {
  double value = 0.0;
  int skipped = 0;  // zero-norm pairs
};
ConsistencyResult frame_consistency_detail(const VideoClip& video, const Embedder& embedder);
double frame_consistency(const VideoClip& video, const Embedder& embedder = pooled_embedder());

double background_error(const VideoClip& edited, const VideoClip& original, const InstanceMask& mask, int patch = 2);

struct SyncResult {
  double value = 0.0;
  bool degenerate = false;  // a constant series, value forced to 0
};
SyncResult sync_proxy_detail(const VideoClip& video, const AudioTrack& audio, const InstanceMask& mask);
double sync_proxy(const VideoClip& video, const AudioTrack& audio, const InstanceMask& mask);

// Per-frame audio RMS envelope and per-frame masked motion energy.
std::vector<double> audio_envelope(const AudioTrack& audio, int frames);
std::vector<double> motion_energy(const VideoClip& video, const InstanceMask& mask);
double pearson(const std::vector<double>& a, const std::vector<double>& b, bool* degenerate = nullptr);

struct ClipRow {
  std::string clip;
  double iou = 0.0;
  double fc = 0.0;
  double bg_err = 0.0;
  double sync_proxy = 0.0;
};

struct MetricReport {
  std::vector<ClipRow> rows;

  void add(ClipRow r) { rows.push_back(std::move(r)); }
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

inline constexpr const char* kCsvHeader = "clip,iou,fc,bg_err,sync_proxy";

}  // namespace avi::metrics
