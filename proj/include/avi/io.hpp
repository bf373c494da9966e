#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avi/types.hpp"
#include "avi/world.hpp"

namespace avi::io {

enum class DType : std::uint8_t { f32 = 0, u8 = 1 };

struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::size_t elements() const;
};

std::uint32_t crc32(const std::uint8_t* data, std::size_t n);
std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data, std::size_t n);

std::vector<std::uint8_t> encode_avk(const Tensor& t);
Tensor decode_avk(const std::vector<std::uint8_t>& bytes, const std::string& what = "tensor");

void save_avk(const std::filesystem::path& path, const Tensor& t);
Tensor load_avk(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

Tensor from_video(const VideoClip& v);
Tensor from_audio(const AudioTrack& a);
Tensor from_mask(const InstanceMask& m);
Tensor from_latent_mask(const LatentMask& m);
VideoClip to_video(const Tensor& t, double fps);
AudioTrack to_audio(const Tensor& t, int sample_rate);
InstanceMask to_mask(const Tensor& t);
LatentMask to_latent_mask(const Tensor& t);

// PCM16 little-endian mono.
void save_wav(const std::filesystem::path& path, const AudioTrack& a);
AudioTrack load_wav(const std::filesystem::path& path);
// One P5 file per frame: <stem>_<frame>.pgm.
void save_pgm_frames(const std::filesystem::path& dir, const std::string& stem, const InstanceMask& m);

// Scene directory: video.avk, audio.avk, mask.avk, manifest.json.
void save_scene(const std::filesystem::path& dir, const world::SceneSample& s, bool wav = false);
world::SceneSample load_scene(const std::filesystem::path& dir);

}  // namespace avi::io
