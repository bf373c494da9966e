#include <doctest.h>

#include <cstring>
#include <cmath>
#include <filesystem>

#include <zlib.h>

#include "avi/io.hpp"
#include "avi/world.hpp"

using namespace avi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avi_test_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("crc32 agrees with zlib in one shot and in pieces") {
  const std::string s = "The quick brown fox";
  const auto* d = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto ref = static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), s.size()));
  CHECK(io::crc32(d, s.size()) == ref);
  CHECK(io::crc32_update(io::crc32(d, 4), d + 4, s.size() - 4) == ref);
  CHECK(io::crc32(reinterpret_cast<const std::uint8_t*>("123456789"), 9) == 0xCBF43926u);
}

TEST_CASE("avk layout and round-trip") {
  io::Tensor t;
  t.dtype = io::DType::f32;
  t.dims = {2, 3};
  t.f32 = {0, 1, 2, 3, 4, -5.5f};
  const auto bytes = io::encode_avk(t);
  REQUIRE(bytes.size() == 4 + 2 + 2 * 4 + 6 * 4 + 4);
  CHECK(std::memcmp(bytes.data(), "AVK1", 4) == 0);
  CHECK(bytes[4] == 0);
  CHECK(bytes[5] == 2);
  CHECK(bytes[6] == 2);
  CHECK(bytes[10] == 3);
  const auto back = io::decode_avk(bytes);
  CHECK(back.dims == t.dims);
  CHECK(back.f32 == t.f32);

  io::Tensor u;
  u.dtype = io::DType::u8;
  u.dims = {5};
  u.u8 = {1, 2, 3, 250, 0};
  CHECK(io::decode_avk(io::encode_avk(u)).u8 == u.u8);
}

TEST_CASE("corrupt avk files are rejected with a reason") {
  io::Tensor t;
  t.dims = {4};
  t.f32 = {1, 2, 3, 4};
  auto bytes = io::encode_avk(t);
  auto flipped = bytes;
  flipped[14] ^= 0x40;
  CHECK_THROWS_WITH_AS(io::decode_avk(flipped), doctest::Contains("checksum mismatch"), ValidationError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(io::decode_avk(magic), doctest::Contains("bad magic"), ValidationError);
  auto dtype = bytes;
  dtype[4] = 9;
  CHECK_THROWS_WITH_AS(io::decode_avk(dtype), doctest::Contains("unknown AVK1 dtype"), ValidationError);
  CHECK_THROWS_WITH_AS(io::decode_avk({'A', 'V', 'K', '1', 0, 1, 4}), doctest::Contains("truncated"), ValidationError);
  bytes.pop_back();
  CHECK_THROWS_AS(io::decode_avk(bytes), ValidationError);
}

TEST_CASE("files, converters and wav") {
  const auto dir = scratch("files");
  VideoClip v(2, 4, 4, 3, 8.0);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i % 7) / 7.0f;
  io::save_avk(dir / "sub" / "v.avk", io::from_video(v));
  const auto back = io::to_video(io::load_avk(dir / "sub" / "v.avk"), 8.0);
  CHECK(back.same_shape(v));
  CHECK(back.data == v.data);
  CHECK_THROWS_AS(io::to_audio(io::from_video(v), 8000), ValidationError);
  CHECK_THROWS_AS(io::load_avk(dir / "missing.avk"), ValidationError);

  AudioTrack a(8000, 800);
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = static_cast<float>(std::sin(0.05 * i)) * 0.8f;
  io::save_wav(dir / "a.wav", a);
  const auto w = io::load_wav(dir / "a.wav");
  CHECK(w.sample_rate == 8000);
  REQUIRE(w.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(w.samples[i] - a.samples[i]) <= 1.0f / 32767.0f);

  InstanceMask m(3, 2, 2, 1.0f);
  io::save_pgm_frames(dir / "pgm", "mask", m);
  CHECK(fs::exists(dir / "pgm" / "mask_002.pgm"));
  fs::remove_all(dir);
}

TEST_CASE("scene directory round-trip regenerates stems") {
  const auto dir = scratch("scene");
  const auto s = world::generate_scene(world::sample_scene_spec(12, world::WorldScale{8, 16, 16, 8.0, 8000}));
  io::save_scene(dir, s, true);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "audio.wav"));
  const auto r = io::load_scene(dir);
  CHECK(r.video.data == s.video.data);
  CHECK(r.audio.samples == s.audio.samples);
  CHECK(r.mask.data == s.mask.data);
  CHECK(r.descriptor == s.descriptor);
  CHECK(r.event_times == s.event_times);
  CHECK(r.stems.instance.samples == s.stems.instance.samples);
  fs::remove_all(dir);
}
