#include "avi/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace avi::io {

namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

Tensor f32_tensor(std::vector<std::uint32_t> dims, const std::vector<float>& data) {
  Tensor t;
  t.dims = std::move(dims);
  t.f32 = data;
  return t;
}

void expect_dims(const Tensor& t, std::size_t n, const char* what) {
  if (t.dims.size() != n || t.dtype != DType::f32)
    fail(what, ": expected a float tensor with ", std::to_string(n), " dims");
}

}  // namespace

std::size_t Tensor::elements() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(::crc32(c, data, static_cast<uInt>(n)));
}

std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(crc, data, static_cast<uInt>(n)));
}

std::vector<std::uint8_t> encode_avk(const Tensor& t) {
  require(t.dims.size() <= 255, "AVK1 supports at most 255 dims");
  const std::size_t n = t.elements();
  if (t.dtype == DType::f32) require(t.f32.size() == n, "AVK1: payload does not match dims");
  else require(t.u8.size() == n, "AVK1: payload does not match dims");
  std::vector<std::uint8_t> out{'A', 'V', 'K', '1', static_cast<std::uint8_t>(t.dtype),
                                static_cast<std::uint8_t>(t.dims.size())};
  for (auto d : t.dims) put_u32(out, d);
  const std::size_t start = out.size();
  if (t.dtype == DType::f32) {
    for (float f : t.f32) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  } else {
    out.insert(out.end(), t.u8.begin(), t.u8.end());
  }
  put_u32(out, crc32(out.data() + start, out.size() - start));
  return out;
}

Tensor decode_avk(const std::vector<std::uint8_t>& b, const std::string& what) {
  if (b.size() < 4 || std::memcmp(b.data(), "AVK1", 4) != 0) fail(what, ": not an AVK1 file (bad magic)");
  if (b.size() < 10) fail(what, ": truncated AVK1 header");
  Tensor t;
  if (b[4] > 1) fail(what, ": unknown AVK1 dtype ", std::to_string(b[4]));
  t.dtype = static_cast<DType>(b[4]);
  const std::size_t ndim = b[5];
  std::size_t at = 6;
  if (b.size() < at + 4 * ndim + 4) fail(what, ": truncated AVK1 header");
  for (std::size_t i = 0; i < ndim; ++i, at += 4) t.dims.push_back(get_u32(b, at));
  const std::size_t n = t.elements();
  const std::size_t width = t.dtype == DType::f32 ? 4 : 1;
  if (b.size() != at + n * width + 4) fail(what, ": AVK1 payload length does not match dims");
  const std::uint32_t stored = get_u32(b, at + n * width);
  if (crc32(b.data() + at, n * width) != stored) fail(what, ": AVK1 checksum mismatch (corrupt file)");
  if (t.dtype == DType::f32) {
    t.f32.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(b, at + 4 * i);
      std::memcpy(&t.f32[i], &bits, 4);
    }
  } else {
    t.u8.assign(b.begin() + static_cast<std::ptrdiff_t>(at), b.begin() + static_cast<std::ptrdiff_t>(at + n));
  }
  return t;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open ", path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write ", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void save_avk(const fs::path& path, const Tensor& t) { write_bytes(path, encode_avk(t)); }

Tensor load_avk(const fs::path& path) { return decode_avk(read_bytes(path), path.string()); }

Tensor from_video(const VideoClip& v) {
  return f32_tensor({static_cast<std::uint32_t>(v.frames), static_cast<std::uint32_t>(v.height),
                     static_cast<std::uint32_t>(v.width), static_cast<std::uint32_t>(v.channels)},
                    v.data);
}

Tensor from_audio(const AudioTrack& a) { return f32_tensor({static_cast<std::uint32_t>(a.size())}, a.samples); }

Tensor from_mask(const InstanceMask& m) {
  return f32_tensor({static_cast<std::uint32_t>(m.frames), static_cast<std::uint32_t>(m.height),
                     static_cast<std::uint32_t>(m.width)},
                    m.data);
}

Tensor from_latent_mask(const LatentMask& m) {
  return f32_tensor({static_cast<std::uint32_t>(m.frames), static_cast<std::uint32_t>(m.h),
                     static_cast<std::uint32_t>(m.w)},
                    m.data);
}

VideoClip to_video(const Tensor& t, double fps) {
  expect_dims(t, 4, "video");
  VideoClip v(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
              static_cast<int>(t.dims[3]), fps);
  v.data = t.f32;
  return v;
}

AudioTrack to_audio(const Tensor& t, int sample_rate) {
  expect_dims(t, 1, "audio");
  AudioTrack a(sample_rate, 0);
  a.samples = t.f32;
  return a;
}

InstanceMask to_mask(const Tensor& t) {
  expect_dims(t, 3, "mask");
  InstanceMask m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
  m.data = t.f32;
  return m;
}

LatentMask to_latent_mask(const Tensor& t) {
  expect_dims(t, 3, "latent mask");
  LatentMask m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
  m.data = t.f32;
  return m;
}

void save_wav(const fs::path& path, const AudioTrack& a) {
  std::vector<std::uint8_t> out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(a.size() * 2);
  for (char c : std::string("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(a.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(a.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, data_bytes);
  for (float s : a.samples) {
    const long v = std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  write_bytes(path, out);
}

AudioTrack load_wav(const fs::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < 44 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    fail(path.string(), ": not a RIFF/WAVE file");
  std::size_t at = 12;
  int rate = 0, channels = 0, bits = 0;
  while (at + 8 <= b.size()) {
    const std::string id(b.begin() + static_cast<std::ptrdiff_t>(at), b.begin() + static_cast<std::ptrdiff_t>(at + 4));
    const std::uint32_t len = get_u32(b, at + 4);
    at += 8;
    if (id == "fmt ") {
      channels = get_u16(b, at + 2);
      rate = static_cast<int>(get_u32(b, at + 4));
      bits = get_u16(b, at + 14);
    } else if (id == "data") {
      if (channels != 1 || bits != 16) fail(path.string(), ": only mono PCM16 is supported");
      AudioTrack a(rate, len / 2);
      for (std::size_t i = 0; i < a.size(); ++i)
        a.samples[i] = static_cast<float>(static_cast<std::int16_t>(get_u16(b, at + 2 * i))) / 32767.0f;
      return a;
    }
    at += len + (len & 1);
  }
  fail(path.string(), ": no data chunk");
}

void save_pgm_frames(const fs::path& dir, const std::string& stem, const InstanceMask& m) {
  fs::create_directories(dir);
  for (int f = 0; f < m.frames; ++f) {
    std::string header = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(m.at(f, y, x), 0.0f, 1.0f) * 255.0f)));
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03d.pgm", stem.c_str(), f);
    write_bytes(dir / name, out);
  }
}

void save_scene(const fs::path& dir, const world::SceneSample& s, bool wav) {
  fs::create_directories(dir);
  save_avk(dir / "video.avk", from_video(s.video));
  save_avk(dir / "audio.avk", from_audio(s.audio));
  save_avk(dir / "mask.avk", from_mask(s.mask));
  nlohmann::json j;
  j["spec"] = s.spec;
  j["descriptor"] = s.descriptor.tokens;
  j["event_times"] = s.event_times;
  j["sample_rate"] = s.audio.sample_rate;
  j["fps"] = s.video.fps;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  if (wav) save_wav(dir / "audio.wav", s.audio);
}

world::SceneSample load_scene(const fs::path& dir) {
  const auto j = nlohmann::json::parse(read_text(dir / "manifest.json"));
  world::SceneSample s;
  s.spec = j.at("spec").get<world::SceneSpec>();
  s.descriptor.tokens = j.at("descriptor").get<std::vector<std::string>>();
  s.event_times = j.at("event_times").get<std::vector<int>>();
  const double fps = j.at("fps").get<double>();
  const int rate = j.at("sample_rate").get<int>();
  s.video = to_video(load_avk(dir / "video.avk"), fps);
  s.audio = to_audio(load_avk(dir / "audio.avk"), rate);
  s.mask = to_mask(load_avk(dir / "mask.avk"));
  // Stems are not persisted; regenerate them from the spec when needed.
  const world::SceneSample fresh = world::generate_scene(s.spec);
  s.stems = fresh.stems;
  return s;
}

}  // namespace avi::io
