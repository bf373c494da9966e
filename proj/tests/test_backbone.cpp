#include <doctest.h>

#include <cmath>

#include "avi/backbone.hpp"
#include "avi/codec.hpp"
#include "avi/rng.hpp"
#include "avi/world.hpp"

using namespace avi;
using namespace avi::model;

namespace {

BackboneConfig tiny() {
  BackboneConfig c;
  c.model_dim = 16;
  c.heads = 2;
  c.blocks = 2;
  c.audio_bands = 4;
  return c;
}

struct Inputs {
  LatentGrid z;
  LatentMask m;
  ConditionBundle conds;
};

Inputs inputs(int frames, int hw, std::uint64_t seed) {
  Inputs in;
  VideoClip v(frames, hw, hw, 3, 8.0);
  Rng r(seed);
  for (auto& x : v.data) x = static_cast<float>(r.uniform());
  in.z = codec::encode(v, 2);
  in.m = LatentMask(in.z.frames, in.z.h, in.z.w, 0.0f);
  for (std::size_t i = 0; i < in.m.data.size(); i += 2) in.m.data[i] = 1.0f;
  in.conds.text = world::TokenDescriptor::parse("color:red shape:circle traj:bounce");
  in.conds.audio = AudioTokens(frames, 4);
  for (auto& x : in.conds.audio.data) x = static_cast<float>(r.uniform());
  return in;
}

// Perturbs every block modulation so no sublayer is gated off.
void wake(Backbone& b, std::uint64_t seed) {
  Rng r(seed);
  for (auto& p : b.params().all())
    if (p.name.find(".mod.") != std::string::npos)
      for (auto& x : p.value) x = static_cast<float>(0.3 * r.normal());
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
  for (int blocks : {1, 2, 4}) {
    auto c = tiny();
    c.blocks = blocks;
    const Backbone b(c, 3);
    CHECK(b.count_parameters() == Backbone::expected_count(c));
  }
  // default desk configuration
  const BackboneConfig d;
  CHECK(Backbone(d, 1).count_parameters() == Backbone::expected_count(d));
}

TEST_CASE("blocks are identity at init so conditions do not reach the output") {
  const Backbone b(tiny(), 5);
  auto in = inputs(2, 8, 1);
  const auto v1 = b.velocity(in.z, 0.3, in.m, in.conds);
  in.conds.text = world::TokenDescriptor::parse("color:blue");
  for (auto& x : in.conds.audio.data) x += 1.0f;
  const auto v2 = b.velocity(in.z, 0.3, in.m, in.conds);
  CHECK(v1.data == v2.data);
}

TEST_CASE("text and audio matter once modulation is non-zero") {
  Backbone b(tiny(), 5);
  wake(b, 11);
  auto in = inputs(2, 8, 1);
  const auto v1 = b.velocity(in.z, 0.3, in.m, in.conds);
  auto text = in.conds;
  text.text = world::TokenDescriptor::parse("color:blue");
  auto audio = in.conds;
  for (auto& x : audio.audio.data) x += 1.0f;
  CHECK(b.velocity(in.z, 0.3, in.m, text).data != v1.data);
  CHECK(b.velocity(in.z, 0.3, in.m, audio).data != v1.data);
}

TEST_CASE("audio attention is frame-local and clamps at the edges") {
  const auto l = audio_layout(4, 1);
  CHECK(l.frame_ids == std::vector<int>{0, 0, 1, 0, 1, 2, 1, 2, 3, 2, 3, 3});
  CHECK(l.frame_ranges[0].begin == 1);
  CHECK(l.frame_ranges[0].end == 3);
  CHECK(l.frame_ranges[1].begin == 3);
  CHECK(l.frame_ranges[1].end == 6);
  CHECK(l.frame_ranges[3].end == 11);
  const auto r = audio_ranges(l, 4, 2, 3);
  CHECK(r.size() == 11);
  CHECK(r[2].begin == 3);
  CHECK(r[10].begin == r[10].end);
}

TEST_CASE("audio of one frame only changes that frame's velocity") {
  auto c = tiny();
  c.audio_window = 0;
  // self-attention mixes frames, so keep one block to stay local
  c.blocks = 1;
  auto in = inputs(3, 8, 2);
  in.m = LatentMask(in.z.frames, in.z.h, in.z.w, 1.0f);
  Backbone one(c, 5);
  wake(one, 12);
  const auto a = one.velocity(in.z, 0.5, in.m, in.conds);
  auto moved = in.conds;
  for (int k = 0; k < 4; ++k) moved.audio.at(2, k) += 2.0f;
  const auto bb = one.velocity(in.z, 0.5, in.m, moved);
  const std::size_t per = static_cast<std::size_t>(in.z.h) * in.z.w * in.z.dim;
  // audio enters after self-attention, frames 0,1 stay put
  for (std::size_t i = 0; i < 2 * per; ++i) CHECK(a.data[i] == bb.data[i]);
  bool changed = false;
  for (std::size_t i = 2 * per; i < 3 * per; ++i) changed |= a.data[i] != bb.data[i];
  CHECK(changed);
}

TEST_CASE("gradients match finite differences on random parameters") {
  Backbone b(tiny(), 8);
  wake(b, 13);
  auto in = inputs(2, 8, 3);
  in.conds.unmasked_frames = {1};
  Rng pick(99);
  LatentGrid target = in.z;
  for (auto& x : target.data) x = static_cast<float>(pick.normal());
  auto loss = [&](bool grad) {
    nn::Graph<double> g(&b.params());
    const auto out = b.build(g, in.z, 0.4, in.m, in.conds);
    nn::Mat<double> tgt = latent_rows(target).cast<double>();
    const auto l = g.mse(out, tgt);
    if (grad) g.backward(l);
    return g.scalar(l);
  };
  b.params().zero_grad();
  loss(true);
  auto& all = b.params().all();
  int checked = 0;
  for (int n = 0; n < 5; ++n) {
    auto& p = all[static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(all.size()) - 1))];
    const std::size_t i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<int>(p.size()) - 1));
    const float keep = p.value[i];
    p.value[i] = keep + 1e-2f;
    const double hi = p.value[i], lp = loss(false);
    p.value[i] = keep - 1e-2f;
    const double lo = p.value[i], lm = loss(false);
    p.value[i] = keep;
    const double fd = (lp - lm) / (hi - lo);
    const double rel = std::abs(fd - p.grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(p.grad[i]));
    INFO(p.name, "[", i, "] fd=", fd, " analytic=", p.grad[i]);
    CHECK((rel < 1e-3 || std::abs(fd - p.grad[i]) < 1e-8));
    ++checked;
  }
  CHECK(checked == 5);
}

TEST_CASE("shape and vocabulary errors are named") {
  const Backbone b(tiny(), 1);
  auto in = inputs(2, 8, 4);
  auto bad = in.conds;
  bad.audio = AudioTokens(3, 4);
  CHECK_THROWS_WITH_AS(b.velocity(in.z, 0.1, in.m, bad), doctest::Contains("audio token count"), ValidationError);
  LatentMask m(1, 4, 4);
  CHECK_THROWS_WITH_AS(b.velocity(in.z, 0.1, m, in.conds), doctest::Contains("mask does not match"), ValidationError);
  auto c = tiny();
  c.heads = 3;
  CHECK_THROWS_AS(Backbone(c, 1), ValidationError);
}

TEST_CASE("audio tokens are log band energies per frame") {
  AudioTrack a(8000, 4000);
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = i < 2000 ? 0.0f : static_cast<float>(0.5 * std::sin(2 * M_PI * 500.0 * i / 8000.0));
  const auto tok = encode_audio(a, 4, 8.0, 16);
  CHECK(tok.frames == 4);
  for (int b = 0; b < 16; ++b) CHECK(tok.at(0, b) == 0.0f);
  float best = 0;
  for (int b = 0; b < 16; ++b) best = std::max(best, tok.at(3, b));
  CHECK(best > 1.0f);
  CHECK_THROWS_AS(encode_audio(a, 5, 8.0, 16), ValidationError);
}
