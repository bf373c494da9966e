#include <doctest.h>

#include <cmath>

#include "avi/agent.hpp"
#include "avi/spectral.hpp"
#include "avi/world.hpp"

using namespace avi;
using namespace avi::agent;

namespace {

world::SceneSample scene(std::uint64_t seed) {
  return world::generate_scene(world::sample_scene_spec(seed, world::WorldScale{8, 16, 16, 8.0, 8000}));
}

// A frequency edit well away from the scene's own voice.
world::TokenDescriptor far_freq(const world::SceneSample& s) {
  const double f = s.spec.sounding().base_freq;
  return world::TokenDescriptor::parse(f < 600 ? "freq:1320" : "freq:330");
}

}  // namespace

TEST_CASE("component tokens round-trip and unknown classes fail") {
  CHECK(Component::parse("tone:440") == Component{"tone", 440.0});
  CHECK(Component::parse("tone:440").token() == "tone:440");
  CHECK(Component::parse("all").token() == "all");
  CHECK_THROWS_AS(Component::parse("whistle:440"), ValidationError);
  CHECK_THROWS_AS(Component::parse("tone"), ValidationError);
}

TEST_CASE("nominal bands") {
  const auto t = component_band({"tone", 440.0}, 1.0, 8000);
  CHECK(t.lo_hz == doctest::Approx(396.0));
  CHECK(t.hi_hz == doctest::Approx(484.0));
  const auto h = component_band({"hum", 60.0}, 2.0, 8000);
  CHECK(h.lo_hz == doctest::Approx(30.0));
  CHECK(h.hi_hz == doctest::Approx(90.0));
  const auto n = component_band({"noise", 3800.0}, 1.0, 8000);
  CHECK(n.hi_hz == doctest::Approx(4000.0));
}

TEST_CASE("band difference") {
  using spectral::Band;
  auto d = band_difference({{100, 500}}, {{200, 300}});
  REQUIRE(d.size() == 2);
  CHECK(d[0].lo_hz == 100);
  CHECK(d[0].hi_hz == 200);
  CHECK(d[1].lo_hz == 300);
  CHECK(d[1].hi_hz == 500);
  d = band_difference({{100, 500}}, {{400, 900}});
  REQUIRE(d.size() == 1);
  CHECK(d[0].hi_hz == 400);
  CHECK(band_difference({{100, 500}}, {{50, 600}}).empty());
  CHECK(band_difference({{100, 500}, {700, 800}}, {{600, 650}}).size() == 2);
  CHECK(band_difference({{100, 500}}, {}).size() == 1);
}

TEST_CASE("caption finds the hum and the event frames") {
  const auto s = scene(3);
  const auto c = caption(s);
  REQUIRE(!c.components.empty());
  CHECK(c.components[0].kind == "hum");
  CHECK(c.components[0].freq == doctest::Approx(s.spec.background.hum_freq).epsilon(0.02));
  CHECK(c.event_frames == s.event_times);
}

TEST_CASE("plans by mode") {
  const auto s = scene(4);
  const auto summary = caption(s);
  const auto freq = plan(s, s.mask, summary, far_freq(s));
  CHECK(freq.c_sep.components.size() == 1);
  CHECK(freq.c_sep.components[0].kind == "hum");
  REQUIRE(freq.c_gen.components.size() == 1);
  CHECK(freq.c_gen.components[0].freq == doctest::Approx(world::frequency_token_value(far_freq(s).tokens[0])));
  CHECK(freq.c_gen.event_frames == s.event_times);

  const auto visual = plan(s, s.mask, summary, world::TokenDescriptor::parse("color:blue"));
  CHECK(visual.c_sep.keeps_all());
  CHECK(visual.c_gen.empty());

  const auto removal = plan(s, s.mask, summary, world::TokenDescriptor::parse("instance:none"), PlanMode::remove);
  CHECK(!removal.c_sep.keeps_all());
  CHECK(removal.c_gen.empty());
  CHECK(removal.c_sep.removed == removal.original);

  CHECK_THROWS_AS(plan(s, InstanceMask(3, 16, 16), summary, far_freq(s)), ValidationError);
}

TEST_CASE("onset F1 and detection") {
  CHECK(onset_f1({1, 3, 5}, {1, 3, 5}) == 1.0);
  CHECK(onset_f1({1, 3}, {3, 4}) == doctest::Approx(0.5));
  CHECK(onset_f1({}, {}) == 1.0);
  CHECK(onset_f1({1}, {}) == 0.0);
  AudioTrack a(8000, 8000);
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = 0.01f * std::sin(0.3f * i);
  for (std::size_t i = 2000; i < 2400; ++i) a.samples[i] = 0.5f * std::sin(0.3f * i);
  CHECK(detect_onsets(a, 8, 1.6) == std::vector<int>{2});
}

TEST_CASE("remix sums and only normalizes above full scale") {
  AudioTrack a(8000, 4), b(8000, 4);
  a.samples = {0.1f, 0.2f, -0.3f, 0.0f};
  b.samples = {0.1f, 0.0f, 0.0f, 0.0f};
  CHECK(remix(a, b).samples == std::vector<float>{0.2f, 0.2f, -0.3f, 0.0f});
  b.samples = {0.0f, 1.8f, 0.0f, 0.0f};
  const auto m = remix(a, b);
  CHECK(m.samples[1] == doctest::Approx(1.0f));
  CHECK(m.samples[2] == doctest::Approx(-0.15f));
  CHECK_THROWS_AS(remix(a, AudioTrack(8000, 5)), ValidationError);
}

TEST_CASE("registry needs every slot") {
  Registry r;
  CHECK_THROWS_AS(r.check_complete(), ValidationError);
  const auto d = Registry::desk();
  CHECK_NOTHROW(d.check_complete());
  CHECK(d.names().size() == 5);
}

TEST_CASE("judge rewards a correct edit and rejects the untouched track") {
  const auto s = scene(6);
  const auto edit = far_freq(s);
  const auto p = plan(s, s.mask, caption(s), edit);
  const auto target = world::generate_edit_pair(s.spec, edit, s.spec.seed).target;
  const auto good = judge(target.audio, p, s, edit);
  INFO("q=", good.q);
  CHECK(good.accepted);
  CHECK(good.measures[0] < -20.0);
  const auto bad = judge(s.audio, p, s, edit);
  CHECK(!bad.accepted);
  CHECK(bad.scores[0] == 0);
  REQUIRE(bad.feedback_sep);
  CHECK(bad.feedback_sep->bandwidth < p.c_sep.bandwidth);
  CHECK(bad.feedback_sep->stop_removed);
}

TEST_CASE("curation is deterministic and bounded") {
  const auto s = scene(8);
  const auto edit = far_freq(s);
  const auto reg = Registry::desk();
  CurateOptions opt;
  opt.max_iters = 3;
  const auto a = curate(s, s.mask, edit, reg, opt), b = curate(s, s.mask, edit, reg, opt);
  CHECK(a.iteration_count >= 1);
  CHECK(a.iteration_count <= 3);
  CHECK(a.final.samples == b.final.samples);
  CHECK(a.final.size() == s.audio.size());
  const auto j = trace_to_json(a, reg);
  CHECK(j.dump() == trace_to_json(b, reg).dump());
  CHECK(j.dump().find("iter1_mix.avk") != std::string::npos);
}

TEST_CASE("a starved first pass recovers through feedback") {
  const auto s = scene(9);
  const auto edit = far_freq(s);
  CurateOptions opt;
  opt.initial_gain = 0.05;
  const auto t = curate(s, s.mask, edit, Registry::desk(), opt);
  REQUIRE(t.iterations.size() >= 2);
  CHECK(!t.iterations[0].verdict.accepted);
  CHECK(t.iterations[1].plan.c_gen.gain > t.iterations[0].plan.c_gen.gain);
  CHECK(t.accepted);
}

TEST_CASE("visual-only edit keeps the original audio") {
  const auto s = scene(10);
  const auto t = curate(s, s.mask, world::TokenDescriptor::parse("color:green"), Registry::desk());
  CHECK(t.accepted);
  CHECK(t.iteration_count == 1);
  double err = 0;
  for (std::size_t i = 0; i < s.audio.size(); ++i) err = std::max(err, double(std::abs(t.final.samples[i] - s.audio.samples[i])));
  CHECK(err < 1e-4);
}
