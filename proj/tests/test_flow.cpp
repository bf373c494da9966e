#include <doctest.h>

#include <cmath>

#include "avi/flow.hpp"
#include "avi/rng.hpp"

using namespace avi;

namespace {

LatentGrid grid(std::uint64_t seed, int t = 2, int h = 3, int w = 3, int d = 4) {
  LatentGrid g(t, h, w, d, 2, {t, h * 2, w * 2, 1});
  Rng r(seed);
  for (auto& v : g.data) v = static_cast<float>(r.normal());
  return g;
}

LatentMask random_mask(const LatentGrid& g, std::uint64_t seed) {
  LatentMask m(g.frames, g.h, g.w);
  Rng r(seed);
  for (auto& v : m.data) v = r.bernoulli(0.4) ? 1.0f : 0.0f;
  return m;
}

// Returns a velocity that ignores everything and is pure noise.
class Wild final : public flow::VelocityField {
 public:
  LatentGrid velocity(const LatentGrid& z, double t, const LatentMask&, const ConditionBundle&) const override {
    LatentGrid v = z;
    Rng r(static_cast<std::uint64_t>(t * 1000) + 1);
    for (auto& x : v.data) x = static_cast<float>(10.0 * r.normal());
    return v;
  }
};

class Poison final : public flow::VelocityField {
 public:
  LatentGrid velocity(const LatentGrid& z, double t, const LatentMask&, const ConditionBundle&) const override {
    LatentGrid v = z.zeros_like();
    if (t > 0.4) v.data[3] = std::nanf("");
    return v;
  }
};

}  // namespace

TEST_CASE("interpolation endpoints and midpoint") {
  const auto z = grid(1), e = grid(2);
  CHECK(flow::interpolate(z, e, 0.0).data == e.data);
  CHECK(flow::interpolate(z, e, 1.0).data == z.data);
  LatentGrid one(1, 1, 1, 1, 2, {1, 2, 2, 1}), zero = one;
  one.data[0] = 1.0f;
  CHECK(flow::interpolate(one, zero, 0.5).data[0] == doctest::Approx(0.5f));
  CHECK_THROWS_AS(flow::interpolate(z, e, 1.5), ValidationError);
}

TEST_CASE("composition identities") {
  const auto a = grid(1), b = grid(2);
  CHECK(flow::compose(a, b, LatentMask(a.frames, a.h, a.w, 1.0f)).data == a.data);
  CHECK(flow::compose(a, b, LatentMask(a.frames, a.h, a.w, 0.0f)).data == b.data);
  LatentGrid two(1, 1, 1, 1, 2, {1, 2, 2, 1}), zero = two;
  two.data[0] = 2.0f;
  CHECK(flow::compose(two, zero, LatentMask(1, 1, 1, 0.5f)).data[0] == doctest::Approx(1.0f));
  CHECK_THROWS_AS(flow::compose(a, b, LatentMask(1, 1, 1)), ValidationError);
}

TEST_CASE("target and loss") {
  const auto z = grid(3), e = grid(4);
  for (float v : flow::fm_target(z, z).data) CHECK(v == 0.0f);
  LatentGrid z2 = z, e2 = e;
  for (auto& v : z2.data) v *= 2;
  for (auto& v : e2.data) v *= 2;
  const auto t1 = flow::fm_target(z, e), t2 = flow::fm_target(z2, e2);
  for (std::size_t i = 0; i < t1.data.size(); ++i) CHECK(t2.data[i] == doctest::Approx(2 * t1.data[i]));

  CHECK(flow::fm_loss(z, z) == 0.0);
  LatentGrid shifted = z;
  for (auto& v : shifted.data) v += 1.0f;
  CHECK(flow::fm_loss(shifted, z) == doctest::Approx(1.0));
  double acc = 0.0;
  for (std::size_t i = 0; i < z.data.size(); ++i) acc += (double(z.data[i]) - e.data[i]) * (double(z.data[i]) - e.data[i]);
  CHECK(flow::fm_loss(z, e) == doctest::Approx(acc / static_cast<double>(z.data.size())).epsilon(1e-6));
}

TEST_CASE("fm loss gradient matches central differences") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    LatentGrid p(1, 1, 1, 3, 2, {1, 2, 2, 1}), t = p;
    Rng r(s);
    for (auto& v : p.data) v = static_cast<float>(r.normal());
    for (auto& v : t.data) v = static_cast<float>(r.normal());
    const auto g = flow::fm_loss_grad(p, t);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-3;
      LatentGrid a = p, b = p;
      a.data[i] += static_cast<float>(h);
      b.data[i] -= static_cast<float>(h);
      const double h_eff = (double(a.data[i]) - double(b.data[i])) / 2;
      const double fd = (flow::fm_loss(a, t) - flow::fm_loss(b, t)) / (2 * h_eff);
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(g[i])) + 1e-6);
    }
  }
}

TEST_CASE("oracle sampler recovers z for several K") {
  const auto z = grid(5), e = grid(6);
  const auto m = random_mask(z, 7);
  flow::OracleField oracle(z, e);
  std::vector<std::vector<float>> outs;
  for (int K : {1, 4, 8, 16}) {
    const auto res = flow::sample(oracle, z, m, {}, flow::SamplerConfig::uniform(K), e);
    for (std::size_t i = 0; i < z.data.size(); ++i) CHECK(std::abs(res.z.data[i] - z.data[i]) < 1e-5f);
    outs.push_back(res.z.data);
    CHECK(res.masks.size() == static_cast<std::size_t>(K));
  }
  for (std::size_t i = 0; i < z.data.size(); ++i) CHECK(std::abs(outs[0][i] - outs[2][i]) < 1e-5f);
}

TEST_CASE("sampler pins the background for any model") {
  const auto z = grid(8), e = grid(9);
  Wild wild;
  const auto zero = flow::sample(wild, z, LatentMask(z.frames, z.h, z.w, 0.0f), {}, {}, e);
  CHECK(zero.z.data == z.data);
  const auto m = random_mask(z, 10);
  const auto res = flow::sample(wild, z, m, {}, flow::SamplerConfig::uniform(5), e);
  for (std::size_t c = 0; c < z.cells(); ++c)
    if (m.data[c] == 0.0f)
      for (int k = 0; k < z.dim; ++k) CHECK(res.z.data[c * z.dim + k] == z.data[c * z.dim + k]);
}

TEST_CASE("unmasked frames and hooks") {
  const auto z = grid(11), e = grid(12);
  Wild wild;
  ConditionBundle conds;
  conds.unmasked_frames = {1};
  const auto res = flow::sample(wild, z, LatentMask(z.frames, z.h, z.w, 1.0f), conds, flow::SamplerConfig::uniform(3), e);
  const std::size_t per = static_cast<std::size_t>(z.h * z.w * z.dim);
  for (std::size_t i = per; i < 2 * per; ++i) CHECK(res.z.data[i] == z.data[i]);

  std::vector<int> seen;
  auto hook = [&](int k, double, const LatentGrid&, LatentMask& m) {
    seen.push_back(k);
    std::fill(m.data.begin(), m.data.end(), 0.0f);
  };
  const auto hooked = flow::sample(wild, z, LatentMask(z.frames, z.h, z.w, 1.0f), {}, flow::SamplerConfig::uniform(4), e, hook);
  CHECK(seen == std::vector<int>{0, 1, 2, 3});
  CHECK(hooked.z.data == z.data);
}

TEST_CASE("non-finite velocity names the step; grid validation") {
  const auto z = grid(13), e = grid(14);
  Poison p;
  CHECK_THROWS_WITH_AS(flow::sample(p, z, LatentMask(z.frames, z.h, z.w, 1.0f), {}, flow::SamplerConfig::uniform(4), e),
                       doctest::Contains("step 2"), NumericalError);
  flow::SamplerConfig bad;
  bad.steps = 2;
  bad.grid = {0.0, 0.7, 0.6};
  CHECK_THROWS_AS(bad.timesteps(), ValidationError);
  bad.grid = {0.0, 0.5, 1.0};
  CHECK(bad.timesteps().size() == 3);
  CHECK(flow::SamplerConfig{}.steps == 16);
}
