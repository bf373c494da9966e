#include "avi/flow.hpp"

#include <cmath>

#include "avi/rng.hpp"

namespace avi::flow {

namespace {

void check_same(const LatentGrid& a, const LatentGrid& b, const char* what) {
  if (!a.same_shape(b)) fail(what, ": shape ", shape_str(a), " vs ", shape_str(b));
}

}  // namespace

LatentGrid interpolate(const LatentGrid& z, const LatentGrid& eps, double t) {
  check_same(z, eps, "interpolate");
  require(t >= 0.0 && t <= 1.0, "interpolate: t=" + std::to_string(t) + " outside [0,1]");
  LatentGrid out = z;
  // The endpoints are returned verbatim so they hold bit-exactly.
  if (t == 0.0) {
    out.data = eps.data;
    return out;
  }
  if (t == 1.0) return out;
  const float tf = static_cast<float>(t), sf = static_cast<float>(1.0 - t);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = tf * z.data[i] + sf * eps.data[i];
  return out;
}

LatentGrid compose(const LatentGrid& z_hat_t, const LatentGrid& z, const LatentMask& m_hat) {
  check_same(z_hat_t, z, "compose");
  if (!m_hat.matches(z)) fail("compose: mask does not match latent ", shape_str(z));
  LatentGrid out = z;
  const std::size_t d = static_cast<std::size_t>(z.dim);
  for (std::size_t c = 0; c < z.cells(); ++c) {
    const float m = m_hat.data[c];
    if (m == 0.0f) continue;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t i = c * d + k;
      out.data[i] = m == 1.0f ? z_hat_t.data[i] : z_hat_t.data[i] * m + z.data[i] * (1.0f - m);
    }
  }
  return out;
}

LatentGrid fm_target(const LatentGrid& z, const LatentGrid& eps) {
  check_same(z, eps, "fm_target");
  LatentGrid out = z;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = z.data[i] - eps.data[i];
  return out;
}

double fm_loss(const LatentGrid& pred, const LatentGrid& target) {
  check_same(pred, target, "fm_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double e = static_cast<double>(pred.data[i]) - target.data[i];
    acc += e * e;
  }
  return acc / static_cast<double>(pred.data.size());
}

std::vector<double> fm_loss_grad(const LatentGrid& pred, const LatentGrid& target) {
  check_same(pred, target, "fm_loss_grad");
  std::vector<double> g(pred.data.size());
  const double scale = 2.0 / static_cast<double>(pred.data.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (static_cast<double>(pred.data[i]) - target.data[i]);
  return g;
}

LatentGrid gaussian_like(const LatentGrid& like, std::uint64_t seed) {
  LatentGrid out = like;
  Rng rng(seed);
  for (auto& v : out.data) v = static_cast<float>(rng.normal());
  return out;
}

SamplerConfig SamplerConfig::uniform(int steps) {
  SamplerConfig c;
  c.steps = steps;
  return c;
}

std::vector<double> SamplerConfig::timesteps() const {
  require(steps >= 1, "sampler needs at least one step");
  std::vector<double> g = grid;
  if (g.empty()) {
    for (int k = 0; k <= steps; ++k) g.push_back(static_cast<double>(k) / steps);
    g.back() = 1.0;
  }
  require(static_cast<int>(g.size()) == steps + 1, "timestep grid must have K+1 entries");
  require(g.front() == 0.0 && g.back() == 1.0, "timestep grid must run from 0 to 1");
  for (std::size_t i = 1; i < g.size(); ++i) require(g[i] > g[i - 1], "timestep grid must be strictly increasing");
  return g;
}

LatentMask unmask_frames(const LatentMask& m, const std::set<int>& frames) {
  LatentMask out = m;
  const std::size_t plane = static_cast<std::size_t>(m.h) * m.w;
  for (int f : frames) {
    if (f < 0 || f >= m.frames) continue;
    std::fill(out.data.begin() + static_cast<std::ptrdiff_t>(f * plane),
              out.data.begin() + static_cast<std::ptrdiff_t>((f + 1) * plane), 0.0f);
  }
  return out;
}

SampleResult sample(const VelocityField& model, const LatentGrid& z, const LatentMask& m_hat,
                    const ConditionBundle& conds, const SamplerConfig& cfg, const LatentGrid& eps,
                    const MaskHook& hook) {
  check_same(z, eps, "sample");
  if (!m_hat.matches(z)) fail("sample: mask does not match latent ", shape_str(z));
  const auto grid = cfg.timesteps();
  LatentMask mask = unmask_frames(m_hat, conds.unmasked_frames);
  SampleResult res;
  LatentGrid state = compose(eps, z, mask);
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = grid[static_cast<std::size_t>(k)];
    const double dt = grid[static_cast<std::size_t>(k) + 1] - t;
    if (hook) {
      hook(k, t, state, mask);
      if (!mask.matches(z)) fail("sample: hook returned a mask of the wrong shape at step ", std::to_string(k));
      mask = unmask_frames(mask, conds.unmasked_frames);
      state = compose(state, z, mask);
    }
    const LatentGrid v = model.velocity(state, t, mask, conds);
    check_same(v, z, "sample velocity");
    for (std::size_t i = 0; i < state.data.size(); ++i) {
      if (!std::isfinite(v.data[i])) throw NumericalError("non-finite velocity at sampler step " + std::to_string(k));
      state.data[i] += static_cast<float>(dt) * v.data[i];
    }
    state = compose(state, z, mask);
    res.masks.push_back(mask);
  }
  res.z = std::move(state);
  return res;
}

}  // namespace avi::flow
