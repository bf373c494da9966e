#pragma once

#include <functional>
#include <vector>

#include "avi/conditions.hpp"
#include "avi/types.hpp"

namespace avi::flow {

LatentGrid interpolate(const LatentGrid& z, const LatentGrid& eps, double t);
LatentGrid compose(const LatentGrid& z_hat_t, const LatentGrid& z, const LatentMask& m_hat);
LatentGrid fm_target(const LatentGrid& z, const LatentGrid& eps);
double fm_loss(const LatentGrid& pred, const LatentGrid& target);
// d loss / d pred.
std::vector<double> fm_loss_grad(const LatentGrid& pred, const LatentGrid& target);

LatentGrid gaussian_like(const LatentGrid& like, std::uint64_t seed);

struct SamplerConfig {
  int steps = 16;
  std::vector<double> grid;  // empty means uniform

  static SamplerConfig uniform(int steps);
  std::vector<double> timesteps() const;
};

// v_theta(z_t, t, m_hat, conds).
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual LatentGrid velocity(const LatentGrid& z_t, double t, const LatentMask& m_hat,
                              const ConditionBundle& conds) const = 0;
};

// Returns z - eps regardless of input.
class OracleField final : public VelocityField {
 public:
  OracleField(LatentGrid z, LatentGrid eps) : v_(fm_target(z, eps)) {}
  LatentGrid velocity(const LatentGrid&, double, const LatentMask&, const ConditionBundle&) const override {
    return v_;
  }

 private:
  LatentGrid v_;
};

// Called before each step; may replace the mask used for that step.
using MaskHook = std::function<void(int k, double t_k, const LatentGrid& z_tk, LatentMask& m_hat)>;

// Forces m_hat = 0 on the listed frames.
LatentMask unmask_frames(const LatentMask& m, const std::set<int>& frames);

struct SampleResult {
  LatentGrid z;
  std::vector<LatentMask> masks;  // mask used at each step
};

SampleResult sample(const VelocityField& model, const LatentGrid& z, const LatentMask& m_hat,
                    const ConditionBundle& conds, const SamplerConfig& cfg, const LatentGrid& eps,
                    const MaskHook& hook = {});

}  // namespace avi::flow
