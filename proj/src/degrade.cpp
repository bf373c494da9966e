#include "avi/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "avi/kernels.hpp"

namespace avi::refiner {

DegradationParams degradation_params(const PrecisionFactor& p) {
  require(p.p >= 0.0 && p.p <= p.P, "precision factor " + std::to_string(p.p) + " outside [0, P]");
  DegradationParams d;
  if (p.p == 0.0) return d;
  d.ksize = 2 * static_cast<int>(std::ceil(p.p)) + 1;
  d.sigma = p.p / 2.0;
  return d;
}

InstanceMask bbox_mask(const InstanceMask& m) {
  InstanceMask out(m.frames, m.height, m.width, 0.0f);
  for (int f = 0; f < m.frames; ++f) {
    int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(f, y, x) > 0.0f) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) out.at(f, y, x) = 1.0f;
  }
  return out;
}

InstanceMask degrade_mask(const InstanceMask& m, const PrecisionFactor& p) {
  const auto d = degradation_params(p);
  if (p.p == 0.0) return m;
  if (p.p >= p.P) return bbox_mask(m);
  InstanceMask blurred(m.frames, m.height, m.width);
  const auto taps = kernels::gaussian_kernel_1d(d.ksize, d.sigma);
  kernels::parallel::gaussian_blur(m.data.data(), blurred.data.data(), m.frames, m.height, m.width, taps);
  // Binarize, then stay inside the box so the coarsest blur never exceeds p = P.
  const InstanceMask box = bbox_mask(m);
  for (std::size_t i = 0; i < blurred.data.size(); ++i)
    blurred.data[i] = (blurred.data[i] >= d.threshold && box.data[i] > 0.0f) || m.data[i] > 0.0f ? 1.0f : 0.0f;
  return blurred;
}

double focal_term(double pred, double gt, const FocalParams& fp) {
  require(std::isfinite(pred) && std::isfinite(gt), "focal loss input is not finite");
  const double q = std::clamp(pred, kFocalClamp, 1.0 - kFocalClamp);
  return -fp.alpha * gt * std::pow(1.0 - q, fp.gamma) * std::log(q) -
         (1.0 - fp.alpha) * (1.0 - gt) * std::pow(q, fp.gamma) * std::log(1.0 - q);
}

double focal_term_grad(double pred, double gt, const FocalParams& fp) {
  if (pred <= kFocalClamp || pred >= 1.0 - kFocalClamp) return 0.0;
  const double q = pred, a = fp.alpha, g = fp.gamma;
  const double pos = -a * gt * (-g * std::pow(1.0 - q, g - 1.0) * std::log(q) + std::pow(1.0 - q, g) / q);
  const double neg = -(1.0 - a) * (1.0 - gt) *
                     (g * std::pow(q, g - 1.0) * std::log(1.0 - q) - std::pow(q, g) / (1.0 - q));
  return pos + neg;
}

double focal_loss(const std::vector<float>& pred, const std::vector<float>& gt, const FocalParams& fp) {
  require(pred.size() == gt.size() && !pred.empty(), "focal loss needs equal non-empty inputs");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += focal_term(pred[i], gt[i], fp);
  return sum / static_cast<double>(pred.size());
}

double focal_loss(const LatentMask& pred, const LatentMask& gt, const FocalParams& fp) {
  require(pred.same_shape(gt), "focal loss mask shapes differ");
  return focal_loss(pred.data, gt.data, fp);
}

std::vector<double> focal_loss_grad(const std::vector<float>& pred, const std::vector<float>& gt,
                                    const FocalParams& fp) {
  require(pred.size() == gt.size() && !pred.empty(), "focal loss needs equal non-empty inputs");
  std::vector<double> g(pred.size());
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = focal_term_grad(pred[i], gt[i], fp) * inv;
  return g;
}

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "constant") return ScheduleKind::constant;
  if (name == "instant") return ScheduleKind::instant;
  fail("unknown schedule kind '", name, "'");
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::instant: return "instant";
  }
  return "instant";
}

double schedule_p(const Schedule& s, int k, int steps) {
  require(steps >= 1 && k >= 0 && k <= steps, "schedule step out of range");
  switch (s.kind) {
    case ScheduleKind::linear: return s.p0 * (1.0 - static_cast<double>(k) / steps);
    case ScheduleKind::constant: return s.p0;
    case ScheduleKind::instant: return k == 0 ? s.p0 : 1.0;
  }
  return s.p0;
}

std::vector<double> schedule_sequence(const Schedule& s, int steps) {
  std::vector<double> out;
  for (int k = 0; k < steps; ++k) out.push_back(schedule_p(s, k, steps));
  return out;
}

}  // namespace avi::refiner
