#pragma once

#include <string>
#include <vector>

#include "avi/types.hpp"

namespace avi::refiner {

inline constexpr double kMaxPrecision = 10.0;  // P

struct PrecisionFactor {
  double p = 0.0;
  double P = kMaxPrecision;
};

struct DegradationParams {
  int ksize = 1;
  double sigma = 0.0;
  double threshold = 0.1;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

inline constexpr double kFocalClamp = 1e-6;

DegradationParams degradation_params(const PrecisionFactor& p);

// Per-frame tight axis-aligned box of the nonzero pixels; empty frames stay empty.
InstanceMask bbox_mask(const InstanceMask& m);
InstanceMask degrade_mask(const InstanceMask& m, const PrecisionFactor& p);

// Mean focal loss and its derivative with respect to each prediction.
double focal_loss(const std::vector<float>& pred, const std::vector<float>& gt, const FocalParams& fp = {});
double focal_loss(const LatentMask& pred, const LatentMask& gt, const FocalParams& fp = {});
std::vector<double> focal_loss_grad(const std::vector<float>& pred, const std::vector<float>& gt,
                                    const FocalParams& fp = {});
// Scalar form on one cell, double precision.
double focal_term(double pred, double gt, const FocalParams& fp = {});
double focal_term_grad(double pred, double gt, const FocalParams& fp = {});

enum class ScheduleKind { linear, constant, instant };

struct Schedule {
  ScheduleKind kind = ScheduleKind::instant;
  double p0 = kMaxPrecision;
};

ScheduleKind parse_schedule(const std::string& name);
std::string to_string(ScheduleKind k);

// p used at sampler step k of K (k = 0..K-1).
double schedule_p(const Schedule& s, int k, int steps);
std::vector<double> schedule_sequence(const Schedule& s, int steps);

}  // namespace avi::refiner
