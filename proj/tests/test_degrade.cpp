#include <doctest.h>

#include <cmath>

#include "avi/degrade.hpp"
#include "avi/metrics.hpp"
#include "avi/rng.hpp"
#include "avi/world.hpp"

using namespace avi;
using namespace avi::refiner;

namespace {

double focal_oracle(double pred, double gt) {
  const double p = std::clamp(pred, 1e-6, 1.0 - 1e-6);
  return -0.25 * gt * std::pow(1 - p, 2.0) * std::log(p) - 0.75 * (1 - gt) * std::pow(p, 2.0) * std::log(1 - p);
}

InstanceMask shape_mask(world::Shape shape, int frames = 2) {
  world::InstanceSpec inst;
  inst.shape = shape;
  inst.radius = 7.0;
  inst.angle_deg = 20.0;
  InstanceMask m(frames, 32, 32);
  for (int f = 0; f < frames; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        m.at(f, y, x) = world::occupies(inst, 14.0 + 2 * f, 16.0, x + 0.5, y + 0.5) ? 1.0f : 0.0f;
  return m;
}

}  // namespace

TEST_CASE("focal loss reference values") {
  CHECK(focal_loss(std::vector<float>{0.5f}, std::vector<float>{1.0f}) == doctest::Approx(0.0433217).epsilon(1e-6));
  CHECK(std::abs(focal_loss(std::vector<float>{0.5f}, std::vector<float>{1.0f}) - 0.0433217) < 1e-6);
  CHECK(std::abs(focal_loss(std::vector<float>{0.5f}, std::vector<float>{0.0f}) - 0.1299648) < 1e-6);
}

TEST_CASE("focal loss agrees with a scalar oracle and decreases toward the target") {
  Rng r(3);
  std::vector<float> pred, gt;
  double acc = 0.0;
  for (int i = 0; i < 50; ++i) {
    pred.push_back(static_cast<float>(r.uniform(0.01, 0.99)));
    gt.push_back(r.bernoulli(0.5) ? 1.0f : 0.0f);
    acc += focal_oracle(pred.back(), gt.back());
  }
  CHECK(focal_loss(pred, gt) == doctest::Approx(acc / 50).epsilon(1e-9));
  double last = 1e9;
  for (double p : {0.5, 0.7, 0.9, 0.99, 0.999999}) {
    const double v = focal_loss(std::vector<float>{static_cast<float>(p)}, std::vector<float>{1.0f});
    CHECK(v < last);
    CHECK(v >= 0.0);
    last = v;
  }
  CHECK(focal_loss(std::vector<float>{1.0f}, std::vector<float>{1.0f}) < 1e-12);
  CHECK_THROWS_AS(focal_loss(std::vector<float>{std::nanf("")}, std::vector<float>{1.0f}), ValidationError);
}

TEST_CASE("focal gradient matches central differences") {
  for (double gt : {0.0, 1.0})
    for (double p : {0.1, 0.3, 0.5, 0.8, 0.95}) {
      const double h = 1e-6;
      const double fd = (focal_oracle(p + h, gt) - focal_oracle(p - h, gt)) / (2 * h);
      const double g = focal_term_grad(p, gt);
      CHECK(std::abs(fd - g) <= 1e-4 * std::max(1e-3, std::abs(g)));
      CHECK(focal_term(p, gt) == doctest::Approx(focal_oracle(p, gt)).epsilon(1e-12));
    }
}

TEST_CASE("degradation parameters") {
  const auto d0 = degradation_params({0.0, 10.0});
  CHECK(d0.ksize == 1);
  CHECK(d0.sigma == 0.0);
  const auto d = degradation_params({2.3, 10.0});
  CHECK(d.ksize == 7);
  CHECK(d.sigma == doctest::Approx(1.15));
  CHECK(d.threshold == doctest::Approx(0.1));
  CHECK_THROWS_AS(degrade_mask(shape_mask(world::Shape::circle), {11.0, 10.0}), ValidationError);
  CHECK_THROWS_AS(degrade_mask(shape_mask(world::Shape::circle), {-1.0, 10.0}), ValidationError);
}

TEST_CASE("p=0 is the identity and p=P the tight box") {
  const auto m = shape_mask(world::Shape::triangle);
  CHECK(degrade_mask(m, {0.0, 10.0}).data == m.data);
  const auto box = degrade_mask(m, {10.0, 10.0});
  for (int f = 0; f < m.frames; ++f) {
    int x0 = 99, x1 = -1, y0 = 99, y1 = -1;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (m.at(f, y, x) > 0) {
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        CHECK(box.at(f, y, x) == ((x >= x0 && x <= x1 && y >= y0 && y <= y1) ? 1.0f : 0.0f));
  }
}

TEST_CASE("IoU never increases with p and coarse masks cover the instance") {
  for (auto shape : {world::Shape::circle, world::Shape::square, world::Shape::triangle}) {
    const auto m = shape_mask(shape);
    double last = 2.0;
    for (double p : {0.0, 1.0, 2.0, 4.0, 8.0, 10.0}) {
      const auto d = degrade_mask(m, {p, 10.0});
      const double v = metrics::iou(d, m);
      CHECK(v <= last + 1e-12);
      last = v;
      for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(d.data[i] >= m.data[i]);
    }
  }
}

TEST_CASE("schedules") {
  const auto inst = schedule_sequence({ScheduleKind::instant, 10.0}, 4);
  CHECK(inst == std::vector<double>{10.0, 1.0, 1.0, 1.0});
  const auto lin = schedule_sequence({ScheduleKind::linear, 10.0}, 4);
  CHECK(lin == std::vector<double>{10.0, 7.5, 5.0, 2.5});
  CHECK(schedule_p({ScheduleKind::linear, 10.0}, 4, 4) == 0.0);
  CHECK(schedule_sequence({ScheduleKind::constant, 6.0}, 3) == std::vector<double>{6.0, 6.0, 6.0});
  CHECK(parse_schedule("instant") == ScheduleKind::instant);
  CHECK_THROWS_AS(parse_schedule("cosine"), ValidationError);
}
