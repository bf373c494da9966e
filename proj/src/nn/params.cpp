#include "avi/nn/params.hpp"

#include <cmath>

#include "avi/error.hpp"
#include "avi/rng.hpp"

namespace avi::nn {

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  require(!has(name), "duplicate parameter '" + name + "'");
  require(rows > 0 && cols > 0, "parameter '" + name + "' needs a positive shape");
  Param p;
  p.name = name;
  p.rows = rows;
  p.cols = cols;
  p.value.assign(static_cast<std::size_t>(rows) * cols, 0.0f);
  p.grad.assign(p.value.size(), 0.0);
  index_[name] = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::add_normal(const std::string& name, int rows, int cols, double stddev, std::uint64_t seed) {
  Param& p = add(name, rows, cols);
  Rng rng(seed);
  for (auto& v : p.value) v = static_cast<float>(stddev * rng.normal());
  return p;
}

int ParamStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail("unknown parameter '", name, "'");
  return it->second;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad) acc += g * g;
  return std::sqrt(acc);
}

void Adam::step(ParamStore& store) {
  ++t_;
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double norm = store.grad_norm();
    if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
    if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : store.all()) {
    auto& m = m_[p.name];
    auto& v = v_[p.name];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0f);
      v.assign(p.size(), 0.0f);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i] * scale;
      const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      p.value[i] = static_cast<float>(p.value[i] - update);
    }
  }
}

}  // namespace avi::nn
