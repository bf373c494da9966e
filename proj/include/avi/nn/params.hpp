#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace avi::nn {

struct Param {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<float> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

// Named parameters in insertion order. Grads accumulate in double so the
// same store serves float training and double gradient checks.
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param& add_normal(const std::string& name, int rows, int cols, double stddev, std::uint64_t seed);
  Param& add_zeros(const std::string& name, int rows, int cols) { return add(name, rows, cols); }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  int index_of(const std::string& name) const;
  Param& at(int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param& at(int i) const { return params_[static_cast<std::size_t>(i)]; }
  Param& get(const std::string& name) { return at(index_of(name)); }
  const Param& get(const std::string& name) const { return at(index_of(name)); }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  std::size_t count() const;  // scalar parameter count
  void zero_grad();
  double grad_norm() const;

 private:
  std::vector<Param> params_;
  std::map<std::string, int> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip, 0 disables
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& store);

  long long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  std::map<std::string, std::vector<float>>& first() { return m_; }
  std::map<std::string, std::vector<float>>& second() { return v_; }
  const std::map<std::string, std::vector<float>>& first() const { return m_; }
  const std::map<std::string, std::vector<float>>& second() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::map<std::string, std::vector<float>> m_, v_;
};

}  // namespace avi::nn
