#pragma once

#include <Eigen/Dense>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "avi/kernels.hpp"
#include "avi/nn/params.hpp"

namespace avi::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode tape over 2-D matrices. Build the forward pass op by op, then
// call backward() once; gradients of bound parameters land in the store.
template <class T>
class Graph {
 public:
  using Var = int;

  explicit Graph(ParamStore* store = nullptr) : store_(store) {}

  Var constant(Mat<T> m);
  Var param(const std::string& name);

  const Mat<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
  const Mat<T>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v)].grad; }
  T scalar(Var v) const { return value(v)(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul_row(Var a, Var row);
  Var scale(Var a, T s);
  Var silu(Var a);
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var layernorm(Var a, T eps = T(1e-6));
  // a * (1 + gamma) + beta with 1 x m rows.
  Var modulate(Var a, Var gamma, Var beta);
  // h + alpha * x with a 1 x m gate row.
  Var gated_add(Var h, Var alpha, Var x);
  Var attention(Var q, Var k, Var v, int heads, const std::vector<kernels::KeyRange>& ranges = {});
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, int begin, int count);
  Var slice_cols(Var a, int begin, int count);
  Var gather_rows(Var table, const std::vector<int>& ids);
  Var mean_rows(Var a);  // 1 x m
  // Scalar losses (1 x 1).
  Var mse(Var a, const Mat<T>& target);
  Var focal_from_logits(Var logits, const Mat<T>& gt, double alpha, double gamma, double clamp);

  // Seeds d(root)/d(root) = weight for every (root, weight) pair and runs the tape.
  void backward(const std::vector<std::pair<Var, T>>& roots);
  void backward(Var root) { backward({{root, T(1)}}); }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    std::function<void()> back;
    int param = -1;
  };

  Var push(Mat<T> value, std::function<void()> back = {});
  Mat<T>& g(Var v);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v)]; }

  ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<int, Var> bound_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace avi::nn
