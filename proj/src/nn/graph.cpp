#include "avi/nn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "avi/error.hpp"

namespace avi::nn {

namespace {

template <class T>
void check_shape(const Mat<T>& a, const Mat<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(op, ": shape ", std::to_string(a.rows()), "x", std::to_string(a.cols()), " vs ",
         std::to_string(b.rows()), "x", std::to_string(b.cols()));
}

template <class T>
void check_row(const Mat<T>& a, const Mat<T>& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols())
    fail(op, ": row operand must be 1x", std::to_string(a.cols()));
}

}  // namespace

template <class T>
typename Graph<T>::Var Graph<T>::push(Mat<T> value, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

template <class T>
Mat<T>& Graph<T>::g(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Mat<T>::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <class T>
typename Graph<T>::Var Graph<T>::constant(Mat<T> m) {
  return push(std::move(m));
}

template <class T>
typename Graph<T>::Var Graph<T>::param(const std::string& name) {
  require(store_ != nullptr, "graph has no parameter store");
  const int idx = store_->index_of(name);
  if (auto it = bound_.find(idx); it != bound_.end()) return it->second;
  const Param& p = store_->at(idx);
  Mat<T> m(p.rows, p.cols);
  for (std::size_t i = 0; i < p.size(); ++i) m.data()[i] = static_cast<T>(p.value[i]);
  const Var v = push(std::move(m));
  node(v).param = idx;
  bound_[idx] = v;
  return v;
}

template <class T>
typename Graph<T>::Var Graph<T>::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows())
    fail("matmul: inner dimensions ", std::to_string(value(a).cols()), " and ", std::to_string(value(b).rows()));
  const Var out = push(value(a) * value(b));
  node(out).back = [this, a, b, out] {
    const Mat<T>& go = grad(out);
    g(a).noalias() += go * value(b).transpose();
    g(b).noalias() += value(a).transpose() * go;
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b) {
  check_shape(value(a), value(b), "add");
  const Var out = push(value(a) + value(b));
  node(out).back = [this, a, b, out] {
    g(a) += grad(out);
    g(b) += grad(out);
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::sub(Var a, Var b) {
  check_shape(value(a), value(b), "sub");
  const Var out = push(value(a) - value(b));
  node(out).back = [this, a, b, out] {
    g(a) += grad(out);
    g(b) -= grad(out);
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::mul(Var a, Var b) {
  check_shape(value(a), value(b), "mul");
  const Var out = push(value(a).cwiseProduct(value(b)));
  node(out).back = [this, a, b, out] {
    g(a) += grad(out).cwiseProduct(value(b));
    g(b) += grad(out).cwiseProduct(value(a));
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::add_row(Var a, Var row) {
  check_row(value(a), value(row), "add_row");
  Mat<T> v = value(a);
  v.rowwise() += value(row).row(0);
  const Var out = push(std::move(v));
  node(out).back = [this, a, row, out] {
    g(a) += grad(out);
    g(row) += grad(out).colwise().sum();
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::mul_row(Var a, Var row) {
  check_row(value(a), value(row), "mul_row");
  Mat<T> v = value(a);
  v.array().rowwise() *= value(row).row(0).array();
  const Var out = push(std::move(v));
  node(out).back = [this, a, row, out] {
    Mat<T> ga = grad(out);
    ga.array().rowwise() *= value(row).row(0).array();
    g(a) += ga;
    g(row) += grad(out).cwiseProduct(value(a)).colwise().sum();
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::scale(Var a, T s) {
  const Var out = push(value(a) * s);
  node(out).back = [this, a, s, out] { g(a) += grad(out) * s; };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::silu(Var a) {
  const Mat<T>& x = value(a);
  Mat<T> sig = (T(1) / (T(1) + (-x.array()).exp())).matrix();
  const Var out = push(x.cwiseProduct(sig));
  node(out).back = [this, a, out, sig = std::move(sig)] {
    const auto& x = value(a).array();
    g(a).array() += grad(out).array() * (sig.array() + x * sig.array() * (T(1) - sig.array()));
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::gelu(Var a) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const auto& x = value(a).array();
  Mat<T> th = (c * (x + T(0.044715) * x.cube())).tanh().matrix();
  const Var out = push((T(0.5) * x * (T(1) + th.array())).matrix());
  node(out).back = [this, a, out, c, th = std::move(th)] {
    using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Arr x = value(a).array();
    const Arr t = th.array();
    const Arr dinner = c * (T(1) + T(3) * T(0.044715) * x.square());
    const Arr d = T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t.square()) * dinner;
    g(a).array() += grad(out).array() * d;
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::sigmoid(Var a) {
  Mat<T> s = (T(1) / (T(1) + (-value(a).array()).exp())).matrix();
  const Var out = push(s);
  node(out).back = [this, a, out] {
    const auto& s = value(out).array();
    g(a).array() += grad(out).array() * s * (T(1) - s);
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::layernorm(Var a, T eps) {
  const Mat<T>& x = value(a);
  const auto n = x.cols();
  Mat<T> xhat(x.rows(), n);
  std::vector<T> inv(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mu = x.row(r).mean();
    const T var = (x.row(r).array() - mu).square().mean();
    inv[static_cast<std::size_t>(r)] = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv[static_cast<std::size_t>(r)];
  }
  const Var out = push(std::move(xhat));
  node(out).back = [this, a, out, inv = std::move(inv)] {
    const Mat<T>& go = grad(out);
    const Mat<T>& xh = value(out);
    Mat<T>& ga = g(a);
    for (Eigen::Index r = 0; r < go.rows(); ++r) {
      const T mg = go.row(r).mean();
      const T mgx = go.row(r).dot(xh.row(r)) / static_cast<T>(go.cols());
      ga.row(r).array() += inv[static_cast<std::size_t>(r)] * (go.row(r).array() - mg - xh.row(r).array() * mgx);
    }
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::modulate(Var a, Var gamma, Var beta) {
  check_row(value(a), value(gamma), "modulate");
  check_row(value(a), value(beta), "modulate");
  Mat<T> v = value(a);
  v.array().rowwise() *= (value(gamma).row(0).array() + T(1));
  v.rowwise() += value(beta).row(0);
  const Var out = push(std::move(v));
  node(out).back = [this, a, gamma, beta, out] {
    const Mat<T>& go = grad(out);
    Mat<T> ga = go;
    ga.array().rowwise() *= (value(gamma).row(0).array() + T(1));
    g(a) += ga;
    g(gamma) += go.cwiseProduct(value(a)).colwise().sum();
    g(beta) += go.colwise().sum();
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::gated_add(Var h, Var alpha, Var x) {
  check_shape(value(h), value(x), "gated_add");
  check_row(value(x), value(alpha), "gated_add");
  Mat<T> gx = value(x);
  gx.array().rowwise() *= value(alpha).row(0).array();
  const Var out = push(value(h) + gx);
  node(out).back = [this, h, alpha, x, out] {
    const Mat<T>& go = grad(out);
    g(h) += go;
    Mat<T> gxx = go;
    gxx.array().rowwise() *= value(alpha).row(0).array();
    g(x) += gxx;
    g(alpha) += go.cwiseProduct(value(x)).colwise().sum();
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::attention(Var q, Var k, Var v, int heads,
                                           const std::vector<kernels::KeyRange>& ranges) {
  const Mat<T>& Q = value(q);
  const Mat<T>& K = value(k);
  const Mat<T>& V = value(v);
  require(Q.cols() == K.cols() && K.cols() == V.cols() && K.rows() == V.rows(), "attention: operand shapes differ");
  require(heads >= 1 && Q.cols() % heads == 0, "attention: dim not divisible by heads");
  require(ranges.empty() || static_cast<Eigen::Index>(ranges.size()) == Q.rows(), "attention: one range per query");
  kernels::AttentionShape s{static_cast<int>(Q.rows()), static_cast<int>(K.rows()), static_cast<int>(Q.cols()), heads};
  Mat<T> out(Q.rows(), Q.cols());
  std::vector<T> probs(static_cast<std::size_t>(heads) * s.n * s.m);
  kernels::parallel::attention_forward<T>(s, Q.data(), K.data(), V.data(), ranges, out.data(), probs.data());
  const Var o = push(std::move(out));
  node(o).back = [this, q, k, v, o, s, ranges, probs = std::move(probs)] {
    Mat<T>& gq = g(q);
    Mat<T>& gk = g(k);
    Mat<T>& gv = g(v);
    kernels::parallel::attention_backward<T>(s, value(q).data(), value(k).data(), value(v).data(), ranges,
                                             probs.data(), grad(o).data(), gq.data(), gk.data(), gv.data());
  };
  return o;
}

template <class T>
typename Graph<T>::Var Graph<T>::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const auto cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows: column counts differ");
    rows += value(p).rows();
  }
  Mat<T> v(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  const Var out = push(std::move(v));
  node(out).back = [this, parts, out] {
    Eigen::Index r = 0;
    for (Var p : parts) {
      const auto n = value(p).rows();
      g(p) += grad(out).middleRows(r, n);
      r += n;
    }
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::slice_rows(Var a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= value(a).rows(), "slice_rows: out of range");
  const Var out = push(value(a).middleRows(begin, count));
  node(out).back = [this, a, begin, count, out] { g(a).middleRows(begin, count) += grad(out); };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::slice_cols(Var a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= value(a).cols(), "slice_cols: out of range");
  const Var out = push(value(a).middleCols(begin, count));
  node(out).back = [this, a, begin, count, out] { g(a).middleCols(begin, count) += grad(out); };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::gather_rows(Var table, const std::vector<int>& ids) {
  const Mat<T>& tab = value(table);
  Mat<T> v(static_cast<Eigen::Index>(ids.size()), tab.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tab.rows(), "gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(i)) = tab.row(ids[i]);
  }
  const Var out = push(std::move(v));
  node(out).back = [this, table, ids, out] {
    Mat<T>& gt = g(table);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += grad(out).row(static_cast<Eigen::Index>(i));
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::mean_rows(Var a) {
  const Var out = push(value(a).colwise().mean());
  node(out).back = [this, a, out] {
    const T inv = T(1) / static_cast<T>(value(a).rows());
    g(a).rowwise() += grad(out).row(0) * inv;
  };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::mse(Var a, const Mat<T>& target) {
  check_shape(value(a), target, "mse");
  Mat<T> diff = value(a) - target;
  const T n = static_cast<T>(diff.size());
  Mat<T> loss(1, 1);
  // Accumulate in double so float runs log a stable loss.
  double acc = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) acc += static_cast<double>(diff.data()[i]) * diff.data()[i];
  loss(0, 0) = static_cast<T>(acc / static_cast<double>(diff.size()));
  const Var out = push(std::move(loss));
  node(out).back = [this, a, out, n, diff = std::move(diff)] { g(a) += diff * (T(2) * grad(out)(0, 0) / n); };
  return out;
}

template <class T>
typename Graph<T>::Var Graph<T>::focal_from_logits(Var logits, const Mat<T>& gt, double alpha, double gamma,
                                                   double clamp) {
  check_shape(value(logits), gt, "focal_from_logits");
  const Mat<T>& z = value(logits);
  Mat<T> dq(z.rows(), z.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = static_cast<double>(z.data()[i]);
    const double y = static_cast<double>(gt.data()[i]);
    const double q = 1.0 / (1.0 + std::exp(-x));
    const double qc = std::clamp(q, clamp, 1.0 - clamp);
    acc += -alpha * y * std::pow(1.0 - qc, gamma) * std::log(qc) -
           (1.0 - alpha) * (1.0 - y) * std::pow(qc, gamma) * std::log(1.0 - qc);
    double d = 0.0;
    if (q > clamp && q < 1.0 - clamp) {
      const double pos = -alpha * y * (-gamma * std::pow(1.0 - q, gamma - 1.0) * std::log(q) + std::pow(1.0 - q, gamma) / q);
      const double neg = -(1.0 - alpha) * (1.0 - y) *
                         (gamma * std::pow(q, gamma - 1.0) * std::log(1.0 - q) - std::pow(q, gamma) / (1.0 - q));
      d = (pos + neg) * q * (1.0 - q);
    }
    dq.data()[i] = static_cast<T>(d / static_cast<double>(z.size()));
  }
  Mat<T> loss(1, 1);
  loss(0, 0) = static_cast<T>(acc / static_cast<double>(z.size()));
  const Var out = push(std::move(loss));
  node(out).back = [this, logits, out, dq = std::move(dq)] { g(logits) += dq * grad(out)(0, 0); };
  return out;
}

template <class T>
void Graph<T>::backward(const std::vector<std::pair<Var, T>>& roots) {
  for (const auto& [v, w] : roots) {
    require(value(v).size() == 1, "backward root must be a scalar");
    g(v)(0, 0) += w;
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back();
  }
  if (!store_) return;
  for (auto& n : nodes_) {
    if (n.param < 0 || n.grad.size() == 0) continue;
    Param& p = store_->at(n.param);
    for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += static_cast<double>(n.grad.data()[i]);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace avi::nn
